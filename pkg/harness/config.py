"""Experiment specification for the harness: defaults, TOML loading and validation."""

from __future__ import annotations

import math
import sys
from collections.abc import Mapping
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
	import tomllib
else:
	import tomli as tomllib

import numpy as np

from core import config as core_config
from core.density_evolution import antipodal_bits
from core.errors import DomainError, SpecError
from core.utils import read_json
from models.constellation import PRESET_NAMES, resolve
from models.results import RATE_KINDS

EXPERIMENT_KINDS = (
	'mmse-curve',
	'se-trace',
	'capacity',
	'rates',
	'transfer-chart',
	'ber',
	'match',
	'optimize',
)
CODED_KINDS = ('transfer-chart', 'ber', 'match')
TRANSFER_SOURCES = ('measured', 'surrogate')
DEFAULT_OUTPUT_ROOT = Path('results')
DEFAULT_SEED = 91
DEFAULT_BETA = 1.0
DEFAULT_SNR_DB = 10.0
DEFAULT_CONSTELLATION = 'qpsk'

# ρ grid for mmse-curve, transfer-chart and match
DEFAULT_RHO_MIN = 1e-2
DEFAULT_RHO_MAX = 1e3
DEFAULT_GRID_POINTS = 200

DEFAULT_ITERATIONS = 30
DEFAULT_MAX_FRAMES = 1000
TARGET_FRAME_ERRORS = 100


@dataclass(frozen=True)
class ExperimentSpec:
	"""One harness experiment; every field can come from a TOML file or a flag."""

	kind: str
	beta: float = DEFAULT_BETA
	snr_db: tuple[float, ...] = (DEFAULT_SNR_DB,)
	constellation: str = DEFAULT_CONSTELLATION
	seed: int = DEFAULT_SEED
	trials: int = 1
	out: Path | None = None
	workers: int = 1
	deterministic: bool = False
	# se-trace: SE length and the optional empirical AMP overlay size
	iterations: int = DEFAULT_ITERATIONS
	amp_n: int = 0
	rate_kinds: tuple[str, ...] = RATE_KINDS
	rho_min: float = DEFAULT_RHO_MIN
	rho_max: float = DEFAULT_RHO_MAX
	grid_points: int = DEFAULT_GRID_POINTS
	# code reference: an alist file, a degree table, or a regular (dv, dc) ensemble
	code_n: int = core_config.CODED_BLOCK_LENGTH
	dv: int = 3
	dc: int = 6
	alist: Path | None = None
	degrees: Path | None = None
	code_seed: int = core_config.CODE_SEED
	outer_iter: int = core_config.CODED_OUTER_ITER
	inner_iter: int = core_config.CODED_INNER_ITER
	frames: int = DEFAULT_MAX_FRAMES
	target_errors: int = TARGET_FRAME_ERRORS
	transfer: str = 'measured'
	margin: float = core_config.MATCH_MARGIN
	max_dv: int = core_config.LP_MAX_DV
	target_rate: float | None = None
	siso: bool = False

	@property
	def output_dir(self) -> Path:
		return self.out if self.out is not None else DEFAULT_OUTPUT_ROOT / self.kind


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentSpec)}
_INT_FIELDS = {
	'seed',
	'trials',
	'workers',
	'iterations',
	'amp_n',
	'grid_points',
	'code_n',
	'dv',
	'dc',
	'code_seed',
	'outer_iter',
	'inner_iter',
	'frames',
	'target_errors',
	'max_dv',
}
_FLOAT_FIELDS = {'beta', 'rho_min', 'rho_max', 'margin', 'target_rate'}
_BOOL_FIELDS = {'deterministic', 'siso'}
_PATH_FIELDS = {'out', 'alist', 'degrees'}
_OPTIONAL_FIELDS = {'out', 'alist', 'degrees', 'target_rate'}


def parse_snr_list(value: Any) -> tuple[float, ...]:
	"""SNR points from a number, a list, 'a,b,c' or an inclusive 'start:stop:step' range."""
	if isinstance(value, int | float):
		return (float(value),)
	if isinstance(value, list | tuple):
		return tuple(point for item in value for point in parse_snr_list(item))
	text = str(value).strip()
	if ',' in text:
		return parse_snr_list([part for part in text.split(',') if part.strip()])
	if ':' in text:
		parts = [float(part) for part in text.split(':')]
		if len(parts) == 2:
			parts.append(1.0)
		if len(parts) != 3 or parts[2] <= 0:
			raise ValueError(f'range {text!r} must read start:stop[:step] with a positive step')
		start, stop, step = parts
		points = np.arange(start, stop + step / 2, step)
		return tuple(round(float(point), 10) for point in points)
	return (float(text),)


def _coerce(name: str, value: Any) -> Any:
	if value is None:
		if name in _OPTIONAL_FIELDS:
			return None
		raise ValueError('a value is required')
	if name == 'snr_db':
		return parse_snr_list(value)
	if name == 'rate_kinds':
		items = value.split(',') if isinstance(value, str) else list(value)
		return tuple(str(item).strip() for item in items if str(item).strip())
	if name in _BOOL_FIELDS:
		if isinstance(value, str):
			return value.strip().lower() in {'1', 'true', 'yes', 'on'}
		return bool(value)
	if name in _INT_FIELDS:
		if isinstance(value, float) and not value.is_integer():
			raise ValueError(f'expected an integer, got {value}')
		return int(value)
	if name in _FLOAT_FIELDS:
		return float(value)
	if name in _PATH_FIELDS:
		return Path(value)
	return str(value)


def load_toml(path: str | Path) -> dict[str, Any]:
	"""Flat key = value table; an [experiment] table is read the same way."""
	path = Path(path)
	try:
		with path.open('rb') as handle:
			data = tomllib.load(handle)
	except FileNotFoundError:
		raise SpecError({'config': f'no such file {path}'}) from None
	except tomllib.TOMLDecodeError as exc:
		raise SpecError({'config': f'{path}: {exc}'}) from None
	table = data.get('experiment', data)
	return {key.replace('-', '_'): value for key, value in table.items()}


def build_spec(
	file_values: Mapping[str, Any] | None = None, overrides: Mapping[str, Any] | None = None
) -> ExperimentSpec:
	"""Merge file values with flag overrides (flags win) and validate the result."""
	merged = dict(file_values or {})
	merged.update({key: value for key, value in (overrides or {}).items() if value is not None})
	errors: dict[str, str] = {}
	values: dict[str, Any] = {}
	for name, raw in merged.items():
		if name not in _FIELD_TYPES:
			errors[name] = 'unknown field'
			continue
		try:
			values[name] = _coerce(name, raw)
		except (TypeError, ValueError) as exc:
			errors[name] = str(exc)
	if 'kind' not in values:
		errors.setdefault('kind', f'required; one of {", ".join(EXPERIMENT_KINDS)}')
		values['kind'] = ''
	spec = ExperimentSpec(**values)
	errors.update({name: reason for name, reason in spec_errors(spec).items() if name not in errors})
	if errors:
		raise SpecError(errors)
	return spec


def spec_errors(spec: ExperimentSpec) -> dict[str, str]:
	"""Every invalid field of `spec` with the reason; empty when valid."""
	errors: dict[str, str] = {}
	if spec.kind not in EXPERIMENT_KINDS:
		errors['kind'] = f'unknown kind {spec.kind!r}; expected one of {", ".join(EXPERIMENT_KINDS)}'
	if not (math.isfinite(spec.beta) and spec.beta > 0):
		errors['beta'] = 'must be positive and finite'
	if not spec.snr_db:
		errors['snr_db'] = 'at least one SNR point is required'
	elif not all(math.isfinite(point) for point in spec.snr_db):
		errors['snr_db'] = 'SNR points must be finite'
	constellation = None
	try:
		constellation = resolve(spec.constellation)
	except (DomainError, OSError, KeyError, ValueError) as exc:
		errors['constellation'] = f'{exc} (presets: {", ".join(PRESET_NAMES)} or a CSV path)'
	for name in ('seed', 'code_seed'):
		if getattr(spec, name) < 0:
			errors[name] = 'must be non-negative'
	for name in ('trials', 'workers', 'iterations', 'grid_points', 'code_n', 'outer_iter', 'inner_iter'):
		if getattr(spec, name) < 1:
			errors[name] = 'must be positive'
	if spec.frames < 1:
		errors['frames'] = 'must be positive'
	if spec.target_errors < 1:
		errors['target_errors'] = 'must be positive'
	if spec.amp_n < 0:
		errors['amp_n'] = 'must be non-negative'
	if spec.grid_points < 2:
		errors['grid_points'] = 'needs at least two points'
	if not (0 < spec.rho_min < spec.rho_max and math.isfinite(spec.rho_max)):
		errors['rho_min'] = f'need 0 < rho_min < rho_max, got {spec.rho_min}, {spec.rho_max}'
	unknown_kinds = [kind for kind in spec.rate_kinds if kind not in RATE_KINDS]
	if unknown_kinds or not spec.rate_kinds:
		errors['rate_kinds'] = f'expected a subset of {", ".join(RATE_KINDS)}, got {list(spec.rate_kinds)}'
	if spec.dv < 2:
		errors['dv'] = 'variable degree must be at least 2'
	if spec.dc <= spec.dv and spec.alist is None and spec.degrees is None:
		errors['dc'] = f'check degree must exceed dv={spec.dv} for a positive rate'
	for name in ('alist', 'degrees'):
		path = getattr(spec, name)
		if path is not None and not path.is_file():
			errors[name] = f'no such file {path}'
	if spec.alist is not None and spec.degrees is not None:
		errors['degrees'] = 'give either alist or degrees, not both'
	if spec.transfer not in TRANSFER_SOURCES:
		errors['transfer'] = f'expected one of {", ".join(TRANSFER_SOURCES)}'
	if not (0 < spec.margin < 0.5):
		errors['margin'] = 'must lie in (0, 0.5)'
	if spec.max_dv < 2:
		errors['max_dv'] = 'must be at least 2'
	if spec.target_rate is not None and not (0 < spec.target_rate < 1):
		errors['target_rate'] = 'code rate must lie in (0, 1)'
	if constellation is not None:
		coded = spec.kind in CODED_KINDS or spec.kind == 'optimize'
		if coded and (constellation.is_gaussian or constellation.bits_per_symbol == 0):
			errors['constellation'] = f'{constellation.label} has no bit labelling for coded runs'
		elif spec.kind == 'optimize' and not antipodal_bits(constellation):
			errors['constellation'] = 'degree design supports BPSK and Gray QPSK only'
		elif spec.kind == 'match' and spec.transfer == 'surrogate' and not antipodal_bits(constellation):
			errors['transfer'] = 'surrogate curves support BPSK and Gray QPSK only'
	return errors


def spec_to_dict(spec: ExperimentSpec) -> dict[str, Any]:
	"""Plain-data echo of the spec; build_spec(spec_to_dict(s)) == s."""
	data = asdict(spec)
	for name in _PATH_FIELDS:
		if data[name] is not None:
			data[name] = str(data[name])
	data['snr_db'] = list(spec.snr_db)
	data['rate_kinds'] = list(spec.rate_kinds)
	return data


def spec_from_metadata(path: str | Path) -> ExperimentSpec:
	"""Rebuild the spec echoed in a run's JSON metadata."""
	return build_spec(read_json(path)['spec'])
