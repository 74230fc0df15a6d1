"""
Constrained capacity and achievable rates of AMP-type receivers.

Every rate is returned in bits per symbol; integrals are taken in nats on the
tabulated omega_S curve and converted at the end.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable
from functools import partial
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from models.constellation import Constellation
from models.curve import TransferCurve, log_grid
from models.results import RATE_KINDS, RatePoint
from models.system import SystemConfig

from . import config
from .debug import DebugLogger
from .errors import AmpToolkitError, DomainError, SingleCrossingError
from .parallel import execute_in_parallel
from .scalar_mmse import omega_curve, omega_s, siso_capacity
from .state_evolution import phi_inv, phi_inv_array, single_crossing_check

LOG2 = math.log(2)

_logger = DebugLogger('rates')


def uncoded_fixed_point(cfg: SystemConfig, c: Constellation) -> float:
	"""rho* of uncoded SE, refusing when omega_S crosses phi_inv more than once.

	With no interior crossing the fixed point is the boundary rho* = snr.
	"""
	holds, crossings = single_crossing_check(cfg, omega_curve(c))
	if len(crossings) > 1:
		raise SingleCrossingError(crossings)
	if not holds:
		_logger.notice('RATE', f'{c.label}: no interior crossing, fixed point at rho* = snr')
		return cfg.snr
	return crossings[0]


def _entropy(c: Constellation) -> float:
	return float(-np.sum(c.priors * np.log(c.priors)))


def capacity_theorem2(cfg: SystemConfig, c: Constellation) -> float:
	"""Constrained capacity of the large random matrix system, bits per symbol."""
	rho_star = uncoded_fixed_point(cfg, c)
	zeta = cfg.snr / rho_star - 1.0
	nats = (math.log1p(zeta) - zeta / (1.0 + zeta)) / cfg.beta
	return nats / LOG2 + siso_capacity(c, cfg.snr / (1.0 + zeta))


def area_capacity_prop1(cfg: SystemConfig, c: Constellation) -> float:
	"""Capacity as the area under the matched target curve, bits per symbol."""
	rho_star = uncoded_fixed_point(cfg, c)
	ratio = rho_star / cfg.snr
	nats = (ratio - math.log(ratio) - 1.0) / cfg.beta
	return nats / LOG2 + siso_capacity(c, rho_star)


def _omega_star_value(cfg: SystemConfig, c: Constellation, rho: float) -> float:
	if rho >= cfg.snr:
		return 0.0
	if rho <= 0:
		return omega_s(c, 0.0)
	return min(omega_s(c, rho), phi_inv(cfg, rho))


def omega_star(cfg: SystemConfig, c: Constellation, grid: np.ndarray | None = None) -> TransferCurve:
	"""Matched target min{omega_S, phi_inv} on (0, snr], zero beyond snr.

	A grid reaching past snr is accepted (the target is zero there), so a
	decoder curve measured once can share its grid with every SNR point.
	"""
	if math.isinf(cfg.snr):
		raise DomainError('omega_star needs a finite snr')
	if grid is None:
		grid = log_grid(min(config.GRID_MIN, cfg.snr * 1e-3), cfg.snr, config.GRID_POINTS)
	grid = np.asarray(grid, dtype=float)
	values = np.minimum(omega_curve(c).interpolate(grid), phi_inv_array(cfg, grid))
	return TransferCurve(
		grid,
		values,
		left_value=1.0,
		right_rule='zero',
		exact=partial(_omega_star_value, cfg, c),
		label=f'omega_star[{c.label}]',
	)


def rate_turbo_lmmse(cfg: SystemConfig, c: Constellation) -> float:
	"""Achievable rate of Turbo-LMMSE, bits per symbol."""
	if c.is_gaussian:
		_logger.notice('RATE', 'Gaussian signaling: Turbo-LMMSE rate equals capacity')
		return capacity_theorem2(cfg, c)
	curve = omega_curve(c)
	grid = curve.rho_grid
	shifted = grid + 1.0 / (cfg.beta * curve.v_values + cfg.sigma2)
	integrand = curve.interpolate(shifted)
	left = curve.interpolate(1.0 / (cfg.beta * curve.left_value + cfg.sigma2))
	extrinsic = TransferCurve(grid, integrand, left_value=left, right_rule='bound', label='turbo_lmmse')
	nats = _entropy(c) - extrinsic.area()
	return max(nats, 0.0) / LOG2


def rate_amp_dec(cfg: SystemConfig, c: Constellation) -> float:
	"""Rate of AMP run to convergence followed by a single decoding pass, bits per symbol."""
	return siso_capacity(c, uncoded_fixed_point(cfg, c))


def omega_star_area(cfg: SystemConfig, c: Constellation) -> float:
	"""Numerical area under omega_star in bits; equals the capacity up to grid error."""
	return omega_star(cfg, c).area(cfg.snr) / LOG2


_RATE_FUNCTIONS = {
	'capacity': capacity_theorem2,
	'amp': area_capacity_prop1,
	'turbo_lmmse': rate_turbo_lmmse,
	'amp_dec': rate_amp_dec,
}


def rate(cfg: SystemConfig, c: Constellation, kind: str) -> float:
	if kind not in _RATE_FUNCTIONS:
		raise DomainError(f'unknown rate kind {kind!r}; expected one of {", ".join(RATE_KINDS)}')
	return _RATE_FUNCTIONS[kind](cfg, c)


def _sweep_point(task) -> list[RatePoint]:
	cfg_template, c, snr_db, kinds = task
	cfg = cfg_template.with_snr_db(snr_db)
	points = []
	for kind in kinds:
		try:
			points.append(RatePoint(snr_db, rate(cfg, c, kind), kind))
		except AmpToolkitError as exc:
			points.append(RatePoint(snr_db, math.nan, kind, error=str(exc)))
	return points


def rate_sweep(
	cfg_template: SystemConfig,
	c: Constellation,
	snr_db_list: Iterable[float],
	kinds: Iterable[str] = RATE_KINDS,
	workers: int | None = 1,
) -> list[RatePoint]:
	"""Evaluate each rate kind at each SNR; rows ordered by input SNR, then kind.

	Points that fail (for example a single-crossing violation) come back as
	flagged rows with a NaN rate.
	"""
	kinds = tuple(kinds)
	for kind in kinds:
		if kind not in _RATE_FUNCTIONS:
			raise DomainError(f'unknown rate kind {kind!r}')
	tasks = [(cfg_template, c, float(snr_db), kinds) for snr_db in snr_db_list]
	results = execute_in_parallel(_sweep_point, tasks, workers=workers)
	return [point for row in results for point in row]


def write_rates_csv(path: str | Path, points: list[RatePoint]) -> Path:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	with path.open('w', newline='') as handle:
		writer = csv.DictWriter(handle, fieldnames=['snr_db', 'kind', 'rate_bits', 'error'])
		writer.writeheader()
		for point in points:
			writer.writerow(
				{
					'snr_db': f'{point.snr_db:.6g}',
					'kind': point.kind,
					'rate_bits': f'{point.rate:.10g}',
					'error': point.error,
				}
			)
	return path


def gaussian_capacity_monte_carlo(
	beta: float, snr: float, n: int = 256, samples: int = 200, seed: int = 0
) -> tuple[float, float]:
	"""(1/N) E log det(I + snr A^H A) in bits, with its standard error."""
	m = round(n / beta)
	if m <= 0:
		raise DomainError(f'beta={beta} leaves no observations for n={n}')
	rng = np.random.default_rng(seed)
	values = np.empty(samples)
	for index in range(samples):
		a = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / math.sqrt(2 * m)
		gram = a @ a.conj().T if m <= n else a.conj().T @ a
		_, logdet = np.linalg.slogdet(np.eye(gram.shape[0]) + snr * gram)
		values[index] = logdet / n / LOG2
	return float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples))


def snr_limit(
	cfg_template: SystemConfig,
	c: Constellation,
	target_rate: float,
	kind: str = 'capacity',
	db_range: tuple[float, float] = config.THRESHOLD_DB_RANGE,
	tol: float = config.THRESHOLD_DB_TOL,
) -> float:
	"""Smallest SNR (dB) at which the rate kind reaches target_rate bits."""

	def shortfall(snr_db):
		return rate(cfg_template.with_snr_db(snr_db), c, kind) - target_rate

	low, high = db_range
	if shortfall(high) < 0:
		raise DomainError(f'{kind} rate stays below {target_rate} bits up to {high} dB')
	if shortfall(low) >= 0:
		return low
	return float(brentq(shortfall, low, high, xtol=tol))
