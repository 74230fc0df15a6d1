"""Harness pipeline orchestration: one runner per experiment kind."""

from __future__ import annotations

import math
import time
from collections import Counter
from collections.abc import Callable
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any

import numpy as np

from core import config as core_config
from core.amp import draw_codeword, mean_trace_column, run_amp_coded, run_amp_trials
from core.debug import DebugLogger
from core.density_evolution import surrogate_transfer_curve
from core.errors import AmpToolkitError, NumericBlowupError, SingleCrossingError
from core.ldpc import (
	build_irregular,
	build_regular,
	decoder_transfer_curve,
	read_alist,
	read_degree_csv,
	write_degree_csv,
)
from core.matching import (
	check_matching,
	design_degrees,
	optimize_for_rate,
	predicted_threshold,
	siso_target,
	surrogate_threshold,
	write_constraint_csv,
)
from core.parallel import execute_in_parallel, trial_seed
from core.rates import (
	area_capacity_prop1,
	capacity_theorem2,
	gaussian_capacity_monte_carlo,
	omega_star,
	rate_sweep,
	uncoded_fixed_point,
	write_rates_csv,
)
from core.scalar_mmse import mutual_information, omega_curve
from core.state_evolution import phi_inv_array, se_fixed_point, se_trace
from core.utils import read_json, tool_version, write_json, write_rows
from models.code import DegreeDistribution, LdpcCode
from models.constellation import Constellation, resolve
from models.curve import TransferCurve, log_grid
from models.results import BerPoint
from models.system import SystemConfig

from .config import ExperimentSpec, spec_to_dict

try:
	from tqdm import tqdm
except ImportError:  # pragma: no cover - tqdm optional dependency
	tqdm = None

# An SNR point is abandoned once BER stays above this after ABORT_MIN_FRAMES
ABORT_BER = 0.4
ABORT_MIN_FRAMES = 5
# Monte Carlo log-det size when the spec sets no amp_n
GAUSSIAN_ORACLE_N = 256

_logger = DebugLogger('harness')

Runner = Callable[[ExperimentSpec, Constellation, Path], tuple[list[Path], dict[str, Any]]]


def _system(spec: ExperimentSpec, snr_db: float) -> SystemConfig:
	return SystemConfig.from_snr_db(spec.beta, snr_db)


def _grid(spec: ExperimentSpec) -> np.ndarray:
	return log_grid(spec.rho_min, spec.rho_max, spec.grid_points)


def _workers(spec: ExperimentSpec) -> int:
	return 1 if spec.deterministic else spec.workers


def _data_path(spec: ExperimentSpec, directory: Path) -> Path:
	return directory / f'{spec.kind}.csv'


# ---------------------------------------------------------------------------
# Code references


def load_code(spec: ExperimentSpec) -> LdpcCode:
	"""The code named by the spec: an alist file, a degree table, or a regular ensemble."""
	if spec.alist is not None:
		return read_alist(spec.alist, seed=spec.code_seed)
	if spec.degrees is not None:
		return build_irregular(spec.code_n, read_degree_csv(spec.degrees), seed=spec.code_seed)
	return build_regular(spec.code_n, spec.dv, spec.dc, seed=spec.code_seed)


def code_degrees(code: LdpcCode) -> DegreeDistribution:
	"""Edge-perspective degrees of a concrete graph."""
	if code.degrees is not None:
		return code.degrees
	edges = code.edge_var.size

	def edge_fractions(node_degrees):
		counts = Counter(int(degree) for degree in node_degrees)
		return {degree: degree * count / edges for degree, count in counts.items()}

	return DegreeDistribution(edge_fractions(code.var_degrees), edge_fractions(code.chk_degrees))


def _ensemble(spec: ExperimentSpec) -> DegreeDistribution:
	if spec.degrees is not None:
		return read_degree_csv(spec.degrees)
	if spec.alist is not None:
		return code_degrees(read_alist(spec.alist, seed=spec.code_seed))
	return DegreeDistribution.regular(spec.dv, spec.dc)


def _decoder_curve(spec: ExperimentSpec, c: Constellation, grid: np.ndarray) -> TransferCurve:
	if spec.transfer == 'surrogate':
		return surrogate_transfer_curve(_ensemble(spec), c, grid)
	return decoder_transfer_curve(
		load_code(spec),
		c,
		grid,
		trials=spec.trials,
		seed=spec.seed,
		max_bp_iters=spec.inner_iter,
		workers=_workers(spec),
	)


# ---------------------------------------------------------------------------
# Runners


def _run_mmse_curve(spec, c, directory):
	cfg = _system(spec, spec.snr_db[0])
	grid = _grid(spec)
	curve = omega_curve(c, grid)
	phi_inv = phi_inv_array(cfg, grid)
	rows = [
		{
			'rho': rho,
			'omega_s': value,
			'mutual_info_bits': mutual_information(c, rho) / math.log(2),
			'phi_inv': phi_inv[index],
		}
		for index, (rho, value) in enumerate(zip(grid, curve.v_values, strict=True))
	]
	path = write_rows(_data_path(spec, directory), ['rho', 'omega_s', 'mutual_info_bits', 'phi_inv'], rows)
	summary: dict[str, Any] = {'snr_db': spec.snr_db[0]}
	try:
		summary['rho_star'] = uncoded_fixed_point(cfg, c)
	except SingleCrossingError as exc:
		summary['rho_star'] = None
		summary['crossings'] = exc.crossings
	return [path], summary


def _run_se_trace(spec, c, directory):
	omega = omega_curve(c)
	rows = []
	summary: dict[str, Any] = {'points': []}
	for index, snr_db in enumerate(spec.snr_db):
		cfg = _system(spec, snr_db)
		trace = se_trace(cfg, omega, spec.iterations)
		rho_star, v_star, _ = se_fixed_point(cfg, omega)
		amp_mse = np.full(len(trace), math.nan)
		if spec.amp_n > 0:
			traces = run_amp_trials(
				cfg.with_length(spec.amp_n),
				c,
				spec.trials,
				master_seed=trial_seed(spec.seed, index),
				max_iter=spec.iterations,
				tol=0.0,
				workers=_workers(spec),
				deterministic=spec.deterministic,
			)
			length = min(len(run) for run in traces)
			# AMP record t holds s^{t+1}, which SE predicts at v^{t+1}
			amp_mse[1 : length + 1] = mean_trace_column(traces, 'mse_s', length)
		for iteration, point in enumerate(trace):
			rows.append(
				{'snr_db': snr_db, 'iter': iteration, 'rho': point.rho, 'v': point.v, 'amp_mse': amp_mse[iteration]}
			)
		summary['points'].append({'snr_db': snr_db, 'rho_star': rho_star, 'v_star': v_star})
	path = write_rows(_data_path(spec, directory), ['snr_db', 'iter', 'rho', 'v', 'amp_mse'], rows)
	return [path], summary


def _run_capacity(spec, c, directory):
	oracle = c.is_gaussian and spec.trials > 1
	rows = []
	for snr_db in spec.snr_db:
		cfg = _system(spec, snr_db)
		row: dict[str, Any] = {'snr_db': snr_db, 'error': ''}
		try:
			row['rho_star'] = uncoded_fixed_point(cfg, c)
			row['capacity_bits'] = capacity_theorem2(cfg, c)
			row['area_bits'] = area_capacity_prop1(cfg, c)
		except AmpToolkitError as exc:
			row['error'] = str(exc)
		if oracle:
			row['mc_bits'], row['mc_stderr'] = gaussian_capacity_monte_carlo(
				spec.beta, cfg.snr, n=spec.amp_n or GAUSSIAN_ORACLE_N, samples=spec.trials, seed=spec.seed
			)
		rows.append(row)
	fieldnames = ['snr_db', 'rho_star', 'capacity_bits', 'area_bits', 'mc_bits', 'mc_stderr', 'error']
	path = write_rows(_data_path(spec, directory), fieldnames, rows)
	gaps = [abs(row['capacity_bits'] - row['area_bits']) for row in rows if not row['error']]
	return [path], {'max_identity_gap_bits': max(gaps, default=None)}


def _run_rates(spec, c, directory):
	points = rate_sweep(_system(spec, spec.snr_db[0]), c, spec.snr_db, spec.rate_kinds, workers=_workers(spec))
	path = write_rates_csv(_data_path(spec, directory), points)
	by_snr: dict[float, dict[str, float]] = {}
	for point in points:
		by_snr.setdefault(point.snr_db, {})[point.kind] = point.rate
	dominated = all(
		rates['turbo_lmmse'] <= rates['capacity'] + 1e-9
		for rates in by_snr.values()
		if {'capacity', 'turbo_lmmse'} <= rates.keys() and not math.isnan(rates['turbo_lmmse'] + rates['capacity'])
	)
	flagged = sum(1 for point in points if point.error)
	return [path], {'capacity_dominates_turbo_lmmse': dominated, 'flagged_points': flagged}


def _run_transfer_chart(spec, c, directory):
	cfg = _system(spec, spec.snr_db[0])
	grid = _grid(spec)
	code = load_code(spec)
	curve_c = decoder_transfer_curve(
		code, c, grid, trials=spec.trials, seed=spec.seed, max_bp_iters=spec.inner_iter, workers=_workers(spec)
	)
	star = omega_star(cfg, c, grid)
	omega = omega_curve(c, grid)
	try:
		ga = surrogate_transfer_curve(code_degrees(code), c, grid).v_values
	except AmpToolkitError:
		ga = np.full(grid.size, math.nan)
	phi_inv = phi_inv_array(cfg, grid)
	rows = [
		{
			'rho': grid[i],
			'omega_c': curve_c.v_values[i],
			'omega_c_stderr': curve_c.stderr[i],
			'omega_ga': ga[i],
			'omega_s': omega.v_values[i],
			'omega_star': star.v_values[i],
			'phi_inv': phi_inv[i],
		}
		for i in range(grid.size)
	]
	fieldnames = ['rho', 'omega_c', 'omega_c_stderr', 'omega_ga', 'omega_s', 'omega_star', 'phi_inv']
	path = write_rows(_data_path(spec, directory), fieldnames, rows)
	summary = {
		'code_n': code.n,
		'code_k': code.k,
		'code_rate': code.rate,
		'area_omega_c_nats': curve_c.area(),
		'rate_nats_per_symbol': code.rate * c.bits_per_symbol * math.log(2),
	}
	return [path], summary


def _run_match(spec, c, directory):
	grid = _grid(spec)
	curve_c = _decoder_curve(spec, c, grid)
	threshold = predicted_threshold(_system(spec, spec.snr_db[0]), curve_c, spec.margin)
	rows = []
	for snr_db in spec.snr_db:
		cfg = _system(spec, snr_db)
		report = check_matching(cfg, curve_c, omega_star(cfg, c, grid), spec.margin, find_threshold=False)
		rows.append(
			{
				'snr_db': snr_db,
				'tunnel_open': report.tunnel_open,
				'min_gap': report.min_gap,
				'worst_rho': report.worst_rho,
				'rate_gap_bits': report.rate_gap_to_capacity,
				'predicted_threshold_db': threshold,
			}
		)
	fieldnames = ['snr_db', 'tunnel_open', 'min_gap', 'worst_rho', 'rate_gap_bits', 'predicted_threshold_db']
	path = write_rows(_data_path(spec, directory), fieldnames, rows)
	return [path], {'predicted_threshold_db': threshold, 'transfer': spec.transfer}


def _run_optimize(spec, c, directory):
	cfg = _system(spec, spec.snr_db[0])
	written = []
	summary: dict[str, Any] = {'siso': spec.siso}
	if spec.target_rate is not None:
		dd, snr_db = optimize_for_rate(cfg, c, spec.target_rate, siso=spec.siso, max_dv=spec.max_dv, margin=spec.margin)
		cfg = cfg.with_snr_db(snr_db)
		summary['design_snr_db'] = snr_db
	else:
		target = siso_target(cfg, c, spec.margin) if spec.siso else omega_star(cfg, c)
		design = design_degrees(cfg, c, target, max_dv=spec.max_dv, dc=spec.dc, margin=spec.margin)
		dd = design.degrees
		summary['design_snr_db'] = spec.snr_db[0]
		summary['rounds'] = design.rounds
		written.append(write_constraint_csv(directory / 'constraints.csv', design))
	written.insert(0, write_degree_csv(dd, _data_path(spec, directory)))
	summary['design_rate'] = dd.design_rate
	summary['variable_edges'] = dd.variable_edges
	summary['check_edges'] = dd.check_edges
	summary['threshold_db'] = surrogate_threshold(cfg, dd, c, spec.margin)
	reference = DegreeDistribution.regular(spec.dv, spec.dc)
	summary['reference'] = {'dv': spec.dv, 'dc': spec.dc, 'threshold_db': surrogate_threshold(cfg, reference, c, spec.margin)}
	return written, summary


def _run_ber(spec, c, directory):
	points = ber_campaign(spec)
	fieldnames = [f.name for f in fields(BerPoint)]
	path = write_rows(_data_path(spec, directory), fieldnames, [asdict(point) for point in points])
	return [path], {'points': len(points), 'aborted': sum(point.aborted for point in points)}


_RUNNERS: dict[str, Runner] = {
	'mmse-curve': _run_mmse_curve,
	'se-trace': _run_se_trace,
	'capacity': _run_capacity,
	'rates': _run_rates,
	'transfer-chart': _run_transfer_chart,
	'ber': _run_ber,
	'match': _run_match,
	'optimize': _run_optimize,
}


# ---------------------------------------------------------------------------
# BER campaign


def _frame_task(task) -> tuple[int, bool, bool]:
	"""(bit errors, frame error, blew up) for one coded AMP frame."""
	cfg, code, c, seed, outer_iter, inner_iter = task
	try:
		hard, _, _ = run_amp_coded(cfg, code, c, seed, max_iter=outer_iter, bp_iters=inner_iter)
	except NumericBlowupError:
		return code.n // 2, True, True
	errors = int(np.count_nonzero(hard != draw_codeword(code, seed)))
	return errors, errors > 0, False


def _ber_point(spec, code, c, index, snr_db) -> BerPoint:
	cfg = _system(spec, snr_db)
	workers = _workers(spec)
	batch_size = max(1, 4 * workers) if workers > 1 else 1
	frames = bit_errors = frame_errors = 0
	aborted = False
	next_frame = 0
	progress = tqdm(total=spec.frames, desc=f'{snr_db:g} dB', unit='frame', leave=False) if tqdm else None
	while frames < spec.frames and frame_errors < spec.target_errors and not aborted:
		batch = range(next_frame, min(spec.frames, next_frame + batch_size))
		tasks = [
			(cfg, code, c, trial_seed(spec.seed, index, frame), spec.outer_iter, spec.inner_iter)
			for frame in batch
		]
		# stopping is decided in frame order, so the table does not depend on the worker count
		for errors, failed, blew_up in execute_in_parallel(_frame_task, tasks, workers=workers):
			frames += 1
			bit_errors += errors
			frame_errors += failed
			if progress:
				progress.update(1)
			if blew_up:
				_logger.notice('RUN', f'{snr_db:g} dB frame {frames - 1}: AMP blew up, counted as a frame error')
			if frame_errors >= spec.target_errors:
				break
			if frames >= ABORT_MIN_FRAMES and bit_errors / (frames * code.n) > ABORT_BER:
				aborted = True
				break
		next_frame = batch.stop
	if progress:
		progress.close()
	point = BerPoint.from_counts(snr_db, bit_errors, frames * code.n, frame_errors, frames, aborted)
	_logger.notice('RUN', f'{snr_db:g} dB: ber={point.ber:.3g} fer={point.fer:.3g} over {frames} frames')
	return point


def ber_campaign(spec: ExperimentSpec, code: LdpcCode | None = None) -> list[BerPoint]:
	"""Coded AMP BER per SNR point, until target_errors frame errors or the frame cap.

	Frame f at point p is seeded from (seed, p, f).
	"""
	c = resolve(spec.constellation)
	code = code if code is not None else load_code(spec)
	return [_ber_point(spec, code, c, index, snr_db) for index, snr_db in enumerate(spec.snr_db)]


# ---------------------------------------------------------------------------
# Entry point


def _metadata_path(spec: ExperimentSpec) -> Path:
	return spec.output_dir / f'{spec.kind}.json'


def _is_current(spec: ExperimentSpec) -> list[Path] | None:
	path = _metadata_path(spec)
	if not path.exists():
		return None
	try:
		previous = read_json(path)
	except (OSError, ValueError):
		return None
	if previous.get('spec') != spec_to_dict(spec):
		return None
	files = [Path(name) for name in previous.get('files', [])]
	if not files or not all(file.exists() for file in files):
		return None
	return [*files, path]


def run(spec: ExperimentSpec, force: bool = False) -> list[Path]:
	"""Run one experiment and return the written files (data first, metadata last).

	An existing run with an identical spec echo is reused unless force is set.
	"""
	if not force:
		existing = _is_current(spec)
		if existing is not None:
			print(f'[harness] {spec.kind}: up to date at {existing[-1]} (use --force to re-run)')
			return existing
	c = resolve(spec.constellation)
	directory = spec.output_dir
	directory.mkdir(parents=True, exist_ok=True)
	_logger.notice('RUN', f'{spec.kind}: {c.label}, beta={spec.beta}, {len(spec.snr_db)} SNR point(s)')
	started = time.perf_counter()
	written, summary = _RUNNERS[spec.kind](spec, c, directory)
	elapsed = time.perf_counter() - started
	metadata = {
		'spec': spec_to_dict(spec),
		'version': tool_version(),
		'wall_time_s': elapsed,
		'constellation': c.label,
		'grid': {
			'quadrature_order': core_config.QUADRATURE_ORDER,
			'grid_min': core_config.GRID_MIN,
			'grid_max': core_config.GRID_MAX,
			'grid_points': core_config.GRID_POINTS,
		},
		'summary': summary,
		'files': [str(path) for path in written],
	}
	meta_path = write_json(_metadata_path(spec), metadata)
	print(f'[harness] {spec.kind}: wrote {", ".join(str(path) for path in written)} in {elapsed:.1f}s')
	return [*written, meta_path]
