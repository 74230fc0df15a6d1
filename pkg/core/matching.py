"""
Matching a decoder transfer curve to the AMP detector.

Coded AMP reaches error-free detection when omega_C stays below phi_inv on
(0, snr]. This module checks that condition, predicts thresholds, and designs
LDPC degree distributions whose Gaussian-approximation transfer lies below a
target curve, by linear programming over node-perspective degree fractions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from models.code import DegreeDistribution
from models.constellation import Constellation
from models.curve import TransferCurve, log_grid
from models.results import MatchReport
from models.system import SePoint, SystemConfig

from . import config
from .debug import DebugLogger
from .density_evolution import (
	bit_mmse,
	channel_llr_variance,
	check_exit_inverse,
	j_inverse,
	surrogate_transfer_curve,
	variable_exit,
)
from .errors import DomainError, InfeasibleDesignError, SingleCrossingError
from .rates import LOG2, omega_star, uncoded_fixed_point
from .scalar_mmse import omega_curve
from .state_evolution import phi, phi_inv_array, se_fixed_point

_logger = DebugLogger('match')

# Fractions below this are dropped from a designed distribution
_MASS_FLOOR = 1e-9


# ---------------------------------------------------------------------------
# Tunnel checks


def tunnel_gap(cfg: SystemConfig, curve_c: TransferCurve, margin: float = config.MATCH_MARGIN):
	"""(min gap, worst rho) of phi_inv - omega_C - margin over the tunnel.

	The tunnel runs over grid points below the rho where phi_inv falls to
	2*margin, plus that end point; past it SE has reached the margin floor.
	"""
	end = phi(cfg, 2.0 * margin)
	grid = curve_c.rho_grid
	points = np.append(grid[grid < end], end)
	gaps = phi_inv_array(cfg, points) - curve_c.interpolate(points) - margin
	worst = int(np.argmin(gaps))
	return float(gaps[worst]), float(points[worst])


def tunnel_open(cfg: SystemConfig, curve_c: TransferCurve, margin: float = config.MATCH_MARGIN) -> bool:
	return tunnel_gap(cfg, curve_c, margin)[0] > 0


def predicted_threshold(
	cfg: SystemConfig,
	curve_c: TransferCurve,
	margin: float = config.MATCH_MARGIN,
	db_range: tuple[float, float] = config.THRESHOLD_DB_RANGE,
	tol: float = config.THRESHOLD_DB_TOL,
) -> float | None:
	"""Smallest snr (dB) at which the tunnel is open; None if closed over the whole range."""
	low, high = db_range
	if not tunnel_open(cfg.with_snr_db(high), curve_c, margin):
		return None
	if tunnel_open(cfg.with_snr_db(low), curve_c, margin):
		return low
	while high - low > tol:
		middle = 0.5 * (low + high)
		if tunnel_open(cfg.with_snr_db(middle), curve_c, margin):
			high = middle
		else:
			low = middle
	return high


def check_matching(
	cfg: SystemConfig,
	curve_c: TransferCurve,
	curve_star: TransferCurve,
	margin: float = config.MATCH_MARGIN,
	find_threshold: bool = True,
) -> MatchReport:
	"""Tunnel test of omega_C against phi_inv; min_gap is reported net of the margin."""
	curve_c.require_same_grid(curve_star)
	min_gap, worst_rho = tunnel_gap(cfg, curve_c, margin)
	threshold = predicted_threshold(cfg, curve_c, margin) if find_threshold else None
	rate_gap = (curve_star.area(cfg.snr) - curve_c.area()) / LOG2
	report = MatchReport(
		tunnel_open=min_gap > 0,
		min_gap=min_gap,
		predicted_threshold_db=threshold,
		rate_gap_to_capacity=rate_gap,
		margin=margin,
		snr_db=cfg.snr_db,
		worst_rho=worst_rho,
	)
	_logger.notice('SE', f'tunnel {"open" if report.tunnel_open else "closed"}, min gap {min_gap:.3g} at rho={worst_rho:.4g}')
	return report


def coded_se(cfg: SystemConfig, curve_c: TransferCurve) -> tuple[float, float, list[SePoint]]:
	"""SE of coded AMP with the decoder transfer curve in place of omega_S."""
	return se_fixed_point(cfg, curve_c.interpolate)


def siso_target(cfg: SystemConfig, c: Constellation, margin: float = config.MATCH_MARGIN) -> TransferCurve:
	"""Target of a code designed for the scalar channel seen after uncoded AMP.

	Equal to omega_S below the uncoded fixed point rho*, and to 2*margin above it.
	"""
	star = omega_star(cfg, c)
	rho_star = uncoded_fixed_point(cfg, c)
	values = np.where(star.rho_grid < rho_star, omega_curve(c).interpolate(star.rho_grid), 2.0 * margin)
	return TransferCurve(star.rho_grid, values, left_value=1.0, right_rule='zero', label=f'siso[{c.label}]')


# ---------------------------------------------------------------------------
# Degree optimization


@dataclass
class DesignResult:
	degrees: DegreeDistribution
	rate: float
	rounds: int
	constraint_rows: list[dict] = field(default_factory=list)


def _constraint_points(cfg: SystemConfig, c: Constellation, target: TransferCurve, margin: float, points: int):
	"""rho points where the target lies below omega_S, with MSE limits target - margin."""
	grid = target.rho_grid
	end = phi(cfg, 2.0 * margin)
	uncoded = omega_curve(c).interpolate(grid)
	binding = (target.v_values < uncoded - 1e-9) & (grid <= end) & (target.v_values >= 2.0 * margin * (1 - 1e-9))
	if not np.any(binding):
		return np.empty(0), np.empty(0)
	low, high = grid[binding][0], grid[binding][-1]
	rhos = log_grid(low, high, points) if high > low else np.array([low])
	limits = target.interpolate(rhos) - margin
	keep = limits >= margin * (1 - 1e-9)
	return rhos[keep], np.maximum(limits[keep], margin)


def _mse_matrix(degrees: np.ndarray, variance: np.ndarray, mi: np.ndarray) -> np.ndarray:
	"""mse[k, d] of a degree-d node at channel variance[k] and incoming MI mi[k]."""
	incoming = j_inverse(mi)[:, None] ** 2
	return bit_mmse(variance[:, None] + degrees[None, :] * incoming)


def _required_mi(fractions, degrees, variance, limits, iterations: int = 60) -> np.ndarray:
	"""Smallest check-to-variable MI at which the node mixture meets each MSE limit."""
	low = np.zeros_like(variance)
	high = np.full_like(variance, 1.0 - 1e-10)
	done = _mse_matrix(degrees, variance, low) @ fractions <= limits
	for _ in range(iterations):
		middle = 0.5 * (low + high)
		ok = _mse_matrix(degrees, variance, middle) @ fractions <= limits
		high = np.where(ok, middle, high)
		low = np.where(ok, low, middle)
	return np.where(done, 0.0, high)


def _lp_rows(degrees, dc, variance, required, limits, tunnel_points):
	"""Inequality rows A L <= b: tunnel rows first, then one MSE row per rho point."""
	rows, bounds, owners = [], [], []
	for k, (var, need) in enumerate(zip(variance, required, strict=True)):
		if need > 0:
			mi = np.linspace(0.0, need, tunnel_points)
			gain = np.stack([variable_exit(int(d), mi, var) for d in degrees], axis=1)
			needed = check_exit_inverse(dc, mi)[:, None]
			rows.append(-(degrees[None, :] * (gain - needed)))
			bounds.append(np.zeros(tunnel_points))
			owners += [k] * tunnel_points
	mse = _mse_matrix(degrees, variance, required)
	rows.append(mse)
	bounds.append(limits)
	owners += list(range(variance.size))
	return np.vstack(rows), np.concatenate(bounds), np.array(owners)


def _meets_limits(fractions, degrees, dc, variance, limits, check_points: int = config.LP_CHECK_POINTS) -> bool:
	"""Whether BP on the node mixture reaches every MSE limit under the GA.

	BP climbs to the required check-to-variable MI exactly when the variable
	EXIT curve stays above the inverse check curve up to that MI.
	"""
	support = fractions > _MASS_FLOOR
	degrees, fractions = degrees[support], fractions[support] / fractions[support].sum()
	required = _required_mi(fractions, degrees, variance, limits)
	if np.any(_mse_matrix(degrees, variance, required) @ fractions > limits * (1 + 1e-9)):
		return False
	mi = required[:, None] * np.linspace(0.0, 1.0, check_points)[None, :]
	needed = check_exit_inverse(dc, mi)
	gap = sum(
		d * f * (variable_exit(int(d), mi, variance[:, None]) - needed)
		for d, f in zip(degrees, fractions, strict=True)
	)
	return bool(np.all(gap >= -1e-12))


def _mixture_starts(degrees, feasible, steps: int = config.LP_PAIR_STEPS) -> list[np.ndarray]:
	"""Feasible two-degree mixtures, each with the largest lower-degree fraction.

	Pairs are (2, d) and (d-1, d); feasibility is taken to fall as weight moves
	to the lower degree.
	"""
	pairs = sorted({(2, int(d)) for d in degrees[1:]} | {(int(d) - 1, int(d)) for d in degrees[1:]})
	found = []
	for low, high in pairs:

		def mix(t, low=low, high=high):
			fractions = np.zeros(degrees.size)
			fractions[low - 2] = t
			fractions[high - 2] += 1.0 - t
			return fractions

		if not feasible(mix(0.0)):
			continue
		if feasible(mix(1.0)):
			found.append(mix(1.0))
			continue
		lower, upper = 0.0, 1.0
		for _ in range(steps):
			middle = 0.5 * (lower + upper)
			if feasible(mix(middle)):
				lower = middle
			else:
				upper = middle
		found.append(mix(lower))
	return found


def design_degrees(
	cfg: SystemConfig,
	c: Constellation,
	target: TransferCurve | None = None,
	max_dv: int = config.LP_MAX_DV,
	dc: int = 6,
	margin: float = config.MATCH_MARGIN,
	grid_points: int = config.LP_GRID_POINTS,
	tunnel_points: int = config.LP_TUNNEL_POINTS,
	max_rounds: int = config.LP_MAX_ROUNDS,
) -> DesignResult:
	"""Maximize the design rate with the GA transfer below target - margin.

	The LP is linearized at the MI the current mixture needs and re-solved
	around each new solution. Chains start from the all-degree-3 mixture and
	from the best feasible two-degree mixtures; every candidate is verified
	against the GA limits and the best verified one is returned.
	"""
	if max_dv < 2 or dc < 3:
		raise DomainError(f'need max_dv >= 2 and dc >= 3, got {max_dv}, {dc}')
	if max_rounds < 1:
		raise DomainError(f'need at least one LP round, got {max_rounds}')
	if target is None:
		target = omega_star(cfg, c)
	rhos, limits = _constraint_points(cfg, c, target, margin, grid_points)
	variance = np.asarray(channel_llr_variance(c, rhos), dtype=float)
	degrees = np.arange(2, max_dv + 1)
	if rhos.size == 0:
		return _design_result(degrees, (degrees == 2).astype(float), dc, 1, [])

	def feasible(fractions):
		return _meets_limits(fractions, degrees, dc, variance, limits)

	mixtures = sorted(_mixture_starts(degrees, feasible), key=lambda f: f @ degrees)
	starts = [(degrees == min(3, max_dv)).astype(float), *mixtures[: config.LP_STARTS]]
	best: DesignResult | None = None
	first_rows = None
	for start in starts:
		fractions = start
		for round_index in range(1, max_rounds + 1):
			required = _required_mi(fractions, degrees, variance, limits)
			a_ub, b_ub, owners = _lp_rows(degrees, dc, variance, required, limits, tunnel_points)
			if first_rows is None:
				first_rows = a_ub, b_ub, owners
			if round_index == 1 and feasible(fractions):
				rows = _audit_rows(0, rhos, limits, required, owners, a_ub @ fractions - b_ub)
				best = _better(best, _design_result(degrees, fractions, dc, 0, rows))
			result = linprog(
				degrees / dc,
				A_ub=a_ub,
				b_ub=b_ub,
				A_eq=np.ones((1, degrees.size)),
				b_eq=[1.0],
				bounds=[(0.0, 1.0)] * degrees.size,
				method='highs',
			)
			if result.status != 0:
				_logger.notice('LP', f'round {round_index}: LP infeasible ({result.message})')
				break
			candidate = np.clip(result.x, 0.0, None)
			candidate /= candidate.sum()
			if not feasible(candidate):
				_logger.notice('LP', f'round {round_index}: solution misses the GA limits')
				break
			rows = _audit_rows(round_index, rhos, limits, required, owners, a_ub @ candidate - b_ub)
			design = _design_result(degrees, candidate, dc, round_index, rows)
			_logger.log_iteration('LP', {'round': round_index, 'rate': design.rate})
			best = _better(best, design)
			if np.max(np.abs(candidate - fractions)) < 1e-7:
				break
			fractions = candidate
	if best is None:
		_report_infeasible(*first_rows, rhos, degrees.size)
	return best


def _better(best: DesignResult | None, design: DesignResult) -> DesignResult:
	return design if best is None or design.rate > best.rate + 1e-12 else best


def optimize_degrees(
	cfg: SystemConfig,
	c: Constellation,
	target: TransferCurve | None = None,
	max_dv: int = config.LP_MAX_DV,
	dc: int = 6,
	margin: float = config.MATCH_MARGIN,
) -> DegreeDistribution:
	return design_degrees(cfg, c, target, max_dv=max_dv, dc=dc, margin=margin).degrees


def _design_result(degrees, fractions, dc, rounds, rows) -> DesignResult:
	nodes = {int(d): float(f) for d, f in zip(degrees, fractions, strict=True) if f > _MASS_FLOOR}
	dd = DegreeDistribution.from_variable_nodes(nodes, dc)
	return DesignResult(dd, dd.design_rate, rounds, rows)


def _audit_rows(round_index, rhos, limits, required, owners, slack) -> list[dict]:
	rows = []
	for k, rho in enumerate(rhos):
		mine = slack[owners == k]
		rows.append(
			{
				'round': round_index,
				'rho': float(rho),
				'mse_limit': float(limits[k]),
				'required_mi': float(required[k]),
				'max_row_slack': float(mine.max()) if mine.size else 0.0,
			}
		)
	return rows


def _report_infeasible(a_ub, b_ub, owners, rhos, width):
	"""Solve the slack problem min t s.t. A L - t <= b and raise with the worst rho."""
	count = a_ub.shape[0]
	scale = np.maximum(np.abs(a_ub).max(axis=1), 1e-12)
	relaxed = np.hstack([a_ub / scale[:, None], -np.ones((count, 1))])
	objective = np.zeros(width + 1)
	objective[-1] = 1.0
	result = linprog(
		objective,
		A_ub=relaxed,
		b_ub=b_ub / scale,
		A_eq=np.append(np.ones(width), 0.0)[None, :],
		b_eq=[1.0],
		bounds=[(0.0, 1.0)] * width + [(0.0, None)],
		method='highs',
	)
	if result.status != 0:
		raise InfeasibleDesignError(float(rhos[0]), math.inf)
	violation = relaxed[:, :-1] @ result.x[:-1] - b_ub / scale
	worst = int(np.argmax(violation))
	raise InfeasibleDesignError(float(rhos[owners[worst]]), float(violation[worst]))


def optimize_for_rate(
	cfg: SystemConfig,
	c: Constellation,
	target_rate: float,
	siso: bool = False,
	max_dv: int = config.LP_MAX_DV,
	dc_choices: tuple[int, ...] = (5, 6, 7, 8),
	margin: float = config.MATCH_MARGIN,
	db_range: tuple[float, float] = config.THRESHOLD_DB_RANGE,
	tol: float = 0.01,
) -> tuple[DegreeDistribution, float]:
	"""Lowest snr (dB) at which the LP reaches target_rate, and the design found there.

	With siso=True the target is siso_target instead of omega_star.
	"""

	def best_design(snr_db):
		point = cfg.with_snr_db(snr_db)
		try:
			target = siso_target(point, c, margin) if siso else omega_star(point, c)
		except SingleCrossingError:
			return None
		designs = []
		for dc in dc_choices:
			try:
				designs.append(design_degrees(point, c, target, max_dv=max_dv, dc=dc, margin=margin))
			except InfeasibleDesignError:
				continue
		return max(designs, key=lambda design: design.rate, default=None)

	def reaches(design):
		return design is not None and design.rate >= target_rate

	low, high = db_range
	best = best_design(high)
	if not reaches(best):
		raise InfeasibleDesignError(cfg.with_snr_db(high).snr, target_rate - (best.rate if best else 0.0))
	while high - low > tol:
		middle = 0.5 * (low + high)
		design = best_design(middle)
		if reaches(design):
			high, best = middle, design
		else:
			low = middle
	_logger.notice('LP', f'rate {target_rate} reached at {high:.3f} dB with {best.degrees.variable_edges}')
	return best.degrees, high


def write_constraint_csv(path: str | Path, design: DesignResult) -> Path:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	fieldnames = ['round', 'rho', 'mse_limit', 'required_mi', 'max_row_slack']
	with path.open('w', newline='') as handle:
		writer = csv.DictWriter(handle, fieldnames=fieldnames)
		writer.writeheader()
		writer.writerows(design.constraint_rows)
	return path


def surrogate_threshold(
	cfg: SystemConfig, dd: DegreeDistribution, c: Constellation, margin: float = config.MATCH_MARGIN
) -> float | None:
	"""Predicted coded-AMP threshold (dB) of an ensemble from its GA transfer curve."""
	return predicted_threshold(cfg, surrogate_transfer_curve(dd, c), margin)
