"""
Scalar state evolution of AMP: rho^t = phi(v^t), v^{t+1} = omega(rho^t).

omega is any callable transfer function (a TransferCurve, omega_s bound to a
constellation, or a measured decoder curve).
"""

from __future__ import annotations

import csv
import math
from collections.abc import Callable
from pathlib import Path

import numpy as np
from scipy.optimize import bisect

from models.system import SePoint, SystemConfig

from . import config
from .debug import DebugLogger
from .errors import DomainError, IterationLimitError

Transfer = Callable[[float], float]

_logger = DebugLogger('se')


def phi(cfg: SystemConfig, v: float) -> float:
	"""Linear-detector transfer: SINR after the matched filter for input MSE v."""
	if v < 0 or math.isnan(v):
		raise DomainError(f'MSE must be non-negative, got {v}')
	denominator = cfg.beta * v + cfg.sigma2
	return math.inf if denominator == 0 else 1.0 / denominator


def phi_inv(cfg: SystemConfig, rho: float) -> float:
	if not (0 < rho <= cfg.snr) or math.isnan(rho):
		raise DomainError(f'rho={rho} outside (0, snr={cfg.snr:g}]')
	return max((1.0 / rho - cfg.sigma2) / cfg.beta, 0.0)


def phi_inv_array(cfg: SystemConfig, rho: np.ndarray) -> np.ndarray:
	return np.maximum((1.0 / rho - cfg.sigma2) / cfg.beta, 0.0)


def _require_finite_snr(cfg: SystemConfig):
	if math.isinf(cfg.snr):
		raise DomainError('state evolution needs a finite snr (sigma2 > 0)')


def se_fixed_point(
	cfg: SystemConfig,
	omega: Transfer,
	step_tol: float = config.SE_STEP_TOL,
	max_iter: int = config.SE_MAX_ITER,
) -> tuple[float, float, list[SePoint]]:
	"""Iterate SE from v = 1 to its fixed point.

	Returns (rho*, v*, trace); trace[t] holds (rho^t, v^t) and the last entry
	is the fixed point itself.
	"""
	_require_finite_snr(cfg)
	v = 1.0
	trace: list[SePoint] = []
	for iteration in range(max_iter):
		rho = phi(cfg, v)
		trace.append(SePoint(rho, v))
		v_next = float(omega(rho))
		_logger.start_step(iteration)
		_logger.log_iteration('SE', {'rho': rho, 'v': v_next})
		if abs(v_next - v) < step_tol:
			rho_star = phi(cfg, v_next)
			trace.append(SePoint(rho_star, v_next))
			_logger.notice('SE', f'converged after {iteration + 1} iterations: rho*={rho_star:.6g}, v*={v_next:.6g}')
			return rho_star, v_next, trace
		v = v_next
	raise IterationLimitError(f'state evolution did not converge within {max_iter} iterations', trace)


def se_trace(cfg: SystemConfig, omega: Transfer, iterations: int) -> list[SePoint]:
	"""Fixed-length SE trajectory (rho^t, v^t) for t = 0..iterations."""
	_require_finite_snr(cfg)
	v = 1.0
	trace = []
	for _ in range(iterations + 1):
		rho = phi(cfg, v)
		trace.append(SePoint(rho, v))
		v = float(omega(rho))
	return trace


def single_crossing_check(
	cfg: SystemConfig,
	omega: Transfer,
	points: int = config.CROSSING_GRID_POINTS,
	rtol: float = config.BISECT_RTOL,
	rho_min: float | None = None,
) -> tuple[bool, list[float]]:
	"""Scan g = omega - phi_inv on a log grid over (0, snr] for sign changes.

	A crossing is a change from g < 0 (below) to g > 0 (above) or the reverse;
	touching zero does not count. Returns (exactly one crossing, crossings).
	"""
	_require_finite_snr(cfg)
	snr = cfg.snr
	lower = rho_min if rho_min is not None else min(phi(cfg, 1.0), snr) / 2.0
	grid = np.geomspace(lower, snr, points)
	values = _curve_values(omega, grid)
	gaps = values - phi_inv_array(cfg, grid)
	signs = np.sign(gaps)
	crossings = []
	last_index = None
	for index, sign in enumerate(signs):
		if sign == 0:
			continue
		if last_index is not None and sign != signs[last_index]:
			crossings.append(_refine(cfg, omega, grid[last_index], grid[index], rtol))
		last_index = index
	holds = len(crossings) == 1
	if not holds:
		_logger.notice('SE', f'single crossing fails: {len(crossings)} crossings')
	return holds, crossings


def _curve_values(omega: Transfer, grid: np.ndarray) -> np.ndarray:
	interpolate = getattr(omega, 'interpolate', None)
	if interpolate is not None:
		return np.asarray(interpolate(grid), dtype=float)
	return np.array([float(omega(rho)) for rho in grid])


def _refine(cfg: SystemConfig, omega: Transfer, left: float, right: float, rtol: float) -> float:
	def gap(rho):
		return float(omega(rho)) - phi_inv(cfg, min(rho, cfg.snr))

	if gap(left) * gap(right) > 0:
		# table and exact evaluation disagree on the sign near a touching point
		return math.sqrt(left * right)
	return float(bisect(gap, left, right, xtol=left * 1e-14, rtol=rtol))


def fixed_point_residual(cfg: SystemConfig, omega: Transfer, rho: float) -> float:
	return abs(float(omega(rho)) - phi_inv(cfg, min(rho, cfg.snr)))


def write_trace_csv(path: str | Path, trace: list[SePoint]) -> Path:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	with path.open('w', newline='') as handle:
		writer = csv.DictWriter(handle, fieldnames=['iter', 'rho', 'v'])
		writer.writeheader()
		for iteration, point in enumerate(trace):
			writer.writerow({'iter': iteration, 'rho': f'{point.rho:.12g}', 'v': f'{point.v:.12g}'})
	return path
