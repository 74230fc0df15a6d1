import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from core.debug import DebugLogger
from core.errors import DomainError, GridMismatchError

RIGHT_RULES = ('bound', 'zero')

# Values may overshoot [0, 1] by Monte Carlo noise or quadrature round-off
_VALUE_SLACK = 1e-9

_logger = DebugLogger('curve')


@dataclass(frozen=True, eq=False)
class TransferCurve:
	"""Sampled MSE transfer function v = omega(rho).

	Between 0 and the first grid point the curve is linear from `left_value`;
	between grid points it is linear in rho; beyond the last grid point it
	follows the 1/(1+rho) shape scaled to the last value ('bound') or is 0
	('zero'). When `exact` is set, calling the curve evaluates it pointwise
	instead of interpolating.
	"""

	rho_grid: np.ndarray
	v_values: np.ndarray
	left_value: float | None = None
	right_rule: str = 'bound'
	stderr: np.ndarray | None = None
	exact: Callable[[float], float] | None = None
	label: str = ''

	def __post_init__(self):
		grid = np.asarray(self.rho_grid, dtype=float).ravel()
		values = np.asarray(self.v_values, dtype=float).ravel()
		if grid.size < 2 or grid.size != values.size:
			raise DomainError(f'curve needs matching grid/value arrays, got {grid.size} and {values.size}')
		if grid[0] <= 0 or not np.all(np.diff(grid) > 0) or not np.all(np.isfinite(grid)):
			raise DomainError('curve grid must be positive, finite and strictly increasing')
		if np.any(values < -_VALUE_SLACK) or np.any(values > 1 + _VALUE_SLACK):
			raise DomainError(f'{self.label or "curve"}: values must lie in [0, 1]')
		if self.right_rule not in RIGHT_RULES:
			raise DomainError(f'unknown right rule {self.right_rule!r}')
		values = np.clip(values, 0.0, 1.0)
		left = float(values[0]) if self.left_value is None else float(self.left_value)
		grid.setflags(write=False)
		values.setflags(write=False)
		object.__setattr__(self, 'rho_grid', grid)
		object.__setattr__(self, 'v_values', values)
		object.__setattr__(self, 'left_value', left)
		if self.stderr is not None:
			stderr = np.asarray(self.stderr, dtype=float).ravel()
			if stderr.size != grid.size:
				raise DomainError('stderr must match the grid')
			object.__setattr__(self, 'stderr', stderr)

	def __len__(self) -> int:
		return self.rho_grid.size

	@property
	def rho_max(self) -> float:
		return float(self.rho_grid[-1])

	def __call__(self, rho):
		"""Evaluate at scalar or array rho, exactly when possible."""
		if self.exact is None:
			return self.interpolate(rho)
		if np.ndim(rho) == 0:
			return float(self.exact(float(rho)))
		return np.array([self.exact(float(r)) for r in np.asarray(rho).ravel()]).reshape(np.shape(rho))

	def interpolate(self, rho):
		rho_arr = np.asarray(rho, dtype=float)
		if np.any(rho_arr < 0) or np.any(np.isnan(rho_arr)):
			raise DomainError('rho must be non-negative')
		grid = np.concatenate(([0.0], self.rho_grid))
		values = np.concatenate(([self.left_value], self.v_values))
		out = np.interp(rho_arr, grid, values)
		beyond = rho_arr > self.rho_max
		if np.any(beyond):
			out = np.where(beyond, self._tail(rho_arr), out)
		return float(out) if out.ndim == 0 else out

	def _tail(self, rho):
		if self.right_rule == 'zero':
			return np.zeros_like(rho)
		last_v = self.v_values[-1]
		with np.errstate(divide='ignore', invalid='ignore'):
			return last_v * (1.0 + self.rho_max) / (1.0 + rho)

	def area(self, upper: float | None = None) -> float:
		"""Integral of the curve over [0, upper] in nats; None or inf means [0, inf).

		Finite limits past the grid add the analytic tail. Infinite limits
		truncate at the last grid point and report a non-zero truncated value.
		"""
		if upper is not None and (math.isnan(upper) or upper < 0):
			raise DomainError(f'integral limit must be non-negative, got {upper}')
		if upper == 0:
			return 0.0
		infinite = upper is None or math.isinf(upper)
		grid = np.concatenate(([0.0], self.rho_grid))
		values = np.concatenate(([self.left_value], self.v_values))
		if not infinite and upper < self.rho_max:
			keep = grid < upper
			grid = np.append(grid[keep], upper)
			values = np.append(values[keep], self.interpolate(upper))
		total = float(np.trapezoid(values, grid))
		if infinite:
			if self.right_rule == 'bound' and self.v_values[-1] > 0:
				_logger.notice(
					'RATE',
					f'{self.label or "curve"}: infinite integral truncated at rho={self.rho_max:g} '
					f'where v={self.v_values[-1]:.3g}',
				)
			return total
		if upper > self.rho_max and self.right_rule == 'bound':
			total += float(self.v_values[-1] * (1.0 + self.rho_max) * math.log((1.0 + upper) / (1.0 + self.rho_max)))
		return total

	def same_grid(self, other: 'TransferCurve', rtol: float = 1e-12) -> bool:
		return self.rho_grid.size == other.rho_grid.size and bool(
			np.allclose(self.rho_grid, other.rho_grid, rtol=rtol, atol=0.0)
		)

	def require_same_grid(self, other: 'TransferCurve'):
		if not self.same_grid(other):
			raise GridMismatchError(
				f'curves {self.label or "?"} and {other.label or "?"} are sampled on different grids'
			)

	def is_non_increasing(self, tol: float = 0.0) -> bool:
		"""Monotonicity check; tol scales the allowed rise (absolute, or per point stderr)."""
		rises = np.diff(self.v_values)
		if self.stderr is not None:
			allowed = tol * np.hypot(self.stderr[:-1], self.stderr[1:]) + 1e-12
		else:
			allowed = tol + 1e-12
		return bool(np.all(rises <= allowed))

	def with_values(self, values, label: str | None = None, right_rule: str | None = None) -> 'TransferCurve':
		return TransferCurve(
			self.rho_grid,
			values,
			right_rule=right_rule or self.right_rule,
			label=self.label if label is None else label,
		)


def log_grid(rho_min: float, rho_max: float, points: int) -> np.ndarray:
	if not (0 < rho_min < rho_max) or points < 2:
		raise DomainError(f'bad grid [{rho_min}, {rho_max}] with {points} points')
	return np.geomspace(rho_min, rho_max, points)
