"""Exception hierarchy shared by the numerical core and the harness."""

from __future__ import annotations

from typing import Any


class AmpToolkitError(Exception):
	"""Root of every error raised on purpose by this package."""


class DomainError(AmpToolkitError, ValueError):
	pass


class DimensionError(AmpToolkitError, ValueError):
	pass


class ConstructionError(AmpToolkitError, ValueError):
	pass


class GridMismatchError(AmpToolkitError, ValueError):
	pass


class UnsupportedError(AmpToolkitError, ValueError):
	pass


class IterationLimitError(AmpToolkitError, RuntimeError):
	def __init__(self, message: str, trace: list[Any]) -> None:
		super().__init__(message)
		self.trace = trace


class SingleCrossingError(AmpToolkitError, ValueError):
	def __init__(self, crossings: list[float]) -> None:
		listed = ', '.join(f'{rho:.6g}' for rho in crossings)
		super().__init__(f'single-crossing property violated; crossings at rho = [{listed}]')
		self.crossings = list(crossings)


class NumericBlowupError(AmpToolkitError, ArithmeticError):
	def __init__(self, message: str, trace: Any) -> None:
		super().__init__(message)
		self.trace = trace


class InfeasibleDesignError(AmpToolkitError, RuntimeError):
	def __init__(self, rho: float, violation: float) -> None:
		super().__init__(
			f'degree LP infeasible; most violated grid point rho={rho:.6g} '
			f'(violation {violation:.3g})'
		)
		self.rho = rho
		self.violation = violation


class SpecError(AmpToolkitError, ValueError):
	"""Invalid experiment specification; `fields` maps each bad field to a reason."""

	def __init__(self, fields: dict[str, str]) -> None:
		detail = '; '.join(f'{name}: {reason}' for name, reason in fields.items())
		super().__init__(f'invalid experiment spec ({detail})')
		self.fields = dict(fields)
