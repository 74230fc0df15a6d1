import math
from dataclasses import dataclass, replace

from core.errors import DomainError


@dataclass(frozen=True)
class SystemConfig:
	"""Large random matrix system y = Ax + n with load beta = N/M and noise variance sigma2.

	sigma2 = 0 is accepted for noiseless instances; snr is then infinite.
	"""

	beta: float
	sigma2: float
	n: int | None = None
	m: int | None = None

	def __post_init__(self):
		if not (math.isfinite(self.beta) and self.beta > 0):
			raise DomainError(f'beta must be positive and finite, got {self.beta}')
		if not (math.isfinite(self.sigma2) and self.sigma2 >= 0):
			raise DomainError(f'sigma2 must be non-negative and finite, got {self.sigma2}')
		if (self.n is None) != (self.m is None):
			raise DomainError('n and m must be given together')
		if self.n is not None:
			if self.n <= 0 or self.m <= 0:
				raise DomainError(f'dimensions must be positive, got n={self.n}, m={self.m}')
			if not math.isclose(self.beta, self.n / self.m, rel_tol=1e-9):
				raise DomainError(f'beta={self.beta} does not match n/m={self.n}/{self.m}')

	@property
	def snr(self) -> float:
		return math.inf if self.sigma2 == 0 else 1.0 / self.sigma2

	@property
	def snr_db(self) -> float:
		return math.inf if self.sigma2 == 0 else -10.0 * math.log10(self.sigma2)

	@classmethod
	def from_snr_db(cls, beta: float, snr_db: float, n: int | None = None, m: int | None = None):
		return cls(beta=beta, sigma2=10.0 ** (-snr_db / 10.0), n=n, m=m)

	@classmethod
	def from_dims(cls, n: int, m: int, sigma2: float):
		return cls(beta=n / m, sigma2=sigma2, n=n, m=m)

	def with_snr_db(self, snr_db: float) -> 'SystemConfig':
		return replace(self, sigma2=10.0 ** (-snr_db / 10.0))

	def with_length(self, n: int) -> 'SystemConfig':
		"""Attach dimensions for signal length n, choosing m = n / beta (must be integral)."""
		m = n / self.beta
		if abs(m - round(m)) > 1e-9 * m:
			raise DomainError(f'n={n} with beta={self.beta} gives non-integral m={m}')
		return replace(self, beta=n / round(m), n=n, m=round(m))


@dataclass(frozen=True)
class SePoint:
	rho: float
	v: float
