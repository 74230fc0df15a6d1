from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True, eq=False)
class ChannelInstance:
	"""One realization of y = A x + n."""

	a: np.ndarray
	x: np.ndarray
	y: np.ndarray
	noise: np.ndarray
	sigma2: float

	@property
	def n(self) -> int:
		return self.a.shape[1]

	@property
	def m(self) -> int:
		return self.a.shape[0]

	@property
	def beta(self) -> float:
		return self.n / self.m


@dataclass(frozen=True, eq=False)
class AmpState:
	"""AMP iterate: the estimate s^t plus what the next Onsager term needs.

	`divergence` is the mean denoiser derivative of the call that produced s^t;
	`r_prev` and `s_prev` are r^{t-1} and s^{t-1}.
	"""

	s: np.ndarray
	r_prev: np.ndarray
	s_prev: np.ndarray
	divergence: float
	v_hat: float
	rho_hat: float
	iter: int

	@classmethod
	def initial(cls, n: int, prior_variance: float = 1.0) -> 'AmpState':
		zeros = np.zeros(n, dtype=complex)
		return cls(zeros, zeros, zeros, 0.0, prior_variance, 0.0, 0)

	def advance(self, **changes) -> 'AmpState':
		return replace(self, **changes)
