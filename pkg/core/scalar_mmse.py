"""
Scalar AWGN quantities for a given input distribution.

The scalar channel is y = sqrt(rho) x + z with z ~ CN(0, 1), or equivalently
r = x + h with h ~ CN(0, 1/rho). Information quantities are in nats unless a
function name or docstring says bits.
"""

from __future__ import annotations

import math
from functools import cache, partial

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import logsumexp, softmax

from models.constellation import Constellation
from models.curve import TransferCurve, log_grid

from . import config
from .errors import DomainError

# Rows of noise samples per Monte Carlo chunk
_MC_CHUNK = 1 << 14


def check_rho(rho: float) -> float:
	rho = float(rho)
	if not math.isfinite(rho) or rho < 0:
		raise DomainError(f'SINR must be finite and non-negative, got {rho}')
	return rho


def prior_variance(c: Constellation) -> float:
	if c.is_gaussian:
		return 1.0
	mean = np.sum(c.priors * c.points)
	return float(np.sum(c.priors * np.abs(c.points - mean) ** 2))


def draw_symbols(c: Constellation, n: int, rng: np.random.Generator) -> np.ndarray:
	"""IID symbols from the prior (CN(0,1) for the Gaussian marker)."""
	if c.is_gaussian:
		return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
	return c.points[rng.choice(c.size, size=n, p=c.priors)]


def map_bits(c: Constellation, bits: np.ndarray) -> np.ndarray:
	"""Map a bit stream (length a multiple of bits_per_symbol) to symbols."""
	width = c.bits_per_symbol
	bits = np.asarray(bits, dtype=np.int64).ravel()
	if width == 0 or bits.size % width:
		raise DomainError(f'{c.label}: cannot map {bits.size} bits at {width} bits per symbol')
	weights = 1 << np.arange(width - 1, -1, -1)
	return c.points[bits.reshape(-1, width) @ weights]


def eta(c: Constellation, r, rho: float):
	"""Posterior mean and variance of x given r = x + CN(0, 1/rho).

	Works elementwise on arrays; scalar input gives scalar output.
	"""
	rho = check_rho(rho)
	r_arr = np.asarray(r, dtype=complex)
	if not np.all(np.isfinite(r_arr)):
		raise DomainError('observation must be finite')
	if c.is_gaussian:
		mean = r_arr * (rho / (1.0 + rho))
		var = np.full(r_arr.shape, 1.0 / (1.0 + rho))
	else:
		flat = r_arr.reshape(-1, 1)
		log_weights = np.log(c.priors)[None, :] - rho * np.abs(flat - c.points[None, :]) ** 2
		weights = softmax(log_weights, axis=1)
		mean = weights @ c.points
		var = np.sum(weights * np.abs(c.points[None, :] - mean[:, None]) ** 2, axis=1)
		mean = mean.reshape(r_arr.shape)
		var = var.reshape(r_arr.shape)
	if r_arr.ndim == 0:
		return complex(mean), float(var)
	return mean, var


@cache
def _complex_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
	"""Tensor Gauss-Hermite rule for z ~ CN(0, 1)."""
	t, w = hermgauss(order)
	z = (t[:, None] + 1j * t[None, :]).ravel()
	weights = (w[:, None] * w[None, :]).ravel() / math.pi
	return z, weights


def omega_s(c: Constellation, rho: float, order: int = config.QUADRATURE_ORDER) -> float:
	"""Scalar MMSE E|x - E{x|y}|^2 of y = sqrt(rho) x + z."""
	rho = check_rho(rho)
	if c.is_gaussian:
		return 1.0 / (1.0 + rho)
	if rho == 0:
		return prior_variance(c)
	if c.size > config.MC_FALLBACK_SIZE:
		return _omega_monte_carlo(c, rho)
	z, weights = _complex_nodes(order)
	r = c.points[:, None] + z[None, :] / math.sqrt(rho)
	mean, _ = eta(c, r, rho)
	errors = np.abs(c.points[:, None] - mean) ** 2
	value = float(c.priors @ (errors @ weights))
	return min(max(value, 0.0), 1.0)


def _omega_monte_carlo(
	c: Constellation, rho: float, samples: int = config.MC_SAMPLES, seed: int = config.MC_SEED
) -> float:
	rng = np.random.default_rng(seed)
	total = 0.0
	remaining = samples
	while remaining > 0:
		size = min(remaining, _MC_CHUNK)
		x = draw_symbols(c, size, rng)
		noise = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2 * rho)
		mean, _ = eta(c, x + noise, rho)
		total += float(np.sum(np.abs(x - mean) ** 2))
		remaining -= size
	return total / samples


def mutual_information(c: Constellation, rho: float, order: int = config.QUADRATURE_ORDER) -> float:
	"""I(x; sqrt(rho) x + z) in nats by direct quadrature."""
	rho = check_rho(rho)
	if c.is_gaussian:
		return math.log1p(rho)
	if rho == 0:
		return 0.0
	z, weights = _complex_nodes(order)
	scale = math.sqrt(rho)
	# exponent[k, q, j] = -(|sqrt(rho)(s_k - s_j) + z_q|^2 - |z_q|^2)
	diff = scale * (c.points[:, None] - c.points[None, :])
	shifted = diff[:, None, :] + z[None, :, None]
	exponent = -(np.abs(shifted) ** 2 - np.abs(z)[None, :, None] ** 2)
	log_sum = logsumexp(exponent, axis=2, b=c.priors[None, None, :])
	return float(max(-(c.priors @ (log_sum @ weights)), 0.0))


def default_grid() -> np.ndarray:
	return log_grid(config.GRID_MIN, config.GRID_MAX, config.GRID_POINTS)


def omega_curve(
	c: Constellation, grid: np.ndarray | None = None, order: int = config.QUADRATURE_ORDER
) -> TransferCurve:
	"""omega_S tabulated on a log grid, evaluating exactly when called pointwise.

	The default grid is computed once per constellation.
	"""
	if grid is None:
		return _default_curve(c, order)
	return _tabulate(c, np.asarray(grid, dtype=float), order)


@cache
def _default_curve(c: Constellation, order: int) -> TransferCurve:
	return _tabulate(c, default_grid(), order)


def _tabulate(c: Constellation, grid: np.ndarray, order: int) -> TransferCurve:
	if c.is_gaussian:
		values = 1.0 / (1.0 + grid)
	else:
		values = np.array([omega_s(c, rho, order) for rho in grid])
		# quadrature round-off must not break monotonicity of the table
		values = np.minimum.accumulate(values)
	return TransferCurve(
		grid,
		values,
		left_value=prior_variance(c),
		right_rule='bound',
		exact=partial(omega_s, c, order=order),
		label=f'omega_S[{c.label}]',
	)


def siso_capacity(c: Constellation, rho_star: float, curve: TransferCurve | None = None) -> float:
	"""Constrained capacity of the scalar channel at SINR rho_star, in bits.

	Computed as the area under omega_S on [0, rho_star].
	"""
	rho_star = float(rho_star)
	if math.isnan(rho_star) or math.isinf(rho_star):
		raise DomainError(f'rho_star must be finite, got {rho_star}')
	rho_star = check_rho(rho_star)
	if c.is_gaussian:
		return math.log2(1.0 + rho_star)
	curve = curve or omega_curve(c)
	return curve.area(rho_star) / math.log(2)
