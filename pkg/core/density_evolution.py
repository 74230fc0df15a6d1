"""
Gaussian-approximation density evolution for BP decoding of LDPC codes.

Messages are modelled as consistent Gaussian LLRs (variance s^2, mean s^2/2)
and tracked through their mutual information with the code bit, via the usual
J(sigma) curve fit. Only BPSK and Gray QPSK are covered: both reduce to
independent binary channels per coded bit.
"""

from __future__ import annotations

import math
from functools import cache

import numpy as np
from numpy.polynomial.hermite import hermgauss

from models.code import DegreeDistribution
from models.constellation import Constellation
from models.curve import TransferCurve, log_grid

from . import config
from .errors import UnsupportedError

MI_CEILING = 1.0 - 1e-10
EXIT_TOL = 1e-12
EXIT_MAX_ITER = 5000


def j_function(sigma):
	"""Mutual information of a consistent Gaussian LLR with standard deviation sigma."""
	s = np.asarray(sigma, dtype=float)
	low = -0.0421061 * s**3 + 0.209252 * s**2 - 0.00640081 * s
	with np.errstate(over='ignore'):
		high = 1.0 - np.exp(0.00181491 * s**3 - 0.142675 * s**2 - 0.0822054 * s + 0.0549608)
	out = np.clip(np.where(s <= 1.6363, low, np.where(s < 10, high, 1.0)), 0.0, 1.0)
	return float(out) if out.ndim == 0 else out


def j_inverse(mi):
	x = np.clip(np.asarray(mi, dtype=float), 0.0, MI_CEILING)
	low = 1.09542 * x**2 + 0.214217 * x + 2.33727 * np.sqrt(x)
	high = -0.706692 * np.log(0.386013 * (1.0 - x)) + 1.75017 * x
	out = np.where(x <= 0.3646, low, high)
	return float(out) if out.ndim == 0 else out


@cache
def _real_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
	t, w = hermgauss(order)
	return t, w / math.sqrt(math.pi)


def bit_mmse(llr_variance, order: int = 64):
	"""1 - E[tanh(L/2)] for L ~ N(s^2/2, s^2); the MSE of a +-1 bit estimate."""
	s2 = np.asarray(llr_variance, dtype=float)
	t, w = _real_nodes(order)
	s = np.sqrt(s2)[..., None]
	samples = s2[..., None] / 2.0 + s * math.sqrt(2.0) * t
	out = 1.0 - np.tanh(samples / 2.0) @ w
	out = np.clip(out, 0.0, 1.0)
	return float(out) if out.ndim == 0 else out


def antipodal_bits(c: Constellation) -> int:
	"""Coded bits that c carries as independent antipodal components; 0 if it does not.

	BPSK carries one bit on the real axis, Gray QPSK one bit per axis.
	"""
	if c.is_gaussian or c.size not in (2, 4) or not np.allclose(c.priors, 1.0 / c.size):
		return 0
	signs = 1.0 - 2.0 * c.bit_labels
	if c.size == 2:
		return 1 if np.allclose(c.points, c.points[0].real * signs[:, 0]) else 0
	amplitude = 1.0 / math.sqrt(2.0)
	real = np.allclose(c.points.real, np.sign(c.points[0].real) * amplitude * signs[:, 0])
	imag = np.allclose(c.points.imag, np.sign(c.points[0].imag) * amplitude * signs[:, 1])
	return 2 if real and imag else 0


def channel_llr_variance(c: Constellation, rho):
	"""Variance of the coded-bit channel LLR at pseudo-channel SINR rho."""
	bits = antipodal_bits(c)
	if bits == 0:
		raise UnsupportedError(f'Gaussian-approximation design needs BPSK or Gray QPSK geometry, not {c.label}')
	# Per-axis amplitude squared is 1/bits; noise per axis has variance 1/(2 rho)
	return 8.0 * np.asarray(rho, dtype=float) / bits


def variable_exit(degree: int, mi_in, channel_variance):
	"""Extrinsic MI out of a degree-`degree` variable node."""
	a = j_inverse(mi_in)
	return j_function(np.sqrt((degree - 1) * a**2 + channel_variance))


def check_exit(degree: int, mi_in):
	return 1.0 - j_function(math.sqrt(degree - 1) * j_inverse(1.0 - np.asarray(mi_in, dtype=float)))


def check_exit_inverse(degree: int, mi_out):
	"""Variable-to-check MI needed for check output `mi_out`."""
	return 1.0 - j_function(j_inverse(1.0 - np.asarray(mi_out, dtype=float)) / math.sqrt(degree - 1))


def node_mse(degree: int, mi_in, channel_variance):
	"""Per-bit MSE of the APP estimate at a degree-`degree` node."""
	return bit_mmse(channel_variance + degree * j_inverse(mi_in) ** 2)


def exit_fixed_point(dd: DegreeDistribution, channel_variance) -> np.ndarray:
	"""Check-to-variable MI reached by BP from zero, elementwise over channel variances."""
	variance = np.atleast_1d(np.asarray(channel_variance, dtype=float))
	x = np.zeros_like(variance)
	for _ in range(EXIT_MAX_ITER):
		to_checks = sum(frac * variable_exit(deg, x, variance) for deg, frac in dd.variable_edges.items())
		x_next = sum(frac * check_exit(deg, to_checks) for deg, frac in dd.check_edges.items())
		x_next = np.maximum(x_next, x)
		if np.max(x_next - x) < EXIT_TOL:
			return x_next
		x = x_next
	return x


def surrogate_mse(dd: DegreeDistribution, c: Constellation, rho):
	variance = np.atleast_1d(channel_llr_variance(c, rho))
	x = exit_fixed_point(dd, variance)
	nodes = dd.variable_node_fractions()
	return sum(frac * node_mse(deg, x, variance) for deg, frac in nodes.items())


def surrogate_transfer_curve(
	dd: DegreeDistribution, c: Constellation, rho_grid: np.ndarray | None = None
) -> TransferCurve:
	"""Predicted omega_C of the BP decoder for an ensemble, from GA density evolution."""
	grid = (
		log_grid(config.GRID_MIN, config.GRID_MAX, 600)
		if rho_grid is None
		else np.asarray(rho_grid, dtype=float)
	)
	values = np.minimum.accumulate(surrogate_mse(dd, c, grid))
	return TransferCurve(
		grid,
		values,
		left_value=1.0,
		right_rule='bound',
		label=f'omega_GA[{c.label}]',
	)
