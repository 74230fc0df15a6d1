"""Tests for the Gaussian-approximation decoder model."""

import numpy as np
import pytest

from core.density_evolution import (
	antipodal_bits,
	bit_mmse,
	channel_llr_variance,
	check_exit,
	check_exit_inverse,
	exit_fixed_point,
	j_function,
	j_inverse,
	surrogate_mse,
	surrogate_transfer_curve,
)
from core.errors import UnsupportedError
from models.code import DegreeDistribution
from models.constellation import Constellation, preset

REGULAR = DegreeDistribution.regular(3, 6)


def test_j_function_limits_and_monotonicity():
	assert j_function(0.0) == 0.0
	assert j_function(20.0) == 1.0
	values = j_function(np.linspace(0.0, 12.0, 200))
	assert np.all(np.diff(values) >= 0)


def test_j_inverse_undoes_j():
	sigma = np.linspace(0.3, 6.0, 40)
	np.testing.assert_allclose(j_inverse(j_function(sigma)), sigma, rtol=0.02)


def test_check_exit_inverse():
	mi = np.linspace(0.05, 0.95, 19)
	np.testing.assert_allclose(check_exit(6, check_exit_inverse(6, mi)), mi, atol=1e-2)


def test_bit_mmse_limits():
	assert bit_mmse(0.0) == pytest.approx(1.0)
	assert bit_mmse(400.0) < 1e-6
	assert bit_mmse(1.0) > bit_mmse(4.0) > bit_mmse(16.0)


def test_channel_llr_variance_per_constellation():
	assert channel_llr_variance(preset('bpsk'), 2.0) == pytest.approx(16.0)
	assert channel_llr_variance(preset('qpsk'), 2.0) == pytest.approx(8.0)
	with pytest.raises(UnsupportedError):
		channel_llr_variance(preset('16qam'), 2.0)


def test_channel_llr_variance_follows_geometry_not_label():
	# Four points on the real line share the QPSK label but not its per-axis bits
	pam = Constellation('QPSK', np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(5.0))
	with pytest.raises(UnsupportedError):
		channel_llr_variance(pam, 2.0)
	assert antipodal_bits(pam) == 0
	flipped = Constellation('custom', -preset('qpsk').points)
	assert antipodal_bits(flipped) == 2
	assert channel_llr_variance(flipped, 2.0) == pytest.approx(8.0)
	assert antipodal_bits(Constellation('antipodal', np.array([-1.0, 1.0]))) == 1
	assert antipodal_bits(preset('8psk')) == 0
	assert antipodal_bits(preset('gaussian')) == 0


def test_regular_code_has_a_decoding_threshold():
	# (3,6) on the binary-input channel: threshold near LLR variance 5.2
	mi = exit_fixed_point(REGULAR, np.array([4.0, 6.5]))
	assert mi[0] < 0.9
	assert mi[1] > 1 - 1e-6


def test_surrogate_mse_limits():
	c = preset('bpsk')
	assert surrogate_mse(REGULAR, c, 1e-6)[0] == pytest.approx(1.0, abs=1e-4)
	assert surrogate_mse(REGULAR, c, 2.0)[0] < 1e-6


def test_surrogate_curve_is_non_increasing():
	curve = surrogate_transfer_curve(REGULAR, preset('qpsk'))
	assert curve.is_non_increasing()
	assert curve.label == 'omega_GA[QPSK]'
	assert curve(curve.rho_max) < 1e-6
