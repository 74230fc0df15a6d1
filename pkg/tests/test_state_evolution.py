"""Tests for the linear-detector transfer, SE iteration and the single-crossing scan."""

import csv
import math

import numpy as np
import pytest

from core.errors import DomainError, IterationLimitError
from core.scalar_mmse import omega_curve, omega_s
from core.state_evolution import (
	fixed_point_residual,
	phi,
	phi_inv,
	se_fixed_point,
	se_trace,
	single_crossing_check,
	write_trace_csv,
)
from models.constellation import gaussian, preset
from models.system import SystemConfig

GOLDEN = (math.sqrt(5) - 1) / 2


def test_phi_examples():
	assert phi(SystemConfig(beta=1, sigma2=0.5), 0.5) == pytest.approx(1.0)
	assert phi(SystemConfig(beta=2, sigma2=0.1), 1.0) == pytest.approx(1 / 2.1)
	cfg = SystemConfig(beta=1.5, sigma2=0.2)
	assert phi(cfg, 0.0) == pytest.approx(cfg.snr)


def test_phi_inv_examples():
	assert phi_inv(SystemConfig(beta=1, sigma2=0.5), 1.0) == pytest.approx(0.5)
	assert phi_inv(SystemConfig(beta=1.5, sigma2=0.2), 0.5) == pytest.approx(1.2)
	cfg = SystemConfig(beta=1, sigma2=0.5)
	assert phi_inv(cfg, cfg.snr) == 0.0


@pytest.mark.parametrize('rho', [0.0, -1.0, 2.5])
def test_phi_inv_outside_range(rho):
	with pytest.raises(DomainError):
		phi_inv(SystemConfig(beta=1, sigma2=0.5), rho)


def test_phi_inverse_round_trip():
	cfg = SystemConfig(beta=0.7, sigma2=0.05)
	for rho in np.geomspace(1e-3, cfg.snr, 25):
		assert phi(cfg, phi_inv(cfg, rho)) == pytest.approx(rho, rel=1e-12)


def test_gaussian_fixed_point_is_golden_ratio():
	cfg = SystemConfig(beta=1, sigma2=1)
	rho_star, v_star, trace = se_fixed_point(cfg, omega_curve(gaussian()))
	assert rho_star == pytest.approx(GOLDEN, abs=1e-9)
	assert v_star == pytest.approx(GOLDEN, abs=1e-9)
	assert trace[0].v == 1.0
	assert trace[-1].rho == pytest.approx(rho_star)


def test_vanishing_load_gives_snr():
	cfg = SystemConfig(beta=1e-9, sigma2=0.25)
	rho_star, _, _ = se_fixed_point(cfg, omega_curve(preset('qpsk')))
	assert rho_star == pytest.approx(4.0, rel=1e-6)


def test_qpsk_fixed_point_matches_crossing_scan():
	cfg = SystemConfig.from_snr_db(1.5, 5.38)
	omega = omega_curve(preset('qpsk'))
	rho_star, v_star, trace = se_fixed_point(cfg, omega)
	holds, crossings = single_crossing_check(cfg, omega)
	assert holds
	assert rho_star == pytest.approx(crossings[0], rel=1e-6)
	assert fixed_point_residual(cfg, omega, rho_star) < 1e-10
	assert v_star == pytest.approx(omega_s(preset('qpsk'), rho_star), abs=1e-10)
	rhos = np.array([point.rho for point in trace])
	vs = np.array([point.v for point in trace])
	assert np.all(np.diff(vs) <= 1e-12)
	assert np.all(np.diff(rhos) >= -1e-12 * rhos[1:])


def test_iteration_cap_carries_trace():
	cfg = SystemConfig(beta=1, sigma2=0.1)
	with pytest.raises(IterationLimitError) as info:
		se_fixed_point(cfg, omega_curve(preset('bpsk')), max_iter=3)
	assert len(info.value.trace) == 3


def test_noiseless_config_is_rejected():
	with pytest.raises(DomainError):
		se_fixed_point(SystemConfig(beta=1, sigma2=0), omega_curve(gaussian()))


def test_se_trace_has_fixed_length():
	cfg = SystemConfig.from_snr_db(1.0, 10.0)
	trace = se_trace(cfg, omega_curve(preset('qpsk')), 7)
	assert len(trace) == 8
	assert trace[0].v == 1.0
	assert trace[0].rho == pytest.approx(phi(cfg, 1.0))


@pytest.mark.parametrize('beta, sigma2', [(0.5, 0.1), (1.0, 1.0), (2.0, 0.01)])
def test_gaussian_has_single_crossing(beta, sigma2):
	holds, crossings = single_crossing_check(SystemConfig(beta=beta, sigma2=sigma2), omega_curve(gaussian()))
	assert holds
	assert len(crossings) == 1


def test_qpsk_single_crossing_at_ten_db():
	holds, _ = single_crossing_check(SystemConfig.from_snr_db(1.0, 10.0), omega_curve(preset('qpsk')))
	assert holds


def test_zero_transfer_has_no_crossing():
	holds, crossings = single_crossing_check(SystemConfig(beta=1, sigma2=0.1), lambda rho: 0.0)
	assert not holds
	assert crossings == []


def test_multiple_crossings_are_located():
	cfg = SystemConfig(beta=1, sigma2=0.01)

	def omega(rho):
		return phi_inv(cfg, min(rho, cfg.snr)) + 1e-3 * (rho - 1) * (rho - 3) * (rho - 10)

	holds, crossings = single_crossing_check(cfg, omega)
	assert not holds
	assert crossings == pytest.approx([1.0, 3.0, 10.0], rel=1e-8)


def test_trace_csv(tmp_path):
	cfg = SystemConfig(beta=1, sigma2=1)
	_, _, trace = se_fixed_point(cfg, omega_curve(gaussian()))
	path = write_trace_csv(tmp_path / 'trace.csv', trace)
	with path.open(newline='') as handle:
		rows = list(csv.DictReader(handle))
	assert len(rows) == len(trace)
	assert list(rows[0]) == ['iter', 'rho', 'v']
	assert float(rows[-1]['v']) == pytest.approx(GOLDEN, abs=1e-9)
