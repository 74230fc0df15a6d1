"""Tests for the constrained capacity and the receiver rate curves."""

import csv
import math

import numpy as np
import pytest

from core.errors import DomainError, SingleCrossingError
from core.rates import (
	area_capacity_prop1,
	capacity_theorem2,
	gaussian_capacity_monte_carlo,
	omega_star,
	omega_star_area,
	rate,
	rate_amp_dec,
	rate_sweep,
	rate_turbo_lmmse,
	snr_limit,
	uncoded_fixed_point,
	write_rates_csv,
)
from core.scalar_mmse import siso_capacity
from models.constellation import gaussian, preset
from models.results import RATE_KINDS
from models.system import SystemConfig

GOLDEN = (math.sqrt(5) - 1) / 2


def _gaussian_capacity_bits(beta, sigma2, rho_star):
	zeta = 1 / (sigma2 * rho_star) - 1
	nats = (math.log1p(zeta) - zeta / (1 + zeta)) / beta + math.log1p(rho_star)
	return nats / math.log(2)


def test_gaussian_capacity_closed_form():
	cfg = SystemConfig(beta=1, sigma2=1)
	c = gaussian()
	assert uncoded_fixed_point(cfg, c) == pytest.approx(GOLDEN, rel=1e-9)
	expected = _gaussian_capacity_bits(1, 1, GOLDEN)
	assert capacity_theorem2(cfg, c) == pytest.approx(expected, rel=1e-8)
	assert rate_amp_dec(cfg, c) == pytest.approx(math.log2(1 + GOLDEN), rel=1e-8)


@pytest.mark.parametrize('name', ['bpsk', 'qpsk', '8psk', '16qam', 'gaussian'])
@pytest.mark.parametrize('beta', [0.5, 1.0, 1.5, 2.0])
def test_area_identity_on_coarse_grid(name, beta):
	c = preset(name)
	for snr_db in (-10.0, 0.0, 5.0, 10.0, 20.0):
		cfg = SystemConfig.from_snr_db(beta, snr_db)
		try:
			capacity = capacity_theorem2(cfg, c)
		except SingleCrossingError:
			continue
		assert abs(capacity - area_capacity_prop1(cfg, c)) < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize('name', ['bpsk', 'qpsk', '8psk', '16qam', 'gaussian'])
def test_area_identity_full_sweep(name):
	c = preset(name)
	for beta in (0.5, 1.0, 1.5, 2.0):
		for snr_db in range(-10, 21):
			cfg = SystemConfig.from_snr_db(beta, snr_db)
			try:
				capacity = capacity_theorem2(cfg, c)
			except SingleCrossingError:
				continue
			assert abs(capacity - area_capacity_prop1(cfg, c)) < 1e-6


@pytest.mark.parametrize(
	'cfg, name',
	[
		(SystemConfig(beta=1, sigma2=1), 'gaussian'),
		(SystemConfig.from_snr_db(1.0, 10.0), 'qpsk'),
		(SystemConfig.from_snr_db(1.5, 5.38), 'qpsk'),
	],
)
def test_area_under_matched_target_is_capacity(cfg, name):
	c = preset(name)
	assert omega_star_area(cfg, c) == pytest.approx(capacity_theorem2(cfg, c), abs=5e-3)


def test_omega_star_endpoints():
	cfg = SystemConfig(beta=1, sigma2=1)
	star = omega_star(cfg, gaussian())
	assert star(cfg.snr) == 0.0
	assert star(2 * cfg.snr) == 0.0
	assert star(1e-6) == pytest.approx(1.0, abs=1e-5)
	assert star(GOLDEN) == pytest.approx(GOLDEN, abs=1e-8)
	values = star.interpolate(star.rho_grid)
	assert np.all(np.diff(values) <= 1e-12)


def test_omega_star_needs_finite_snr():
	with pytest.raises(DomainError):
		omega_star(SystemConfig(beta=1, sigma2=0), preset('qpsk'))


def test_qpsk_rates_at_reported_operating_points():
	c = preset('qpsk')
	assert area_capacity_prop1(SystemConfig.from_snr_db(1.5, 5.38), c) == pytest.approx(1.48, abs=0.02)
	assert rate_turbo_lmmse(SystemConfig.from_snr_db(1.5, 7.99), c) == pytest.approx(1.48, abs=0.03)


@pytest.mark.parametrize('snr_db', [0.0, 5.0, 10.0, 15.0])
def test_rate_ordering(snr_db):
	cfg = SystemConfig.from_snr_db(1.5, snr_db)
	c = preset('qpsk')
	capacity = capacity_theorem2(cfg, c)
	assert 0 <= rate_amp_dec(cfg, c) <= capacity + 1e-9
	assert 0 <= rate_turbo_lmmse(cfg, c) <= capacity + 1e-6
	assert capacity <= 2 + 1e-9


def test_turbo_gap_grows_with_load():
	c = preset('qpsk')

	def gap(beta):
		cfg = SystemConfig.from_snr_db(beta, 10.0)
		return capacity_theorem2(cfg, c) - rate_turbo_lmmse(cfg, c)

	assert gap(1.5) > gap(1.0)


def test_gaussian_curves_coincide():
	points = rate_sweep(SystemConfig(beta=1.5, sigma2=1), gaussian(), [0.0, 10.0], kinds=('capacity', 'amp', 'turbo_lmmse'))
	for snr_db in (0.0, 10.0):
		values = [point.rate for point in points if point.snr_db == snr_db]
		assert max(values) - min(values) < 1e-6


def test_rates_are_monotone_in_snr():
	snrs = list(range(-10, 21, 5))
	points = rate_sweep(SystemConfig(beta=1, sigma2=1), preset('qpsk'), snrs, kinds=('capacity', 'turbo_lmmse'))
	for kind in ('capacity', 'turbo_lmmse'):
		values = np.array([point.rate for point in points if point.kind == kind])
		assert len(values) == len(snrs)
		assert np.all(np.diff(values) >= -1e-9)


def test_vanishing_load_reduces_to_scalar_channel():
	cfg = SystemConfig.from_snr_db(1e-6, 5.0)
	c = preset('qpsk')
	scalar = siso_capacity(c, cfg.snr)
	assert capacity_theorem2(cfg, c) == pytest.approx(scalar, abs=2e-3)
	assert rate_turbo_lmmse(cfg, c) == pytest.approx(scalar, abs=2e-3)


def test_sweep_order_and_empty_input():
	assert rate_sweep(SystemConfig(beta=1, sigma2=1), preset('bpsk'), []) == []
	points = rate_sweep(SystemConfig(beta=1, sigma2=1), preset('bpsk'), [5.0, -5.0])
	assert [(point.snr_db, point.kind) for point in points] == [
		(snr_db, kind) for snr_db in (5.0, -5.0) for kind in RATE_KINDS
	]
	assert all(point.rate <= 1 + 1e-9 for point in points)


def test_unknown_rate_kind():
	with pytest.raises(DomainError):
		rate(SystemConfig(beta=1, sigma2=1), preset('qpsk'), 'mystery')
	with pytest.raises(DomainError):
		rate_sweep(SystemConfig(beta=1, sigma2=1), preset('qpsk'), [0.0], kinds=('mystery',))


def test_rates_csv(tmp_path):
	points = rate_sweep(SystemConfig(beta=1, sigma2=1), preset('qpsk'), [0.0, 3.0], kinds=('capacity',))
	path = write_rates_csv(tmp_path / 'rates.csv', points)
	with path.open(newline='') as handle:
		rows = list(csv.DictReader(handle))
	assert [row['kind'] for row in rows] == ['capacity', 'capacity']
	assert float(rows[1]['rate_bits']) == pytest.approx(points[1].rate, rel=1e-9)
	assert rows[0]['error'] == ''


def test_snr_limit_inverts_the_rate():
	template = SystemConfig(beta=1.0, sigma2=1.0)
	c = preset('qpsk')
	target = capacity_theorem2(template.with_snr_db(6.0), c)
	assert snr_limit(template, c, target) == pytest.approx(6.0, abs=1e-2)
	with pytest.raises(DomainError):
		snr_limit(template, c, 2.5)


def test_gaussian_log_det_oracle():
	cfg = SystemConfig.from_snr_db(1.0, 5.0)
	mean, stderr = gaussian_capacity_monte_carlo(1.0, cfg.snr, n=128, samples=50, seed=4)
	assert mean == pytest.approx(capacity_theorem2(cfg, gaussian()), rel=0.02)
	assert stderr < 0.01


@pytest.mark.slow
@pytest.mark.parametrize('beta', [0.5, 1.0, 1.5])
@pytest.mark.parametrize('snr_db', [0.0, 5.0, 10.0])
def test_gaussian_log_det_oracle_grid(beta, snr_db):
	cfg = SystemConfig.from_snr_db(beta, snr_db)
	mean, _ = gaussian_capacity_monte_carlo(beta, cfg.snr, n=256, samples=200, seed=1)
	assert mean == pytest.approx(capacity_theorem2(cfg, gaussian()), rel=0.02)
