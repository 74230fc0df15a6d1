"""Tests for the tunnel check, threshold prediction and LP degree design."""

import csv

import numpy as np
import pytest

from core.density_evolution import surrogate_transfer_curve
from core.errors import DomainError, GridMismatchError
from core.matching import (
	check_matching,
	coded_se,
	design_degrees,
	optimize_degrees,
	optimize_for_rate,
	predicted_threshold,
	siso_target,
	surrogate_threshold,
	tunnel_gap,
	tunnel_open,
	write_constraint_csv,
)
from core.rates import capacity_theorem2, omega_star, uncoded_fixed_point
from core.scalar_mmse import omega_curve
from models.code import DegreeDistribution
from models.constellation import preset
from models.curve import TransferCurve, log_grid
from models.system import SystemConfig

GRID = log_grid(1e-3, 1e3, 400)
MARGIN = 1e-3


def _zero_curve():
	return TransferCurve(GRID, np.zeros(GRID.size), left_value=1.0, right_rule='zero', label='perfect')


def _uncoded_curve(name):
	return TransferCurve(GRID, omega_curve(preset(name)).interpolate(GRID), left_value=1.0, label=name)


def test_perfect_decoder_opens_the_tunnel():
	cfg = SystemConfig.from_snr_db(1.5, 5.0)
	gap, _ = tunnel_gap(cfg, _zero_curve(), MARGIN)
	assert gap > 0
	assert tunnel_open(cfg, _zero_curve(), MARGIN)


def test_uncoded_curve_closes_the_tunnel():
	cfg = SystemConfig.from_snr_db(1.5, 5.0)
	gap, worst = tunnel_gap(cfg, _uncoded_curve('qpsk'), MARGIN)
	assert gap < 0
	assert worst <= cfg.snr


def test_threshold_brackets_the_tunnel():
	cfg = SystemConfig(beta=0.5, sigma2=1.0)
	curve = surrogate_transfer_curve(DegreeDistribution.regular(3, 6), preset('bpsk'), GRID)
	threshold = predicted_threshold(cfg, curve, MARGIN)
	assert threshold is not None
	assert tunnel_open(cfg.with_snr_db(threshold + 0.01), curve, MARGIN)
	assert not tunnel_open(cfg.with_snr_db(threshold - 0.5), curve, MARGIN)


def test_never_matching_curve_has_no_threshold():
	stuck = TransferCurve(GRID, np.full(GRID.size, 0.5), left_value=1.0, right_rule='zero')
	assert predicted_threshold(SystemConfig(beta=1, sigma2=1), stuck, MARGIN) is None


def test_surrogate_threshold_falls_with_load():
	dd = DegreeDistribution.regular(3, 6)
	light = surrogate_threshold(SystemConfig(beta=0.25, sigma2=1), dd, preset('bpsk'))
	heavy = surrogate_threshold(SystemConfig(beta=1.0, sigma2=1), dd, preset('bpsk'))
	assert light < heavy


def test_matching_report_against_the_target():
	cfg = SystemConfig.from_snr_db(1.0, 8.0)
	c = preset('qpsk')
	grid = log_grid(1e-3, cfg.snr, 300)
	star = omega_star(cfg, c, grid)
	report = check_matching(cfg, star, star, MARGIN, find_threshold=False)
	assert not report.tunnel_open
	assert -MARGIN - 1e-4 <= report.min_gap <= -MARGIN + 1e-12
	assert report.rate_gap_to_capacity == pytest.approx(0.0, abs=1e-9)
	assert report.predicted_threshold_db is None
	assert report.snr_db == pytest.approx(8.0)


def test_matching_needs_shared_grid():
	cfg = SystemConfig.from_snr_db(1.0, 8.0)
	with pytest.raises(GridMismatchError):
		check_matching(cfg, _zero_curve(), omega_star(cfg, preset('qpsk')), MARGIN)


def test_coded_se_with_perfect_decoder_reaches_snr():
	cfg = SystemConfig.from_snr_db(1.0, 5.0)
	rho, v, _ = coded_se(cfg, _zero_curve())
	assert v == 0.0
	assert rho == pytest.approx(cfg.snr)


def test_siso_target_shape():
	cfg = SystemConfig.from_snr_db(1.5, 5.38)
	c = preset('qpsk')
	target = siso_target(cfg, c, MARGIN)
	rho_star = uncoded_fixed_point(cfg, c)
	below = target.rho_grid < rho_star
	np.testing.assert_allclose(target.v_values[below], omega_curve(c).interpolate(target.rho_grid[below]), atol=1e-12)
	np.testing.assert_allclose(target.v_values[~below], 2 * MARGIN)


def test_design_without_binding_constraints_is_all_degree_two():
	design = design_degrees(SystemConfig.from_snr_db(1.0, 30.0), preset('bpsk'), max_dv=6, dc=6)
	assert design.degrees.variable_edges == {2: 1.0}
	assert design.rate == pytest.approx(2 / 3)
	assert optimize_degrees(SystemConfig.from_snr_db(1.0, 30.0), preset('bpsk'), max_dv=6, dc=6) == design.degrees


def test_design_rejects_bad_degree_limits():
	with pytest.raises(DomainError):
		design_degrees(SystemConfig(beta=1, sigma2=1), preset('bpsk'), max_dv=1)
	with pytest.raises(DomainError):
		design_degrees(SystemConfig(beta=1, sigma2=1), preset('bpsk'), max_rounds=0)


@pytest.mark.parametrize('dd', [DegreeDistribution.regular(3, 6), DegreeDistribution.from_variable_nodes({2: 0.5, 4: 0.5}, 6)])
def test_open_tunnel_drives_coded_se_below_the_floor(dd):
	cfg = SystemConfig(beta=0.5, sigma2=1.0)
	curve = surrogate_transfer_curve(dd, preset('bpsk'), GRID)
	threshold = predicted_threshold(cfg, curve, MARGIN)
	point = cfg.with_snr_db(threshold + 0.2)
	assert tunnel_open(point, curve, MARGIN)
	_, v, _ = coded_se(point, curve)
	assert v < 2 * MARGIN


@pytest.mark.parametrize('snr_db', [6.0, 8.0, 10.0])
def test_design_rate_reaches_a_feasible_two_degree_mixture(snr_db):
	cfg = SystemConfig.from_snr_db(1.0, snr_db)
	c = preset('qpsk')
	mixture = DegreeDistribution.from_variable_nodes({2: 0.8, 3: 0.2}, 6)
	design = design_degrees(cfg, c, max_dv=6, dc=6)
	assert design.rate >= mixture.design_rate - 1e-4
	gap, _ = tunnel_gap(cfg, surrogate_transfer_curve(design.degrees, c), 0.0)
	assert gap > -2e-3


def test_degree_three_limit_stays_in_the_regular_family():
	cfg = SystemConfig.from_snr_db(1.0, 8.0)
	design = design_degrees(cfg, preset('qpsk'), max_dv=3, dc=6)
	assert set(design.degrees.variable_edges) <= {2, 3}
	assert design.degrees.check_edges == {6: 1.0}
	assert design.rate >= DegreeDistribution.regular(3, 6).design_rate


@pytest.mark.slow
def test_larger_degree_limit_never_lowers_the_rate():
	cfg = SystemConfig.from_snr_db(1.0, 8.0)
	c = preset('qpsk')
	rates = [design_degrees(cfg, c, max_dv=max_dv, dc=6).rate for max_dv in (3, 5, 8, 12)]
	assert np.all(np.diff(rates) >= -1e-3)


@pytest.mark.slow
def test_designed_rate_stays_below_capacity(tmp_path):
	cfg = SystemConfig.from_snr_db(1.0, 0.0)
	c = preset('bpsk')
	design = design_degrees(cfg, c, max_dv=8, dc=6)
	assert 0 < design.rate <= 1.02 * capacity_theorem2(cfg, c)
	assert design.constraint_rows
	path = write_constraint_csv(tmp_path / 'constraints.csv', design)
	with path.open(newline='') as handle:
		rows = list(csv.DictReader(handle))
	assert len(rows) == len(design.constraint_rows)
	assert set(rows[0]) == {'round', 'rho', 'mse_limit', 'required_mi', 'max_row_slack'}


@pytest.mark.slow
def test_designed_ensemble_opens_its_tunnel():
	cfg = SystemConfig.from_snr_db(1.0, 2.0)
	c = preset('qpsk')
	design = design_degrees(cfg, c, max_dv=8, dc=6)
	curve = surrogate_transfer_curve(design.degrees, c)
	gap, _ = tunnel_gap(cfg, curve, 0.0)
	assert gap > -2e-3


@pytest.mark.slow
def test_matched_design_beats_the_regular_code():
	cfg = SystemConfig(beta=1.0, sigma2=1.0)
	c = preset('qpsk')
	design, design_db = optimize_for_rate(cfg, c, 0.5)
	assert design.design_rate >= 0.5 - 1e-6
	regular_db = surrogate_threshold(cfg, DegreeDistribution.regular(3, 6), c)
	assert design_db <= regular_db - 0.5


@pytest.mark.slow
@pytest.mark.parametrize('beta', [1.0, 2.0])
def test_scalar_channel_design_needs_more_snr(beta):
	cfg = SystemConfig(beta=beta, sigma2=1.0)
	c = preset('qpsk')
	_, matched_db = optimize_for_rate(cfg, c, 0.5)
	_, siso_db = optimize_for_rate(cfg, c, 0.5, siso=True)
	assert siso_db > matched_db
