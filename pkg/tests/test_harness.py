"""Tests for the experiment spec, the pipeline runners and the command line."""

import json
import math

import numpy as np
import pytest

from core.errors import SpecError
from core.utils import CustomEncoder, format_value, read_json, read_rows
from harness.cli import EXIT_SPEC_ERROR, main
from harness.config import build_spec, load_toml, parse_snr_list, spec_from_metadata, spec_to_dict
from harness.pipeline import ber_campaign, code_degrees, load_code, run
from models.code import DegreeDistribution

GOLDEN = (math.sqrt(5) - 1) / 2


@pytest.mark.parametrize(
	'value, expected',
	[
		(3, (3.0,)),
		('0:2', (0.0, 1.0, 2.0)),
		('-10:20:10', (-10.0, 0.0, 10.0, 20.0)),
		('1, 2.5', (1.0, 2.5)),
		([1, '3:4'], (1.0, 3.0, 4.0)),
		('0:1:0.25', (0.0, 0.25, 0.5, 0.75, 1.0)),
	],
)
def test_parse_snr_list(value, expected):
	assert parse_snr_list(value) == pytest.approx(expected)


def test_bad_snr_range():
	with pytest.raises(ValueError):
		parse_snr_list('0:10:-1')


def test_spec_errors_are_collected():
	with pytest.raises(SpecError) as info:
		build_spec({'kind': 'ber', 'frames': 0, 'beta': -1, 'colour': 'blue'})
	assert set(info.value.fields) == {'frames', 'beta', 'colour'}


def test_spec_requires_kind():
	with pytest.raises(SpecError) as info:
		build_spec({})
	assert 'kind' in info.value.fields


def test_flags_override_file_values():
	spec = build_spec({'kind': 'rates', 'beta': 2.0, 'seed': 1}, {'beta': 0.5, 'seed': None})
	assert spec.beta == 0.5
	assert spec.seed == 1


@pytest.mark.parametrize(
	'values, field',
	[
		({'kind': 'ber', 'constellation': 'gaussian'}, 'constellation'),
		({'kind': 'optimize', 'constellation': '16qam'}, 'constellation'),
		({'kind': 'match', 'margin': 0.7}, 'margin'),
		({'kind': 'rates', 'rate_kinds': 'capacity,bogus'}, 'rate_kinds'),
		({'kind': 'match', 'dv': 6, 'dc': 6}, 'dc'),
		({'kind': 'rates', 'snr_db': []}, 'snr_db'),
		({'kind': 'rates', 'rho_min': 10.0, 'rho_max': 1.0}, 'rho_min'),
	],
)
def test_invalid_fields(values, field):
	with pytest.raises(SpecError) as info:
		build_spec(values)
	assert field in info.value.fields


def test_toml_experiment_table(tmp_path):
	path = tmp_path / 'run.toml'
	path.write_text('[experiment]\nkind = "capacity"\nbeta = 1.5\nsnr-db = "0:10:5"\nconstellation = "bpsk"\n')
	spec = build_spec(load_toml(path))
	assert spec.kind == 'capacity'
	assert spec.snr_db == (0.0, 5.0, 10.0)
	assert build_spec(spec_to_dict(spec)) == spec


def test_missing_and_broken_toml(tmp_path):
	with pytest.raises(SpecError):
		load_toml(tmp_path / 'absent.toml')
	broken = tmp_path / 'broken.toml'
	broken.write_text('kind = \n')
	with pytest.raises(SpecError):
		load_toml(broken)


def test_encoder_and_formatting():
	payload = {'edges': {2: np.float64(0.5)}, 'n': np.int64(3), 'flags': np.array([True, False])}
	assert json.loads(json.dumps(payload, cls=CustomEncoder)) == {'edges': {'2': 0.5}, 'n': 3, 'flags': [True, False]}
	assert format_value(None) == ''
	assert format_value(True) == 'true'
	assert format_value(math.nan) == 'nan'
	assert format_value(1 / 3) == '0.3333333333'


def test_gaussian_se_trace_run(tmp_path):
	spec = build_spec(
		{'kind': 'se-trace', 'constellation': 'gaussian', 'beta': 1.0, 'snr_db': 0.0, 'iterations': 60, 'out': tmp_path}
	)
	paths = run(spec)
	rows = read_rows(paths[0])
	assert len(rows) == 61
	assert float(rows[-1]['v']) == pytest.approx(GOLDEN, abs=1e-9)
	assert rows[0]['amp_mse'] == 'nan'
	metadata = read_json(paths[-1])
	assert metadata['summary']['points'][0]['v_star'] == pytest.approx(GOLDEN, abs=1e-9)
	assert spec_from_metadata(paths[-1]) == spec


def test_identical_spec_is_not_recomputed(tmp_path, capsys):
	spec = build_spec({'kind': 'capacity', 'constellation': 'bpsk', 'snr_db': '0,5', 'out': tmp_path})
	first = run(spec)
	capsys.readouterr()
	second = run(spec)
	assert second == first
	assert 'up to date' in capsys.readouterr().out
	rows = read_rows(first[0])
	assert [float(row['snr_db']) for row in rows] == [0.0, 5.0]
	assert all(row['error'] == '' for row in rows)
	assert read_json(first[-1])['summary']['max_identity_gap_bits'] < 1e-6


def test_rates_run_flags_nothing(tmp_path):
	spec = build_spec({'kind': 'rates', 'beta': 1.0, 'snr_db': '0:10:5', 'out': tmp_path})
	paths = run(spec)
	assert len(read_rows(paths[0])) == 12
	summary = read_json(paths[-1])['summary']
	assert summary['capacity_dominates_turbo_lmmse']
	assert summary['flagged_points'] == 0


def test_code_reference_and_degrees(tmp_path):
	spec = build_spec({'kind': 'ber', 'code_n': 240, 'dv': 3, 'dc': 6, 'out': tmp_path})
	code = load_code(spec)
	assert code.n == 240
	graph = code_degrees(code)
	assert graph == DegreeDistribution.regular(3, 6)


def _ber_spec(tmp_path, **values):
	base = {
		'kind': 'ber',
		'beta': 0.5,
		'constellation': 'qpsk',
		'code_n': 256,
		'snr_db': 4.0,
		'frames': 6,
		'outer_iter': 10,
		'inner_iter': 20,
		'seed': 3,
		'out': tmp_path,
	}
	base.update(values)
	return build_spec(base)


def test_ber_table_is_reproducible(tmp_path):
	spec = _ber_spec(tmp_path, deterministic=True)
	assert ber_campaign(spec) == ber_campaign(spec)


def test_ber_table_does_not_depend_on_workers(tmp_path):
	sequential = ber_campaign(_ber_spec(tmp_path, deterministic=True, target_errors=2))
	parallel = ber_campaign(_ber_spec(tmp_path, workers=2, target_errors=2))
	assert parallel == sequential


def test_ber_stops_at_target_errors(tmp_path):
	(point,) = ber_campaign(_ber_spec(tmp_path, snr_db=-10.0, frames=50, target_errors=2))
	assert point.frames == 2
	assert point.frame_errors == 2


def test_ber_clean_channel(tmp_path):
	(point,) = ber_campaign(_ber_spec(tmp_path, snr_db=60.0, frames=3))
	assert point.frames == 3
	assert point.bit_errors == 0
	assert point.ber == 0.0
	assert point.bits == 3 * 256


def test_cli_rejects_bad_spec(capsys):
	assert main(['ber', '--frames', '0']) == EXIT_SPEC_ERROR
	assert 'frames' in capsys.readouterr().err


def test_cli_rejects_config_for_other_kind(tmp_path):
	path = tmp_path / 'rates.toml'
	path.write_text('kind = "rates"\n')
	assert main(['capacity', '--config', str(path)]) == EXIT_SPEC_ERROR
	assert main(['capacity', '--config', str(tmp_path / 'absent.toml')]) == EXIT_SPEC_ERROR


def test_cli_dry_run(capsys):
	assert main(['rates', '--dry-run', '--snr-db=-10:20:10', '--kinds', 'capacity,amp']) == 0
	echoed = json.loads(capsys.readouterr().out)
	assert echoed['snr_db'] == [-10.0, 0.0, 10.0, 20.0]
	assert echoed['rate_kinds'] == ['capacity', 'amp']
	assert echoed['kind'] == 'rates'


def test_cli_runs_an_experiment(tmp_path, capsys):
	assert main(['mmse-curve', '--constellation', 'qpsk', '--grid-points', '20', '--out', str(tmp_path)]) == 0
	assert 'Results written to' in capsys.readouterr().out
	rows = read_rows(tmp_path / 'mmse-curve.csv')
	assert len(rows) == 20
	assert set(rows[0]) == {'rho', 'omega_s', 'mutual_info_bits', 'phi_inv'}


@pytest.mark.slow
def test_waterfall_sits_near_the_predicted_threshold(tmp_path):
	shared = {'beta': 0.5, 'constellation': 'qpsk', 'code_n': 16384, 'dv': 3, 'dc': 6, 'seed': 5}
	match = build_spec({'kind': 'match', 'transfer': 'measured', 'trials': 4, 'out': tmp_path / 'match', **shared})
	threshold = read_json(run(match)[-1])['summary']['predicted_threshold_db']
	assert threshold is not None
	spec = build_spec(
		{
			'kind': 'ber',
			'snr_db': [threshold - 1.0, threshold + 1.0],
			'frames': 20,
			'target_errors': 5,
			'out': tmp_path / 'ber',
			**shared,
		}
	)
	below, above = ber_campaign(spec)
	assert below.ber > 1e-4
	assert above.ber < 1e-4
