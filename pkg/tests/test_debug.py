"""Tests for the component debug logger."""

import pytest

from core import config
from core.debug import DebugLogger, set_debug


@pytest.fixture(autouse=True)
def quiet(monkeypatch):
	monkeypatch.setattr(config, 'DEBUG_ENABLED', False)
	monkeypatch.setattr(config, 'DEBUG_LEVEL', 1)
	monkeypatch.setattr(config, 'DEBUG_AMP', True)


def test_disabled_logger_is_silent(capsys):
	DebugLogger('amp').notice('AMP', 'hidden')
	assert capsys.readouterr().err == ''


def test_prefix_carries_component_step_and_category(capsys):
	set_debug(1)
	logger = DebugLogger('amp')
	logger.start_step(4)
	logger.notice('AMP', 'tracking')
	captured = capsys.readouterr()
	assert captured.err == '[amp:T04:AMP] tracking\n'
	assert captured.out == ''


def test_iteration_lines_need_the_detailed_level(capsys):
	logger = DebugLogger('amp')
	set_debug(1)
	logger.log_iteration('AMP', {'rho_hat': 2.0})
	assert capsys.readouterr().err == ''
	set_debug(2)
	logger.log_iteration('AMP', {'rho_hat': 2.0, 'v_hat': 0.125})
	assert capsys.readouterr().err == '[amp:T00:AMP] rho_hat=2 v_hat=0.125\n'


def test_category_switch_mutes_a_category(capsys, monkeypatch):
	set_debug(3)
	monkeypatch.setattr(config, 'DEBUG_AMP', False)
	DebugLogger('amp').notice('AMP', 'muted')
	DebugLogger('amp').notice('LP', 'shown')
	assert capsys.readouterr().err == '[amp:T00:LP] shown\n'


def test_data_is_listed_at_level_two(capsys):
	set_debug(2)
	DebugLogger('ldpc').log(2, 'BP', 'frame', {'iterations': 12})
	assert capsys.readouterr().err.splitlines() == ['[ldpc:T00:BP] frame', '    iterations: 12']


def test_set_debug_off():
	set_debug(2)
	set_debug(None)
	assert not config.DEBUG_ENABLED
