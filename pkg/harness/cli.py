"""Command-line interface for the experiment harness."""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Iterable
from pathlib import Path

from core.debug import set_debug
from core.errors import ConstructionError, DimensionError, DomainError, NumericBlowupError, SpecError
from core.utils import CustomEncoder

from .config import EXPERIMENT_KINDS, build_spec, load_toml, spec_to_dict
from .pipeline import run

EXIT_SPEC_ERROR = 2
EXIT_BLOWUP = 3

_SPEC_ERRORS = (SpecError, DomainError, DimensionError, ConstructionError)

_HELP = {
	'mmse-curve': 'Tabulate omega_S and the constrained mutual information over a rho grid',
	'se-trace': 'State-evolution trajectories, optionally against empirical AMP runs',
	'capacity': 'Constrained capacity by the closed form and by the area theorem',
	'rates': 'Sweep capacity, AMP, Turbo-LMMSE and AMP-DEC rates over SNR',
	'transfer-chart': 'Measured decoder transfer curve next to omega_S, omega_star and phi_inv',
	'ber': 'Coded AMP bit error rate campaign',
	'match': 'Tunnel test of a code against the matched target',
	'optimize': 'Linear-programming degree design against the matched (or SISO) target',
}


def _common_flags() -> argparse.ArgumentParser:
	common = argparse.ArgumentParser(add_help=False)
	common.add_argument('--config', type=Path, default=None, help='TOML file with spec fields')
	common.add_argument('--beta', type=float, default=None, help='Channel load N/M')
	common.add_argument(
		'--snr-db',
		dest='snr_db',
		nargs='+',
		default=None,
		help='SNR points in dB: values, a,b,c lists or start:stop[:step] ranges',
	)
	common.add_argument('--constellation', default=None, help='Preset name or CSV file (re,im,prior)')
	common.add_argument('--seed', type=int, default=None, help='Master random seed')
	common.add_argument('--trials', type=int, default=None, help='Trials per point')
	common.add_argument('--out', type=Path, default=None, help='Output directory (default results/<kind>)')
	common.add_argument('--workers', type=int, default=None, help='Worker processes')
	common.add_argument(
		'--deterministic',
		action='store_true',
		default=None,
		help='Run sequentially for bit-exact reproduction',
	)
	common.add_argument('--force', action='store_true', help='Re-run even if identical results exist')
	common.add_argument('--debug', type=int, default=None, metavar='LEVEL', help='Debug level (1-3) on stderr')
	common.add_argument('--dry-run', action='store_true', help='Print the resolved spec and exit')
	return common


def _code_flags(parser: argparse.ArgumentParser):
	group = parser.add_argument_group('code')
	group.add_argument('--code-n', dest='code_n', type=int, default=None, help='Code length in bits')
	group.add_argument('--dv', type=int, default=None, help='Variable degree of a regular code')
	group.add_argument('--dc', type=int, default=None, help='Check degree of a regular code')
	group.add_argument('--alist', type=Path, default=None, help='Parity-check matrix in alist format')
	group.add_argument('--degrees', type=Path, default=None, help='Degree table CSV (side,degree,fraction)')
	group.add_argument('--code-seed', dest='code_seed', type=int, default=None, help='Construction seed')
	group.add_argument('--inner-iter', dest='inner_iter', type=int, default=None, help='BP iterations per call')


def _grid_flags(parser: argparse.ArgumentParser):
	group = parser.add_argument_group('rho grid')
	group.add_argument('--rho-min', dest='rho_min', type=float, default=None)
	group.add_argument('--rho-max', dest='rho_max', type=float, default=None)
	group.add_argument('--grid-points', dest='grid_points', type=int, default=None)


def _parse_args(argv: Iterable[str] | None = None) -> argparse.Namespace:
	parser = argparse.ArgumentParser(description='AMP detection experiments for coded large random matrix systems.')
	subparsers = parser.add_subparsers(dest='kind', required=True)
	common = _common_flags()
	commands = {kind: subparsers.add_parser(kind, parents=[common], help=_HELP[kind]) for kind in EXPERIMENT_KINDS}

	_grid_flags(commands['mmse-curve'])

	se_trace = commands['se-trace']
	se_trace.add_argument('--iterations', type=int, default=None, help='SE iterations to record')
	se_trace.add_argument('--amp-n', dest='amp_n', type=int, default=None, help='Overlay AMP runs of this length')

	commands['capacity'].add_argument(
		'--amp-n', dest='amp_n', type=int, default=None, help='Matrix size of the Gaussian log-det oracle'
	)

	commands['rates'].add_argument(
		'--kinds', dest='rate_kinds', default=None, help='Comma-separated subset of capacity,amp,turbo_lmmse,amp_dec'
	)

	for kind in ('transfer-chart', 'match'):
		_code_flags(commands[kind])
		_grid_flags(commands[kind])

	match = commands['match']
	match.add_argument('--transfer', choices=['measured', 'surrogate'], default=None, help='Source of omega_C')
	match.add_argument('--margin', type=float, default=None, help='Tunnel safety margin')

	ber = commands['ber']
	_code_flags(ber)
	ber.add_argument('--outer-iter', dest='outer_iter', type=int, default=None, help='AMP iterations per frame')
	ber.add_argument('--frames', type=int, default=None, help='Frame cap per SNR point')
	ber.add_argument('--target-errors', dest='target_errors', type=int, default=None, help='Frame errors per point')

	optimize = commands['optimize']
	optimize.add_argument('--max-dv', dest='max_dv', type=int, default=None, help='Largest variable degree')
	optimize.add_argument('--dv', type=int, default=None, help='Variable degree of the reference regular code')
	optimize.add_argument('--dc', type=int, default=None, help='Check degree')
	optimize.add_argument('--target-rate', dest='target_rate', type=float, default=None, help='Search the SNR for this code rate')
	optimize.add_argument('--siso', action='store_true', default=None, help='Design for the scalar channel after AMP')
	optimize.add_argument('--margin', type=float, default=None, help='Tunnel safety margin')
	return parser.parse_args(argv)


_CONTROL_FLAGS = {'config', 'force', 'debug', 'dry_run'}


def main(argv: Iterable[str] | None = None) -> int:
	args = _parse_args(argv)
	set_debug(args.debug)

	try:
		file_values = load_toml(args.config) if args.config is not None else {}
		overrides = {key: value for key, value in vars(args).items() if key not in _CONTROL_FLAGS}
		file_kind = file_values.get('kind')
		if file_kind is not None and file_kind != args.kind:
			raise SpecError({'kind': f'config file is for {file_kind!r}, command is {args.kind!r}'})
		spec = build_spec(file_values, overrides)

		if args.dry_run:
			print(json.dumps(spec_to_dict(spec), cls=CustomEncoder, indent=2))
			return 0

		paths = run(spec, force=args.force)
	except _SPEC_ERRORS as exc:
		print(f'error: {exc}', file=sys.stderr)
		return EXIT_SPEC_ERROR
	except NumericBlowupError as exc:
		print(f'error: numeric blowup: {exc}', file=sys.stderr)
		return EXIT_BLOWUP
	except Exception as exc:  # noqa: BLE001 - CLI guardrail
		print(f'error: {exc}', file=sys.stderr)
		return 1

	print(f'Results written to {paths[0].parent}')
	return 0


if __name__ == '__main__':
	raise SystemExit(main())
