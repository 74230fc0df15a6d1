"""
AMP receiver for y = A x + n with A IID CN(0, 1/M).

Each iteration is a matched-filter step with Onsager correction followed by a
nonlinear denoiser (symbol-wise MMSE, or the LDPC APP decoder for coded
transmission). The denoiser divergence is rho_hat times its mean posterior
variance, and rho_hat tracks phi of the previous mean posterior variance.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from functools import partial

import numpy as np
from scipy.stats import kurtosis

from models.channel import AmpState, ChannelInstance
from models.code import LdpcCode
from models.constellation import Constellation
from models.results import AmpRecord, AmpTrace
from models.system import SystemConfig

from . import config
from .debug import DebugLogger
from .errors import DimensionError, NumericBlowupError
from .ldpc import AppDenoiser, encode, modulate, symbols_per_codeword
from .parallel import execute_in_parallel, trial_seed
from .scalar_mmse import draw_symbols, eta, omega_curve, omega_s, prior_variance
from .state_evolution import phi, single_crossing_check

Denoiser = Callable[[np.ndarray, float], tuple[np.ndarray, np.ndarray]]

_logger = DebugLogger('amp')


def sample_system(
	cfg: SystemConfig, c: Constellation, symbols: np.ndarray, seed
) -> ChannelInstance:
	"""Draw A ~ CN(0, 1/M) and n ~ CN(0, sigma2) for the given symbols; deterministic in seed."""
	x = np.asarray(symbols, dtype=complex).ravel()
	n = x.size
	if cfg.n is not None and cfg.n != n:
		raise DimensionError(f'config expects N={cfg.n} symbols, got {n}')
	m = cfg.m if cfg.m is not None else round(n / cfg.beta)
	if m <= 0:
		raise DimensionError(f'beta={cfg.beta} leaves no observations for N={n}')
	rng = np.random.default_rng(seed)
	a = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / math.sqrt(2 * m)
	noise = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) * math.sqrt(cfg.sigma2 / 2)
	return ChannelInstance(a, x, a @ x + noise, noise, cfg.sigma2)


def amp_iteration(
	state: AmpState,
	inst: ChannelInstance,
	nld: Denoiser,
	onsager: bool = True,
	rho_cap: float = config.RHO_CAP,
) -> AmpState:
	"""One linear step plus denoiser call; the returned state holds r^t as r_prev."""
	residual = inst.y - inst.a @ state.s
	r = state.s + inst.a.conj().T @ residual
	if onsager and state.iter > 0:
		r = r + inst.beta * state.divergence * (state.r_prev - state.s_prev)
	if not np.all(np.isfinite(r)):
		raise NumericBlowupError(f'non-finite pseudo-observation at iteration {state.iter}', None)
	denominator = inst.beta * state.v_hat + inst.sigma2
	rho_hat = rho_cap if denominator <= 0 else min(1.0 / denominator, rho_cap)
	mean, variance = nld(r, rho_hat)
	v_hat = float(np.mean(variance))
	return state.advance(
		s=mean,
		r_prev=r,
		s_prev=state.s,
		divergence=rho_hat * v_hat,
		v_hat=v_hat,
		rho_hat=rho_hat,
		iter=state.iter + 1,
	)


class _BlowupGuard:
	"""Fails when v_hat rises by the blowup factor over its running minimum."""

	def __init__(self, factor: float = config.BLOWUP_FACTOR, floor: float = config.BLOWUP_FLOOR):
		self.factor = factor
		self.floor = floor
		self.minimum = math.inf

	def check(self, v_hat: float, trace: AmpTrace):
		if not math.isfinite(v_hat):
			raise NumericBlowupError('tracked MSE is not finite', trace)
		self.minimum = min(self.minimum, v_hat)
		if v_hat > self.factor * max(self.minimum, self.floor):
			raise NumericBlowupError(
				f'tracked MSE rose to {v_hat:.3g} from a minimum of {self.minimum:.3g}', trace
			)


def _step(state, inst, nld, onsager, trace) -> AmpState:
	try:
		return amp_iteration(state, inst, nld, onsager)
	except NumericBlowupError as exc:
		raise NumericBlowupError(str(exc), trace) from exc


def _require_dims(cfg: SystemConfig):
	if cfg.n is None:
		raise DimensionError('AMP runs need a config with dimensions (n, m)')


def _streams(seed) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
	source, system = np.random.SeedSequence(seed).spawn(2)
	return source, system


def run_amp_uncoded(
	cfg: SystemConfig,
	c: Constellation,
	seed: int,
	max_iter: int = config.AMP_MAX_ITER,
	tol: float = config.AMP_TOL,
	onsager: bool = True,
	keep_errors: int = 0,
) -> tuple[np.ndarray, AmpTrace]:
	"""AMP with the symbol-wise MMSE denoiser; the trace carries the SE prediction alongside.

	keep_errors stores h^t = r^t - x for the first that many iterations.
	"""
	_require_dims(cfg)
	if not c.is_gaussian and math.isfinite(cfg.snr):
		holds, crossings = single_crossing_check(cfg, omega_curve(c))
		if not holds:
			_logger.notice('AMP', f'single crossing does not hold ({len(crossings)} crossings); SE may not predict AMP')
	source, system = _streams(seed)
	x = draw_symbols(c, cfg.n, np.random.default_rng(source))
	inst = sample_system(cfg, c, x, system)
	nld = partial(eta, c)
	state = AmpState.initial(cfg.n, prior_variance(c))
	trace = AmpTrace()
	guard = _BlowupGuard()
	v_se = prior_variance(c)
	for iteration in range(max_iter):
		previous = state.v_hat
		state = _step(state, inst, nld, onsager, trace)
		rho_se = min(phi(cfg, v_se), config.RHO_CAP)
		v_se = omega_s(c, rho_se)
		record = AmpRecord(
			iter=iteration,
			rho_se=rho_se,
			v_se=v_se,
			mse_s=float(np.mean(np.abs(state.s - x) ** 2)),
			mse_r=float(np.mean(np.abs(state.r_prev - x) ** 2)),
		)
		trace.append(record)
		if iteration < keep_errors:
			trace.errors_r.append(state.r_prev - x)
		_logger.start_step(iteration)
		_logger.log_iteration('AMP', {'rho_hat': state.rho_hat, 'v_hat': state.v_hat, 'mse': record.mse_s})
		guard.check(state.v_hat, trace)
		if abs(state.v_hat - previous) < tol:
			break
	return state.s, trace


def draw_codeword(code: LdpcCode, seed: int) -> np.ndarray:
	"""The codeword run_amp_coded transmits for this seed."""
	source, _ = _streams(seed)
	rng = np.random.default_rng(source)
	return encode(code, rng.integers(0, 2, size=code.k, dtype=np.uint8))


def run_amp_coded(
	cfg: SystemConfig,
	code: LdpcCode,
	c: Constellation,
	seed: int,
	max_iter: int = config.CODED_OUTER_ITER,
	bp_iters: int = config.CODED_INNER_ITER,
	tol: float = config.AMP_TOL,
) -> tuple[np.ndarray, AmpTrace, bool]:
	"""AMP with the APP decoder as denoiser; the trace carries tracked rho_hat, v_hat.

	Stops once the decoder output satisfies every parity check. Success means
	parity holds and the decoded bits equal the transmitted codeword.
	"""
	n_symbols = symbols_per_codeword(code, c)
	if cfg.n is None:
		cfg = cfg.with_length(n_symbols)
	elif cfg.n != n_symbols:
		raise DimensionError(f'code carries {n_symbols} symbols, config expects N={cfg.n}')
	codeword = draw_codeword(code, seed)
	_, system = _streams(seed)
	x = modulate(code, c, codeword)
	inst = sample_system(cfg, c, x, system)
	nld = AppDenoiser(code, c, bp_iters)
	state = AmpState.initial(cfg.n, prior_variance(c))
	trace = AmpTrace()
	guard = _BlowupGuard()
	for iteration in range(max_iter):
		previous = state.v_hat
		state = _step(state, inst, nld, True, trace)
		trace.append(
			AmpRecord(
				iter=iteration,
				rho_se=state.rho_hat,
				v_se=state.v_hat,
				mse_s=float(np.mean(np.abs(state.s - x) ** 2)),
				mse_r=float(np.mean(np.abs(state.r_prev - x) ** 2)),
			)
		)
		_logger.start_step(iteration)
		_logger.log_iteration('AMP', {'rho_hat': state.rho_hat, 'v_hat': state.v_hat, 'bp_iters': nld.last.iterations})
		if nld.last.parity_ok:
			break
		guard.check(state.v_hat, trace)
		if abs(state.v_hat - previous) < tol:
			break
	hard = nld.last.hard_bits
	success = bool(nld.last.parity_ok and np.array_equal(hard, codeword))
	return hard, trace, success


def _uncoded_trial(task) -> AmpTrace:
	cfg, c, seed, max_iter, tol, onsager, keep_errors = task
	return run_amp_uncoded(cfg, c, seed, max_iter, tol, onsager, keep_errors)[1]


def run_amp_trials(
	cfg: SystemConfig,
	c: Constellation,
	trials: int,
	master_seed: int = 0,
	max_iter: int = config.AMP_MAX_ITER,
	tol: float = config.AMP_TOL,
	onsager: bool = True,
	keep_errors: int = 0,
	workers: int | None = 1,
	deterministic: bool = False,
) -> list[AmpTrace]:
	"""Independent uncoded runs, seeded per trial index and returned in trial order."""
	tasks = [
		(cfg, c, trial_seed(master_seed, index), max_iter, tol, onsager, keep_errors)
		for index in range(trials)
	]
	return execute_in_parallel(_uncoded_trial, tasks, workers=workers, deterministic=deterministic)


def iidg_statistics(h: np.ndarray, x: np.ndarray) -> dict[str, float]:
	"""Kurtosis of the real and imaginary parts of h and |corr(h, x)|."""
	h = np.asarray(h, dtype=complex)
	x = np.asarray(x, dtype=complex)
	correlation = abs(np.vdot(x, h)) / math.sqrt(np.vdot(h, h).real * np.vdot(x, x).real)
	return {
		'kurtosis_re': float(kurtosis(h.real, fisher=False)),
		'kurtosis_im': float(kurtosis(h.imag, fisher=False)),
		'correlation': float(correlation),
	}


def mean_trace_column(traces: list[AmpTrace], name: str, length: int) -> np.ndarray:
	"""Average a trace column over runs, over the first `length` iterations."""
	return np.mean([trace.column(name)[:length] for trace in traces], axis=0)
