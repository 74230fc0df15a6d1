"""
LDPC codes: construction, systematic encoding, sum-product APP decoding on a
Gaussian pseudo-channel, and empirical decoder transfer curves.

Coded bits are scrambled by the code's coset word before Gray mapping, so the
transmitted symbols are uniform over the constellation whatever the codeword.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import expit, logsumexp

from models.code import DegreeDistribution, LdpcCode
from models.constellation import Constellation
from models.curve import TransferCurve

from . import config
from .debug import DebugLogger
from .errors import ConstructionError, DimensionError, DomainError, UnsupportedError
from .parallel import execute_in_parallel, trial_seed
from .scalar_mmse import check_rho, map_bits

# Attempts at a full graph construction before giving up
_CONSTRUCTION_ATTEMPTS = 5

_logger = DebugLogger('ldpc')


class AppOutput(NamedTuple):
	means: np.ndarray
	variances: np.ndarray
	hard_bits: np.ndarray
	parity_ok: bool
	iterations: int


# ---------------------------------------------------------------------------
# Construction


def build_regular(n: int, dv: int, dc: int, seed: int = config.CODE_SEED) -> LdpcCode:
	if dv < 2 or dc < 2:
		raise ConstructionError(f'degrees must be at least 2, got dv={dv}, dc={dc}')
	if (n * dv) % dc:
		raise ConstructionError(f'n*dv = {n * dv} is not divisible by dc = {dc}')
	m = n * dv // dc
	if dc > n or dv > m:
		raise ConstructionError(f'({dv},{dc}) is infeasible at n={n}')
	return _construct(np.full(n, dv), np.full(m, dc), seed, DegreeDistribution.regular(dv, dc))


def build_irregular(n: int, dd: DegreeDistribution, seed: int = config.CODE_SEED) -> LdpcCode:
	var_degrees = _degree_sequence(dd.variable_node_fractions(), n)
	edges = int(var_degrees.sum())
	m = max(1, round(edges / dd.mean_check_degree()))
	check_degrees = _degree_sequence(dd.check_node_fractions(), m)
	check_degrees = _balance(check_degrees, edges)
	if check_degrees.min() < 2 or check_degrees.max() > n or var_degrees.max() > m:
		raise ConstructionError(f'degree distribution is not realizable at n={n}')
	return _construct(var_degrees, check_degrees, seed, dd)


def _degree_sequence(fractions: dict[int, float], count: int) -> np.ndarray:
	"""Integer node counts by largest remainder, expanded to a sorted degree list."""
	degrees = np.array(list(fractions))
	ideal = np.array(list(fractions.values())) * count
	counts = np.floor(ideal).astype(int)
	shortfall = count - counts.sum()
	counts[np.argsort(-(ideal - counts), kind='stable')[:shortfall]] += 1
	return np.repeat(degrees, counts)


def _balance(check_degrees: np.ndarray, edges: int) -> np.ndarray:
	"""Shift single edges between checks until the check side carries `edges` edges."""
	degrees = check_degrees.copy()
	diff = edges - int(degrees.sum())
	step = 1 if diff > 0 else -1
	index = 0
	while diff:
		degrees[index % degrees.size] += step
		diff -= step
		index += 1
	return np.sort(degrees)


def _construct(
	var_degrees: np.ndarray, check_degrees: np.ndarray, seed: int, dd: DegreeDistribution | None
) -> LdpcCode:
	rng = np.random.default_rng(seed)
	for attempt in range(_CONSTRUCTION_ATTEMPTS):
		edges = _grow_edges(var_degrees, check_degrees, rng)
		if edges is not None:
			break
		_logger.notice('BP', f'construction attempt {attempt + 1} failed, retrying')
	else:
		raise ConstructionError('could not place every edge without parallel edges')
	edge_var, edge_chk = edges
	n = var_degrees.size
	pivot_cols, info_cols, parity_matrix = _systematic_form(edge_var, edge_chk, n, check_degrees.size)
	coset = rng.integers(0, 2, size=n, dtype=np.uint8)
	return LdpcCode(n, edge_var, edge_chk, pivot_cols, info_cols, parity_matrix, coset, dd)


def _grow_edges(var_degrees: np.ndarray, check_degrees: np.ndarray, rng: np.random.Generator):
	"""Progressive edge growth limited to depth two: each new edge avoids checks
	sharing a variable with the node's current checks (no 4-cycles) whenever
	such a check still has free sockets. Among allowed checks the one with most
	free sockets wins, ties broken at random."""
	n, m = var_degrees.size, check_degrees.size
	remaining = check_degrees.astype(np.int64).copy()
	var_checks: list[list[int]] = [[] for _ in range(n)]
	check_vars: list[list[int]] = [[] for _ in range(m)]
	order = rng.permutation(n)
	order = order[np.argsort(var_degrees[order], kind='stable')]
	for var in order:
		for _ in range(int(var_degrees[var])):
			own = var_checks[var]
			blocked = set(own)
			for check in own:
				for neighbour in check_vars[check]:
					blocked.update(var_checks[neighbour])
			capacity = remaining.copy()
			if blocked:
				capacity[list(blocked)] = 0
			if capacity.max() <= 0:
				capacity = remaining.copy()
				capacity[own] = 0
				if capacity.max() <= 0:
					return None
			candidates = np.flatnonzero(capacity == capacity.max())
			check = int(candidates[rng.integers(candidates.size)])
			remaining[check] -= 1
			own.append(check)
			check_vars[check].append(int(var))
	edge_var = np.array([var for var in range(n) for _ in var_checks[var]], dtype=np.int64)
	edge_chk = np.array([check for var in range(n) for check in var_checks[var]], dtype=np.int64)
	return edge_var, edge_chk


def _systematic_form(edge_var: np.ndarray, edge_chk: np.ndarray, n: int, m: int):
	"""Reduced row echelon form of H over GF(2) on bit-packed rows."""
	dense = np.zeros((m, n), dtype=np.uint8)
	dense[edge_chk, edge_var] = 1
	packed = np.packbits(dense, axis=1, bitorder='little')
	pivots = []
	row = 0
	for col in range(n):
		if row == m:
			break
		byte, bit = col >> 3, col & 7
		column = (packed[:, byte] >> bit) & 1
		candidates = np.flatnonzero(column[row:])
		if candidates.size == 0:
			continue
		pivot = row + int(candidates[0])
		if pivot != row:
			packed[[row, pivot]] = packed[[pivot, row]]
			column[[row, pivot]] = column[[pivot, row]]
		mask = column.astype(bool)
		mask[row] = False
		packed[mask] ^= packed[row]
		pivots.append(col)
		row += 1
	reduced = np.unpackbits(packed[:row], axis=1, count=n, bitorder='little')
	pivot_cols = np.array(pivots, dtype=np.int64)
	info_cols = np.setdiff1d(np.arange(n), pivot_cols)
	return pivot_cols, info_cols, reduced[:, info_cols]


# ---------------------------------------------------------------------------
# Encoding


def encode(code: LdpcCode, info_bits: np.ndarray) -> np.ndarray:
	info_bits = np.asarray(info_bits, dtype=np.uint8).ravel()
	if info_bits.size != code.k:
		raise DimensionError(f'expected {code.k} information bits, got {info_bits.size}')
	codeword = np.zeros(code.n, dtype=np.uint8)
	codeword[code.info_cols] = info_bits
	ones = info_bits.astype(bool)
	codeword[code.pivot_cols] = code.parity_matrix[:, ones].sum(axis=1, dtype=np.int64) & 1
	return codeword


def modulate(code: LdpcCode, c: Constellation, codeword: np.ndarray) -> np.ndarray:
	"""Scramble with the coset word and Gray-map to symbols."""
	_require_coded_constellation(code, c)
	return map_bits(c, np.bitwise_xor(codeword, code.coset))


def symbols_per_codeword(code: LdpcCode, c: Constellation) -> int:
	_require_coded_constellation(code, c)
	return code.n // c.bits_per_symbol


def _require_coded_constellation(code: LdpcCode, c: Constellation):
	if c.is_gaussian or c.bits_per_symbol == 0:
		raise UnsupportedError(f'{c.label} has no bit labelling for coded transmission')
	if code.n % c.bits_per_symbol:
		raise DimensionError(f'code length {code.n} is not a multiple of {c.bits_per_symbol} bits')


# ---------------------------------------------------------------------------
# Decoding


def channel_llrs(code: LdpcCode, c: Constellation, r: np.ndarray, rho: float) -> np.ndarray:
	"""Code-bit LLRs log P(b=0)/P(b=1) from r = x + CN(0, 1/rho), coset removed."""
	_require_coded_constellation(code, c)
	rho = check_rho(rho)
	r = np.asarray(r, dtype=complex).ravel()
	labels = c.bit_labels
	log_likelihood = -rho * np.abs(r[:, None] - c.points[None, :]) ** 2
	llrs = np.empty((r.size, labels.shape[1]))
	for position in range(labels.shape[1]):
		zero = labels[:, position] == 0
		llrs[:, position] = logsumexp(log_likelihood[:, zero], axis=1) - logsumexp(
			log_likelihood[:, ~zero], axis=1
		)
	llrs = llrs.ravel()
	if llrs.size != code.n:
		raise DimensionError(f'{r.size} symbols carry {llrs.size} bits, code length is {code.n}')
	return np.clip(llrs * (1.0 - 2.0 * code.coset), -config.LLR_CLIP, config.LLR_CLIP)


def sum_product(code: LdpcCode, llrs: np.ndarray, max_iter: int = config.BP_MAX_ITER):
	"""Flooding sum-product; returns (APP LLRs, hard bits, parity_ok, iterations)."""
	clip = config.LLR_CLIP
	edge_var, check_ptr = code.edge_var, code.check_ptr
	edge_chk = code.edge_chk
	total = llrs.astype(float).copy()
	hard = (total < 0).astype(np.uint8)
	if code.is_codeword(hard):
		return total, hard, True, 0
	var_to_check = total[edge_var]
	iteration = 0
	for iteration in range(1, max_iter + 1):
		t = np.tanh(np.clip(var_to_check, -clip, clip) / 2.0)
		negative = t < 0
		log_mag = np.log(np.maximum(np.abs(t), 1e-300))
		log_sum = np.add.reduceat(log_mag, check_ptr)
		negatives = np.add.reduceat(negative.astype(np.int64), check_ptr)
		extrinsic = np.exp(log_sum[edge_chk] - log_mag)
		sign = 1.0 - 2.0 * ((negatives[edge_chk] - negative) & 1)
		product = np.clip(sign * extrinsic, -1.0 + 1e-15, 1.0 - 1e-15)
		check_to_var = np.clip(2.0 * np.arctanh(product), -clip, clip)
		total = llrs + np.bincount(edge_var, weights=check_to_var, minlength=code.n)
		var_to_check = total[edge_var] - check_to_var
		hard = (total < 0).astype(np.uint8)
		if code.is_codeword(hard):
			_logger.log(3, 'BP', f'syndrome cleared after {iteration} iterations')
			return total, hard, True, iteration
	return total, hard, False, iteration


def app_decode(
	code: LdpcCode,
	r: np.ndarray,
	rho: float,
	c: Constellation,
	max_bp_iters: int = config.BP_MAX_ITER,
) -> AppOutput:
	"""Symbol posterior means and variances after BP on the pseudo-channel.

	Symbol marginals are products of the bit marginals of that symbol.
	"""
	llrs = channel_llrs(code, c, r, rho)
	total, hard, parity_ok, iterations = sum_product(code, llrs, max_bp_iters)
	width = c.bits_per_symbol
	# probability that the transmitted (scrambled) bit is 1
	app = np.clip(total, -config.LLR_CLIP, config.LLR_CLIP) * (1.0 - 2.0 * code.coset)
	p_one = expit(-app).reshape(-1, width)
	labels = c.bit_labels
	probabilities = np.ones((p_one.shape[0], c.size))
	for position in range(width):
		ones = labels[:, position] == 1
		probabilities[:, ones] *= p_one[:, position : position + 1]
		probabilities[:, ~ones] *= 1.0 - p_one[:, position : position + 1]
	means = probabilities @ c.points
	variances = np.sum(probabilities * np.abs(c.points[None, :] - means[:, None]) ** 2, axis=1)
	return AppOutput(means, variances, hard, parity_ok, iterations)


class AppDenoiser:
	"""APP decoder used as the nonlinear step of coded AMP; keeps its last output."""

	def __init__(self, code: LdpcCode, c: Constellation, max_bp_iters: int = config.BP_MAX_ITER):
		self.code = code
		self.constellation = c
		self.max_bp_iters = max_bp_iters
		self.last: AppOutput | None = None

	def __call__(self, r: np.ndarray, rho: float):
		self.last = app_decode(self.code, r, rho, self.constellation, self.max_bp_iters)
		return self.last.means, self.last.variances


# ---------------------------------------------------------------------------
# Scalar-channel Monte Carlo


def _awgn_frame(code, c, rho, rng, max_bp_iters, all_zero=False):
	if all_zero:
		codeword = np.zeros(code.n, dtype=np.uint8)
	else:
		codeword = encode(code, rng.integers(0, 2, size=code.k, dtype=np.uint8))
	x = modulate(code, c, codeword)
	noise = (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)) / math.sqrt(2 * rho)
	return codeword, x, app_decode(code, x + noise, rho, c, max_bp_iters)


def _transfer_task(task) -> float:
	code, c, rho, seed, max_bp_iters = task
	_, x, output = _awgn_frame(code, c, rho, np.random.default_rng(seed), max_bp_iters)
	return float(np.mean(np.abs(x - output.means) ** 2))


def decoder_transfer_curve(
	code: LdpcCode,
	c: Constellation,
	rho_grid: np.ndarray,
	trials: int = 4,
	seed: int = config.CODE_SEED,
	max_bp_iters: int = config.BP_MAX_ITER,
	workers: int | None = 1,
) -> TransferCurve:
	"""Measured omega_C: mean per-symbol MSE of the APP means on the scalar channel."""
	if trials < 1:
		raise DomainError('trials must be at least 1')
	grid = np.asarray(rho_grid, dtype=float)
	tasks = [
		(code, c, float(rho), trial_seed(seed, index, trial), max_bp_iters)
		for index, rho in enumerate(grid)
		for trial in range(trials)
	]
	mse = np.array(execute_in_parallel(_transfer_task, tasks, workers=workers)).reshape(grid.size, trials)
	values = np.clip(mse.mean(axis=1), 0.0, 1.0)
	stderr = mse.std(axis=1, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros(grid.size)
	return TransferCurve(
		grid,
		values,
		left_value=1.0,
		right_rule='bound',
		stderr=stderr,
		label=f'omega_C[n={code.n},{c.label}]',
	)


def bit_error_rate_awgn(
	code: LdpcCode,
	c: Constellation,
	rho: float,
	frames: int,
	seed: int = 0,
	max_bp_iters: int = config.BP_MAX_ITER,
	all_zero: bool = False,
) -> tuple[float, float]:
	"""(BER, FER) of the stand-alone decoder on the scalar channel.

	With all_zero=True every frame sends the zero codeword; the coset word
	still scrambles it before mapping.
	"""
	rng = np.random.default_rng(seed)
	bit_errors = frame_errors = 0
	for _ in range(frames):
		codeword, _, output = _awgn_frame(code, c, rho, rng, max_bp_iters, all_zero)
		errors = int(np.count_nonzero(output.hard_bits != codeword))
		bit_errors += errors
		frame_errors += errors > 0
	return bit_errors / (frames * code.n), frame_errors / frames


# ---------------------------------------------------------------------------
# Serialization


def write_alist(code: LdpcCode, path: str | Path) -> Path:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	var_lists = [[] for _ in range(code.n)]
	chk_lists = [[] for _ in range(code.m)]
	for var, check in zip(code.edge_var, code.edge_chk, strict=True):
		var_lists[var].append(int(check) + 1)
		chk_lists[check].append(int(var) + 1)
	max_var = max(len(entry) for entry in var_lists)
	max_chk = max(len(entry) for entry in chk_lists)
	lines = [
		f'{code.n} {code.m}',
		f'{max_var} {max_chk}',
		' '.join(str(len(entry)) for entry in var_lists),
		' '.join(str(len(entry)) for entry in chk_lists),
	]
	lines += [' '.join(map(str, entry + [0] * (max_var - len(entry)))) for entry in var_lists]
	lines += [' '.join(map(str, entry + [0] * (max_chk - len(entry)))) for entry in chk_lists]
	path.write_text('\n'.join(lines) + '\n')
	return path


def read_alist(path: str | Path, seed: int = config.CODE_SEED) -> LdpcCode:
	"""Load a parity-check matrix; the coset word is drawn from `seed`."""
	tokens = Path(path).read_text().split()
	values = iter(int(token) for token in tokens)
	n, m = next(values), next(values)
	max_var, _ = next(values), next(values)
	var_degrees = [next(values) for _ in range(n)]
	for _ in range(m):
		next(values)
	edge_var, edge_chk = [], []
	for var in range(n):
		entries = [next(values) for _ in range(max_var)]
		checks = [entry - 1 for entry in entries if entry > 0]
		if len(checks) != var_degrees[var]:
			raise ConstructionError(f'{path}: column {var} lists {len(checks)} checks, header says {var_degrees[var]}')
		edge_var += [var] * len(checks)
		edge_chk += checks
	edge_var = np.array(edge_var, dtype=np.int64)
	edge_chk = np.array(edge_chk, dtype=np.int64)
	if np.unique(edge_chk).size != m:
		raise ConstructionError(f'{path}: some of the {m} checks have no edges')
	pivot_cols, info_cols, parity_matrix = _systematic_form(edge_var, edge_chk, n, m)
	coset = np.random.default_rng(seed).integers(0, 2, size=n, dtype=np.uint8)
	return LdpcCode(n, edge_var, edge_chk, pivot_cols, info_cols, parity_matrix, coset)


def write_degree_csv(dd: DegreeDistribution, path: str | Path) -> Path:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	with path.open('w', newline='') as handle:
		writer = csv.DictWriter(handle, fieldnames=['side', 'degree', 'fraction'])
		writer.writeheader()
		for side, edges in (('variable', dd.variable_edges), ('check', dd.check_edges)):
			for degree, fraction in edges.items():
				writer.writerow({'side': side, 'degree': degree, 'fraction': f'{fraction:.12g}'})
	return path


def read_degree_csv(path: str | Path) -> DegreeDistribution:
	sides: dict[str, dict[int, float]] = {'variable': {}, 'check': {}}
	with Path(path).open(newline='') as handle:
		for row in csv.DictReader(handle):
			side = row['side'].strip().lower()
			if side not in sides:
				raise ConstructionError(f'{path}: unknown side {row["side"]!r}')
			sides[side][int(row['degree'])] = float(row['fraction'])
	return DegreeDistribution(sides['variable'], sides['check'])
