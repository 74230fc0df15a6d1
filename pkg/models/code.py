import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from core.errors import ConstructionError

_SUM_TOL = 1e-9


def _normalize(name: str, coefficients: dict[int, float]) -> dict[int, float]:
	cleaned = {}
	for degree, fraction in coefficients.items():
		degree, fraction = int(degree), float(fraction)
		if fraction < 0 or not math.isfinite(fraction):
			raise ConstructionError(f'{name}: fraction for degree {degree} must be non-negative')
		if fraction == 0:
			continue
		if degree < 2:
			raise ConstructionError(f'{name}: degree {degree} is not allowed (minimum degree is 2)')
		cleaned[degree] = fraction
	total = sum(cleaned.values())
	if abs(total - 1.0) > _SUM_TOL:
		raise ConstructionError(f'{name}: fractions sum to {total:.12g}, not 1')
	return dict(sorted(cleaned.items()))


@dataclass(frozen=True)
class DegreeDistribution:
	"""Edge-perspective degree distribution (lambda for variables, rho for checks)."""

	variable_edges: dict[int, float]
	check_edges: dict[int, float]

	def __post_init__(self):
		object.__setattr__(self, 'variable_edges', _normalize('lambda', self.variable_edges))
		object.__setattr__(self, 'check_edges', _normalize('rho', self.check_edges))
		rate = self.design_rate
		if not 0 < rate < 1:
			raise ConstructionError(f'design rate {rate:.6g} is outside (0, 1)')

	@classmethod
	def regular(cls, dv: int, dc: int) -> 'DegreeDistribution':
		return cls({dv: 1.0}, {dc: 1.0})

	@classmethod
	def from_variable_nodes(cls, node_fractions: dict[int, float], dc: int) -> 'DegreeDistribution':
		"""Build from variable node fractions and a concentrated check degree."""
		weights = {degree: degree * fraction for degree, fraction in node_fractions.items() if fraction > 0}
		total = sum(weights.values())
		return cls({degree: weight / total for degree, weight in weights.items()}, {dc: 1.0})

	@property
	def design_rate(self) -> float:
		lam = sum(fraction / degree for degree, fraction in self.variable_edges.items())
		rho = sum(fraction / degree for degree, fraction in self.check_edges.items())
		return 1.0 - rho / lam

	def variable_node_fractions(self) -> dict[int, float]:
		return _node_fractions(self.variable_edges)

	def check_node_fractions(self) -> dict[int, float]:
		return _node_fractions(self.check_edges)

	def mean_check_degree(self) -> float:
		return 1.0 / sum(fraction / degree for degree, fraction in self.check_edges.items())


def _node_fractions(edges: dict[int, float]) -> dict[int, float]:
	weights = {degree: fraction / degree for degree, fraction in edges.items()}
	total = sum(weights.values())
	return {degree: weight / total for degree, weight in weights.items()}


@dataclass(frozen=True, eq=False)
class LdpcCode:
	"""Parity-check structure with a systematic encoder and a scrambling coset word.

	Edges are stored sorted by check, then by variable. `parity_matrix` maps
	the bits at `info_cols` to the bits at `pivot_cols`.
	"""

	n: int
	edge_var: np.ndarray
	edge_chk: np.ndarray
	pivot_cols: np.ndarray
	info_cols: np.ndarray
	parity_matrix: np.ndarray
	coset: np.ndarray
	degrees: DegreeDistribution | None = None
	check_ptr: np.ndarray = field(init=False)

	def __post_init__(self):
		order = np.lexsort((self.edge_var, self.edge_chk))
		edge_var = np.asarray(self.edge_var, dtype=np.int64)[order]
		edge_chk = np.asarray(self.edge_chk, dtype=np.int64)[order]
		object.__setattr__(self, 'edge_var', edge_var)
		object.__setattr__(self, 'edge_chk', edge_chk)
		starts = np.flatnonzero(np.r_[True, edge_chk[1:] != edge_chk[:-1]])
		object.__setattr__(self, 'check_ptr', starts)
		if np.any(self.var_degrees < 2):
			raise ConstructionError('every variable node needs degree >= 2')
		if self.coset.size != self.n:
			raise ConstructionError('coset word must have length n')

	@property
	def m(self) -> int:
		return int(self.edge_chk.max()) + 1

	@property
	def k(self) -> int:
		return int(self.info_cols.size)

	@property
	def rate(self) -> float:
		return self.k / self.n

	@property
	def var_degrees(self) -> np.ndarray:
		return np.bincount(self.edge_var, minlength=self.n)

	@property
	def chk_degrees(self) -> np.ndarray:
		return np.bincount(self.edge_chk, minlength=self.m)

	@property
	def parity_check(self) -> sparse.csr_matrix:
		data = np.ones(self.edge_var.size, dtype=np.uint8)
		return sparse.csr_matrix((data, (self.edge_chk, self.edge_var)), shape=(self.m, self.n))

	def syndrome(self, bits: np.ndarray) -> np.ndarray:
		bits = np.asarray(bits, dtype=np.int64)
		return np.add.reduceat(bits[self.edge_var], self.check_ptr) & 1

	def is_codeword(self, bits: np.ndarray) -> bool:
		return not np.any(self.syndrome(bits))
