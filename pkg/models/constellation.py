import csv
import math
from dataclasses import dataclass
from functools import cache
from pathlib import Path

import numpy as np

from core.errors import DomainError

PRESET_NAMES = ('bpsk', 'qpsk', '8psk', '16qam', 'gaussian')

# Tolerance on the unit-energy and prior-sum invariants
_NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Constellation:
	"""Discrete complex signal set with priors, or the Gaussian-signaling marker.

	Point k carries the bit label given by the binary expansion of k (most
	significant bit first); presets are laid out so that these labels form a
	Gray mapping.
	"""

	label: str
	points: np.ndarray | None = None
	priors: np.ndarray | None = None

	def __post_init__(self):
		if self.points is None:
			if self.priors is not None:
				raise DomainError('the Gaussian marker takes no priors')
			return
		points = np.asarray(self.points, dtype=complex).ravel()
		priors = (
			np.full(points.size, 1.0 / points.size)
			if self.priors is None
			else np.asarray(self.priors, dtype=float).ravel()
		)
		if points.size < 2:
			raise DomainError(f'{self.label}: a constellation needs at least two points')
		if priors.size != points.size:
			raise DomainError(f'{self.label}: {points.size} points but {priors.size} priors')
		if not np.all(np.isfinite(points)):
			raise DomainError(f'{self.label}: non-finite constellation point')
		if np.any(priors <= 0):
			raise DomainError(f'{self.label}: every prior must be positive')
		if abs(priors.sum() - 1.0) > _NORM_TOL:
			raise DomainError(f'{self.label}: priors sum to {priors.sum():.15g}, not 1')
		energy = float(np.sum(priors * np.abs(points) ** 2))
		if abs(energy - 1.0) > _NORM_TOL:
			raise DomainError(f'{self.label}: average energy {energy:.15g} is not 1')
		points.setflags(write=False)
		priors.setflags(write=False)
		object.__setattr__(self, 'points', points)
		object.__setattr__(self, 'priors', priors)

	@property
	def is_gaussian(self) -> bool:
		return self.points is None

	@property
	def size(self) -> int:
		return 0 if self.points is None else self.points.size

	@property
	def bits_per_symbol(self) -> int:
		"""Bits carried per symbol; 0 when the size is not a power of two."""
		size = self.size
		if size < 2 or size & (size - 1):
			return 0
		return size.bit_length() - 1

	@property
	def bit_labels(self) -> np.ndarray:
		"""(size, bits_per_symbol) array of 0/1 labels, MSB first."""
		width = self.bits_per_symbol
		if width == 0:
			raise DomainError(f'{self.label}: no bit labelling for {self.size} points')
		shifts = np.arange(width - 1, -1, -1)
		return ((np.arange(self.size)[:, None] >> shifts) & 1).astype(np.uint8)

	def __repr__(self) -> str:
		return f'Constellation({self.label!r}, size={self.size})'


def _gray(k: int) -> int:
	return k ^ (k >> 1)


def gaussian() -> Constellation:
	return _preset('gaussian')


def preset(name: str) -> Constellation:
	"""Return the named preset; the same object is returned for repeated calls."""
	key = name.strip().lower()
	if key not in PRESET_NAMES:
		raise DomainError(f'unknown constellation {name!r}; expected one of {", ".join(PRESET_NAMES)}')
	return _preset(key)


@cache
def _preset(key: str) -> Constellation:
	if key == 'gaussian':
		return Constellation('GAUSSIAN')
	if key == 'bpsk':
		return Constellation('BPSK', np.array([1.0, -1.0], dtype=complex))
	if key == 'qpsk':
		bits = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
		points = ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1])) / math.sqrt(2)
		return Constellation('QPSK', points)
	if key == '8psk':
		points = np.empty(8, dtype=complex)
		for k in range(8):
			points[_gray(k)] = np.exp(2j * np.pi * k / 8)
		return Constellation('8PSK', points)
	# 16QAM: two bits per axis, Gray PAM 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
	levels = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}
	points = np.empty(16, dtype=complex)
	for index in range(16):
		points[index] = complex(levels[index >> 2], levels[index & 0b11])
	return Constellation('16QAM', points / math.sqrt(10))


def load_csv(path: str | Path, label: str | None = None) -> Constellation:
	"""Load a custom constellation from a CSV file with columns re,im,prior."""
	path = Path(path)
	with path.open(newline='') as handle:
		reader = csv.DictReader(handle)
		missing = {'re', 'im', 'prior'} - set(reader.fieldnames or ())
		if missing:
			raise DomainError(f'{path}: missing columns {sorted(missing)}')
		rows = list(reader)
	points = np.array([complex(float(row['re']), float(row['im'])) for row in rows])
	priors = np.array([float(row['prior']) for row in rows])
	return Constellation(label or path.stem, points, priors)


def resolve(name_or_path: str) -> Constellation:
	"""Preset name, or a path to a CSV constellation."""
	if name_or_path.strip().lower() in PRESET_NAMES:
		return preset(name_or_path)
	path = Path(name_or_path)
	if not path.is_file():
		raise DomainError(f'{name_or_path!r} is neither a preset nor a CSV file')
	return load_csv(path)
