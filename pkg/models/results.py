import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.stats import norm

RATE_KINDS = ('capacity', 'amp', 'turbo_lmmse', 'amp_dec')


@dataclass(frozen=True)
class RatePoint:
	snr_db: float
	rate: float
	kind: str
	error: str = ''


@dataclass(frozen=True)
class AmpRecord:
	iter: int
	rho_se: float
	v_se: float
	mse_s: float
	mse_r: float


@dataclass
class AmpTrace:
	"""Per-iteration record of an AMP run; optionally keeps the error vectors h^t = r^t - x."""

	records: list[AmpRecord] = field(default_factory=list)
	errors_r: list[np.ndarray] = field(default_factory=list)

	def append(self, record: AmpRecord):
		self.records.append(record)

	def __len__(self) -> int:
		return len(self.records)

	def __iter__(self):
		return iter(self.records)

	def column(self, name: str) -> np.ndarray:
		return np.array([getattr(record, name) for record in self.records], dtype=float)

	@property
	def final_mse(self) -> float:
		return self.records[-1].mse_s if self.records else math.nan

	@staticmethod
	def fieldnames() -> list[str]:
		return [f.name for f in fields(AmpRecord)]


@dataclass(frozen=True)
class MatchReport:
	tunnel_open: bool
	min_gap: float
	predicted_threshold_db: float | None
	rate_gap_to_capacity: float
	margin: float
	snr_db: float
	worst_rho: float


@dataclass(frozen=True)
class BerPoint:
	snr_db: float
	bit_errors: int
	bits: int
	frame_errors: int
	frames: int
	ber: float
	fer: float
	half_width: float
	aborted: bool = False

	@classmethod
	def from_counts(
		cls,
		snr_db: float,
		bit_errors: int,
		bits: int,
		frame_errors: int,
		frames: int,
		aborted: bool = False,
		confidence: float = 0.95,
	) -> 'BerPoint':
		ber = bit_errors / bits if bits else 0.0
		fer = frame_errors / frames if frames else 0.0
		z = float(norm.ppf(0.5 + confidence / 2))
		half_width = z * math.sqrt(ber * (1 - ber) / bits) if bits else 0.0
		return cls(snr_db, bit_errors, bits, frame_errors, frames, ber, fer, half_width, aborted)
