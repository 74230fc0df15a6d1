import csv
import dataclasses
import json
import math
import subprocess
from collections.abc import Iterable, Mapping
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np

# Significant digits for every float written to CSV
FLOAT_DIGITS = 10

PACKAGE_NAME = 'coded-amp'


class CustomEncoder(json.JSONEncoder):
	def _sanitize_keys(self, obj):
		if isinstance(obj, dict):
			return {str(k): self._sanitize_keys(v) for k, v in obj.items()}
		if isinstance(obj, list | tuple):
			return [self._sanitize_keys(elem) for elem in obj]
		return obj

	def default(self, obj):
		if isinstance(obj, np.integer):
			return int(obj)
		if isinstance(obj, np.floating):
			return float(obj)
		if isinstance(obj, np.bool_):
			return bool(obj)
		if isinstance(obj, np.ndarray):
			return obj.tolist()
		if isinstance(obj, Path):
			return str(obj)
		if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
			return self._sanitize_keys(dataclasses.asdict(obj))

		return super().default(obj)

	def iterencode(self, obj, _one_shot=False):
		# int keys (degree tables) must become strings before encoding
		sanitized_obj = self._sanitize_keys(obj)
		return super().iterencode(sanitized_obj, _one_shot=_one_shot)


def format_value(value: Any) -> str:
	if value is None:
		return ''
	if isinstance(value, bool | np.bool_):
		return str(bool(value)).lower()
	if isinstance(value, float | np.floating):
		return 'nan' if math.isnan(value) else f'{float(value):.{FLOAT_DIGITS}g}'
	return str(value)


def write_rows(path: str | Path, fieldnames: list[str], rows: Iterable[Mapping[str, Any]]) -> Path:
	"""Write dict rows as CSV, floats at FLOAT_DIGITS significant digits."""
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	with path.open('w', newline='', encoding='utf-8') as handle:
		writer = csv.DictWriter(handle, fieldnames=fieldnames)
		writer.writeheader()
		for row in rows:
			writer.writerow({key: format_value(row.get(key)) for key in fieldnames})
	return path


def read_rows(path: str | Path) -> list[dict[str, str]]:
	with Path(path).open(newline='', encoding='utf-8') as handle:
		return list(csv.DictReader(handle))


def write_json(path: str | Path, payload: Any) -> Path:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	with path.open('w', encoding='utf-8') as handle:
		json.dump(payload, handle, cls=CustomEncoder, indent=2)
		handle.write('\n')
	return path


def read_json(path: str | Path) -> Any:
	with Path(path).open(encoding='utf-8') as handle:
		return json.load(handle)


def tool_version() -> str:
	"""`git describe` of the working tree, else the installed package version."""
	root = Path(__file__).resolve().parents[1]
	try:
		result = subprocess.run(
			['git', 'describe', '--always', '--dirty', '--tags'],
			cwd=root,
			check=True,
			stdout=subprocess.PIPE,
			stderr=subprocess.DEVNULL,
			text=True,
			timeout=5,
		)
		described = result.stdout.strip()
		if described:
			return described
	except (OSError, subprocess.SubprocessError):
		pass
	try:
		return metadata.version(PACKAGE_NAME)
	except metadata.PackageNotFoundError:
		return '0+unknown'
