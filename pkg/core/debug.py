"""
Debug logging for the iterative solvers.

Each solver owns a DebugLogger tagged with its component name. Messages are
filtered by level and by the per-category switches in core.config, and are
written to stderr so that CSV written to stdout stays machine readable.
"""

from __future__ import annotations

import sys

from . import config as config_module

_CATEGORY_SWITCHES = {
	'SE': 'DEBUG_SE',
	'AMP': 'DEBUG_AMP',
	'BP': 'DEBUG_BP',
	'LP': 'DEBUG_LP',
	'RATE': 'DEBUG_RATE',
	'RUN': 'DEBUG_RUN',
}


def set_debug(level: int | None) -> None:
	"""Enable debug output at `level`; None or 0 disables it."""
	config_module.DEBUG_ENABLED = bool(level)
	if level:
		config_module.DEBUG_LEVEL = int(level)


class DebugLogger:
	"""Centralized debug logging for one solver component."""

	def __init__(self, component: str):
		self.component = component
		self.step = 0

	@property
	def enabled(self) -> bool:
		return config_module.DEBUG_ENABLED

	@property
	def level(self) -> int:
		return config_module.DEBUG_LEVEL

	def log(self, level: int, category: str, message: str, data: dict | None = None):
		"""Log a debug message with level and category filtering."""
		if not self.enabled or level > self.level:
			return
		switch = _CATEGORY_SWITCHES.get(category)
		if switch and not getattr(config_module, switch, True):
			return

		prefix = f'[{self.component}:T{self.step:02d}:{category}]'
		print(f'{prefix} {message}', file=sys.stderr)

		if data and level >= 2:
			for key, value in data.items():
				print(f'    {key}: {value}', file=sys.stderr)

	def start_step(self, step: int):
		self.step = step

	def log_iteration(self, category: str, values: dict[str, float]):
		"""One line per solver iteration, at the detailed level."""
		if not self.enabled or self.level < 2:
			return
		body = ' '.join(f'{key}={value:.6g}' for key, value in values.items())
		self.log(2, category, body)

	def notice(self, category: str, message: str):
		self.log(1, category, message)
