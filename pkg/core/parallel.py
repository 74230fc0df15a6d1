"""
Parallel execution utilities for independent Monte Carlo trials.

Tasks must be picklable (a module-level function plus plain arguments). Results
always come back in task order, so aggregation is deterministic whatever the
worker count.
"""

from __future__ import annotations

import concurrent.futures
import os
from collections.abc import Callable, Iterable
from typing import TypeVar

import numpy as np

T = TypeVar('T')
R = TypeVar('R')


def trial_seed(master_seed: int, *path: int) -> int:
	"""Derive an independent 63-bit seed for the trial addressed by `path`."""
	sequence = np.random.SeedSequence([int(master_seed), *(int(p) for p in path)])
	return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def execute_in_parallel(
	fn: Callable[[T], R],
	tasks: Iterable[T],
	workers: int | None = None,
	deterministic: bool = False,
) -> list[R]:
	"""Run `fn` over `tasks` and return the results in task order.

	Args:
		fn: module-level callable taking one task
		tasks: iterable of task arguments
		workers: number of worker processes (default: os.cpu_count())
		deterministic: force in-process sequential execution
	"""
	task_list = list(tasks)
	max_workers = workers if workers is not None else (os.cpu_count() or 1)
	if deterministic or max_workers <= 1 or len(task_list) <= 1:
		return [fn(task) for task in task_list]
	with concurrent.futures.ProcessPoolExecutor(max_workers=max_workers) as executor:
		return list(executor.map(fn, task_list))
