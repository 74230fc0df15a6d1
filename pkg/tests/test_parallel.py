"""Tests for seeded trial fan-out."""

from core.parallel import execute_in_parallel, trial_seed


def test_trial_seeds_are_stable_and_distinct():
	assert trial_seed(91, 0, 1) == trial_seed(91, 0, 1)
	seeds = {trial_seed(91, point, frame) for point in range(4) for frame in range(50)}
	assert len(seeds) == 200
	assert all(0 <= seed < 2**63 for seed in seeds)
	assert trial_seed(91, 1, 0) != trial_seed(92, 1, 0)


def test_results_keep_task_order():
	tasks = [-5, 3, -1, 0, 8]
	assert execute_in_parallel(abs, tasks, workers=2) == [5, 3, 1, 0, 8]
	assert execute_in_parallel(abs, tasks, workers=4, deterministic=True) == [5, 3, 1, 0, 8]


def test_empty_task_list():
	assert execute_in_parallel(abs, [], workers=3) == []
