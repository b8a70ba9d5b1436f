"""Tests for the worker-pool helpers."""

import pytest

from alpha_discovery import Alpha_Discovery_Parallel
from alpha_discovery.Alpha_Discovery_Parallel import TaskPool, map_tasks, \
    shared


def _scaled(task):
    return task * shared('factor')


class TestMapTasks:

    def test_in_process_with_context(self):
        assert map_tasks(_scaled, [1, 2, 3], context={'factor': 10}) == \
            [10, 20, 30]

    def test_context_is_restored(self):
        map_tasks(_scaled, [1], context={'factor': 2})
        with pytest.raises(KeyError):
            shared('factor')

    def test_pool_keeps_task_order(self):
        assert map_tasks(abs, [-3, 2, -1, 5], workers=2) == [3, 2, 1, 5]

    def test_empty(self):
        assert map_tasks(abs, [], workers=4) == []


class TestTaskPool:

    @pytest.mark.parametrize('workers', [1, 2])
    def test_many_batches_share_one_context(self, workers):
        with TaskPool(workers, {'factor': 3}) as pool:
            first = pool.map(_scaled, [1, 2, 3])
            second = pool.map(_scaled, [4])
        assert first == [3, 6, 9]
        assert second == [12]

    def test_processes_start_once(self, monkeypatch):
        started = []
        real_pool = Alpha_Discovery_Parallel.Pool

        def counting_pool(*args, **kwargs):
            started.append(args)
            return real_pool(*args, **kwargs)

        monkeypatch.setattr(Alpha_Discovery_Parallel, 'Pool', counting_pool)
        with TaskPool(2, {'factor': 2}) as pool:
            results = [pool.map(_scaled, range(4)) for _ in range(5)]
        assert len(started) == 1
        assert results == [[0, 2, 4, 6]] * 5

    def test_in_process_context_is_restored(self):
        with TaskPool(1, {'factor': 5}) as pool:
            assert pool.map(_scaled, [2]) == [10]
        with pytest.raises(KeyError):
            shared('factor')
