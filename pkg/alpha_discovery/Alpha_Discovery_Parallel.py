#!/usr/bin/env python

"""This module fans independent tasks (fitness evaluations, network
trainings) out over a pool of worker processes.

Every worker receives the same read-only data context once, through the
pool initializer, instead of with every task. Results always come back
in task order, so a run with one worker and a run with eight produce
the same output.

Authors
-------
    alpha_discovery contributors

Use
---
    This module is intended to be imported:

    >>> results = map_tasks(score, tasks, workers=4,
    ...                     context={'ds': ds, 'panel': panel})

    Inside ``score``, ``shared('ds')`` returns the dataset. A loop that
    maps many batches keeps one pool open:

    >>> with TaskPool(4, {'ds': ds}) as pool:
    ...     for batch in batches:
    ...         results = pool.map(score, batch)
"""

from multiprocessing import Pool
import logging

logger = logging.getLogger(__name__)

_CONTEXT = {}


def _install(context):
    """Pool initializer: makes ``context`` visible to ``shared``."""
    global _CONTEXT
    _CONTEXT = dict(context or {})


def shared(name):
    """Returns an item of the data context installed for this process.

    Parameters
    ----------
    name: string
        Key given in the ``context`` of ``map_tasks``.
    """
    try:
        return _CONTEXT[name]
    except KeyError:
        raise KeyError('no shared item {!r}; pass it in the context of '
                       'map_tasks'.format(name))


class TaskPool:
    """Worker processes that share one data context across many ``map``
    calls.

    Parameters
    ----------
    workers: int
        Number of processes; 1 runs every task in the calling process.
    context: dict
        Read-only data made available through ``shared``.
    """

    def __init__(self, workers=1, context=None):
        self.workers = workers
        self.context = context
        self._pool = None
        self._previous = None

    def __enter__(self):
        if self.workers <= 1:
            self._previous = _CONTEXT
            _install(self.context)
        else:
            logger.debug('Starting %d workers', self.workers)
            self._pool = Pool(self.workers, initializer=_install,
                              initargs=(self.context,))
        return self

    def __exit__(self, exc_type, exc, tb):
        if self._pool is None:
            _install(self._previous)
            return
        if exc_type is None:
            self._pool.close()
        else:
            self._pool.terminate()
        self._pool.join()
        self._pool = None

    def map(self, func, tasks):
        """``func(task)`` for every task, in task order."""
        tasks = list(tasks)
        if self._pool is None:
            return [func(task) for task in tasks]
        return self._pool.map(func, tasks)


def map_tasks(func, tasks, workers=1, context=None):
    """Applies ``func`` to every task, in process or on a worker pool
    opened for this call only.

    Parameters
    ----------
    func: callable
        A module-level function taking one task.
    tasks: iterable
        Picklable task descriptions.
    workers: int
        Number of processes; 1 runs in the calling process.
    context: dict
        Read-only data made available through ``shared``.

    Returns
    -------
    results: list
        ``func(task)`` for every task, in task order.
    """
    tasks = list(tasks)
    workers = min(workers, len(tasks)) if len(tasks) > 1 else 1
    logger.debug('Mapping %d tasks over %d workers', len(tasks), workers)
    with TaskPool(workers, context) as pool:
        return pool.map(func, tasks)
