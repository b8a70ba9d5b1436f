#!/usr/bin/env python

"""This module is the genetic-programming baseline feature constructor.

A population of alpha expressions is evolved by tournament selection,
subtree crossover, subtree mutation and point mutation. The fitness of
an expression is its mean daily Spearman IC against forward returns on
the training split. Every distinct expression seen during the run is
remembered; the best of them by training fitness form a hall of fame
from which the final features are cut by validation fitness.

Authors
-------
    alpha_discovery contributors

Use
---
    This module is intended to be imported:

    >>> result = run_gp(GpConfig(seed=3), ds, panel, returns,
    ...                 n_features=20)
    >>> write_gp_features(result.features, 'gp_features.csv')

Output
-------
    ``gp_features.csv`` with the columns rank, rpn_string, train_ic,
    val_ic, test_ic.

Dependencies
------------
    This module depends on numpy and pandas.
"""

from collections import namedtuple
from dataclasses import dataclass, replace
import logging

import numpy as np
import pandas as pd

from alpha_discovery.Alpha_Discovery_DSL import AlphaExpr, OPERATORS, \
    expr_depth, feature_from_expr, format_rpn, iter_nodes, \
    parse_rpn, random_expr, random_terminal, random_window, replace_subtree
from alpha_discovery.Alpha_Discovery_Errors import ConfigError, DataError, \
    ExpressionError, PanelFormatError
from alpha_discovery.Alpha_Discovery_Evaluation import feature_ic
from alpha_discovery.Alpha_Discovery_Parallel import TaskPool, shared

logger = logging.getLogger(__name__)

GP_FEATURE_COLUMNS = ['rank', 'rpn_string', 'train_ic', 'val_ic', 'test_ic']


@dataclass(frozen=True)
class GpConfig:
    """Settings of one GP run.

    Attributes
    ----------
    population_size: int
        Individuals per generation.
    generations: int
        Generations after the initial population.
    tournament_size: int
        Contenders per tournament.
    p_crossover, p_subtree_mutation, p_point_mutation: float
        Probabilities of each variation; the remainder is reproduction.
    max_depth: int
        Maximum tree depth (a leaf has depth 1).
    elitism: int
        Best individuals copied unchanged into the next generation.
    hall_of_fame: int
        Distinct expressions kept as final candidates; defaults to
        ``population_size``.
    seed: int
        Seed of the run.
    """

    population_size: int = 200
    generations: int = 30
    tournament_size: int = 5
    p_crossover: float = 0.7
    p_subtree_mutation: float = 0.2
    p_point_mutation: float = 0.1
    max_depth: int = 6
    elitism: int = 5
    hall_of_fame: int = None
    seed: int = 0

    @property
    def hall_size(self):
        return self.hall_of_fame or self.population_size

    def validate(self, n_features=None):
        for name in ('p_crossover', 'p_subtree_mutation', 'p_point_mutation'):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError('gp.' + name, 'must lie in [0, 1]')
        total = self.p_crossover + self.p_subtree_mutation + \
            self.p_point_mutation
        if total > 1 + 1e-12:
            raise ConfigError('gp.p_crossover', 'variation probabilities sum '
                              'to {:.3f} > 1'.format(total))
        if self.population_size < 1:
            raise ConfigError('gp.population_size', 'must be >= 1')
        if not 0 <= self.elitism < self.population_size:
            raise ConfigError('gp.elitism', 'must be >= 0 and < '
                              'population_size')
        if self.tournament_size < 1:
            raise ConfigError('gp.tournament_size', 'must be >= 1')
        if self.max_depth < 1:
            raise ConfigError('gp.max_depth', 'must be >= 1')
        if self.generations < 0:
            raise ConfigError('gp.generations', 'must be >= 0')
        if n_features is not None and self.hall_size < n_features:
            raise ConfigError('gp.hall_of_fame', 'holds {} expressions, fewer '
                              'than the {} features requested'.format(
                                  self.hall_size, n_features))


@dataclass(frozen=True)
class Individual:
    """An expression with its fitness.

    Attributes
    ----------
    expr: AlphaExpr
        The feature's expression.
    train_fitness, val_fitness, test_fitness: float
        Mean daily IC on each split; None until evaluated.
    degenerate: bool
        True when the feature was constant (or undefined) on every
        scored training day.
    """

    expr: AlphaExpr
    train_fitness: float = None
    val_fitness: float = None
    test_fitness: float = None
    degenerate: bool = False

    @property
    def rpn(self):
        return format_rpn(self.expr)


GenerationStats = namedtuple('GenerationStats', ['generation', 'best', 'mean',
                                                 'degenerate', 'distinct'])
GenerationStats.__doc__ = """Train-fitness statistics of one generation."""

GpResult = namedtuple('GpResult', ['features', 'history'])
GpResult.__doc__ = """Output of run_gp.

features: list of Individual, best validation fitness first.
history: list of GenerationStats, one per generation (0 = initial).
"""


def _split_ic(expr, ds, panel, returns, split):
    feature = feature_from_expr(expr, panel, ds.window_len)
    days = ds.eligible_days(split)
    return feature_ic(feature, returns, days, ds.min_cross_section)


def fitness(expr, ds, panel, returns, split='train'):
    """Mean daily Spearman IC of an expression on one split.

    Days on which the feature is cross-sectionally constant score 0.

    Parameters
    ----------
    expr: AlphaExpr
        Expression to score.
    ds: WindowDataset
        Supplies split ranges and day eligibility.
    panel: OhlcvPanel
        Panel to evaluate the expression on.
    returns: ForwardReturns
        Forward returns to correlate with.
    split: string
        'train', 'val' or 'test'.

    Returns
    -------
    fitness: float
        In [-1, 1].
    """
    return _split_ic(expr, ds, panel, returns, split).mean


def _score_task(task):
    """Worker entry point: ``(rpn, splits)`` -> list of (mean, degenerate)."""
    rpn, splits = task
    expr = parse_rpn(rpn)
    scores = []
    for split in splits:
        summary = _split_ic(expr, shared('ds'), shared('panel'),
                            shared('returns'), split)
        flat = summary.series.size == 0 or bool(summary.degenerate.all())
        scores.append((summary.mean, flat))
    return scores


def _tournament(pop, size, rng):
    contenders = rng.integers(0, len(pop), size)
    scores = [pop[i].train_fitness for i in contenders]
    return pop[contenders[int(np.argmax(scores))]]


def _random_node(expr, rng):
    nodes = list(iter_nodes(expr))
    return nodes[rng.integers(len(nodes))]


def _leftmost_leaf(expr):
    while not expr.is_leaf:
        expr = expr.children[0]
    return expr


def truncate(expr, max_depth, depth=1):
    """Replaces every operator at ``max_depth`` by its leftmost leaf."""
    if expr.is_leaf:
        return expr
    if depth >= max_depth:
        return _leftmost_leaf(expr)
    children = tuple(truncate(c, max_depth, depth + 1) for c in expr.children)
    return AlphaExpr(expr.name, children, expr.window, expr.value)


def crossover(parent, donor, max_depth, rng):
    """Swaps a random subtree of ``parent`` for a random subtree of
    ``donor``, truncating the child to ``max_depth``."""
    path, _, _ = _random_node(parent, rng)
    _, graft, _ = _random_node(donor, rng)
    child = replace_subtree(parent, path, graft)
    if expr_depth(child) > max_depth:
        child = truncate(child, max_depth)
    return child


def subtree_mutation(parent, max_depth, rng):
    """Replaces a random node's subtree with a freshly grown one that
    fits within ``max_depth``."""
    path, _, depth = _random_node(parent, rng)
    return replace_subtree(parent, path,
                           random_expr(rng, max_depth - depth + 1))


def point_mutation(parent, rng):
    """Changes one node: an operator becomes another of the same arity,
    a terminal becomes a different terminal or constant."""
    path, node, _ = _random_node(parent, rng)
    if node.is_leaf:
        new = random_terminal(rng)
        while new.token() == node.token():
            new = random_terminal(rng)
        return replace_subtree(parent, path, new)

    arity = OPERATORS[node.name].arity
    choices = [op for op in OPERATORS.values()
               if op.arity == arity and op.name != node.name]
    op = choices[rng.integers(len(choices))]
    if not op.windowed:
        window = None
    elif node.window is not None:
        window = node.window
    else:
        window = random_window(rng)
    return replace_subtree(parent, path,
                           AlphaExpr(op.name, node.children, window))


def evolve_generation(pop, cfg, rng):
    """Breeds the next generation.

    The ``cfg.elitism`` best individuals by train fitness are copied
    unchanged. Every other slot gets a tournament winner that is varied
    by crossover, subtree mutation or point mutation according to the
    configured probabilities, or else reproduced as is.

    Parameters
    ----------
    pop: list of Individual
        The evaluated current generation.
    cfg: GpConfig
        Variation settings.
    rng: numpy.random.Generator
        Seeded generator.

    Returns
    -------
    offspring: list of Individual
        Same size as ``pop``. Elites and reproduced individuals keep their
        fitness; varied ones carry ``train_fitness=None`` until evaluated.
    """
    ranked = sorted(pop, key=lambda ind: -ind.train_fitness)
    offspring = list(ranked[:cfg.elitism])
    cut_crossover = cfg.p_crossover
    cut_subtree = cut_crossover + cfg.p_subtree_mutation
    cut_point = cut_subtree + cfg.p_point_mutation

    while len(offspring) < len(pop):
        parent = _tournament(pop, cfg.tournament_size, rng)
        method = rng.random()
        if method < cut_crossover:
            donor = _tournament(pop, cfg.tournament_size, rng)
            child = crossover(parent.expr, donor.expr, cfg.max_depth, rng)
        elif method < cut_subtree:
            child = subtree_mutation(parent.expr, cfg.max_depth, rng)
        elif method < cut_point:
            child = point_mutation(parent.expr, rng)
        else:
            offspring.append(parent)
            continue
        offspring.append(Individual(child))
    return offspring


class _Scorer:
    """Memoized, optionally parallel scoring of expressions by RPN."""

    def __init__(self, pool):
        self.pool = pool
        self.cache = {}

    def score(self, rpns, splits):
        todo = list(dict.fromkeys(rpn for rpn in rpns
                                  if (rpn, splits) not in self.cache))
        results = self.pool.map(_score_task,
                                [(rpn, splits) for rpn in todo])
        for rpn, result in zip(todo, results):
            self.cache[(rpn, splits)] = result
        return [self.cache[(rpn, splits)] for rpn in rpns]

    def evaluate(self, pop):
        pending = [ind.rpn for ind in pop if ind.train_fitness is None]
        scores = dict(zip(pending, self.score(pending, ('train',))))
        evaluated = []
        for ind in pop:
            if ind.train_fitness is None:
                (train, flat), = scores[ind.rpn]
                ind = replace(ind, train_fitness=train, degenerate=flat)
            evaluated.append(ind)
        return evaluated


def _stats(generation, pop):
    train = np.array([ind.train_fitness for ind in pop])
    return GenerationStats(generation, float(train.max()), float(train.mean()),
                           sum(ind.degenerate for ind in pop),
                           len({ind.rpn for ind in pop}))


def run_gp(cfg, ds, panel, returns, n_features=100, workers=1):
    """Evolves expressions and returns the best distinct ones.

    Parameters
    ----------
    cfg: GpConfig
        Run settings.
    ds: WindowDataset
        Split ranges and day eligibility.
    panel: OhlcvPanel
        Panel the expressions are evaluated on.
    returns: ForwardReturns
        Forward returns fitness correlates with.
    n_features: int
        Number of expressions to return.
    workers: int
        Processes for fitness evaluation; never changes the result.

    Returns
    -------
    result: GpResult
        The top ``n_features`` hall-of-fame expressions by validation
        fitness, with train, validation and test fitness filled in, plus
        per-generation statistics.

    Raises
    ------
    DataError
        If fewer than ``n_features`` distinct expressions were found.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    context = {'ds': ds, 'panel': panel, 'returns': returns}
    with TaskPool(workers, context) as pool:
        scorer = _Scorer(pool)
        pop = [Individual(random_expr(rng, cfg.max_depth))
               for _ in range(cfg.population_size)]
        pop = scorer.evaluate(pop)
        seen = {}
        history = []
        for generation in range(cfg.generations + 1):
            if generation:
                pop = scorer.evaluate(evolve_generation(pop, cfg, rng))
            for ind in pop:
                seen.setdefault(ind.rpn, ind)
            stats = _stats(generation, pop)
            history.append(stats)
            logger.info('GP generation %d: best %.4f, mean %.4f, %d '
                        'degenerate, %d distinct', *stats)

        hall = sorted(seen.values(), key=lambda ind: -ind.train_fitness)
        hall = hall[:cfg.hall_size]
        if len(hall) < n_features:
            raise DataError('GP found {} distinct expressions, {} requested; '
                            'raise gp.population_size or gp.generations'
                            .format(len(hall), n_features))
        scores = scorer.score([ind.rpn for ind in hall], ('val', 'test'))

    hall = [replace(ind, val_fitness=val, test_fitness=test)
            for ind, ((val, _), (test, _)) in zip(hall, scores)]
    features = sorted(hall, key=lambda ind: -ind.val_fitness)[:n_features]
    logger.info('GP kept %d of %d hall-of-fame expressions; best val IC %.4f',
                len(features), len(hall), features[0].val_fitness
                if features else 0.0)
    return GpResult(features, history)


def write_gp_features(individuals, path):
    """Writes ranked GP features to ``path``."""
    frame = pd.DataFrame({
        'rank': np.arange(1, len(individuals) + 1),
        'rpn_string': [ind.rpn for ind in individuals],
        'train_ic': [ind.train_fitness for ind in individuals],
        'val_ic': [ind.val_fitness for ind in individuals],
        'test_ic': [ind.test_fitness for ind in individuals]},
        columns=GP_FEATURE_COLUMNS)
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info('Wrote %d GP features to %s', len(frame), path)


def read_gp_features(path):
    """Reads ``gp_features.csv`` back into Individuals, in rank order.

    Raises
    ------
    PanelFormatError
        On a wrong header or an unparsable expression.
    """
    try:
        frame = pd.read_csv(path, dtype={'rpn_string': str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise PanelFormatError('{}: {}'.format(path, err))
    if list(frame.columns) != GP_FEATURE_COLUMNS:
        raise PanelFormatError('{}: header must be {}'.format(
            path, ','.join(GP_FEATURE_COLUMNS)), 1)

    individuals = []
    for line, row in enumerate(frame.itertuples(index=False), start=2):
        try:
            expr = parse_rpn(row.rpn_string)
        except ExpressionError as err:
            raise PanelFormatError('{}: {}'.format(path, err), line)
        individuals.append(Individual(expr, float(row.train_ic),
                                      float(row.val_ic), float(row.test_ic)))
    return individuals