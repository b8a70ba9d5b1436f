#!/usr/bin/env python

"""This module defines the alpha-expression language: a small set of
total operators over OHLCV history, expression trees, their reverse
polish (postfix) token streams, two evaluators (a vectorised tree walk
and a stack machine) and the library of classical features used to
pre-train networks.

Every operator is total: safe_div returns 0 when the denominator is
within 1e-12 of zero, ts_std returns 0 on constant windows, and every
intermediate result is clamped to a finite range. Windowed operators
only look backwards in time, so an expression's value on a day never
depends on later days.

Token syntax
------------
    terminals       open high low close volume
    constants       decimal literals, e.g. ``1.0`` or ``-0.25``
    unary           neg abs signed_log1p cs_rank
    unary windowed  delay_d delta_d ts_mean_d ts_std_d ts_max_d ts_min_d
    binary          add sub mul safe_div

    ``close open sub`` is ``sub(close, open)``.

Authors
-------
    alpha_discovery contributors

Use
---
    This module is intended to be imported:

    >>> expr = parse_rpn('close close delay_5 safe_div 1.0 sub')
    >>> format_rpn(expr)
    'close close delay_5 safe_div 1.0 sub'

Dependencies
------------
    This module depends on numpy and scipy.
"""

from dataclasses import dataclass, field
import logging
import re

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.stats import rankdata

from alpha_discovery.Alpha_Discovery_Errors import ExpressionError
from alpha_discovery.Alpha_Discovery_Market_Data import FIELDS, FeaturePanel, \
    window_mask

logger = logging.getLogger(__name__)

TERMINALS = FIELDS
CONSTANT = 'const'
ZERO_GUARD = 1e-12
VALUE_LIMIT = 1e100
MAX_WINDOW = 30
RANDOM_WINDOW_MAX = 20


@dataclass(frozen=True)
class AlphaExpr:
    """One node of an expression tree; the root stands for the whole
    expression.

    Attributes
    ----------
    name: string
        A terminal (open/high/low/close/volume), 'const', or an operator
        name without its window suffix.
    children: tuple of AlphaExpr
        Operands, in argument order.
    window: int
        Time-window parameter of windowed operators, else None.
    value: float
        Value of a constant leaf, else None.
    literal: string
        Source text of a parsed constant, so that it renders back as
        written; None renders ``repr(value)``. Ignored by equality.
    """

    name: str
    children: tuple = ()
    window: int = None
    value: float = None
    literal: str = field(default=None, compare=False)

    @property
    def is_leaf(self):
        return not self.children

    def token(self):
        """The RPN token of this node alone."""
        if self.name == CONSTANT:
            return self.literal or repr(float(self.value))
        if self.window is not None:
            return '{}_{}'.format(self.name, self.window)
        return self.name

    def __str__(self):
        if self.is_leaf:
            return self.token()
        return '{}({})'.format(self.token(),
                               ', '.join(str(c) for c in self.children))


def _clamp(x):
    x = np.nan_to_num(x, nan=0.0, posinf=VALUE_LIMIT, neginf=-VALUE_LIMIT)
    return np.clip(x, -VALUE_LIMIT, VALUE_LIMIT)


def _delay(x, d):
    out = np.empty_like(x)
    if d >= x.shape[1]:
        out[:] = x[:, :1]
        return out
    out[:, d:] = x[:, :-d]
    out[:, :d] = x[:, :1]
    return out


def _rolling(x, d):
    """Trailing windows of length d; the first column is repeated to pad
    days without enough history."""
    if d > 1:
        pad = np.repeat(x[:, :1], d - 1, axis=1)
        x = np.concatenate([pad, x], axis=1)
    return sliding_window_view(x, d, axis=1)


def _ts_std(x, d):
    windows = _rolling(x, d)
    std = windows.std(axis=-1)
    constant = windows.max(axis=-1) == windows.min(axis=-1)
    std[constant] = 0.0
    return std


def _cs_rank(x, tradable):
    out = np.full(x.shape, 0.5)
    for day in range(x.shape[1]):
        mask = tradable[:, day]
        count = int(mask.sum())
        if count >= 2:
            out[mask, day] = (rankdata(x[mask, day]) - 1.0) / (count - 1.0)
    return out


def _safe_div(a, b):
    small = np.abs(b) < ZERO_GUARD
    return np.where(small, 0.0, a / np.where(small, 1.0, b))


@dataclass(frozen=True)
class Operator:
    """An entry of the operator set.

    Attributes
    ----------
    name: string
        Operator name (without window suffix).
    arity: int
        Number of operands.
    windowed: bool
        Whether the operator takes a time-window parameter.
    """

    name: str
    arity: int
    windowed: bool = False

    def apply(self, args, window, tradable):
        """Applies the operator to asset x day grids."""
        with np.errstate(all='ignore'):
            return _clamp(_KERNELS[self.name](args, window, tradable))


_KERNELS = {
    'neg': lambda a, d, t: -a[0],
    'abs': lambda a, d, t: np.abs(a[0]),
    'signed_log1p': lambda a, d, t: np.sign(a[0]) * np.log1p(np.abs(a[0])),
    'cs_rank': lambda a, d, t: _cs_rank(a[0], t),
    'delay': lambda a, d, t: _delay(a[0], d),
    'delta': lambda a, d, t: a[0] - _delay(a[0], d),
    'ts_mean': lambda a, d, t: _rolling(a[0], d).mean(axis=-1),
    'ts_std': lambda a, d, t: _ts_std(a[0], d),
    'ts_max': lambda a, d, t: _rolling(a[0], d).max(axis=-1),
    'ts_min': lambda a, d, t: _rolling(a[0], d).min(axis=-1),
    'add': lambda a, d, t: a[0] + a[1],
    'sub': lambda a, d, t: a[0] - a[1],
    'mul': lambda a, d, t: a[0] * a[1],
    'safe_div': lambda a, d, t: _safe_div(a[0], a[1]),
}

OPERATORS = {op.name: op for op in (
    Operator('neg', 1),
    Operator('abs', 1),
    Operator('signed_log1p', 1),
    Operator('cs_rank', 1),
    Operator('delay', 1, True),
    Operator('delta', 1, True),
    Operator('ts_mean', 1, True),
    Operator('ts_std', 1, True),
    Operator('ts_max', 1, True),
    Operator('ts_min', 1, True),
    Operator('add', 2),
    Operator('sub', 2),
    Operator('mul', 2),
    Operator('safe_div', 2),
)}
OPERATOR_NAMES = tuple(OPERATORS)

_WINDOWED_TOKEN = re.compile(r'^([a-z_]+?)_(\d+)$')

CLASSICAL_FEATURES = {
    'momentum_5': 'close close delay_5 safe_div 1.0 sub',
    'momentum_20': 'close close delay_20 safe_div 1.0 sub',
    'reversal_5': 'close close delay_5 safe_div 1.0 sub neg',
    'volatility_20': 'close delta_1 close delay_1 safe_div ts_std_20',
    'volume_ratio_5_20': 'volume ts_mean_5 volume ts_mean_20 safe_div',
    'range_hl_10': 'high ts_max_10 low ts_min_10 sub close safe_div',
    'close_to_ts_max_20': 'close close ts_max_20 safe_div',
    'zscore_close_10': 'close close ts_mean_10 sub close ts_std_10 safe_div',
}


def _read_token(token, position):
    """Classifies one token as a terminal, constant or operator node
    template (an AlphaExpr without children)."""
    if token in TERMINALS:
        return AlphaExpr(token)
    if token in OPERATORS:
        if OPERATORS[token].windowed:
            raise ExpressionError('operator {!r} at position {} needs a '
                                  'window suffix'.format(token, position))
        return AlphaExpr(token)
    match = _WINDOWED_TOKEN.match(token)
    if match and match.group(1) in OPERATORS:
        name, window = match.group(1), int(match.group(2))
        if not OPERATORS[name].windowed:
            raise ExpressionError('operator {!r} at position {} takes no '
                                  'window'.format(name, position))
        if not 1 <= window <= MAX_WINDOW:
            raise ExpressionError('window {} at position {} outside 1..{}'
                                  .format(window, position, MAX_WINDOW))
        return AlphaExpr(name, window=window)
    try:
        value = float(token)
    except ValueError:
        raise ExpressionError('unknown token {!r} at position {}'.format(
            token, position))
    if not np.isfinite(value):
        raise ExpressionError('constant {!r} at position {} is not finite'
                              .format(token, position))
    return AlphaExpr(CONSTANT, value=value, literal=token)


def _tokens_of(tokens):
    if isinstance(tokens, str):
        tokens = tokens.split()
    tokens = list(tokens)
    if not tokens:
        raise ExpressionError('empty token stream')
    return tokens


def _arity(node):
    return OPERATORS[node.name].arity if node.name in OPERATORS else 0


def parse_rpn(tokens):
    """Builds an expression tree from a postfix token stream.

    Parameters
    ----------
    tokens: list of strings or string
        Tokens, or one whitespace-separated string.

    Returns
    -------
    expr: AlphaExpr
        The tree whose postorder serialization is ``tokens``.

    Raises
    ------
    ExpressionError
        On an unknown token, an operator with too few operands, or items
        left on the stack at the end.
    """
    stack = []
    for position, token in enumerate(_tokens_of(tokens)):
        node = _read_token(token, position)
        arity = _arity(node)
        if len(stack) < arity:
            raise ExpressionError(
                'arity underflow: {!r} at position {} needs {} operand(s), '
                'stack holds {}'.format(token, position, arity, len(stack)))
        if arity:
            operands = tuple(stack[-arity:])
            del stack[-arity:]
            node = AlphaExpr(node.name, operands, node.window)
        stack.append(node)
    if len(stack) != 1:
        raise ExpressionError('{} items left on the stack; an expression '
                              'must reduce to exactly one'.format(len(stack)))
    return stack[0]


def to_rpn(expr):
    """Serializes an expression tree to its postorder token list."""
    tokens = []

    def visit(node):
        for child in node.children:
            visit(child)
        tokens.append(node.token())

    visit(expr)
    return tokens


def format_rpn(expr):
    """The whitespace-separated RPN string of an expression."""
    return ' '.join(to_rpn(expr))


def expr_depth(expr):
    """Depth of a tree; a single leaf has depth 1."""
    if expr.is_leaf:
        return 1
    return 1 + max(expr_depth(child) for child in expr.children)


def node_count(expr):
    return 1 + sum(node_count(child) for child in expr.children)


def iter_nodes(expr, path=(), depth=1):
    """Yields ``(path, node, depth)`` in preorder. A path is the tuple
    of child indices leading from the root to the node."""
    yield path, expr, depth
    for i, child in enumerate(expr.children):
        for item in iter_nodes(child, path + (i,), depth + 1):
            yield item


def subtree_at(expr, path):
    for i in path:
        expr = expr.children[i]
    return expr


def replace_subtree(expr, path, new):
    """Returns a copy of ``expr`` with the node at ``path`` replaced."""
    if not path:
        return new
    head, rest = path[0], path[1:]
    children = list(expr.children)
    children[head] = replace_subtree(children[head], rest, new)
    return AlphaExpr(expr.name, tuple(children), expr.window, expr.value)


def lookback(expr):
    """Days of history an expression needs before its value is exact."""
    if expr.is_leaf:
        return 0
    inner = max(lookback(child) for child in expr.children)
    if expr.name in ('delay', 'delta'):
        return inner + expr.window
    if expr.window is not None:
        return inner + expr.window - 1
    return inner


def validate_expr(expr, max_depth=None, max_window=MAX_WINDOW):
    """Checks arity, depth and window bounds at every node.

    Raises
    ------
    ExpressionError
        Naming the first violated bound.
    """
    for path, node, depth in iter_nodes(expr):
        if node.name in TERMINALS or node.name == CONSTANT:
            if node.children:
                raise ExpressionError('leaf {} at {} has children'.format(
                    node.name, path))
            continue
        if node.name not in OPERATORS:
            raise ExpressionError('unknown operator {!r} at {}'.format(
                node.name, path))
        op = OPERATORS[node.name]
        if len(node.children) != op.arity:
            raise ExpressionError('{} at {} has {} operands, needs {}'.format(
                node.name, path, len(node.children), op.arity))
        if op.windowed and not 1 <= (node.window or 0) <= max_window:
            raise ExpressionError('{} at {} has window {}'.format(
                node.name, path, node.window))
    if max_depth is not None and expr_depth(expr) > max_depth:
        raise ExpressionError('depth {} exceeds {}'.format(
            expr_depth(expr), max_depth))


def evaluate_fields(expr, fields, tradable):
    """Tree-walk evaluation over raw asset x day grids.

    Parameters
    ----------
    expr: AlphaExpr
        Expression to evaluate.
    fields: dict of string to 2-D numpy array
        One asset x day grid per terminal name.
    tradable: 2-D numpy array of bools
        Defines each day's cross-section for cs_rank.

    Returns
    -------
    values: 2-D numpy array of floats
        Finite everywhere.
    """
    if expr.name in TERMINALS:
        return np.array(fields[expr.name], dtype=float)
    if expr.name == CONSTANT:
        return np.full(tradable.shape, float(expr.value))
    args = [evaluate_fields(child, fields, tradable)
            for child in expr.children]
    return OPERATORS[expr.name].apply(args, expr.window, tradable)


def evaluate_series(expr, panel):
    """Evaluates an expression on every asset and day of a panel."""
    return evaluate_fields(expr, panel.fields(), panel.tradable)


def evaluate(expr, panel, day):
    """The cross-section of an expression on one day.

    Raises
    ------
    ExpressionError
        If ``day`` is earlier than the expression's lookback or outside
        the panel.
    """
    if not 0 <= day < panel.n_days:
        raise ExpressionError('day {} outside the panel'.format(day))
    if day < lookback(expr):
        raise ExpressionError('day {} precedes the {}-day lookback of {}'
                              .format(day, lookback(expr), format_rpn(expr)))
    return evaluate_series(expr, panel)[:, day]


def evaluate_rpn(tokens, panel):
    """Stack-machine evaluation of a token stream over a whole panel.

    Gives the same grid as ``evaluate_series(parse_rpn(tokens), panel)``.
    """
    fields = panel.fields()
    stack = []
    for position, token in enumerate(_tokens_of(tokens)):
        node = _read_token(token, position)
        if node.name in TERMINALS:
            stack.append(np.array(fields[node.name], dtype=float))
        elif node.name == CONSTANT:
            stack.append(np.full(panel.tradable.shape, float(node.value)))
        else:
            op = OPERATORS[node.name]
            if len(stack) < op.arity:
                raise ExpressionError('arity underflow at position {}'.format(
                    position))
            args = stack[-op.arity:]
            del stack[-op.arity:]
            stack.append(op.apply(args, node.window, panel.tradable))
    if len(stack) != 1:
        raise ExpressionError('{} items left on the stack'.format(len(stack)))
    return stack[0]


def random_terminal(rng, p_constant=0.1):
    """A data terminal, or with probability ``p_constant`` a constant in
    [-1, 1] rounded to 2 decimals."""
    if rng.random() < p_constant:
        return AlphaExpr(CONSTANT, value=round(float(rng.uniform(-1, 1)), 2))
    return AlphaExpr(TERMINALS[rng.integers(len(TERMINALS))])


def random_window(rng, window_max=RANDOM_WINDOW_MAX):
    return int(rng.integers(1, window_max + 1))


def random_expr(rng, max_depth, p_terminal=0.3, window_max=RANDOM_WINDOW_MAX):
    """Grows a random tree.

    Each node becomes a terminal with probability ``p_terminal`` until
    ``max_depth`` forces terminals; operators are drawn uniformly and
    windows uniformly from 1..window_max.

    Parameters
    ----------
    rng: numpy.random.Generator
        Seeded generator.
    max_depth: int
        Maximum tree depth (>= 1); a leaf has depth 1.

    Returns
    -------
    expr: AlphaExpr
        A tree of depth <= max_depth.
    """
    if max_depth < 1:
        raise ExpressionError('max_depth must be >= 1')

    def grow(depth):
        if depth >= max_depth or rng.random() < p_terminal:
            return random_terminal(rng)
        op = OPERATORS[OPERATOR_NAMES[rng.integers(len(OPERATOR_NAMES))]]
        window = random_window(rng, window_max) if op.windowed else None
        children = tuple(grow(depth + 1) for _ in range(op.arity))
        return AlphaExpr(op.name, children, window)

    return grow(1)


def feature_from_expr(expr, panel, window_len=30, name=None):
    """Evaluates an expression into a FeaturePanel.

    The feature is valid where the whole input window is tradable and
    the day is past the expression's lookback.
    """
    values = evaluate_series(expr, panel)
    valid = window_mask(panel, window_len)
    valid[:, :min(lookback(expr), panel.n_days)] = False
    return FeaturePanel(name or format_rpn(expr), values, valid)


def classical_expr(name):
    """The expression of a classical library feature."""
    if name not in CLASSICAL_FEATURES:
        raise ExpressionError('unknown classical feature {!r}; choose from '
                              '{}'.format(name, ', '.join(CLASSICAL_FEATURES)))
    return parse_rpn(CLASSICAL_FEATURES[name])


def classical_feature(name, panel, window_len=30):
    """Evaluates a classical library feature over a panel."""
    return feature_from_expr(classical_expr(name), panel, window_len, name)
