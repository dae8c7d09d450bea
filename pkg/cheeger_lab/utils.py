import argparse
import csv
import logging
import os
import time
import tokenize

import numpy as np
import sympy
from sympy.parsing.sympy_parser import (
    convert_xor, parse_expr, standard_transformations)

from . import constants, errors, settings

logger = logging.getLogger(__name__)

_TRANSFORMATIONS = standard_transformations + (convert_xor,)
_X, _Y = sympy.symbols('x y', real=True)
_EXPRESSION_LOCALS = {
    'x': _X,
    'y': _Y,
    'abs': sympy.Abs,
    'min': sympy.Min,
    'max': sympy.Max,
    'exp': sympy.exp,
    'sin': sympy.sin,
    'cos': sympy.cos,
    'sqrt': sympy.sqrt,
    'log': sympy.log,
    'pi': sympy.pi,
}


def memoize(func):
    memo = {}

    def wrapper(*args, **kwargs):
        memo_key = ''

        if args:
            memo_key += ','.join(map(repr, args))
        if kwargs:
            memo_key += ','.join(
                '{}:{!r}'.format(k, v) for k, v in sorted(kwargs.items()))

        if memo_key not in memo:
            memo[memo_key] = func(*args, **kwargs)

        return memo[memo_key]

    wrapper.__wrapped__ = func
    return wrapper


@memoize
def compile_expression(text, key=None):
    """Compile a weight expression over x, y into a numpy callable."""
    try:
        expr = parse_expr(
            str(text),
            local_dict=dict(_EXPRESSION_LOCALS),
            transformations=_TRANSFORMATIONS,
            evaluate=True)
    except (SyntaxError, TypeError, ValueError, AttributeError,
            tokenize.TokenError) as exc:
        raise errors.ValidationError(
            'cannot parse expression {!r} ({})'.format(text, exc), key=key)

    if not isinstance(expr, sympy.Expr):
        raise errors.ValidationError(
            'not an arithmetic expression: {!r}'.format(text), key=key)

    unknown = expr.free_symbols - {_X, _Y}
    if unknown:
        names = ', '.join(sorted(str(s) for s in unknown))
        raise errors.ValidationError(
            'unknown names in {!r}: {} (allowed: {})'.format(
                text, names, ', '.join(constants.EXPRESSION_NAMES)),
            key=key)

    # numpy's amin over (array, scalar) is ragged; select() broadcasts
    if expr.has(sympy.Min, sympy.Max):
        expr = expr.rewrite(sympy.Piecewise)

    return sympy.lambdify((_X, _Y), expr, modules='numpy')


def evaluate_field(value, x, y, key=None):
    """Sample a number, an expression or a grid at the cell centers x, y."""
    if isinstance(value, np.ndarray):
        if value.shape != x.shape:
            raise errors.ValidationError(
                'grid has shape {}, domain needs {}'.format(
                    'x'.join(map(str, value.shape)),
                    'x'.join(map(str, x.shape))),
                key=key)
        field = value.astype(float)

    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        field = np.full(x.shape, float(value))

    elif isinstance(value, str):
        func = compile_expression(value, key=key)
        with np.errstate(all='ignore'):
            field = np.asarray(func(x, y), dtype=float)
        field = np.array(np.broadcast_to(field, x.shape), dtype=float)

    else:
        raise errors.ValidationError(
            'expected a number, an expression or a grid', key=key)

    if not np.all(np.isfinite(field)):
        raise errors.NonFiniteWeight(
            'non-finite values at {} cells'.format(
                int(np.count_nonzero(~np.isfinite(field)))),
            key=key)
    return field


def load_grid_csv(path, shape, key=None):
    """Read a row-major CSV grid with one value per cell."""
    if not os.path.isfile(path):
        raise errors.ValidationError('missing grid file {}'.format(path), key)

    try:
        grid = np.loadtxt(path, delimiter=',', ndmin=2, dtype=float)
    except ValueError as exc:
        raise errors.ValidationError(
            'bad grid file {}: {}'.format(path, exc), key=key)

    if len(shape) == 1 and grid.size == shape[0]:
        return grid.reshape(shape)

    if grid.shape != tuple(shape):
        raise errors.ValidationError(
            'grid {} is {}, domain is {}'.format(
                path,
                'x'.join(map(str, grid.shape)),
                'x'.join(map(str, shape))),
            key=key)
    return grid


def format_float(value):
    return settings.FLOAT_FORMAT.format(float(value))


def format_cell(value):
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return 'true' if value else 'false'
    if value is None:
        return 'na'
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def write_csv(path, columns, rows):
    ensure_dir(os.path.dirname(path))
    with open(path, 'w', newline='', encoding='utf-8') as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(value) for value in row])
    return path


def write_grid_csv(path, grid):
    grid = np.atleast_2d(np.asarray(grid))
    ensure_dir(os.path.dirname(path))
    with open(path, 'w', newline='', encoding='utf-8') as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        for row in grid:
            writer.writerow([format_cell(value) for value in row])
    return path


def ensure_dir(path):
    if path and not os.path.exists(path):
        os.makedirs(path)


def thread_count(conf=None):
    conf = conf or {}
    value = os.environ.get(
        settings.THREADS_ENV,
        conf.get('THREAD_MAX_COUNT', settings.THREAD_MAX_COUNT))
    try:
        count = int(value)
    except (TypeError, ValueError):
        raise errors.ValidationError(
            'expected an integer, got {!r}'.format(value),
            key=settings.THREADS_ENV)
    return max(1, count)


def rng(seed=None):
    return np.random.default_rng(settings.SEED if seed is None else seed)


class Timeit:
    def __init__(self, label, level=logging.INFO):
        self.label = label
        self.level = level
        self.elapsed = None
        self._t = None

    def __enter__(self):
        self._t = time.time()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.elapsed = time.time() - self._t
        logger.log(self.level, '%s %.2fs', self.label, self.elapsed)


class Formatter(argparse.HelpFormatter):
    def __init__(
            self, prog, indent_increment=2, max_help_position=30, width=None):
        super(Formatter, self).__init__(
            prog, indent_increment, max_help_position, width)

    def _format_action_invocation(self, action):
        if not action.option_strings:
            metavar, = self._metavar_formatter(action, action.dest)(1)
            return metavar

        # -s, --long ARGS on one line
        parts = list(action.option_strings)
        if action.nargs != 0:
            default = action.dest.upper()
            parts[-1] += ' %s' % self._format_args(action, default)

        return ', '.join(parts)
