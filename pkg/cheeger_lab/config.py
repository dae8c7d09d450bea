"""Run configuration files (YAML).

Example::

    domain:
      dim: 2
      n: 32
      extent: 1.0
      stencil: L1
      mask: "0.25 - (x - 0.5)^2 - (y - 0.5)^2"
    weights:
      a: "1 + x"
      b: weights/b.csv
    solver:
      eps_final: 1.0e-6
    sweep:
      schedule: [1.5, 1.25, 1.125]
    output:
      dir: out
    seed: 0

Fields take a number, an expression over x and y, or the path of a
row-major CSV grid (``*.csv``, relative to the config file).
"""
import dataclasses
import logging
import os
import typing

import numpy as np
import yaml

from . import (
    constants, domain as domain_, errors, p_eigen, settings, sweep, utils)
from .cheeger import CheegerOptions

logger = logging.getLogger(__name__)

SECTIONS = {
    'domain': ('dim', 'n', 'm', 'spacing', 'extent', 'mask', 'stencil'),
    'weights': ('a', 'b', 'mu'),
    'solver': ('eps_initial', 'eps_final', 'max_iters', 'inner_max_iters',
               'tol', 'stall_window', 'residual_tol'),
    'cheeger': ('algorithm', 'delta', 'max_iters'),
    'sweep': ('schedule', 'k_max', 'depths'),
    'output': ('dir', 'formats'),
    'seed': None,
}
FORMATS = ('csv', 'svg')


@dataclasses.dataclass
class OutputSpec:
    directory: str = settings.OUTPUT_DIR
    formats: typing.Tuple[str, ...] = FORMATS


@dataclasses.dataclass
class RunConfig:
    domain: domain_.DomainSpec
    solver: p_eigen.SolverOptions = dataclasses.field(
        default_factory=p_eigen.SolverOptions)
    cheeger: CheegerOptions = dataclasses.field(
        default_factory=CheegerOptions)
    schedule: typing.Tuple[float, ...] = dataclasses.field(
        default_factory=sweep.default_schedule)
    depths: typing.Tuple[int, ...] = settings.INTERIOR_DEPTHS
    output: OutputSpec = dataclasses.field(default_factory=OutputSpec)
    seed: int = settings.SEED
    path: typing.Optional[str] = None

    def build_domain(self):
        return domain_.build_domain(self.domain)


def _read(path):
    if not os.path.isfile(path):
        raise errors.ValidationError(
            'no such file: {}'.format(path), key='config')
    try:
        with open(path, encoding='utf-8') as config_file:
            text = config_file.read()
    except UnicodeDecodeError as exc:
        raise errors.ParseError('{} is not UTF-8 ({})'.format(path, exc))

    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise errors.ParseError(
            exc.problem or exc.context or 'invalid YAML',
            line=mark.line + 1 if mark else None,
            column=mark.column + 1 if mark else None)
    except yaml.YAMLError as exc:
        raise errors.ParseError(str(exc))

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise errors.ParseError('top level must be a mapping', 1, 1)
    return data


def _section(data, name):
    section = data.get(name) or {}
    if not isinstance(section, dict):
        raise errors.ValidationError('expected a mapping', key=name)
    unknown = set(section) - set(SECTIONS[name])
    if unknown:
        raise errors.ValidationError(
            'unknown keys {} (allowed: {})'.format(
                ', '.join(sorted(map(str, unknown))),
                ', '.join(SECTIONS[name])),
            key=name)
    return section


def _number(section, name, key, kind=float, minimum=None, strict=False):
    value = section.get(key)
    if value is None:
        return None

    full_key = '{}.{}'.format(name, key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise errors.ValidationError(
            'expected a number, got {!r}'.format(value), key=full_key)
    if kind is int and value != int(value):
        raise errors.ValidationError(
            'expected an integer, got {!r}'.format(value), key=full_key)
    value = kind(value)

    if not np.isfinite(value):
        raise errors.ValidationError('must be finite', key=full_key)
    if minimum is not None:
        if strict and not value > minimum:
            raise errors.ValidationError(
                'must be > {}, got {}'.format(minimum, value), key=full_key)
        if not strict and not value >= minimum:
            raise errors.ValidationError(
                'must be >= {}, got {}'.format(minimum, value), key=full_key)
    return value


def _grid_source(value, key, shape, base):
    """Number, expression or CSV path -> what build_domain accepts."""
    if value is None:
        return None
    if isinstance(value, bool):
        raise errors.ValidationError('expected a number or an expression',
                                     key=key)
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise errors.ValidationError(
            'expected a number, an expression or a CSV path', key=key)
    if value.strip().lower().endswith('.csv'):
        path = os.path.join(base, os.path.expanduser(value.strip()))
        return utils.load_grid_csv(path, shape, key=key)
    utils.compile_expression(value, key=key)
    return value


def _domain_spec(data, base):
    section = _section(data, 'domain')
    dim = _number(section, 'domain', 'dim', int)
    n = _number(section, 'domain', 'n', int, minimum=1)
    if dim is None or n is None:
        raise errors.ValidationError('dim and n are required', key='domain')
    if dim not in (1, 2):
        raise errors.ValidationError(
            'only 1 or 2 dimensions are supported', key='domain.dim')
    m = _number(section, 'domain', 'm', int, minimum=1)
    if dim == 1 and m is not None:
        raise errors.ValidationError('m needs dim: 2', key='domain.m')
    spacing = _number(section, 'domain', 'spacing', minimum=0, strict=True)
    extent = _number(section, 'domain', 'extent', minimum=0, strict=True)
    if spacing is not None and extent is not None:
        raise errors.ValidationError(
            'give spacing or extent, not both', key='domain')

    stencil = section.get('stencil', domain_.DomainSpec.stencil)
    if stencil not in constants.STENCILS:
        raise errors.ValidationError(
            'unknown stencil {!r} (one of {})'.format(
                stencil, ', '.join(constants.STENCILS)),
            key='domain.stencil')
    spec = domain_.DomainSpec(
        dim=dim, n=n, m=m, spacing=spacing, extent=extent, stencil=stencil)

    mask = _grid_source(section.get('mask'), 'domain.mask', spec.shape, base)
    if isinstance(mask, float):
        raise errors.ValidationError(
            'expected an expression or a CSV path', key='domain.mask')
    if isinstance(mask, np.ndarray):
        mask = mask > 0
    spec.mask = mask

    weights = _section(data, 'weights')
    for name in ('a', 'b'):
        value = _grid_source(
            weights.get(name), 'weights.' + name, spec.shape, base)
        if value is not None:
            setattr(spec, name, value)
    spec.mu = _number(weights, 'weights', 'mu', minimum=0, strict=True)
    return spec


def _solver(data):
    section = _section(data, 'solver')
    options = {
        'eps_initial': _number(
            section, 'solver', 'eps_initial', minimum=0, strict=True),
        'eps_final': _number(
            section, 'solver', 'eps_final', minimum=0, strict=True),
        'max_iters': _number(section, 'solver', 'max_iters', int, minimum=1),
        'inner_max_iters': _number(
            section, 'solver', 'inner_max_iters', int, minimum=1),
        'tol': _number(section, 'solver', 'tol', minimum=0, strict=True),
        'stall_window': _number(
            section, 'solver', 'stall_window', int, minimum=1),
        'residual_tol': _number(
            section, 'solver', 'residual_tol', minimum=0, strict=True),
    }
    options = {k: v for k, v in options.items() if v is not None}
    return p_eigen.SolverOptions(**options)


def _cheeger(data):
    section = _section(data, 'cheeger')
    options = {
        'delta': _number(section, 'cheeger', 'delta', minimum=0),
        'max_iters': _number(section, 'cheeger', 'max_iters', int, minimum=1),
        'algorithm': section.get('algorithm'),
    }
    options = {k: v for k, v in options.items() if v is not None}
    return CheegerOptions(**options)


def _sweep(data):
    section = _section(data, 'sweep')
    k_max = _number(section, 'sweep', 'k_max', int, minimum=1)
    schedule = section.get('schedule')

    if schedule is None or schedule == 'default':
        schedule = sweep.default_schedule(k_max or settings.SCHEDULE_K_MAX)
    elif k_max is not None:
        raise errors.ValidationError(
            'give schedule or k_max, not both', key='sweep')
    elif not isinstance(schedule, list) or not all(
            isinstance(p, (int, float)) and not isinstance(p, bool)
            for p in schedule):
        raise errors.ValidationError(
            'expected a list of exponents', key='sweep.schedule')
    schedule = sweep.check_schedule(schedule)

    depths = section.get('depths', list(settings.INTERIOR_DEPTHS))
    if not isinstance(depths, list) or not all(
            isinstance(d, int) and not isinstance(d, bool) and d >= 1
            for d in depths):
        raise errors.ValidationError(
            'expected a list of positive integers', key='sweep.depths')
    return schedule, tuple(depths)


def _output(data, base):
    section = _section(data, 'output')
    directory = section.get('dir', settings.OUTPUT_DIR)
    if not isinstance(directory, str) or not directory:
        raise errors.ValidationError('expected a path', key='output.dir')
    formats = section.get('formats', list(FORMATS))
    if isinstance(formats, str):
        formats = [formats]
    if not isinstance(formats, list) or set(formats) - set(FORMATS):
        raise errors.ValidationError(
            'expected a subset of {}'.format(', '.join(FORMATS)),
            key='output.formats')
    return OutputSpec(
        os.path.join(base, os.path.expanduser(directory)), tuple(formats))


def parse_config(path):
    data = _read(path)
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise errors.ValidationError(
            'unknown sections {} (allowed: {})'.format(
                ', '.join(sorted(map(str, unknown))), ', '.join(SECTIONS)),
            key='config')

    base = os.path.dirname(os.path.abspath(path))
    seed = _number(data, 'config', 'seed', int, minimum=0)
    seed = settings.SEED if seed is None else seed
    schedule, depths = _sweep(data)

    config = RunConfig(
        domain=_domain_spec(data, base),
        solver=_solver(data),
        cheeger=_cheeger(data),
        schedule=schedule,
        depths=depths,
        output=_output(data, base),
        seed=seed,
        path=path,
    )
    logger.debug('config %s: %r', path, config.domain)
    return config
