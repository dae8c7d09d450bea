import logging
import os

import matplotlib
import numpy as np

from . import constants, settings, utils

matplotlib.use('Agg')

from matplotlib import pyplot as plt  # noqa: E402 pylint: disable=C0413

logger = logging.getLogger(__name__)

SVG_RC = {
    'svg.hashsalt': settings.SVG_HASH_SALT,
    'svg.fonttype': 'none',
}
SVG_METADATA = {'Date': None}


def _save(figure, path):
    utils.ensure_dir(os.path.dirname(path))
    figure.savefig(path, format='svg', metadata=SVG_METADATA)
    plt.close(figure)
    return path


def verdict_rows(verdicts):
    for verdict in verdicts:
        passed = verdict.passed if verdict.applicable else None
        yield verdict.name, passed, verdict.margin


def write_verdicts(verdicts, directory):
    return utils.write_csv(
        os.path.join(directory, 'verdicts.csv'),
        constants.VERDICT_COLUMNS, verdict_rows(verdicts))


def write_sweep(report, directory, formats=('csv', 'svg')):
    paths = []
    if 'csv' in formats:
        paths.append(utils.write_csv(
            os.path.join(directory, 'sweep.csv'), constants.SWEEP_COLUMNS,
            (record.row for record in report.records)))
        paths.append(write_verdicts(report.verdicts, directory))
    if 'svg' in formats:
        paths.append(plot_sweep(report, os.path.join(directory, 'report.svg')))
    return paths


def write_eigen(pair, directory, formats=('csv', 'svg')):
    paths = []
    if 'csv' in formats:
        paths.append(utils.write_csv(
            os.path.join(directory, 'eigen.csv'), constants.EIGEN_COLUMNS,
            [(pair.p, pair.eigenvalue, pair.iterations, pair.residual_norm,
              pair.converged)]))
        paths.append(utils.write_grid_csv(
            os.path.join(directory, 'u.csv'), pair.u.values))
    if 'svg' in formats:
        paths.append(plot_field(
            pair.u, os.path.join(directory, 'u.svg'),
            title='p = {:.6g}, lambda = {:.8g}'.format(
                pair.p, pair.eigenvalue)))
    return paths


def write_cheeger(solution, directory, formats=('csv', 'svg')):
    paths = []
    if 'csv' in formats:
        paths.append(utils.write_csv(
            os.path.join(directory, 'cheeger.csv'), constants.CHEEGER_COLUMNS,
            [(solution.method, solution.h, solution.set.size,
              solution.iterations)]))
        paths.append(utils.write_grid_csv(
            os.path.join(directory, 'cheeger_set.csv'),
            solution.set.values.astype(int)))
    if 'svg' in formats:
        paths.append(plot_set(
            solution, os.path.join(directory, 'cheeger_set.svg')))
    return paths


def plot_sweep(report, path):
    records = [r for r in report.records if r.eigenvalue is not None]
    with matplotlib.rc_context(SVG_RC):
        figure, axes = plt.subplots(figsize=(6, 4))
        axes.plot([r.p for r in records], [r.eigenvalue for r in records],
                  'o-', color='C0', label='lambda_p')
        unconverged = [r for r in records if not r.converged]
        if unconverged:
            axes.plot([r.p for r in unconverged],
                      [r.eigenvalue for r in unconverged],
                      'x', color='C3', label='not converged')
        if report.h_value is not None:
            axes.axhline(report.h_value, color='C1', linestyle='--',
                         label='h = {:.6g}'.format(report.h_value))
        if report.sigma_bound is not None:
            axes.axhline(report.sigma_bound, color='C2', linestyle=':',
                         label='sigma <= {:.6g}'.format(report.sigma_bound))
        if report.limit_estimate is not None:
            axes.plot([1.0], [report.limit_estimate], 's', color='C4',
                      label='limit {:.6g}'.format(report.limit_estimate))
        axes.set_xlabel('p')
        axes.set_ylabel('lambda')
        axes.legend(loc='best')
        return _save(figure, path)


def _extent(domain):
    if domain.dim == 1:
        return None
    # first axis is x; images are drawn transposed
    nx, ny = domain.shape
    return (0, nx * domain.spacing, 0, ny * domain.spacing)


def plot_field(field, path, title=''):
    domain = field.domain
    with matplotlib.rc_context(SVG_RC):
        figure, axes = plt.subplots(figsize=(6, 4))
        if domain.dim == 1:
            x, __ = domain.centers
            axes.plot(x, field.values, color='C0')
            axes.set_xlabel('x')
        else:
            values = np.ma.masked_where(~domain.mask, field.values)
            image = axes.imshow(values.T, origin='lower',
                                extent=_extent(domain), cmap='viridis')
            figure.colorbar(image, ax=axes)
        axes.set_title(title)
        return _save(figure, path)


def plot_set(solution, path):
    subset = solution.set
    domain = subset.domain
    title = '{} h = {:.10g}'.format(solution.method, solution.h)
    with matplotlib.rc_context(SVG_RC):
        figure, axes = plt.subplots(figsize=(5, 5))
        if domain.dim == 1:
            x, __ = domain.centers
            axes.step(x, domain.mask.astype(int), where='mid', color='0.6')
            axes.step(x, subset.values.astype(int), where='mid', color='C1')
            axes.set_ylim(-0.1, 1.1)
        else:
            image = domain.mask.astype(int) + subset.values.astype(int)
            axes.imshow(image.T, origin='lower', extent=_extent(domain),
                        cmap='Greys', vmin=0, vmax=2)
        axes.set_title(title)
        return _save(figure, path)
