# PYTHON_ARGCOMPLETE_OK
import argparse
import contextlib
import logging
import logging.config
import os
import sys

import argcomplete
import reprint
import yaml

from . import (
    __version__, cheeger, config, constants, errors, p_eigen, report,
    settings, sweep, utils, verify)

logger = logging.getLogger(__name__)


class CheegerLabTool:
    def __init__(self):
        # load configs
        self.conf = {
            k.upper(): v
            for k, v in settings.__dict__.items()
            if not k.startswith('_') and isinstance(
                v, (int, float, str, tuple, dict))
        }
        self.load_config(settings.CONFIG_GLOBAL, update=True)

    def load_config(self, path, update=False):
        if not path or not os.path.exists(path):
            return None

        with open(path, 'r', encoding='utf-8') as config_file:
            try:
                loaded = yaml.safe_load(config_file) or {}
            except yaml.YAMLError as exc:
                raise errors.ParseError('{}: {}'.format(path, exc))
            if not isinstance(loaded, dict):
                raise errors.ParseError('{}: expected a mapping'.format(path))
            loaded = {k.upper(): v for k, v in loaded.items()}
            if update:
                self.conf.update(loaded)
            return loaded

    @classmethod
    def log(cls, message, level, *args, **kwargs):
        if '%s' in message:
            logger.log(level, message, *args, **kwargs)
        else:
            logger.log(level, message.format(*args, **kwargs))

    def info(self, message, *args, **kwargs):
        self.log(message, logging.INFO, *args, **kwargs)

    def debug(self, message, *args, **kwargs):
        self.log(message, logging.DEBUG, *args, **kwargs)

    def error(self, message, *args, **kwargs):
        self.log('! ' + message, logging.ERROR, *args, **kwargs)
        return False

    @property
    def threads(self):
        return utils.thread_count(self.conf)

    def build_parser(self):
        parser = argparse.ArgumentParser(
            prog='cheeger-lab', formatter_class=utils.Formatter)
        parser.add_argument(
            '-V', '--version',
            action='version',
            version='%(prog)s ' + __version__,
            help='show version and exit')
        parser.add_argument(
            '-v', '--verbose', action='store_true', help='debug output')

        subparsers = parser.add_subparsers(title='list of commands')

        common = argparse.ArgumentParser(add_help=False)
        common.add_argument(
            '-c', '--config',
            action='store', required=True, help='run config (YAML)')
        common.add_argument(
            '-o', '--out',
            action='store', help='output directory; overrides the config')

        cmd = subparsers.add_parser(
            'eigen',
            parents=[common],
            formatter_class=utils.Formatter,
            help='first eigenpair of the weighted p-Laplacian')
        cmd.set_defaults(func=self.on_eigen)
        cmd.add_argument(
            '-p', '--p', action='store', type=float, required=True,
            help='exponent in (1, 2]')

        cmd = subparsers.add_parser(
            'cheeger',
            parents=[common],
            formatter_class=utils.Formatter,
            help='weighted Cheeger constant and set')
        cmd.set_defaults(func=self.on_cheeger)
        cmd.add_argument(
            '-m', '--method',
            action='store', default='dinkelbach',
            choices=('dinkelbach', 'brute'), help='solver')

        cmd = subparsers.add_parser(
            'sweep',
            parents=[common],
            formatter_class=utils.Formatter,
            help='p -> 1 continuation with verdicts')
        cmd.set_defaults(func=self.on_sweep)

        cmd = subparsers.add_parser(
            'verify',
            formatter_class=utils.Formatter,
            help='run the self-check suites')
        cmd.set_defaults(func=self.on_verify)
        cmd.add_argument(
            '-s', '--scale',
            action='store', default='quick', choices=tuple(verify.SCALES),
            help='quick or full')
        cmd.add_argument(
            '-o', '--out', action='store', help='write verdicts.csv here')

        return parser

    def run_cli(self, argv=None):
        parser = self.build_parser()
        argcomplete.autocomplete(parser)
        namespace = parser.parse_args(argv)

        if getattr(namespace, 'func', None):
            return self.handler(namespace)

        parser.print_help()
        return constants.EXIT_OK

    def handler(self, namespace):
        if namespace.verbose and settings.LOGGING:
            # timestamped debug lines through the console handler
            logging.config.dictConfig(dict(settings.LOGGING, loggers={
                '': {'handlers': ['console'], 'propagate': False,
                     'level': 'DEBUG'}}))

        return namespace.func(namespace)

    @contextlib.contextmanager
    def output(self):
        threads = self.threads
        if threads < 2 or not sys.stdout.isatty():
            yield None
            return

        with reprint.output(initial_len=threads, interval=0) as output:
            yield output

    def on_eigen(self, namespace):
        return self.cmd_eigen(
            config.parse_config(namespace.config), namespace.p, namespace.out)

    def on_cheeger(self, namespace):
        return self.cmd_cheeger(
            config.parse_config(namespace.config), namespace.method,
            namespace.out)

    def on_sweep(self, namespace):
        return self.cmd_sweep(
            config.parse_config(namespace.config), namespace.out)

    def on_verify(self, namespace):
        return self.cmd_verify(namespace.scale, namespace.out)

    def cmd_eigen(self, cfg, p, out=None):
        domain = cfg.build_domain()
        with utils.Timeit('eigen', logging.DEBUG):
            pair = p_eigen.solve_first_eigenpair(domain, p, cfg.solver)

        directory = out or cfg.output.directory
        for path in report.write_eigen(pair, directory, cfg.output.formats):
            self.debug('wrote {}', path)

        self.info(
            'p={:.6g} lambda={:.12g} iterations={} residual={:.3g}',
            pair.p, pair.eigenvalue, pair.iterations, pair.residual_norm)
        if not pair.converged:
            self.error('not converged after {} iterations', pair.iterations)
            return constants.EXIT_NOT_CONVERGED
        return constants.EXIT_OK

    def cmd_cheeger(self, cfg, method, out=None):
        domain = cfg.build_domain()
        with utils.Timeit('cheeger', logging.DEBUG):
            if method == 'brute':
                solution = cheeger.brute_force_cheeger(domain)
            elif method == 'dinkelbach':
                solution = cheeger.dinkelbach_cheeger(domain, cfg.cheeger)
            else:
                raise errors.ValidationError(
                    'unknown method {!r}'.format(method), key='method')

        directory = out or cfg.output.directory
        for path in report.write_cheeger(
                solution, directory, cfg.output.formats):
            self.debug('wrote {}', path)

        self.info(
            '{} h={:.15g} cells={}/{} iterations={}', solution.method,
            solution.h, solution.set.size, domain.cell_count,
            solution.iterations)
        return constants.EXIT_OK

    def cmd_sweep(self, cfg, out=None):
        domain = cfg.build_domain()
        with utils.Timeit('sweep', logging.DEBUG), self.output() as output:
            result = sweep.run_p_sweep(
                domain, cfg.schedule, cfg.solver, threads=self.threads,
                output=output, conf=self.conf, cheeger_opts=cfg.cheeger,
                depths=cfg.depths)

        directory = out or cfg.output.directory
        for path in report.write_sweep(result, directory, cfg.output.formats):
            self.debug('wrote {}', path)

        for record in result.records:
            self.info(
                'p={:<10.6g} lambda={:.12g}{}', record.p,
                record.eigenvalue if record.eigenvalue is not None
                else float('nan'),
                '' if record.converged else ' (not converged)')
        self.info('h={:.15g} sigma<={}', result.h_value, result.sigma_bound)
        self.info('limit={} q={}', result.limit_estimate, result.limit_order)
        self._report_verdicts(result.verdicts)

        if result.flags['unconverged']:
            self.error(
                'not converged at p = {}', ', '.join(
                    '{:g}'.format(p) for p in result.flags['unconverged']))
            return constants.EXIT_NOT_CONVERGED
        if result.failed:
            return constants.EXIT_VERDICT_FAILED
        return constants.EXIT_OK

    def cmd_verify(self, scale, out=None):
        with utils.Timeit('verify', logging.DEBUG), self.output() as output:
            verdicts = verify.run_verify(
                scale, seed=self.conf['SEED'], threads=self.threads,
                output=output, conf=self.conf)

        if out:
            self.debug('wrote {}', report.write_verdicts(verdicts, out))

        self._report_verdicts(verdicts)
        failed = [v for v in verdicts if v.failed]
        self.info('{} checks, {} failed', len(verdicts), len(failed))
        if failed:
            return constants.EXIT_VERDICT_FAILED
        return constants.EXIT_OK

    def _report_verdicts(self, verdicts):
        for verdict in verdicts:
            if verdict.failed:
                self.error('{} failed: margin {:.3g} {}', verdict.name,
                           verdict.margin, verdict.detail)
            else:
                self.debug('{} {}: margin {:.3g} {}', verdict.name,
                           'ok' if verdict.applicable else 'n/a',
                           verdict.margin, verdict.detail)


def main(argv=None):
    tool = CheegerLabTool()

    if settings.LOGGING:
        logging.config.dictConfig(settings.LOGGING)

    try:
        code = tool.run_cli(argv)
    except errors.NotConverged as exc:
        tool.error('{}', exc.args[0])
        code = constants.EXIT_NOT_CONVERGED
    except (errors.UserError, errors.LabError) as exc:
        tool.error('{}', exc.args[0])
        code = constants.EXIT_VALIDATION
    except KeyboardInterrupt:
        tool.error('interrupted')
        code = constants.EXIT_INTERRUPTED

    sys.exit(code)


if __name__ == '__main__':
    main()
