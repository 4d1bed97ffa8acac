"""
Run the solver from a key=value config file.

Usage:
    python manage.py solve --config run.cfg
    python manage.py solve --config run.cfg --out results/run --record
    python manage.py solve --battery configs/ --out results/ --workers 4

Exit status: 0 when the run reached T, decayed or went steady; 2 when it
blew up; 1 on any error. A battery exits 1 if any config failed, else 2 if
any blew up, else 0.
"""
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import django
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from blowup.config import format_config, parse_config
from blowup.exceptions import SchemeError
from blowup.models import SimulationRun
from blowup.output import emit, emit_error, exit_code
from blowup.runner import Outcome, run


def describe(exc):
    if isinstance(exc, ValidationError):
        if hasattr(exc, 'error_dict'):
            return '; '.join(f"{key}: {' '.join(messages)}" for key, messages in exc.message_dict.items())
        return '; '.join(exc.messages)
    return str(exc)


def solve_file(path, out_dir):
    """Solve one config file and write its outputs; returns an unsaved ledger row.

    Never raises for solver or config problems: those come back as an
    outcome=error row and an outcome=error summary.txt.
    """
    path = Path(path)
    name = path.stem
    text = path.read_text()
    config_text = text
    try:
        config = parse_config(text)
        config_text = format_config(config)
        out_dir = Path(out_dir) if out_dir else Path(config.out or Path('runs') / name)
        report = run(config)
        emit(report, out_dir)
    except (SchemeError, ValidationError, OSError) as exc:
        message = describe(exc)
        if out_dir:
            try:
                emit_error(out_dir, message)
            except OSError:
                pass
        return SimulationRun.from_error(config_text, name, message, output_dir=out_dir or '')
    return SimulationRun.from_report(report, config_text, name, output_dir=out_dir)


class Command(BaseCommand):
    help = 'Solve the coupled parabolic system for a config file (or a directory of them)'

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--config', help='Path to a key=value run config')
        source.add_argument('--battery', help='Directory of *.cfg files, solved in parallel')
        parser.add_argument('--out', help='Output directory (battery: one subdirectory per config)')
        parser.add_argument(
            '--record',
            action='store_true',
            help='Save a SimulationRun row per run',
        )
        parser.add_argument('--name', help='Ledger label for a single run (defaults to the config stem)')
        parser.add_argument('--workers', type=int, default=None, help='Battery worker processes')

    def handle(self, *args, **options):
        if options['battery']:
            code = self.handle_battery(options)
        else:
            code = self.handle_single(options)
        if code:
            sys.exit(code)

    def handle_single(self, options):
        path = Path(options['config'])
        try:
            text = path.read_text()
        except OSError as exc:
            raise CommandError(f"cannot read config {path}: {exc}")

        name = options['name'] or path.stem
        out_dir = options['out']
        try:
            config = parse_config(text)
        except ValidationError as exc:
            self.fail(out_dir, text, name, describe(exc), options['record'])

        out_dir = Path(out_dir or config.out or Path('runs') / path.stem)
        config_text = format_config(config)
        try:
            report = run(config)
            emit(report, out_dir)
        except (SchemeError, ValidationError, OSError) as exc:
            self.fail(out_dir, config_text, name, describe(exc), options['record'])

        if options['record']:
            SimulationRun.from_report(report, config_text, name, output_dir=out_dir).save()

        style = self.style.WARNING if report.outcome == Outcome.BLEW_UP else self.style.SUCCESS
        self.stdout.write(style(f"{name}: {report.outcome} at t={report.t_final!r} after {report.step_count} steps"))
        if report.outcome == Outcome.BLEW_UP:
            self.stdout.write(f"   T* = {report.t_star!r} <= bound = {report.bounds.t_upper!r}")
        self.stdout.write(f"   results in {out_dir}")
        return exit_code(report.outcome)

    def fail(self, out_dir, config_text, name, message, record):
        if out_dir:
            try:
                emit_error(out_dir, message)
            except OSError:
                pass
        if record:
            SimulationRun.from_error(config_text, name, message, output_dir=out_dir or '').save()
        raise CommandError(message)

    def handle_battery(self, options):
        directory = Path(options['battery'])
        paths = sorted(directory.glob('*.cfg'))
        if not paths:
            raise CommandError(f"no *.cfg files in {directory}")
        out_root = Path(options['out'] or Path('runs') / directory.name)
        self.stdout.write(f"Solving {len(paths)} configs from {directory}...")

        with ProcessPoolExecutor(max_workers=options['workers'], initializer=django.setup) as pool:
            rows = list(pool.map(solve_file, paths, [out_root / path.stem for path in paths]))

        codes = []
        for row in rows:
            if options['record']:
                row.save()
            code = exit_code(row.outcome)
            codes.append(code)
            if row.outcome == Outcome.ERROR:
                self.stdout.write(self.style.ERROR(f"{row.name}: error: {row.error_message}"))
            else:
                self.stdout.write(self.style.SUCCESS(f"{row.name}: {row.outcome} at t={row.t_final!r}"))

        if 1 in codes:
            return 1
        return 2 if 2 in codes else 0
