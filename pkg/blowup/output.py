"""
Result files of a run.

    steps.csv     one row per recorded step plus the final state
    u_<n>.csv     snapshot of u at step n, with the original variables
    v_<n>.csv     same for v
    summary.txt   key=value outcome, bounds and theta

Floats are written with 17 significant digits and nothing time-dependent is
emitted, so a rerun of the same config reproduces every byte.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from pathlib import Path

from blowup.oracle import check_initial_slope_condition
from blowup.runner import Outcome
from blowup.scheme import to_original_variables

logger = logging.getLogger(__name__)

STEPS_HEADER = 'n,t,dt,phi,J,psi_n,F_n,sup_u,sup_v,iters'

EXIT_CODES = {
    Outcome.REACHED_T: 0,
    Outcome.DECAYED: 0,
    Outcome.STEADY: 0,
    Outcome.BLEW_UP: 2,
    Outcome.ERROR: 1,
}


def exit_code(outcome) -> int:
    return EXIT_CODES[Outcome(outcome)]


def fmt(value) -> str:
    if value is None:
        return 'none'
    if isinstance(value, int):
        return str(value)
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return format(value, '.17g')


def _write_rows(rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerows(rows)
    return buffer.getvalue()


def steps_csv(report) -> str:
    rows = [STEPS_HEADER.split(',')]
    for row in report.steps:
        rows.append([fmt(value) for value in (
            row.n, row.t, row.dt, row.phi, row.j, row.psi_n, row.f_n, row.sup_u, row.sup_v, row.iterations,
        )])
    return _write_rows(rows)


def snapshot_indices(report):
    """Steps written as snapshots: every `cadence`-th one, always the first and last."""
    return sorted(report.snapshots)


def snapshot_csv(state, which, report) -> str:
    nodes = report.operator.spec.nodes()
    u1, v1 = to_original_variables(state.u, state.v, report.params)
    values = state.u if which == 'u' else state.v
    axes = ['x'] if nodes.shape[1] == 1 else ['x', 'y']
    rows = [axes + ['value', 'u1', 'v1']]
    for i in range(len(values)):
        coords = [fmt(float(c)) for c in nodes[i]]
        rows.append(coords + [fmt(float(values[i])), fmt(float(u1[i])), fmt(float(v1[i]))])
    return _write_rows(rows)


def summary_lines(report):
    bounds = report.bounds
    initial = report.initial_state
    slope = check_initial_slope_condition(initial.u, initial.v, report.params.alpha, report.operator, report.params)
    lines = [
        f"outcome={report.outcome}",
        f"t_final={fmt(report.t_final)}",
        f"steps={report.step_count}",
    ]
    if report.outcome == Outcome.BLEW_UP:
        lines.append(f"T_star={fmt(report.t_star)} <= bound={fmt(bounds.t_upper)}")
    lines += [
        f"m={fmt(report.params.m)}",
        f"p={fmt(report.params.p)}",
        f"alpha={fmt(report.params.alpha)}",
        f"lambda1={fmt(report.operator.lambda1)}",
        f"T1={fmt(bounds.t1)}",
        f"T1_printed={fmt(bounds.t1_printed)}",
        f"bound_discrete={fmt(bounds.t_upper)}",
        f"bound_continuous={fmt(bounds.t_continuous)}",
        f"C0={fmt(slope.c0)}",
        f"T2={fmt(slope.t2)}",
        f"sup_u_final={fmt(report.final_state.sup_u)}",
        f"sup_v_final={fmt(report.final_state.sup_v)}",
    ]
    if report.theta is not None:
        lines += [
            f"theta={fmt(report.theta.theta)}",
            f"theta_residual={fmt(report.theta.residual)}",
            f"theta_bound={fmt(report.theta.bound)}",
        ]
    return lines


def emit(report, out_dir) -> list[Path]:
    """Write steps.csv, the snapshots and summary.txt under out_dir; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / 'steps.csv'
    path.write_text(steps_csv(report))
    written.append(path)

    for index in snapshot_indices(report):
        state = report.snapshots[index]
        for which in ('u', 'v'):
            path = out / f"{which}_{state.n}.csv"
            path.write_text(snapshot_csv(state, which, report))
            written.append(path)

    path = out / 'summary.txt'
    path.write_text('\n'.join(summary_lines(report)) + '\n')
    written.append(path)
    logger.info("wrote %d files to %s", len(written), out)
    return written


def emit_error(out_dir, message) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / 'summary.txt'
    path.write_text(f"outcome={Outcome.ERROR}\nerror={' '.join(str(message).split())}\n")
    return path


def read_summary(path) -> dict:
    """Parse summary.txt back into a dict of strings."""
    values = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith('T_star='):
            t_star, bound = line[len('T_star='):].split(' <= bound=')
            values['T_star'] = t_star
            values['T_star_bound'] = bound
            continue
        key, _, value = line.partition('=')
        values[key] = value
    return values
