"""
Time loop around the implicit step.

A run ends when it reaches T, when the sup-norms fall below the decay floor,
when blow-up is detected (sup-norm threshold or dt starvation), or, if
steady_tol is set, when the sup-norms stop moving.

Every step leaves a StepReport; full fields are kept only at the snapshot
steps picked by the config cadence (always the first and the last).
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

from blowup.config import RunConfig, make_initial
from blowup.diagnostics import (
    BlowupBounds,
    StepReport,
    ThetaEstimate,
    blowup_bounds,
    step_report,
    theta_limit,
    z_second_differences,
)
from blowup.exceptions import SchemeError, StepBudgetExceeded, StepFailure
from blowup.grid import SpatialOperator, build_operator
from blowup.scheme import (
    ExistenceHorizon,
    ModelParams,
    State,
    detect_blowup,
    existence_horizon,
    max_stable_dt,
    monotone_step,
)

logger = logging.getLogger(__name__)


if hasattr(enum, 'StrEnum'):
    _StrEnum = enum.StrEnum
else:  # Python < 3.11: same str()/format() behaviour as enum.StrEnum
    class _StrEnum(str, enum.Enum):
        __str__ = str.__str__
        __format__ = str.__format__


class Outcome(_StrEnum):
    REACHED_T = 'reached_T'
    BLEW_UP = 'blew_up'
    DECAYED = 'decayed'
    STEADY = 'steady'
    ERROR = 'error'


@dataclass
class RunReport:
    config: RunConfig
    params: ModelParams
    operator: SpatialOperator
    outcome: Outcome
    t_final: float
    bounds: BlowupBounds
    horizon: ExistenceHorizon
    theta: ThetaEstimate | None = None
    steps: list[StepReport] = field(default_factory=list)
    snapshots: dict[int, State] = field(default_factory=dict)

    @property
    def t_star(self):
        return self.t_final if self.outcome == Outcome.BLEW_UP else None

    @property
    def step_count(self):
        """Accepted steps; `steps` also holds a closing record for the final state."""
        return len(self.steps) - 1

    @property
    def initial_state(self):
        return self.snapshots[0]

    @property
    def final_state(self):
        return self.snapshots[max(self.snapshots)]


def is_critical(params: ModelParams, op: SpatialOperator, rtol=1e-9):
    return abs(params.alpha - op.lambda1) <= rtol * op.lambda1


def run(config: RunConfig, op: SpatialOperator | None = None, initial=None) -> RunReport:
    op = op or build_operator(config.domain)
    params = config.model_params(op)
    opts = config.step_options()
    u0, v0 = initial if initial is not None else make_initial(config, op)
    state = State(u=u0, v=v0)

    bounds = blowup_bounds(state.u, state.v, params, op)
    horizon = existence_horizon(state.u, state.v, params)
    theta = theta_limit(state.u, state.v, params, op) if is_critical(params, op) else None
    floor = config.decay_threshold
    budget = config.step_budget
    logger.info(
        "run start: N=%s m=%r p=%r alpha=%r lambda1=%r T=%r dt=%s",
        op.spec.points, params.m, params.p, params.alpha, op.lambda1, config.T,
        'adaptive' if config.dt is None else repr(config.dt),
    )

    reports = []
    cadence = config.cadence
    snapshots = {0: state}
    while True:
        if max(state.sup_u, state.sup_v) < floor:
            outcome = Outcome.DECAYED
            logger.info("decayed below %r at t=%r after %d steps", floor, state.t, state.n)
            break
        remaining = config.T - state.t
        if remaining <= 1e-14 * max(1.0, config.T):
            outcome = Outcome.REACHED_T
            break
        proposed = config.dt if config.dt is not None else max_stable_dt(state, params, opts)
        if detect_blowup(state, opts, proposed):
            outcome = Outcome.BLEW_UP
            logger.info(
                "blow-up detected at t=%r after %d steps (sup-norms %r, %r; dt %r)",
                state.t, state.n, state.sup_u, state.sup_v, proposed,
            )
            break
        if state.n >= budget:
            raise StepBudgetExceeded(f"no terminal outcome after {budget} steps (t={state.t!r})")

        dt = min(proposed, remaining)
        try:
            next_state, stats = monotone_step(state, dt, op, params, opts)
        except SchemeError as exc:
            raise StepFailure(state.n, state.t, exc) from exc
        reports.append(step_report(state, next_state, dt, stats, params, op))
        logger.debug(
            "n=%d t=%r dt=%r sup_u=%r sup_v=%r iters=%d",
            next_state.n, next_state.t, dt, next_state.sup_u, next_state.sup_v, stats.iterations,
        )
        steady = config.steady_tol is not None and _relative_drift(state, next_state, dt) < config.steady_tol
        state = next_state
        if cadence and state.n % cadence == 0:
            snapshots[state.n] = state
        if steady:
            outcome = Outcome.STEADY
            logger.info("steady at t=%r after %d steps", state.t, state.n)
            break

    snapshots[state.n] = state
    reports.append(step_report(state, None, 0.0, None, params, op))
    if logger.isEnabledFor(logging.DEBUG):
        for n, value in enumerate(z_second_differences(reports), start=1):
            logger.debug("Z second difference at n=%d: %r", n, value)

    if outcome == Outcome.BLEW_UP:
        bounds = replace(bounds, t_star=state.t)
    logger.info("run end: %s at t=%r, %d steps", outcome, state.t, state.n)
    return RunReport(
        config=config,
        params=params,
        operator=op,
        outcome=outcome,
        t_final=state.t,
        bounds=bounds,
        horizon=horizon,
        theta=theta,
        steps=reports,
        snapshots=snapshots,
    )


def _relative_drift(state, next_state, dt):
    drift = max(
        abs(next_state.sup_u - state.sup_u) / state.sup_u,
        abs(next_state.sup_v - state.sup_v) / state.sup_v,
    )
    return drift / dt if dt > 0 else math.inf
