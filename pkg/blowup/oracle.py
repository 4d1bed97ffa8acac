"""
Independent references for the step engine.

newton_step_oracle solves the same per-step system as monotone_step by damped
Newton, so agreement of the two is an operational uniqueness check.
self_convergence compares fixed-dt runs at successive refinements. The
remaining helpers evaluate the ordering inequalities that hold when p = m.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from scipy.sparse.linalg import spsolve

from blowup.exceptions import NegativeFieldError, OracleDivergence, RefinementFailure, StepConditionError
from blowup.grid import build_operator, check_field, sup_norm
from blowup.scheme import ImplicitStep, check_step_condition, constant_supersolution

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OracleConfig:
    damping: float
    tol: float
    max_iterations: int
    levels: tuple[int, ...] = (1, 2, 4)

    def __post_init__(self):
        errors = {}
        if not 0 < self.damping < 1:
            errors['damping'] = ["damping must lie in (0, 1)"]
        if not self.tol > 0:
            errors['tol'] = ["tol must be positive"]
        if self.max_iterations < 1:
            errors['max_iterations'] = ["max_iterations must be >= 1"]
        if len(self.levels) < 2 or any(level < 1 for level in self.levels):
            errors['levels'] = ["need at least two refinement levels, each >= 1"]
        if errors:
            raise ValidationError(errors)

    @classmethod
    def from_settings(cls, **overrides):
        defaults = settings.BLOWUP_SOLVER
        values = dict(
            damping=defaults['NEWTON_DAMPING'],
            tol=defaults['NEWTON_TOL'],
            max_iterations=defaults['NEWTON_MAX_ITERATIONS'],
        )
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


def newton_step_oracle(state, dt, op, params, cfg: OracleConfig | None = None, opts=None):
    """Solve one implicit step by damped Newton from the constant supersolution.

    Stops when a Keller sweep from the iterate would move it by at most
    cfg.tol, the same measure monotone_step reports as its residual.
    """
    cfg = cfg or OracleConfig.from_settings()
    if not check_step_condition(state, params, dt):
        raise StepConditionError(f"dt={dt!r} violates the solvability condition")
    bound = constant_supersolution(state, params, dt, opts)
    system = ImplicitStep(state, dt, op, params)
    n = op.n_nodes
    u = np.full(n, bound.c1)
    v = np.full(n, bound.c2)

    residual = system.residual(u, v)
    for iteration in range(1, cfg.max_iterations + 1):
        if residual <= cfg.tol:
            logger.debug("newton converged in %d iterations", iteration - 1)
            return u, v
        f_u, f_v = system.equations(u, v)
        merit = math.hypot(np.linalg.norm(f_u), np.linalg.norm(f_v))
        delta = spsolve(system.jacobian(u, v), -np.concatenate([f_u, f_v]))
        du, dv = delta[:n], delta[n:]

        step = 1.0
        while True:
            u_try, v_try = u + step * du, v + step * dv
            if np.all(u_try > 0) and np.all(v_try > 0):
                g_u, g_v = system.equations(u_try, v_try)
                if math.hypot(np.linalg.norm(g_u), np.linalg.norm(g_v)) < merit:
                    break
            step *= cfg.damping
            if step < 1e-12:
                logger.warning(
                    "newton line search failed at iteration %d (residual %r)", iteration, residual
                )
                raise OracleDivergence(
                    f"damped Newton stalled at iteration {iteration}", iteration, residual
                )
        if step < 1.0:
            logger.debug("newton iteration %d damped to step %r", iteration, step)
        u, v = u_try, v_try
        residual = system.residual(u, v)

    if residual <= cfg.tol:
        return u, v
    logger.warning("newton did not converge in %d iterations (residual %r)", cfg.max_iterations, residual)
    raise OracleDivergence(
        f"damped Newton did not converge in {cfg.max_iterations} iterations",
        cfg.max_iterations,
        residual,
    )


@dataclass(frozen=True)
class ConvergenceResult:
    dts: tuple[float, ...]
    errors: tuple[float, ...]
    order: float | None

    @property
    def shrinking(self):
        return all(later < earlier for earlier, later in zip(self.errors, self.errors[1:]))


def self_convergence(config, levels=None, op=None) -> ConvergenceResult:
    """Observed order of fixed-dt runs at dt / level for each refinement level.

    errors[k] is the sup-norm gap at T between levels k and k+1; the order is
    log(errors[0] / errors[1]) / log(level ratio), None when undefined.
    """
    from blowup.runner import Outcome, run

    if config.dt is None:
        raise ValidationError({'dt': ["self-convergence needs a fixed dt"]})
    levels = tuple(levels or OracleConfig.from_settings().levels)
    if len(levels) < 2:
        raise ValidationError({'levels': ["need at least two refinement levels"]})
    op = op or build_operator(config.domain)

    finals = []
    dts = []
    for level in levels:
        dt = config.dt / level
        report = run(replace(config, dt=dt, steady_tol=None, decay_floor=1e-300), op=op)
        if report.outcome != Outcome.REACHED_T:
            raise RefinementFailure(f"level dt={dt!r} ended with {report.outcome} at t={report.t_final!r}")
        finals.append(report.final_state)
        dts.append(dt)

    errors = tuple(
        max(sup_norm(fine.u - coarse.u), sup_norm(fine.v - coarse.v))
        for coarse, fine in zip(finals, finals[1:])
    )
    order = None
    ratio = levels[1] / levels[0]
    if len(errors) >= 2 and errors[0] > 0 and errors[1] > 0 and ratio != 1:
        order = math.log(errors[0] / errors[1]) / math.log(ratio)
    return ConvergenceResult(dts=tuple(dts), errors=errors, order=order)


@dataclass(frozen=True)
class SlopeCondition:
    c0: float
    t2: float


def check_initial_slope_condition(u0, v0, alpha, op, params) -> SlopeCondition:
    """Smallest C0 >= 0 with A u0 - alpha v0 + C0 u0^m >= 0 and A v0 - alpha u0 + C0 v0^m >= 0.

    T2 = m / ((1-m) C0), infinite when C0 = 0.
    """
    u0 = check_field(op, u0, 'u0')
    v0 = check_field(op, v0, 'v0')
    if np.any(u0 <= 0) or np.any(v0 <= 0):
        raise NegativeFieldError(
            f"slope condition needs strictly positive data (min u0={u0.min()!r}, min v0={v0.min()!r})"
        )
    m = params.m
    ratio_u = (alpha * v0 - op.matrix @ u0) / u0**m
    ratio_v = (alpha * u0 - op.matrix @ v0) / v0**m
    c0 = max(0.0, float(ratio_u.max()), float(ratio_v.max()))
    t2 = math.inf if c0 == 0 else m / ((1 - m) * c0)
    return SlopeCondition(c0=c0, t2=t2)


def slope_condition_trace(states, op, params, rtol=1e-3):
    """C0 recomputed at every state of a run; logs whether it settles."""
    trace = [check_initial_slope_condition(s.u, s.v, params.alpha, op, params).c0 for s in states]
    if len(trace) >= 2:
        last, before = trace[-1], trace[-2]
        settled = abs(last - before) <= rtol * max(last, before, 1e-300)
        logger.info(
            "slope constant C0 went from %r to %r over %d states (%s)",
            trace[0], last, len(trace), 'settled' if settled else 'still moving',
        )
    return trace


# Ordering inequalities for p = m

def time_weighted_violation(state, next_state, params) -> float:
    """How far t_(n+1) u_(n+1)^(1-m) >= t_n u_n^(1-m) (and for v) fails; 0 if it holds."""
    m, p = params.m, params.p
    gap_u = state.t * state.u ** (1 - m) - next_state.t * next_state.u ** (1 - m)
    gap_v = state.t * state.v ** (1 - p) - next_state.t * next_state.v ** (1 - p)
    return max(0.0, float(gap_u.max()), float(gap_v.max()))


def envelope_violation(state, next_state, t2, params) -> float:
    """How far u_(n+1) <= ((T2 - t_n) / (T2 - t_(n+1)))^(1/(1-m)) u_n (and for v) fails.

    With T2 infinite the factor is 1 and this is plain monotone decay. Steps
    ending at or past T2 are not covered and report 0.
    """
    m = params.m
    if next_state.t >= t2:
        return 0.0
    factor = 1.0 if math.isinf(t2) else ((t2 - state.t) / (t2 - next_state.t)) ** (1 / (1 - m))
    gap_u = next_state.u - factor * state.u
    gap_v = next_state.v - factor * state.v
    return max(0.0, float(gap_u.max()), float(gap_v.max()))


def check_rate_bounds(state, next_state, t2, params, tol=1e-8) -> bool:
    """-dt/t_(n+1) <= (u_(n+1)^(1-m) - u_n^(1-m)) u_n^(m-1) <= dt/(T2 - t_(n+1))."""
    m = params.m
    dt = next_state.t - state.t
    lower = -dt / next_state.t
    if math.isinf(t2):
        upper = 0.0
    elif next_state.t >= t2:
        upper = math.inf
    else:
        upper = dt / (t2 - next_state.t)
    for before, after in ((state.u, next_state.u), (state.v, next_state.v)):
        change = (after ** (1 - m) - before ** (1 - m)) * before ** (m - 1)
        if np.any(change < lower - tol) or np.any(change > upper + tol):
            return False
    return True
