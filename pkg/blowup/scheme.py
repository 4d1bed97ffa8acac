"""
One implicit time step of the transformed system and the pieces around it.

With c_u = m / ((1-p) dt) and c_v = p / ((1-p) dt) the step from (u_n, v_n)
solves, nodewise,

    A_h u + c_u u_n^(m-1) u - c_u u_n^(m-p) u^p - alpha v = 0
    A_h v + c_v v_n^(p-1) v - c_v v^p           - alpha u = 0

for positive (u, v). The solution is reached by Keller iteration: start from
a constant supersolution and sweep the two decoupled linear systems until
the iterates stop decreasing.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from scipy import optimize, sparse

from blowup.exceptions import (
    MonotonicityViolation,
    NegativeFieldError,
    NonConvergenceError,
    StepConditionError,
    SupersolutionConsistencyError,
)
from blowup.grid import Field, check_field, sup_norm
from blowup.linalg import ShiftedOperator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    m: float
    p: float
    alpha: float = 0.0

    def __post_init__(self):
        errors = {}
        if not (0 < self.m < 1):
            errors['m'] = [f"m must lie in (0, 1), got {self.m!r}"]
        if not (0 < self.p < 1):
            errors['p'] = [f"p must lie in (0, 1), got {self.p!r}"]
        elif self.p > self.m:
            errors['p'] = [f"p={self.p!r} exceeds m={self.m!r}; the scheme requires p <= m"]
        if not math.isfinite(self.alpha) or self.alpha < 0:
            errors['alpha'] = [f"alpha must be a finite nonnegative real, got {self.alpha!r}"]
        if errors:
            raise ValidationError(errors)

    @classmethod
    def from_original(cls, nu, mu, alpha=0.0):
        """Build from the exponents of the untransformed system, m = 1/(nu+1)."""
        return cls(m=1.0 / (nu + 1.0), p=1.0 / (mu + 1.0), alpha=alpha)

    @property
    def nu(self):
        return 1.0 / self.m - 1.0

    @property
    def mu(self):
        return 1.0 / self.p - 1.0

    def with_alpha(self, alpha):
        return replace(self, alpha=alpha)


@dataclass(frozen=True, eq=False)
class State:
    """(u_n, v_n) at time t_n; both fields strictly positive."""

    u: Field
    v: Field
    t: float = 0.0
    n: int = 0
    sup_u: float = field(init=False)
    sup_v: float = field(init=False)

    def __post_init__(self):
        u = np.array(self.u, dtype=np.float64)
        v = np.array(self.v, dtype=np.float64)
        if u.ndim != 1 or u.shape != v.shape:
            raise NegativeFieldError(f"u and v must be flat arrays of equal length, got {u.shape} and {v.shape}")
        if not (np.all(u > 0) and np.all(v > 0)):
            raise NegativeFieldError(
                f"state at step {self.n} is not strictly positive "
                f"(min u={u.min()!r}, min v={v.min()!r})"
            )
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'v', v)
        object.__setattr__(self, 'sup_u', float(u.max()))
        object.__setattr__(self, 'sup_v', float(v.max()))

    def advance(self, u, v, dt):
        return State(u=u, v=v, t=self.t + dt, n=self.n + 1)


@dataclass(frozen=True)
class StepOptions:
    tol_abs: float
    tol_rel: float
    max_iterations: int
    linear_tol: float
    sigma: float
    dt_min: float
    dt_max: float
    blowup_threshold: float
    monotone_slack: float
    bisection_steps: int

    def __post_init__(self):
        errors = {
            f.name: [f"{f.name} must be positive, got {getattr(self, f.name)!r}"]
            for f in fields(self)
            if not getattr(self, f.name) > 0
        }
        if self.sigma >= 1 and 'sigma' not in errors:
            errors['sigma'] = [f"sigma must be < 1, got {self.sigma!r}"]
        if errors:
            raise ValidationError(errors)

    @classmethod
    def from_settings(cls, **overrides):
        defaults = settings.BLOWUP_SOLVER
        values = {f.name: defaults[f.name.upper()] for f in fields(cls)}
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


@dataclass(frozen=True)
class Supersolution:
    """Constant pair (C1, C2) dominating the step's solution; x0 = C2 / C1 in (a, b)."""

    c1: float
    c2: float
    x0: float
    a: float
    b: float


@dataclass(frozen=True)
class StepStats:
    iterations: int
    increment: float
    residual: float
    max_increase: float
    supersolution: Supersolution


@dataclass(frozen=True)
class ExistenceHorizon:
    """Guaranteed existence time T1 and the majorant ladder phi(t_n)."""

    lambda0: float
    phi0: float
    t1: float
    exponent: float
    printed: bool = False

    def majorant(self, t):
        """lambda0 / (1 - t phi0)^(1/(1-p)); infinite once t phi0 >= 1."""
        scaled = 1.0 - t * self.phi0
        if scaled <= 0:
            return math.inf
        return self.lambda0 / scaled ** (1.0 / self.exponent)


def check_step_condition(state: State, params: ModelParams, dt) -> bool:
    """Solvability of the implicit step: ||u||^(1-m) ||v||^(1-p) < mp / (alpha (1-p) dt)^2."""
    if params.alpha == 0:
        return True
    m, p, alpha = params.m, params.p, params.alpha
    lhs = state.sup_u ** (1 - m) * state.sup_v ** (1 - p)
    rhs = m * p / (alpha**2 * (1 - p) ** 2 * dt**2)
    return lhs < rhs


def max_stable_dt(state: State, params: ModelParams, opts: StepOptions) -> float:
    if params.alpha == 0:
        return opts.dt_max
    m, p, alpha = params.m, params.p, params.alpha
    scale = math.sqrt(state.sup_u ** (1 - m) * state.sup_v ** (1 - p))
    dt = opts.sigma * math.sqrt(m * p) / (alpha * (1 - p) * scale)
    return min(dt, opts.dt_max)


def constant_supersolution(state: State, params: ModelParams, dt, opts: StepOptions | None = None) -> Supersolution:
    """Constant pair (C1, C2) satisfying the step inequalities with >= at every node.

    x0 = C2 / C1 is the root of
        f(x) = K_p a b^((m-p)/(1-m)) x^p (x - b) + K_m^((1-p)/(1-m)) (x - a)
    on (a, b), where K_m = m / ((1-p) alpha dt) and K_p = p / ((1-p) alpha dt).
    """
    su, sv = state.sup_u, state.sup_v
    if params.alpha == 0:
        return Supersolution(c1=su, c2=sv, x0=sv / su, a=0.0, b=math.inf)

    opts = opts or StepOptions.from_settings()
    m, p, alpha = params.m, params.p, params.alpha
    a = (1 - p) / p * dt * alpha * sv ** (1 - p)
    b = m / ((1 - p) * alpha * dt) * su ** (m - 1)
    if not a < b:
        raise StepConditionError(f"supersolution bracket is empty at dt={dt!r}: a={a!r} >= b={b!r}")

    k_m = m / ((1 - p) * alpha * dt)
    k_p = p / ((1 - p) * alpha * dt)
    growth = k_p * a * b ** ((m - p) / (1 - m))
    offset = k_m ** ((1 - p) / (1 - m))

    def f(x):
        return growth * x**p * (x - b) + offset * (x - a)

    nudge = 1e-12
    lo, hi = a * (1 + nudge), b * (1 - nudge)
    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo < 0 < f_hi):
        raise SupersolutionConsistencyError(
            f"f changes sign the wrong way on [{lo!r}, {hi!r}]: f(lo)={f_lo!r}, f(hi)={f_hi!r}"
        )
    x0 = optimize.bisect(
        f, lo, hi, xtol=np.finfo(float).tiny, rtol=1e-12, maxiter=opts.bisection_steps, disp=False
    )

    c1 = su / (1 - alpha * (1 - p) / m * dt * x0 * su ** (1 - m)) ** (1 / (1 - p))
    c2 = sv / (1 - alpha * (1 - p) / p * (dt / x0) * sv ** (1 - p)) ** (1 / (1 - p))
    if not (math.isfinite(c1) and math.isfinite(c2)):
        raise SupersolutionConsistencyError(f"supersolution overflowed: C1={c1!r}, C2={c2!r}")
    return Supersolution(c1=c1, c2=c2, x0=x0, a=a, b=b)


class ImplicitStep:
    """The nonlinear system of one step, frozen at (u_n, v_n, dt)."""

    def __init__(self, state: State, dt, op, params: ModelParams, linear_tol=None):
        m, p = params.m, params.p
        u_n = check_field(op, state.u, 'u_n')
        v_n = check_field(op, state.v, 'v_n')
        self.op = op
        self.params = params
        self.dt = dt
        self.c_u = m / ((1 - p) * dt)
        self.c_v = p / ((1 - p) * dt)
        self.shift_u = self.c_u * u_n ** (m - 1)
        self.shift_v = self.c_v * v_n ** (p - 1)
        self.source_u = self.c_u * u_n ** (m - p)
        self.solver_u = ShiftedOperator.from_operator(op, self.shift_u, tol=linear_tol)
        self.solver_v = ShiftedOperator.from_operator(op, self.shift_v, tol=linear_tol)

    def sweep(self, u, v):
        """One Keller sweep: both linear solves use the previous iterate on the right."""
        p, alpha = self.params.p, self.params.alpha
        u_next = self.solver_u.solve(alpha * v + self.source_u * u**p, warm_start=u)
        v_next = self.solver_v.solve(alpha * u + self.c_v * v**p, warm_start=v)
        return u_next, v_next

    def equations(self, u, v):
        p, alpha = self.params.p, self.params.alpha
        a_mat = self.op.matrix
        f_u = a_mat @ u + self.shift_u * u - self.source_u * u**p - alpha * v
        f_v = a_mat @ v + self.shift_v * v - self.c_v * v**p - alpha * u
        return f_u, f_v

    def jacobian(self, u, v):
        p, alpha = self.params.p, self.params.alpha
        a_mat = self.op.matrix
        coupling = -alpha * sparse.identity(len(u), format='csr')
        d_u = self.shift_u - p * self.source_u * u ** (p - 1)
        d_v = self.shift_v - p * self.c_v * v ** (p - 1)
        return sparse.bmat(
            [[a_mat + sparse.diags(d_u), coupling], [coupling, a_mat + sparse.diags(d_v)]],
            format='csc',
        )

    def residual(self, u, v):
        """Sup-norm of the increment a Keller sweep from (u, v) would make."""
        u_next, v_next = self.sweep(u, v)
        return max(sup_norm(u_next - u), sup_norm(v_next - v))


def scheme_residual(state: State, u, v, dt, op, params: ModelParams, linear_tol=None) -> float:
    """How far (u, v) is from solving the step from `state`, in sweep-increment units."""
    return ImplicitStep(state, dt, op, params, linear_tol=linear_tol).residual(
        check_field(op, u, 'u'), check_field(op, v, 'v')
    )


def monotone_step(state: State, dt, op, params: ModelParams, opts: StepOptions):
    """Advance one step by Keller iteration from the constant supersolution.

    Returns (State, StepStats). The iterates are nonincreasing nodewise; an
    increase beyond opts.monotone_slack or a nonpositive node raises
    MonotonicityViolation.
    """
    if not check_step_condition(state, params, dt):
        raise StepConditionError(
            f"dt={dt!r} violates the solvability condition at sup-norms "
            f"({state.sup_u!r}, {state.sup_v!r})"
        )
    bound = constant_supersolution(state, params, dt, opts)
    system = ImplicitStep(state, dt, op, params, linear_tol=opts.linear_tol)

    u = np.full(op.n_nodes, bound.c1)
    v = np.full(op.n_nodes, bound.c2)
    stop = opts.tol_abs + opts.tol_rel * max(bound.c1, bound.c2)
    slack = opts.monotone_slack * max(1.0, bound.c1, bound.c2)
    max_increase = -math.inf
    increment = math.inf

    for iteration in range(1, opts.max_iterations + 1):
        u_next, v_next = system.sweep(u, v)
        if not (np.all(u_next > 0) and np.all(v_next > 0)):
            raise MonotonicityViolation(
                f"Keller iterate {iteration} lost positivity "
                f"(min u={u_next.min()!r}, min v={v_next.min()!r})"
            )
        increase = max(float(np.max(u_next - u)), float(np.max(v_next - v)))
        max_increase = max(max_increase, increase)
        if increase > slack:
            raise MonotonicityViolation(
                f"Keller iterate {iteration} increased by {increase!r} (slack {slack!r})"
            )
        increment = max(sup_norm(u_next - u), sup_norm(v_next - v))
        u, v = u_next, v_next
        if increment <= stop:
            break
    else:
        raise NonConvergenceError(
            f"Keller iteration did not settle in {opts.max_iterations} iterations",
            iterations=opts.max_iterations,
            residual=increment,
        )

    residual = system.residual(u, v)
    logger.debug(
        "step %d: %d Keller iterations, increment %.3e, residual %.3e",
        state.n, iteration, increment, residual,
    )
    stats = StepStats(
        iterations=iteration,
        increment=increment,
        residual=residual,
        max_increase=max_increase,
        supersolution=bound,
    )
    return state.advance(u, v, dt), stats


def existence_horizon(u0, v0, params: ModelParams, printed=False) -> ExistenceHorizon:
    """Time up to which the scheme is guaranteed to produce solutions.

    phi0 = max(alpha (1-p)/m lambda0^(1-m), alpha (1-p)/p lambda0^(1-p)) makes
    lambda0 / (1 - t phi0)^(1/(1-p)) a majorant of the sup-norms; T1 = 1/phi0.
    With printed=True the exponents are flipped to (m-1, p-1); the two agree
    when lambda0 = 1.
    """
    u0 = np.asarray(u0, dtype=np.float64)
    v0 = np.asarray(v0, dtype=np.float64)
    if np.any(u0 <= 0) or np.any(v0 <= 0):
        raise NegativeFieldError("initial fields must be strictly positive")
    m, p, alpha = params.m, params.p, params.alpha
    lambda0 = max(sup_norm(u0), sup_norm(v0))
    if alpha == 0:
        return ExistenceHorizon(lambda0=lambda0, phi0=0.0, t1=math.inf, exponent=1 - p, printed=printed)
    sign = -1 if printed else 1
    phi0 = max(
        alpha * (1 - p) / m * lambda0 ** (sign * (1 - m)),
        alpha * (1 - p) / p * lambda0 ** (sign * (1 - p)),
    )
    return ExistenceHorizon(lambda0=lambda0, phi0=phi0, t1=1.0 / phi0, exponent=1 - p, printed=printed)


def detect_blowup(state: State, opts: StepOptions, dt_proposed) -> bool:
    return state.sup_u + state.sup_v >= opts.blowup_threshold or dt_proposed < opts.dt_min


def to_original_variables(u, v, params: ModelParams):
    """(u1, v1) = (u^m, v^p)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 0) or np.any(v < 0):
        raise NegativeFieldError("original variables need nonnegative fields")
    return u**params.m, v**params.p


def from_original_variables(u1, v1, params: ModelParams):
    u1 = np.asarray(u1, dtype=np.float64)
    v1 = np.asarray(v1, dtype=np.float64)
    if np.any(u1 < 0) or np.any(v1 < 0):
        raise NegativeFieldError("original variables need nonnegative fields")
    return u1 ** (1 / params.m), v1 ** (1 / params.p)
