"""
Functionals, a priori bounds and per-step inequalities of the scheme.

Every integral is the mass-lumped quadrature of blowup.grid, so the energy
identities hold exactly in the discrete setting and the tolerances used by
the checkers only absorb roundoff and Keller truncation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from blowup.exceptions import DiagnosticsError, NegativeFieldError
from blowup.grid import check_field, dirichlet_energy, quadrature, sup_norm
from blowup.scheme import existence_horizon

logger = logging.getLogger(__name__)


def _nonnegative(op, f, name):
    f = check_field(op, f, name)
    if np.any(f < 0):
        raise NegativeFieldError(f"{name} has a negative node")
    return f


def phi(u, v, params, op) -> float:
    """Phi = integral of m/(m+1) u^(m+1) + p/(p+1) v^(p+1)."""
    u = _nonnegative(op, u, 'u')
    v = _nonnegative(op, v, 'v')
    m, p = params.m, params.p
    return quadrature(op, m / (m + 1) * u ** (m + 1) + p / (p + 1) * v ** (p + 1))


def z_value(u, v, params, op) -> float:
    value = phi(u, v, params, op)
    if value <= 0:
        raise DiagnosticsError("Z is undefined for Phi = 0")
    return value ** ((params.m - 1) / (params.m + 1))


def mu_n(u, params, op) -> float:
    u = _nonnegative(op, u, 'u')
    m = params.m
    return m / (m + 1) * quadrature(op, u ** (m + 1))


def j_energy(u, v, alpha, op) -> float:
    """J = integral of |grad u|^2 + |grad v|^2 - 2 alpha u v."""
    u = check_field(op, u, 'u')
    v = check_field(op, v, 'v')
    return dirichlet_energy(op, u) + dirichlet_energy(op, v) - 2 * alpha * quadrature(op, u * v)


def psi_n(u_ref, u, v, params, op) -> float:
    """(integral of m u_ref^(m-p) u^(p+1) + p v^(p+1))^(1/(p+1)); u_ref plays u_n."""
    u_ref = _nonnegative(op, u_ref, 'u_ref')
    u = _nonnegative(op, u, 'u')
    v = _nonnegative(op, v, 'v')
    m, p = params.m, params.p
    return quadrature(op, m * u_ref ** (m - p) * u ** (p + 1) + p * v ** (p + 1)) ** (1 / (p + 1))


def f_rayleigh(u_ref, u, v, params, op) -> float:
    psi = psi_n(u_ref, u, v, params, op)
    if psi <= 0:
        raise DiagnosticsError("F_n is undefined where psi_n = 0")
    return j_energy(u, v, params.alpha, op) / psi**2


# A priori bounds

def bound_from_energy(phi0, j0, factor):
    """factor * Phi0 / (-J0) when J0 < 0, else None."""
    if j0 >= 0:
        return None
    return factor * phi0 / (-j0)


def blowup_upper_bound(u0, v0, params, op):
    """(1+m)/(1-p) Phi0 / (-J0) when J0 < 0, else None."""
    factor = (1 + params.m) / (1 - params.p)
    return bound_from_energy(phi(u0, v0, params, op), j_energy(u0, v0, params.alpha, op), factor)


def continuous_blowup_bound(u0, v0, params, op):
    """(1+m)/(1-m) Phi0 / (-J0) when J0 < 0, else None."""
    factor = (1 + params.m) / (1 - params.m)
    return bound_from_energy(phi(u0, v0, params, op), j_energy(u0, v0, params.alpha, op), factor)


def continuous_growth_envelope(phi0, t, t_blowup, params):
    """Upper bound on Phi(t)^(1/(m+1)) for a solution blowing up at t_blowup."""
    if t >= t_blowup:
        return math.inf
    m = params.m
    return (t_blowup / (t_blowup - t)) ** (1 / (1 - m)) * phi0 ** (1 / (m + 1))


@dataclass(frozen=True)
class BlowupBounds:
    t_upper: float | None
    t_continuous: float | None
    t1: float
    t1_printed: float
    t_star: float | None = None

    def brackets(self, t_star) -> bool:
        """T1 <= T* <= T_upper; vacuous when there is no upper bound."""
        if self.t_upper is None:
            return True
        return self.t1 <= t_star <= self.t_upper


def blowup_bounds(u0, v0, params, op, t_star=None) -> BlowupBounds:
    return BlowupBounds(
        t_upper=blowup_upper_bound(u0, v0, params, op),
        t_continuous=continuous_blowup_bound(u0, v0, params, op),
        t1=existence_horizon(u0, v0, params).t1,
        t1_printed=existence_horizon(u0, v0, params, printed=True).t1,
        t_star=t_star,
    )


# Critical regime

@dataclass(frozen=True)
class ThetaEstimate:
    theta: float
    residual: float
    target: float
    exponent: float
    bound: float | None

    @property
    def within_bound(self):
        """theta^m <= bound; vacuous unless p = m."""
        return self.bound is None or self.theta**self.exponent <= self.bound * (1 + 1e-12)


def theta_limit(u0, v0, params, op) -> ThetaEstimate:
    """theta solving integral(theta^m rho^(m+1) + theta^p rho^(p+1)) = integral((u0^m + v0^p) rho).

    When p = m, also returns the upper bound on theta^m obtained from the
    discrete mass inequality.
    """
    u0 = _nonnegative(op, u0, 'u0')
    v0 = _nonnegative(op, v0, 'v0')
    m, p = params.m, params.p
    rho = op.rho1
    target = quadrature(op, (u0**m + v0**p) * rho)
    if target <= 0:
        raise DiagnosticsError("theta is undefined for a nonpositive right side")
    rho_m = quadrature(op, rho ** (m + 1))
    rho_p = quadrature(op, rho ** (p + 1))

    def excess(theta):
        return theta**m * rho_m + theta**p * rho_p - target

    lo, hi = 1e-300, 1.0
    while excess(hi) <= 0:
        hi *= 2
    theta = optimize.bisect(excess, lo, hi, xtol=np.finfo(float).tiny, rtol=4 * np.finfo(float).eps, maxiter=4000)
    bound = None
    if m == p:
        bound = quadrature(op, (u0**m + v0**m) * rho) / (2 * rho_m)
    return ThetaEstimate(theta=theta, residual=abs(excess(theta)), target=target, exponent=m, bound=bound)


def interpolant(state_n, state_next, t, params):
    """(u_dt(t), v_dt(t)): linear in u^m and v^p between t_n and t_(n+1)."""
    t_n, t_next = state_n.t, state_next.t
    if t == t_n:
        return state_n.u.copy(), state_n.v.copy()
    if t == t_next:
        return state_next.u.copy(), state_next.v.copy()
    if not t_n < t < t_next:
        raise DiagnosticsError(f"t={t!r} lies outside [{t_n!r}, {t_next!r}]")
    m, p = params.m, params.p
    s = (t - t_n) / (t_next - t_n)
    u = (state_n.u**m + s * (state_next.u**m - state_n.u**m)) ** (1 / m)
    v = (state_n.v**p + s * (state_next.v**p - state_n.v**p)) ** (1 / p)
    return u, v


# Per-step records and inequalities

@dataclass(frozen=True)
class StepReport:
    """Diagnostics of step n -> n+1; the last record of a run has dt = 0 and no successor."""

    n: int
    t: float
    dt: float
    phi: float
    j: float
    psi_n: float
    f_n: float
    sup_u: float
    sup_v: float
    iterations: int
    mu: float
    z: float
    psi_next: float | None = None
    f_next: float | None = None
    residual: float | None = None


def step_report(state, next_state, dt, stats, params, op) -> StepReport:
    values = dict(
        n=state.n,
        t=state.t,
        dt=dt,
        phi=phi(state.u, state.v, params, op),
        j=j_energy(state.u, state.v, params.alpha, op),
        psi_n=psi_n(state.u, state.u, state.v, params, op),
        f_n=f_rayleigh(state.u, state.u, state.v, params, op),
        sup_u=state.sup_u,
        sup_v=state.sup_v,
        iterations=stats.iterations if stats else 0,
        mu=mu_n(state.u, params, op),
        z=z_value(state.u, state.v, params, op),
    )
    if next_state is not None:
        values.update(
            psi_next=psi_n(state.u, next_state.u, next_state.v, params, op),
            f_next=f_rayleigh(state.u, next_state.u, next_state.v, params, op),
            residual=stats.residual if stats else None,
        )
    return StepReport(**values)


def psi_bracket_holds(report: StepReport, params, rtol=1e-9) -> bool:
    """(1-p) dt F_n(next) <= psi_n^(p-1)(next) - psi_n^(p-1)(cur) <= (1-p) dt F_n(cur).

    The slack is relative to the powers psi^(p-1) being subtracted, not to
    their difference, which cancels to roundoff near a steady state.
    """
    p = params.p
    current, following = report.psi_n ** (p - 1), report.psi_next ** (p - 1)
    lower = (1 - p) * report.dt * report.f_next
    middle = following - current
    upper = (1 - p) * report.dt * report.f_n
    slack = rtol * max(current, following, abs(lower), abs(upper))
    return lower <= middle + slack and middle <= upper + slack


def f_decreases(report: StepReport, rtol=1e-9) -> bool:
    return report.f_next <= report.f_n + rtol * max(1.0, abs(report.f_n))


def j_nonincreasing(report: StepReport, next_report: StepReport) -> bool:
    return next_report.j <= report.j + 1e-10 * (1 + abs(report.j))


def phi_grows(report: StepReport, next_report: StepReport, rtol=1e-9) -> bool:
    """Phi_(n+1) > Phi_n and Phi_n - Phi_(n+1) <= dt J_n, for J0 < 0."""
    slack = rtol * max(abs(report.phi), abs(next_report.phi))
    strictly = next_report.phi > report.phi
    gain = report.phi - next_report.phi <= report.dt * report.j + slack
    return strictly and gain


def phi_power_estimate_holds(report: StepReport, next_report: StepReport, params, rtol=1e-9) -> bool:
    """Phi_n^(2/(p+1)) (Phi_(n+1)^((p-1)/(p+1)) - Phi_n^((p-1)/(p+1))) <= (1-p)/(1+m) dt J_n."""
    m, p = params.m, params.p
    q = (p - 1) / (p + 1)
    lhs = report.phi ** (2 / (p + 1)) * (next_report.phi**q - report.phi**q)
    rhs = (1 - p) / (1 + m) * report.dt * report.j
    return lhs <= rhs + rtol * max(abs(lhs), abs(rhs))


def critical_mass(state, params, op) -> float:
    """integral((u^m + v^m) rho1), nonincreasing along runs with alpha = lambda1 and p = m."""
    return quadrature(op, (state.u**params.m + state.v**params.m) * op.rho1)


def growth_envelope_check(reports, t_star, params, rtol=1e-8) -> bool:
    """Phi_n^(1/(m+1)) <= (T*/(T* - t_n))^(1/(1-m)) Phi_0^(1/(m+1)) at every t_n < T*."""
    if not reports:
        return True
    m = params.m
    phi0 = reports[0].phi
    for report in reports:
        if report.t >= t_star:
            continue
        lhs = report.phi ** (1 / (m + 1))
        rhs = continuous_growth_envelope(phi0, report.t, t_star, params)
        if lhs > rhs * (1 + rtol):
            logger.info("growth envelope fails at n=%d: %r > %r", report.n, lhs, rhs)
            return False
    return True


def z_second_differences(reports):
    """Discrete second differences of Z(t_n) on a possibly nonuniform time grid."""
    out = []
    for left, mid, right in zip(reports, reports[1:], reports[2:]):
        h1 = mid.t - left.t
        h2 = right.t - mid.t
        if h1 <= 0 or h2 <= 0:
            continue
        slope_right = (right.z - mid.z) / h2
        slope_left = (mid.z - left.z) / h1
        out.append(2 * (slope_right - slope_left) / (h1 + h2))
    return out


def relative_l2_distance(op, f, g) -> float:
    diff = check_field(op, f) - check_field(op, g)
    norm = math.sqrt(quadrature(op, g * g))
    return math.sqrt(quadrature(op, diff * diff)) / norm if norm else sup_norm(diff)
