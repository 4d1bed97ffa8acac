"""
Unit tests for the implicit step engine.
"""
import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st
from scipy import optimize

from blowup.exceptions import NegativeFieldError, NonConvergenceError, StepConditionError
from blowup.scheme import (
    ImplicitStep,
    ModelParams,
    State,
    StepOptions,
    check_step_condition,
    constant_supersolution,
    detect_blowup,
    existence_horizon,
    from_original_variables,
    max_stable_dt,
    monotone_step,
    scheme_residual,
    to_original_variables,
)
from blowup.tests.utils import interval_operator, random_state

HALF = ModelParams(m=0.5, p=0.5)


def tight_options(**overrides):
    values = dict(tol_abs=1e-12, tol_rel=1e-12)
    values.update(overrides)
    return StepOptions.from_settings(**values)


class ModelParamsTest(SimpleTestCase):
    """Test cases for exponent validation and the original-variable convention."""

    def test_from_original(self):
        params = ModelParams.from_original(nu=1.0, mu=3.0, alpha=2.0)
        self.assertEqual((params.m, params.p, params.alpha), (0.5, 0.25, 2.0))
        self.assertAlmostEqual(params.nu, 1.0)
        self.assertAlmostEqual(params.mu, 3.0)

    def test_p_above_m_is_rejected(self):
        with self.assertRaises(ValidationError) as ctx:
            ModelParams(m=0.3, p=0.6)
        self.assertIn('p', ctx.exception.message_dict)

    def test_exponents_must_lie_in_unit_interval(self):
        for m, p in ((1.0, 0.5), (0.5, 0.0), (-0.1, -0.2)):
            with self.assertRaises(ValidationError):
                ModelParams(m=m, p=p)

    def test_alpha_must_be_finite_and_nonnegative(self):
        with self.assertRaises(ValidationError):
            ModelParams(m=0.5, p=0.5, alpha=-1.0)
        with self.assertRaises(ValidationError):
            ModelParams(m=0.5, p=0.5, alpha=math.inf)


class StateTest(SimpleTestCase):
    """Test cases for State."""

    def test_sup_norms_and_read_only_fields(self):
        state = State(u=[1.0, 3.0], v=[2.0, 0.5])
        self.assertEqual((state.sup_u, state.sup_v), (3.0, 2.0))
        with self.assertRaises(ValueError):
            state.u[0] = 5.0

    def test_rejects_nonpositive_node(self):
        with self.assertRaises(NegativeFieldError):
            State(u=[1.0, 0.0], v=[1.0, 1.0])

    def test_advance(self):
        state = State(u=[1.0], v=[1.0], t=0.5, n=3).advance([2.0], [2.0], 0.25)
        self.assertEqual((state.t, state.n), (0.75, 4))


class StepOptionsTest(SimpleTestCase):
    """Test cases for StepOptions."""

    def test_overrides_replace_settings(self):
        opts = StepOptions.from_settings(sigma=0.25, tol_abs=None)
        self.assertEqual(opts.sigma, 0.25)
        self.assertGreater(opts.tol_abs, 0)

    def test_sigma_below_one(self):
        with self.assertRaises(ValidationError):
            StepOptions.from_settings(sigma=1.0)

    def test_positive_fields(self):
        with self.assertRaises(ValidationError):
            StepOptions.from_settings(dt_max=0.0)


class StepConditionTest(SimpleTestCase):
    """Test cases for the solvability condition and the adaptive step."""

    def test_examples(self):
        state = State(u=[1.0], v=[1.0])
        params = HALF.with_alpha(1.0)
        self.assertTrue(check_step_condition(state, params, 0.5))
        self.assertFalse(check_step_condition(state, params, 1.0))

    def test_coupling_ten(self):
        state = State(u=[1.0], v=[1.0])
        params = HALF.with_alpha(10.0)
        self.assertTrue(check_step_condition(state, params, 0.01))
        self.assertFalse(check_step_condition(state, params, 0.2))

    def test_zero_alpha_always_holds(self):
        self.assertTrue(check_step_condition(State(u=[1e9], v=[1e9]), HALF, 1e6))

    def test_max_stable_dt_satisfies_condition(self):
        opts = StepOptions.from_settings(dt_max=1e6)
        params = ModelParams(m=0.7, p=0.4, alpha=3.0)
        for seed in range(20):
            state = random_state(interval_operator(10), seed, high=50.0)
            dt = max_stable_dt(state, params, opts)
            self.assertTrue(check_step_condition(state, params, dt))

    def test_max_stable_dt_is_capped(self):
        opts = StepOptions.from_settings(dt_max=0.01)
        self.assertEqual(max_stable_dt(State(u=[1.0], v=[1.0]), HALF, opts), 0.01)
        self.assertEqual(max_stable_dt(State(u=[1e-6], v=[1e-6]), HALF.with_alpha(1.0), opts), 0.01)


class SupersolutionTest(SimpleTestCase):
    """Test cases for the constant supersolution."""

    def test_bracket_and_symmetric_root(self):
        bound = constant_supersolution(State(u=[1.0], v=[1.0]), HALF.with_alpha(10.0), 0.01)
        self.assertAlmostEqual(bound.a, 0.1, places=14)
        self.assertAlmostEqual(bound.b, 10.0, places=12)
        self.assertAlmostEqual(bound.x0, 1.0, places=10)
        self.assertAlmostEqual(bound.c1, bound.c2, places=9)
        self.assertAlmostEqual(bound.c1, 1 / 0.81, places=9)

    def test_zero_alpha_gives_sup_norms(self):
        bound = constant_supersolution(State(u=[1.0, 2.0], v=[3.0, 1.0]), HALF, 0.1)
        self.assertEqual((bound.c1, bound.c2, bound.a, bound.b), (2.0, 3.0, 0.0, math.inf))

    def test_empty_bracket(self):
        with self.assertRaises(StepConditionError):
            constant_supersolution(State(u=[1.0], v=[1.0]), HALF.with_alpha(10.0), 1.0)

    def test_constant_pair_dominates_step_equations(self):
        op = interval_operator(12)
        for params in (HALF.with_alpha(4.0), ModelParams(m=0.8, p=0.3, alpha=2.0)):
            for seed in range(25):
                state = random_state(op, seed)
                dt = 0.5 * max_stable_dt(state, params, StepOptions.from_settings(dt_max=1.0))
                bound = constant_supersolution(state, params, dt)
                self.assertGreater(bound.c1, state.sup_u)
                self.assertGreater(bound.c2, state.sup_v)
                f_u, f_v = ImplicitStep(state, dt, op, params).equations(
                    np.full(12, bound.c1), np.full(12, bound.c2)
                )
                scale = 1e-9 * max(bound.c1, bound.c2) / dt
                self.assertGreaterEqual(f_u.min(), -scale)
                self.assertGreaterEqual(f_v.min(), -scale)


class MonotoneStepTest(SimpleTestCase):
    """Test cases for the Keller iteration."""

    def test_single_node_matches_scalar_root(self):
        op = interval_operator(1)
        state = State(u=[1.0], v=[1.0])
        next_state, stats = monotone_step(state, 0.01, op, HALF, tight_options())
        root = optimize.brentq(lambda u: 108 * u - 100 * math.sqrt(u), 0.5, 1.0, xtol=1e-15)
        self.assertAlmostEqual(next_state.u[0], root, places=10)
        self.assertAlmostEqual(next_state.u[0], 1 / 1.08**2, places=10)
        self.assertEqual(next_state.n, 1)
        self.assertAlmostEqual(next_state.t, 0.01)
        self.assertGreater(stats.iterations, 1)

    def test_zero_alpha_decouples(self):
        op = interval_operator(16)
        base = random_state(op, 1)
        other = State(u=base.u, v=base.v * 2.0)
        first, _ = monotone_step(base, 0.01, op, HALF, tight_options())
        second, _ = monotone_step(other, 0.01, op, HALF, tight_options())
        np.testing.assert_allclose(first.u, second.u, atol=1e-10)

    def test_symmetric_data_stays_symmetric(self):
        op = interval_operator(16)
        state = State(u=op.rho1, v=op.rho1)
        params = HALF.with_alpha(2 * op.lambda1)
        dt = max_stable_dt(state, params, StepOptions.from_settings())
        next_state, _ = monotone_step(state, dt, op, params, tight_options())
        np.testing.assert_allclose(next_state.u, next_state.v, rtol=1e-12)

    def test_iterates_stay_under_supersolution(self):
        op = interval_operator(20)
        params = ModelParams(m=0.6, p=0.4, alpha=5.0)
        opts = tight_options()
        for seed in range(10):
            state = random_state(op, seed)
            dt = max_stable_dt(state, params, opts)
            next_state, stats = monotone_step(state, dt, op, params, opts)
            slack = opts.monotone_slack * max(1.0, stats.supersolution.c1, stats.supersolution.c2)
            self.assertTrue(np.all(next_state.u > 0) and np.all(next_state.v > 0))
            self.assertLessEqual(next_state.sup_u, stats.supersolution.c1 + slack)
            self.assertLessEqual(next_state.sup_v, stats.supersolution.c2 + slack)
            self.assertLessEqual(stats.max_increase, slack)

    def test_residual_is_small(self):
        op = interval_operator(24)
        params = HALF.with_alpha(op.lambda1)
        opts = tight_options()
        state = random_state(op, 4)
        dt = max_stable_dt(state, params, opts)
        next_state, stats = monotone_step(state, dt, op, params, opts)
        stop = opts.tol_abs + opts.tol_rel * max(stats.supersolution.c1, stats.supersolution.c2)
        self.assertLessEqual(stats.residual, 10 * stop)
        recomputed = scheme_residual(state, next_state.u, next_state.v, dt, op, params)
        self.assertAlmostEqual(recomputed, stats.residual, delta=10 * stop)

    def test_step_condition_violation(self):
        op = interval_operator(4)
        with self.assertRaises(StepConditionError):
            monotone_step(State(u=np.ones(4), v=np.ones(4)), 1.0, op, HALF.with_alpha(10.0), tight_options())

    def test_iteration_cap(self):
        op = interval_operator(8)
        state = random_state(op, 2)
        with self.assertRaises(NonConvergenceError) as ctx:
            monotone_step(state, 0.01, op, HALF.with_alpha(1.0), tight_options(max_iterations=1))
        self.assertEqual(ctx.exception.iterations, 1)


class ExistenceHorizonTest(SimpleTestCase):
    """Test cases for the guaranteed existence time."""

    def test_unit_data(self):
        horizon = existence_horizon([1.0], [1.0], HALF.with_alpha(10.0))
        self.assertAlmostEqual(horizon.t1, 0.1)
        self.assertEqual(horizon.majorant(0.0), 1.0)
        self.assertEqual(horizon.majorant(0.1), math.inf)

    def test_printed_and_proved_exponents(self):
        params = HALF.with_alpha(10.0)
        proved = existence_horizon([4.0], [1.0], params)
        printed = existence_horizon([4.0], [1.0], params, printed=True)
        self.assertAlmostEqual(proved.t1, 0.05)
        self.assertAlmostEqual(printed.t1, 0.2)

    def test_zero_alpha(self):
        horizon = existence_horizon([2.0], [2.0], HALF)
        self.assertEqual(horizon.t1, math.inf)
        self.assertEqual(horizon.majorant(1e6), 2.0)

    def test_rejects_nonpositive_data(self):
        with self.assertRaises(NegativeFieldError):
            existence_horizon([0.0], [1.0], HALF)


class DetectBlowupTest(SimpleTestCase):
    """Test cases for blow-up detection."""

    def test_threshold(self):
        opts = StepOptions.from_settings(blowup_threshold=100.0, dt_min=1e-12)
        self.assertTrue(detect_blowup(State(u=[60.0], v=[50.0]), opts, 1e-3))
        self.assertFalse(detect_blowup(State(u=[10.0], v=[10.0]), opts, 1e-3))

    def test_dt_starvation(self):
        opts = StepOptions.from_settings(blowup_threshold=1e30, dt_min=1e-12)
        self.assertTrue(detect_blowup(State(u=[1.0], v=[1.0]), opts, 5e-13))


class OriginalVariablesTest(SimpleTestCase):
    """Test cases for the change of variables."""

    def test_example(self):
        u1, v1 = to_original_variables([4.0], [9.0], HALF)
        self.assertEqual((u1[0], v1[0]), (2.0, 3.0))

    def test_negative_is_rejected(self):
        with self.assertRaises(NegativeFieldError):
            to_original_variables([-1.0], [1.0], HALF)
        with self.assertRaises(NegativeFieldError):
            from_original_variables([1.0], [-1.0], HALF)

    @hypothesis_settings(max_examples=50, deadline=None)
    @given(
        st.floats(0.05, 0.95),
        st.floats(0.05, 1.0),
        st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=8),
    )
    def test_inverse(self, m, fraction, values):
        params = ModelParams(m=m, p=m * fraction)
        u = np.array(values)
        back_u, back_v = from_original_variables(*to_original_variables(u, u, params), params)
        np.testing.assert_allclose(back_u, u, rtol=1e-12)
        np.testing.assert_allclose(back_v, u, rtol=1e-12)
