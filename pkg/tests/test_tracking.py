"""
Tests for the tracking error, control laws, Lyapunov functions and regions.
"""

import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.attitude.dynamics import BodyState
from core.attitude.quat_core import Quaternion, conj, cross, mul, norm, norm_sq, pure
from core.attitude.reference import ConstantReference, benchmark_reference
from core.attitude.tracking import (
    ControllerGains,
    EstimatorState,
    RegionSpec,
    RobustGains,
    TrackingError,
    closed_loop_error_omega_dot,
    compute_error,
    control_torque,
    decrease_bound,
    error_field,
    estimator_derivative,
    eta,
    eta_dot,
    feasible_gains,
    feasible_region,
    in_M_epsilon,
    in_region_S,
    in_region_S_robust,
    lyapunov_V,
    lyapunov_V0,
    lyapunov_Vk1,
    robust_control_torque,
    v0_dot_expression,
    v_aux,
    v_aux_dot,
)
from core.exceptions import ConfigError, InfeasibleGainsError
from core.services.verification_service import random_quaternion, random_unit_quaternion

ZERO = np.zeros(3)


def error(e_q, e_omega=(0.0, 0.0, 0.0)):
    return TrackingError(Quaternion.from_array(e_q), np.asarray(e_omega, dtype=float))


class TestGains:
    """Test cases for gain and region validation."""

    @pytest.mark.unit
    @pytest.mark.parametrize("name", ["alpha", "k_q", "k1", "k_omega"])
    def test_controller_gains_must_be_positive(self, name):
        """Test that every controller gain is checked."""
        with pytest.raises(ConfigError) as exc_info:
            ControllerGains(**{name: 0.0})
        assert exc_info.value.field == name

    @pytest.mark.unit
    def test_robust_gains_validation(self, gains):
        """Test k_delta and delta_bound checks."""
        with pytest.raises(ConfigError):
            RobustGains(base=gains, k_delta=-1.0)
        with pytest.raises(ConfigError):
            RobustGains(base=gains, k_delta=1.0, delta_bound=-0.1)

    @pytest.mark.unit
    def test_certifies(self, gains):
        """Test k_delta > delta^2 / 2c."""
        rg = RobustGains(base=gains, k_delta=0.5, delta_bound=1.0)
        assert not rg.certifies(1.0)
        assert rg.certifies(1.5)

    @pytest.mark.unit
    def test_region_rho(self):
        """Test rho = 2 - sqrt(2c) - epsilon."""
        assert RegionSpec(c=0.5, epsilon=0.2).rho == pytest.approx(0.8)

    @pytest.mark.unit
    @pytest.mark.parametrize("c, epsilon", [(0.0, 0.1), (2.0, 0.0), (1.0, -0.1), (1.0, 0.6)])
    def test_region_rejects_invalid(self, c, epsilon):
        """Test c in (0, 2) and epsilon below 2 - sqrt(2c)."""
        with pytest.raises(ConfigError):
            RegionSpec(c=c, epsilon=epsilon)


class TestTrackingError:
    """Test cases for compute_error, error_field and eta."""

    @pytest.mark.unit
    def test_zero_error_on_reference(self):
        """Test e = 0 when the state equals the reference."""
        ref = benchmark_reference(0.7)
        e = compute_error(BodyState(ref.q0, ref.omega0), ref)
        assert_allclose(e.e_q.as_array(), np.zeros(4), atol=1e-15)
        assert_array_equal(e.e_omega, ZERO)

    @pytest.mark.unit
    def test_antipodal_error(self):
        """Test e_q = -2 for q = -q0."""
        ref = benchmark_reference(0.0)
        e = compute_error(BodyState(-ref.q0, ref.omega0), ref)
        assert_allclose(e.e_q.as_array(), [-2.0, 0.0, 0.0, 0.0])
        assert norm(e.e_q) == pytest.approx(2.0)
        assert lyapunov_V0(e) == pytest.approx(2.0)

    @pytest.mark.unit
    def test_norm_identity(self, rng):
        """Test |q|^2 = 1 + 2 e_qs + e_qs^2 + |e_qv|^2 for unit q, q0."""
        for _ in range(1000):
            q, q0 = random_unit_quaternion(rng), random_unit_quaternion(rng)
            e = mul(conj(q0), q) - Quaternion.identity()
            assert 1.0 + 2.0 * e.s + e.s ** 2 + float(e.v @ e.v) == pytest.approx(norm_sq(q), abs=1e-12)

    @pytest.mark.unit
    def test_error_field_equilibrium(self, gains):
        """Test that zero error on the sphere is an equilibrium."""
        out = error_field(error([0, 0, 0, 0]), np.array([1.0, 2.0, 3.0]), 1.0, gains)
        assert_array_equal(out.as_array(), np.zeros(4))

    @pytest.mark.unit
    def test_error_field_pure_embedding(self, gains, rng):
        """Test e_q_dot = -(1 + e_q) for e_W = 0, W0 = 0, |q|^2 = 2."""
        e_q = random_quaternion(rng)
        out = error_field(TrackingError(e_q, ZERO), ZERO, 2.0, gains)
        assert_allclose(out.as_array(), -(e_q + Quaternion.identity()).as_array(), atol=1e-15)

    @pytest.mark.unit
    def test_commutator_shortcut(self, gains, rng):
        """Test e_q W0 - W0 e_q = 2 (e_qv x W0) inside error_field."""
        for _ in range(100):
            e_q, omega0 = random_quaternion(rng), rng.standard_normal(3)
            direct = 0.5 * (mul(e_q, pure(omega0)) - mul(pure(omega0), e_q))
            field = error_field(TrackingError(e_q, ZERO), omega0, 1.0, gains)
            expected = direct + 0.5 * mul(e_q + Quaternion.identity(), pure(ZERO))
            assert_allclose(field.as_array(), expected.as_array(), atol=1e-13)
            assert_allclose(direct.v, cross(e_q.v, omega0), atol=1e-13)

    @pytest.mark.unit
    def test_eta_values(self, gains):
        """Test eta at the worked examples."""
        assert_array_equal(eta(error([0, 0, 0, 0]), 1.0, gains), ZERO)
        assert_allclose(eta(error([0, 1, 0, 0]), 1.0, gains), [-3.0, 0.0, 0.0])
        e = error([-1.0, 0.3, -0.2, 0.1])
        assert_allclose(eta(e, 1.0, gains), (-gains.k_q - 2.0 * gains.alpha) * e.e_qv)

    @pytest.mark.unit
    def test_eta_dot_equilibrium(self, gains):
        """Test eta_dot = 0 at zero error on the sphere."""
        assert_array_equal(eta_dot(error([0, 0, 0, 0]), np.array([2.0, 0.0, 0.0]), 1.0, gains), ZERO)

    @pytest.mark.unit
    def test_eta_dot_pure_embedding_spot_check(self, gains):
        """Test eta_dot against differentiating eta along e_q_dot = -alpha(V - 1)(1 + e_q)."""
        e_q = Quaternion.from_array([0.2, 0.3, -0.1, 0.4])
        v = 1.5
        alpha = gains.alpha
        h = 1e-6

        def eta_at(dt):
            # closed-form flow of e_q and |q|^2 with e_W = 0 and W0 = 0
            v_t = 1.0 / (1.0 + (1.0 / v - 1.0) * math.exp(-2.0 * alpha * dt))
            scale = math.sqrt(v_t / v)
            moved = scale * (e_q + Quaternion.identity()) - Quaternion.identity()
            return eta(TrackingError(moved, ZERO), v_t, gains)

        numeric = (eta_at(h) - eta_at(-h)) / (2.0 * h)
        assert_allclose(eta_dot(TrackingError(e_q, ZERO), ZERO, v, gains), numeric, atol=1e-8)


class TestControlLaws:
    """Test cases for control_torque, robust_control_torque and the estimator."""

    @pytest.mark.unit
    def test_zero_torque_at_rest_on_reference(self, gains, inertia):
        """Test tau = 0 on a constant reference at rest."""
        ref = ConstantReference().sample(0.0)
        tau = control_torque(BodyState(Quaternion.identity(), ZERO), ref, gains, inertia)
        assert_array_equal(tau, ZERO)

    @pytest.mark.unit
    def test_feedforward_on_reference(self, gains, inertia):
        """Test tau = -(I W0) x W0 + I W0_dot with zero tracking error."""
        ref = benchmark_reference(1.3)
        tau = control_torque(BodyState(ref.q0, ref.omega0), ref, gains, inertia)
        expected = -cross(inertia.apply(ref.omega0), ref.omega0) + inertia.apply(ref.omega0_dot)
        assert_allclose(tau, expected, atol=1e-12)

    @pytest.mark.unit
    def test_robust_law_with_zero_estimate(self, robust_gains, inertia, rng):
        """Test that Delta_bar = 0 gives the non-robust torque."""
        ref = benchmark_reference(0.4)
        state = BodyState(random_unit_quaternion(rng), rng.standard_normal(3))
        assert_array_equal(
            robust_control_torque(state, ref, robust_gains, EstimatorState(), inertia),
            control_torque(state, ref, robust_gains.base, inertia),
        )

    @pytest.mark.unit
    def test_exact_cancellation(self, robust_gains, inertia, rng):
        """Test that Delta_bar = Delta reproduces the undisturbed closed-loop e_W_dot."""
        for _ in range(100):
            ref = benchmark_reference(rng.uniform(0.0, 40.0))
            state = BodyState(random_unit_quaternion(rng), rng.standard_normal(3))
            delta = rng.standard_normal(3)
            robust = robust_control_torque(state, ref, robust_gains, EstimatorState(delta), inertia)
            nominal = control_torque(state, ref, robust_gains.base, inertia)
            assert_allclose(
                closed_loop_error_omega_dot(state, ref, robust, inertia, delta),
                closed_loop_error_omega_dot(state, ref, nominal, inertia, ZERO),
                atol=1e-12, rtol=1e-9,
            )

    @pytest.mark.unit
    def test_closed_loop_e_omega_dot(self, gains, inertia, rng):
        """Test e_W_dot = -k1 e_qv - k_W (e_W - eta) + eta_dot under the non-robust law."""
        ref = benchmark_reference(2.0)
        state = BodyState(random_unit_quaternion(rng), rng.standard_normal(3))
        e = compute_error(state, ref)
        tau = control_torque(state, ref, gains, inertia)
        expected = (
            -gains.k1 * e.e_qv
            - gains.k_omega * (e.e_omega - eta(e, 1.0, gains))
            + eta_dot(e, ref.omega0, 1.0, gains)
        )
        assert_allclose(closed_loop_error_omega_dot(state, ref, tau, inertia, ZERO), expected, atol=1e-10)

    @pytest.mark.unit
    def test_estimator_frozen_on_sliding_quantity(self, robust_gains, inertia):
        """Test Delta_bar_dot = 0 when e_W = eta."""
        e = error([0.1, 0.2, 0.0, 0.0])
        e = TrackingError(e.e_q, eta(e, 1.0, robust_gains.base))
        assert_allclose(estimator_derivative(e, eta(e, 1.0, robust_gains.base), robust_gains, inertia), ZERO)

    @pytest.mark.unit
    def test_estimator_rate(self, robust_gains, inertia):
        """Test (k_delta / 2 k1) I^-1 (e_W - eta) with e_W - eta = (1, 0, 0)."""
        e = error([0, 0, 0, 0], [1.0, 0.0, 0.0])
        rate = estimator_derivative(e, ZERO, robust_gains, inertia)
        assert_allclose(rate, [1000.0 / 6.0 / 4.250, 0.0, 0.0])
        assert rate[0] == pytest.approx(39.2157, abs=1e-4)

    @pytest.mark.unit
    def test_disturbance_error_rate_sign(self, robust_gains, inertia, rng):
        """Test d/dt |e_delta|^2 = -(k_delta / k1) <e_delta, I^-1 (e_W - eta)> for constant Delta."""
        e = TrackingError(random_quaternion(rng) * 0.3, rng.standard_normal(3))
        eta_val = eta(e, 1.0, robust_gains.base)
        e_delta = rng.standard_normal(3)
        rate = 2.0 * float(e_delta @ -estimator_derivative(e, eta_val, robust_gains, inertia))
        expected = -(robust_gains.k_delta / robust_gains.base.k1) * float(
            e_delta @ inertia.solve(e.e_omega - eta_val)
        )
        assert rate == pytest.approx(expected, rel=1e-12)


class TestLyapunovFunctions:
    """Test cases for the Lyapunov functions and decrease bounds."""

    @pytest.mark.unit
    def test_zero_errors(self, robust_gains):
        """Test that all functions vanish at zero error on the sphere."""
        e = error([0, 0, 0, 0])
        assert lyapunov_V0(e) == 0.0
        assert lyapunov_Vk1(e, 1.0, robust_gains.base) == 0.0
        assert lyapunov_V(e, 1.0, robust_gains, ZERO) == 0.0
        assert v_aux(Quaternion.identity()) == 0.0

    @pytest.mark.unit
    def test_vk1_and_v_values(self, robust_gains):
        """Test V_k1 = 1/2 |e_q|^2 + |e_W - eta|^2 / 4k1 and the estimator term of V."""
        e = error([0, 0, 0, 0], [0.0, 0.0, 2.0])
        assert lyapunov_Vk1(e, 1.0, robust_gains.base) == pytest.approx(4.0 / 12.0)
        assert lyapunov_V(e, 1.0, robust_gains, np.array([1.0, 1.0, 1.0])) == pytest.approx(
            4.0 / 12.0 + 3.0 / 2000.0
        )

    @pytest.mark.unit
    def test_v_aux(self):
        """Test V_aux = (|q|^2 - 1)^2 / 4 and its rate."""
        q = Quaternion.from_array([1.0, 1.0, 0.0, 0.0])
        assert v_aux(q) == pytest.approx(0.25)
        assert v_aux_dot(q, 1.0) == pytest.approx(-2.0)
        assert v_aux_dot(Quaternion.identity(), 1.0) == 0.0

    @pytest.mark.unit
    def test_v0_rate_matches_chain_rule(self, gains, rng):
        """Test the closed-form dV0/dt against <e_q, e_q_dot> from error_field."""
        for _ in range(200):
            q0 = random_unit_quaternion(rng)
            q = random_unit_quaternion(rng) * rng.uniform(0.8, 1.2)
            e = TrackingError(mul(conj(q0), q) - Quaternion.identity(), rng.standard_normal(3))
            omega0 = rng.standard_normal(3)
            e_dot = error_field(e, omega0, norm_sq(q), gains)
            chain = float(e.e_q.as_array() @ e_dot.as_array())
            assert v0_dot_expression(e, norm_sq(q), gains) == pytest.approx(chain, abs=1e-12, rel=1e-9)

    @pytest.mark.unit
    def test_decrease_bound_is_non_positive(self, gains, rng):
        """Test that the certified bound never exceeds zero."""
        region = RegionSpec(c=1.0, epsilon=0.1)
        for _ in range(100):
            e = TrackingError(random_quaternion(rng) * 0.3, rng.standard_normal(3))
            assert decrease_bound(e, 1.0, gains, region) <= 0.0


class TestRegions:
    """Test cases for region membership."""

    @pytest.mark.unit
    def test_zero_errors_inside(self, gains, robust_gains):
        """Test that the reference state belongs to every region."""
        state = BodyState(Quaternion.identity(), ZERO)
        e = error([0, 0, 0, 0])
        spec = RegionSpec(c=0.5, epsilon=0.0)
        assert in_region_S(state, e, spec, gains)
        assert in_region_S_robust(state, e, ZERO, spec, robust_gains)
        assert in_M_epsilon(state.q, 0.0)

    @pytest.mark.unit
    def test_norm_condition(self, gains):
        """Test that |q|^2 = 1 + 2 epsilon falls outside."""
        spec = RegionSpec(c=1.0, epsilon=0.1)
        q = math.sqrt(1.2) * Quaternion.identity()
        assert not in_M_epsilon(q, 0.1)
        assert not in_region_S(BodyState(q, ZERO), error([0, 0, 0, 0]), spec, gains)

    @pytest.mark.unit
    def test_level_condition(self, gains, robust_gains):
        """Test that a large V excludes the state."""
        spec = RegionSpec(c=1.0, epsilon=0.1)
        state = BodyState(Quaternion.identity(), ZERO)
        assert not in_region_S(state, error([-2, 0, 0, 0]), spec, gains)
        assert not in_region_S_robust(state, error([0, 0, 0, 0]), np.array([100.0, 0, 0]), spec, robust_gains)


class TestFeasibleGains:
    """Test cases for feasible_gains and feasible_region."""

    @pytest.mark.unit
    def test_zero_error(self, gains):
        """Test c = 1 and k_delta > 1/2 for e0 = 0, delta = 1."""
        selection = feasible_gains(error([0, 0, 0, 0]), 1.0, gains)
        assert selection.c == 1.0
        assert selection.k_delta > 0.5
        assert selection.k1 >= gains.k1

    @pytest.mark.unit
    def test_antipodal_is_infeasible(self, gains):
        """Test that |e_q(0)| = 2 cannot be certified."""
        with pytest.raises(InfeasibleGainsError):
            feasible_gains(error([-2, 0, 0, 0]), 1.0, gains)
        with pytest.raises(InfeasibleGainsError):
            feasible_region(error([-2, 0, 0, 0]), gains)

    @pytest.mark.unit
    def test_half_distance(self, gains):
        """Test |e_q(0)|^2 = 2 forces c into (1, 2)."""
        e = error([-1.0, 1.0, 0.0, 0.0])
        selection = feasible_gains(e, 1.0, gains)
        assert 1.0 < selection.c < 2.0
        assert selection.k_delta > 1.0 / (2.0 * selection.c)

    @pytest.mark.unit
    def test_zero_bound(self, gains):
        """Test that delta = 0 still returns a valid estimator gain."""
        assert feasible_gains(error([0, 0, 0, 0]), 0.0, gains).k_delta == 1.0

    @pytest.mark.unit
    def test_random_errors_satisfy_certificate(self, gains, rng):
        """Test V(0) < c and k_delta > delta^2 / 2c as strict inequalities."""
        delta = 1.0
        checked = 0
        for _ in range(100):
            ref = benchmark_reference(rng.uniform(0.0, 40.0))
            state = BodyState(random_unit_quaternion(rng), 3.0 * rng.standard_normal(3))
            e = compute_error(state, ref)
            if not norm_sq(e.e_q) < 4.0:
                continue
            sel = feasible_gains(e, delta, gains)
            g = replace(gains, k1=sel.k1)
            assert lyapunov_Vk1(e, norm_sq(state.q), g) + delta ** 2 / (2.0 * sel.k_delta) < sel.c
            assert sel.k_delta > delta ** 2 / (2.0 * sel.c)
            checked += 1
        assert checked == 100

    @pytest.mark.unit
    def test_feasible_region_contains_start(self, gains, rng):
        """Test that the selected non-robust region contains the initial error."""
        for _ in range(50):
            ref = benchmark_reference(rng.uniform(0.0, 40.0))
            state = BodyState(random_unit_quaternion(rng), 3.0 * rng.standard_normal(3))
            e = compute_error(state, ref)
            selection = feasible_region(e, gains)
            g = replace(gains, k1=selection.k1)
            assert selection.region.epsilon == 0.0
            assert lyapunov_Vk1(e, norm_sq(state.q), g) < selection.region.c
