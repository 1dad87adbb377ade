"""Integrator unit tests: order, examples, dense output, controller."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cthmc import rkn


def oscillator(n=1):
    return rkn.SecondOrderSystem(n, lambda y: -y)


def integrate_fixed(sys, y0, yd0, h, n_steps, use_low=False):
    y = np.atleast_1d(np.array(y0, dtype=float))
    yd = np.atleast_1d(np.array(yd0, dtype=float))
    k1 = None
    for _ in range(n_steps):
        res = rkn.rkn_step(sys, y, yd, h, k1=k1)
        if use_low:
            y, yd = res.y_low, res.ydot_low
            k1 = None  # low solution breaks FSAL
        else:
            y, yd = res.y_high, res.ydot_high
            k1 = res.k_last
    return y, yd


class TestStepExamples:
    def test_harmonic_oscillator_single_step(self):
        res = rkn.rkn_step(oscillator(), np.array([1.0]), np.array([0.0]), 0.1)
        assert res.y_high[0] == pytest.approx(math.cos(0.1), abs=1e-9)
        assert res.ydot_high[0] == pytest.approx(-math.sin(0.1), abs=1e-9)

    def test_free_motion_exact(self):
        sys = rkn.SecondOrderSystem(1, lambda y: np.zeros_like(y))
        res = rkn.rkn_step(sys, np.array([3.0]), np.array([2.0]), 0.5)
        assert res.y_high[0] == pytest.approx(4.0, abs=1e-14)
        assert res.ydot_high[0] == pytest.approx(2.0, abs=1e-14)

    def test_constant_force_exact(self):
        c = 2.75
        sys = rkn.SecondOrderSystem(1, lambda y: np.full_like(y, c))
        for eps in (0.1, 0.7, 2.0):
            res = rkn.rkn_step(sys, np.array([0.0]), np.array([0.0]), eps)
            assert res.y_high[0] == pytest.approx(c * eps ** 2 / 2, rel=1e-14)
            assert res.ydot_high[0] == pytest.approx(c * eps, rel=1e-14)

    def test_five_evaluations_with_fsal(self):
        count = [0]

        def rhs(y):
            count[0] += 1
            return -y

        sys = rkn.SecondOrderSystem(1, rhs)
        res = rkn.rkn_step(sys, np.array([1.0]), np.array([0.0]), 0.1)
        assert count[0] == 6  # first step has no FSAL history
        count[0] = 0
        rkn.rkn_step(sys, res.y_high, res.ydot_high, 0.1, k1=res.k_last)
        assert count[0] == 5

    def test_nonfinite_rhs_signals_failure(self):
        sys = rkn.SecondOrderSystem(1, lambda y: y * np.inf)
        with pytest.raises(rkn.StepFailure):
            rkn.rkn_step(sys, np.array([1.0]), np.array([0.0]), 0.1)


class TestOrder:
    def test_global_order_six_and_four(self):
        sys = oscillator()
        T = 2.0
        hs = [0.4, 0.2, 0.1, 0.05]
        errs_high, errs_low = [], []
        for h in hs:
            n = int(round(T / h))
            yh, _ = integrate_fixed(sys, [1.0], [0.0], h, n)
            yl, _ = integrate_fixed(sys, [1.0], [0.0], h, n, use_low=True)
            errs_high.append(abs(yh[0] - math.cos(T)))
            errs_low.append(abs(yl[0] - math.cos(T)))
        slope_high = np.polyfit(np.log(hs), np.log(errs_high), 1)[0]
        slope_low = np.polyfit(np.log(hs), np.log(errs_low), 1)[0]
        assert abs(slope_high - 6.0) < 0.5
        assert abs(slope_low - 4.0) < 0.5


class TestInterpolation:
    def test_endpoints_exact(self):
        res = rkn.rkn_step(oscillator(), np.array([1.0]), np.array([0.2]), 0.3)
        y0, yd0 = rkn.interpolate(res, 0.0)
        assert y0[0] == 1.0 and yd0[0] == 0.2
        y1, yd1 = rkn.interpolate(res, 1.0)
        assert y1[0] == res.y_high[0] and yd1[0] == res.ydot_high[0]

    def test_midpoint_accuracy(self):
        res = rkn.rkn_step(oscillator(), np.array([1.0]), np.array([0.0]), 0.2)
        y, yd = rkn.interpolate(res, 0.5)
        assert y[0] == pytest.approx(math.cos(0.1), abs=1e-7)
        assert yd[0] == pytest.approx(-math.sin(0.1), abs=1e-7)

    def test_out_of_range_rejected(self):
        res = rkn.rkn_step(oscillator(), np.array([1.0]), np.array([0.0]), 0.2)
        with pytest.raises(ValueError):
            rkn.interpolate(res, -0.01)
        with pytest.raises(ValueError):
            rkn.interpolate(res, 1.01)

    def test_interior_accuracy_vs_endpoint_error(self):
        # with controller-accepted steps at tol 1e-6, the worst interior
        # interpolation error over the run stays within 100x the worst
        # endpoint error over the run
        sys = oscillator()
        ctrl = rkn.StepController(tol_abs=1e-6, tol_rel=1e-6)
        y = np.array([1.0])
        yd = np.array([0.0])
        tau = 0.0
        eps = 0.1
        k1 = None
        worst_end = 0.0
        worst_interior = 0.0
        while tau < 6.0:
            res = rkn.rkn_step(sys, y, yd, eps, k1=k1)
            err = rkn.error_norm(res, ctrl)
            if err >= 1.0:
                eps = rkn.propose_step(ctrl, eps, err, accepted=False)
                k1 = res.stage_evals[0]
                continue
            worst_end = max(worst_end, abs(res.y_high[0] - math.cos(tau + eps)))
            worst_interior = max(worst_interior, max(
                abs(rkn.interpolate(res, xi)[0][0] - math.cos(tau + xi * eps))
                for xi in np.arange(0.1, 0.95, 0.1)))
            tau += eps
            y, yd, k1 = res.y_high, res.ydot_high, res.k_last
            eps = rkn.propose_step(ctrl, eps, err, accepted=True)
        assert worst_interior <= 100.0 * worst_end


class TestErrorNorm:
    def _result(self, yh, yl, ydh=None, ydl=None):
        yh = np.atleast_1d(np.array(yh, dtype=float))
        yl = np.atleast_1d(np.array(yl, dtype=float))
        ydh = yh * 0 if ydh is None else np.atleast_1d(np.array(ydh, float))
        ydl = yh * 0 if ydl is None else np.atleast_1d(np.array(ydl, float))
        return rkn.RknStepResult(y0=yh * 0, ydot0=yh * 0, y_high=yh,
                                 ydot_high=ydh, y_low=yl, ydot_low=ydl,
                                 stage_evals=np.zeros((6, yh.size)),
                                 step_size=1.0)

    def test_zero_error(self):
        ctrl = rkn.StepController(tol_abs=1e-3, tol_rel=1e-3)
        assert rkn.error_norm(self._result([2.0], [2.0]), ctrl) == 0.0

    def test_direct_formula(self):
        ctrl = rkn.StepController(tol_abs=1e-3, tol_rel=1e-3)
        err = rkn.error_norm(self._result([2.0], [2.001]), ctrl)
        assert err == pytest.approx(0.001 / (0.001 + 0.002), rel=1e-12)

    def test_max_over_components(self):
        ctrl = rkn.StepController(tol_abs=1e-3, tol_rel=0.0)
        err = rkn.error_norm(self._result([0.0, 0.0], [0.0005, 0.002]), ctrl)
        assert err == pytest.approx(2.0, rel=1e-12)

    def test_nonfinite_forces_rejection(self):
        ctrl = rkn.StepController()
        assert rkn.error_norm(self._result([np.nan], [0.0]), ctrl) == math.inf


class TestController:
    def test_unit_error(self):
        ctrl = rkn.StepController(prev_error_norm=1.0)
        assert rkn.propose_step(ctrl, 1.0, 1.0, accepted=True) == pytest.approx(0.9)

    def test_zero_error_growth_clamped(self):
        ctrl = rkn.StepController(prev_error_norm=1.0)
        assert rkn.propose_step(ctrl, 1.0, 0.0, accepted=True) == pytest.approx(5.0)

    def test_rejection_formula(self):
        ctrl = rkn.StepController()
        new = rkn.propose_step(ctrl, 1.0, 32.0, accepted=False)
        assert new == pytest.approx(0.9 * 32 ** -0.2)  # = 0.45

    def test_rejection_shrink_floor(self):
        ctrl = rkn.StepController()
        assert rkn.propose_step(ctrl, 1.0, 1e12, accepted=False) == pytest.approx(0.1)

    def test_bounds_clamped(self):
        ctrl = rkn.StepController()
        assert rkn.propose_step(ctrl, 9.0, 1e-9, accepted=True) == ctrl.eps_max
        assert rkn.propose_step(ctrl, 2e-8, 1e9, accepted=False) == ctrl.eps_min

    def test_accept_updates_memory(self):
        ctrl = rkn.StepController(prev_error_norm=1.0)
        rkn.propose_step(ctrl, 1.0, 0.25, accepted=True)
        assert ctrl.prev_error_norm == 0.25
        rkn.propose_step(ctrl, 1.0, 2.0, accepted=False)
        assert ctrl.prev_error_norm == 0.25  # rejection leaves memory alone


@given(
    y0=st.floats(-10, 10), yd0=st.floats(-10, 10),
    eps=st.floats(1e-3, 2.0),
)
@settings(max_examples=50, deadline=None)
def test_determinism_and_endpoint_consistency(y0, yd0, eps):
    sys = oscillator()
    y = np.array([y0])
    yd = np.array([yd0])
    r1 = rkn.rkn_step(sys, y, yd, eps)
    r2 = rkn.rkn_step(sys, y, yd, eps)
    assert r1.y_high[0] == r2.y_high[0]
    assert r1.ydot_high[0] == r2.ydot_high[0]
    ya, yda = rkn.interpolate(r1, 0.0)
    assert ya[0] == y0 and yda[0] == yd0
    yb, ydb = rkn.interpolate(r1, 1.0)
    assert yb[0] == r1.y_high[0] and ydb[0] == r1.ydot_high[0]


@given(st.floats(1e-6, 0.9), st.floats(0.3, 3.0))
@settings(max_examples=40, deadline=None)
def test_interpolant_continuity(xi, eps):
    res = rkn.rkn_step(oscillator(), np.array([1.0]), np.array([0.5]), eps)
    y1, _ = rkn.interpolate(res, xi)
    y2, _ = rkn.interpolate(res, xi + 1e-7)
    assert abs(y1[0] - y2[0]) < 1e-5
