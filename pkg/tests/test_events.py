"""Event engine tests: rates, refresh kernels, clocks, localization."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

import cthmc
from cthmc import rkn
from cthmc.events import (ArcLengthProfile, EventClock, EventSpec,
                          LinearRateProfile, base_rate, locate_event,
                          locate_on_profile, refresh_momentum)
from cthmc.flow import MassMatrix, Monitor, build_augmented_system
from cthmc.rng import PURPOSE_U, TrajectoryStreams
from cthmc.sampler import RunConfig, run_trajectory

from statutil import ks_passes, oscillator_arc_length


class TestBaseRate:
    def test_constant_rate(self):
        spec = EventSpec("const", beta=2.0)
        r = base_rate(spec, np.zeros(1), np.zeros(1), MassMatrix.identity(1))
        assert r == pytest.approx(0.5)

    def test_arclength_rate(self):
        spec = EventSpec("arclength", beta=1.0)
        r = base_rate(spec, np.zeros(2), np.array([3.0, 4.0]),
                      MassMatrix.identity(2))
        assert r == pytest.approx(5.0)

    def test_arclength_zero_momentum(self):
        spec = EventSpec("arclength", beta=1.0)
        assert base_rate(spec, np.zeros(2), np.zeros(2),
                         MassMatrix.identity(2)) == 0.0

    def test_gamma_scaling(self):
        spec = EventSpec("const", beta=2.0, gamma=4.0)
        assert base_rate(spec, np.zeros(1), np.zeros(1),
                         MassMatrix.identity(1)) == pytest.approx(1 / 8)

    def test_custom_rate_validated(self):
        spec = EventSpec("custom", omega=lambda q: -1.0)
        with pytest.raises(ValueError):
            base_rate(spec, np.zeros(1), np.zeros(1), MassMatrix.identity(1))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            EventSpec("const", beta=-1.0)
        with pytest.raises(ValueError):
            EventSpec("const_autoreg", phi=1.0)
        with pytest.raises(ValueError):
            EventSpec("custom")


class TestRefreshKernels:
    def _rng(self, s=0):
        return np.random.default_rng(s)

    def test_autoreg_phi_zero_equals_full_refresh(self):
        mass = MassMatrix(np.array([1.0, 4.0]))
        p = np.array([3.0, -2.0])
        a = refresh_momentum(EventSpec("const"), p, mass, self._rng(5))
        b = refresh_momentum(EventSpec("const_autoreg", phi=0.0), p, mass,
                             self._rng(5))
        assert np.allclose(a, b)

    def test_autoreg_phi_near_one_keeps_momentum(self):
        mass = MassMatrix.identity(2)
        p = np.array([3.0, -2.0])
        spec = EventSpec("const_autoreg", phi=1.0 - 1e-12)
        out = refresh_momentum(spec, p, mass, self._rng(7))
        assert np.allclose(out, p, atol=1e-4)

    def test_spec3_radial_second_moment_quadrature_oracle(self):
        # d=1: E(p^2) under the rate-weighted refresh law, computed by the
        # independent quadrature int p^2 |p| phi(p) dp / int |p| phi(p) dp
        phi = stats.norm.pdf
        num, _ = integrate.quad(lambda p: p * p * abs(p) * phi(p), -12, 12)
        den, _ = integrate.quad(lambda p: abs(p) * phi(p), -12, 12)
        oracle = num / den
        assert oracle == pytest.approx(2.0, abs=1e-9)
        spec = EventSpec("arclength")
        mass = MassMatrix.identity(1)
        rng = self._rng(11)
        draws = np.array([refresh_momentum(spec, np.zeros(1), mass, rng)[0]
                          for _ in range(200000)])
        assert np.mean(draws ** 2) == pytest.approx(oracle, abs=0.03)

    @pytest.mark.parametrize("spec", [
        EventSpec("const"),
        EventSpec("const_autoreg", phi=0.5),
    ], ids=["spec1", "spec2"])
    def test_refresh_stationarity_ks(self, spec):
        # iterating the kernel from p ~ N(0, M) leaves the marginal invariant
        d = 2
        mass = MassMatrix(np.array([1.0, 4.0]))
        rng = self._rng(13)
        n = 100000
        p = mass.sample_momentum(rng)
        draws = np.empty((n, d))
        for i in range(n):
            p = refresh_momentum(spec, p, mass, rng)
            draws[i] = p
        for j in range(d):
            assert ks_passes(draws[:, j] / math.sqrt(mass.diag[j]), "norm")
        qf = (draws ** 2 / mass.diag).sum(axis=1)
        assert ks_passes(qf, "chi2", args=(d,))

    def test_spec3_refresh_law_polar_factorization(self):
        # the rate-weighted law factorizes as (uniform direction) x
        # (chi_{d+1} radius) in whitened coordinates; together these fully
        # characterize the d=2 law
        d = 2
        mass = MassMatrix(np.array([1.0, 4.0]))
        rng = self._rng(13)
        n = 100000
        draws = np.empty((n, d))
        for i in range(n):
            draws[i] = refresh_momentum(EventSpec("arclength"), np.zeros(d),
                                        mass, rng)
        white = draws / np.sqrt(mass.diag)
        r2 = (white ** 2).sum(axis=1)
        angle = np.arctan2(white[:, 1], white[:, 0])
        assert ks_passes(r2, "chi2", args=(d + 1,))
        assert ks_passes(angle, "uniform", args=(-math.pi, 2 * math.pi))
        assert abs(np.corrcoef(np.abs(angle), r2)[0, 1]) < 0.02


class TestEventClock:
    def test_reset(self):
        clock = EventClock(threshold_u=1.0, accumulated=0.7)
        clock.reset(2.5)
        assert clock.threshold_u == 2.5 and clock.accumulated == 0.0
        with pytest.raises(ValueError):
            clock.reset(0.0)


class TestLocateEvent:
    def test_linear_inversion_exact(self):
        prof = LinearRateProfile(lam0=0.3, rate=0.5, eps=2.0)
        u = 0.8  # midway: xi = (0.8 - 0.3) / (0.5 * 2.0) = 0.5
        assert locate_on_profile(u, prof) == pytest.approx(0.5, abs=1e-15)

    def test_threshold_at_end_gives_one(self):
        prof = LinearRateProfile(lam0=0.0, rate=1.0, eps=1.0)
        assert locate_on_profile(1.0, prof) == pytest.approx(1.0)

    def test_not_reached_gives_none(self):
        prof = LinearRateProfile(lam0=0.0, rate=1.0, eps=1.0)
        assert locate_on_profile(1.5, prof) is None

    def test_ode_profile_localization(self):
        # rate omega(q) = q^2 on the oscillator: Lambda is integrated by the
        # ODE slot; locate against a dense numerical inversion
        target = cthmc.std_gaussian(1)
        sys = build_augmented_system(target, MassMatrix.identity(1),
                                     Monitor.empty(), lambda q: q[0] ** 2)
        y = np.array([1.0, 0.0])
        yd = np.array([0.0, 0.0])
        eps = 0.1  # small step: dense-output error ~ eps^5 stays below 1e-8
        res = rkn.rkn_step(sys, y, yd, eps)
        clock = EventClock(threshold_u=0.04)
        xi = locate_event(clock, res, lambda_index=1)
        assert xi is not None
        # independent check: Lambda(xi) from fine quadrature of cos^2
        lam = integrate.quad(lambda s: math.cos(s) ** 2, 0, xi * eps)[0]
        assert lam == pytest.approx(0.04, abs=1e-8)

    def test_arclength_profile_matches_closed_form(self):
        # start at (q, p) = (0, 1.5): speed 1.5 cos(s) stays positive over
        # the step, so Lambda(xi) = 1.5 sin(xi * eps) exactly
        target = cthmc.std_gaussian(1)
        sys = build_augmented_system(target, MassMatrix.identity(1),
                                     Monitor.empty(), None)
        y = np.array([0.0, 0.0])
        yd = np.array([1.5, 0.0])
        eps = 0.25
        res = rkn.rkn_step(sys, y, yd, eps)
        prof = ArcLengthProfile(res, MassMatrix.identity(1), 1, 0.0, 1.0)
        for u in (0.1, 0.2, 0.35):
            xi = locate_on_profile(u, prof)
            xi_exact = math.asin(u / 1.5) / eps
            assert xi == pytest.approx(xi_exact, abs=1e-8)

    def test_bracket_violation_is_internal_error(self):
        prof = LinearRateProfile(lam0=2.0, rate=1.0, eps=1.0)

        class Fake(ArcLengthProfile):
            def __init__(self):
                self.lam0 = 2.0

            def value(self, xi):
                return 2.0 + xi

            def deriv(self, xi):
                return 1.0

            @property
            def end(self):
                return 3.0

        with pytest.raises(RuntimeError):
            locate_on_profile(1.0, Fake())


class TestEventTimeStatistics:
    def test_interevent_times_exponential(self):
        # constant rate 1/beta: inter-event Hamiltonian times are Exp(beta)
        beta = 1.0
        config = RunConfig(total_time=10000.0, num_samples=10,
                           warmup_fraction=0.0, seed=29,
                           event_spec=EventSpec("const", beta=beta))
        out = run_trajectory(cthmc.std_gaussian(1), config)
        times = np.array([e.t for e in out.event_log])
        gaps = np.diff(times)
        assert gaps.size > 9000
        assert ks_passes(gaps, "expon", args=(0, beta))

    def test_const_rate_event_times_match_threshold_inversion(self):
        # located event times against the closed-form u * gamma * beta
        beta, gamma, seed = 2.0, 1.5, 31
        config = RunConfig(total_time=500.0, num_samples=10,
                           warmup_fraction=0.0, seed=seed,
                           event_spec=EventSpec("const", beta=beta, gamma=gamma))
        out = run_trajectory(cthmc.std_gaussian(1), config)
        times = np.array([e.t for e in out.event_log])
        streams = TrajectoryStreams(seed, 0)
        for k in range(len(times) - 1):
            u = streams.generator(k, PURPOSE_U).exponential()
            assert abs((times[k + 1] - times[k]) - gamma * beta * u) < 1e-8

    def test_spec3_arc_lengths_exponential(self):
        # arc length between events, reconstructed with the closed-form
        # oscillator arc integral from each post-event state, is Exp(gb)
        gamma, beta = 1.0, 1.0
        config = RunConfig(total_time=6000.0, num_samples=10,
                           warmup_fraction=0.0, seed=37,
                           event_spec=EventSpec("arclength", beta=beta,
                                                gamma=gamma))
        out = run_trajectory(cthmc.std_gaussian(1), config)
        evs = out.event_log
        arcs = []
        for k in range(len(evs) - 1):
            dt = evs[k + 1].t - evs[k].t
            arcs.append(oscillator_arc_length(evs[k].q[0], evs[k].p_post[0], dt))
        arcs = np.array(arcs)
        assert arcs.size > 3000
        assert ks_passes(arcs, "expon", args=(0, gamma * beta))
