"""Benchmark harnesses: sampling-strategy RMSE study and integrator
precision study.

The RMSE harness measures the root-mean-squared error of E(q1) estimators
across independent replicas for several sampling strategies (continuous
trajectory integrals, equally spaced discrete samples at two spacings, and
event-time-only samples) against the RMSE of 1000 iid draws.

The precision harness pairs every numerically integrated trajectory with an
exact-flow trajectory consuming identical event thresholds and refresh
noise (counter-based streams indexed by event number), so the reported
discrepancy isolates integrator error from Monte Carlo error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import GaussianFlowOracle
from .events import EventSpec, refresh_momentum
from .flow import MassMatrix, Monitor, TargetModel
from .rng import PURPOSE_INIT_P, PURPOSE_INIT_Q, PURPOSE_REFRESH, PURPOSE_U, \
    TrajectoryStreams
from .sampler import RunConfig, run_ensemble, run_trajectory
from .targets import gaussian_full

__all__ = [
    "RmseRow",
    "PrecisionRow",
    "STRATEGIES",
    "rmse_harness",
    "precision_harness",
    "PRECISION_MOMENTS",
]

STRATEGIES = ("continuous", "delta_half_pi", "delta_pi", "events")


@dataclass
class RmseRow:
    target: str
    beta: float
    strategy: str
    rmse: float
    benchmark_rmse: float
    replicas: int
    failures: int


def _strategy_estimate(out, strategy: str) -> float:
    """E(q1) estimate from one trajectory under a discrete/continuous
    strategy (the event-times strategy is handled by the caller)."""
    if strategy == "continuous":
        return float(out.moment_estimates()[0])
    post = out.samples[out.sample_phase, 0]
    if strategy == "delta_half_pi":
        return float(post.mean())
    if strategy == "delta_pi":
        return float(post[1::2].mean())
    raise ValueError(f"unknown strategy {strategy!r}")


def rmse_harness(targets: dict[str, TargetModel], betas, replicas: int,
                 seed: int = 0, sampling_time: float = 1000 * math.pi / 2,
                 tol: float = 1e-3,
                 strategies=STRATEGIES) -> list[RmseRow]:
    """RMSE of E(q1) estimators per (target, beta, strategy).

    Each replica runs one trajectory of total length 2*sampling_time (the
    first half is state burn-in with fixed unit mass and no adaptation)
    under the constant-rate spec. All strategies share the same replica
    trajectories. The benchmark column reports sd/sqrt(1000), the RMSE of
    1000 iid samples from a unit-variance target.
    """
    T = 2.0 * sampling_time
    N = int(round(T / (math.pi / 2)))
    rows = []
    benchmark = 1.0 / math.sqrt(1000.0)
    cell = 0
    for name, target in targets.items():
        monitor = Monitor(1, lambda q: q[:1], ("q_1",))
        for beta in betas:
            config = RunConfig(
                total_time=T, num_samples=N, warmup_fraction=0.5,
                tol_abs=tol, tol_rel=tol, seed=seed + 7919 * cell,
                num_trajectories=replicas,
                event_spec=EventSpec("const", beta=float(beta)),
            )
            cell += 1
            outs = run_ensemble(target, config, monitor)
            warm_T = 0.5 * T
            stats: dict[str, list[float]] = {s: [] for s in strategies}
            failures: dict[str, int] = {s: 0 for s in strategies}
            for out in outs:
                if not out.ok:
                    for s in strategies:
                        failures[s] += 1
                    continue
                for s in strategies:
                    if s == "events":
                        qe = [e.q[0] for e in out.event_log if e.t > warm_T]
                        if not qe:
                            failures[s] += 1
                            continue
                        est = float(np.mean(qe))
                    else:
                        est = _strategy_estimate(out, s)
                    if math.isnan(est):
                        failures[s] += 1
                    else:
                        stats[s].append(est)
            for s in strategies:
                vals = np.array(stats[s])
                rmse = float(np.sqrt(np.mean(vals ** 2))) if vals.size else math.nan
                rows.append(RmseRow(name, float(beta), s, rmse, benchmark,
                                    replicas, failures[s]))
    return rows


PRECISION_MOMENTS = ("E[q1]", "E[q2]", "E[q1^2]", "E[q1*q2]", "E[q2^2]")
_PRECISION_SIGMA = np.array([[1.0, 2.0], [2.0, 8.0]])
_PRECISION_TRUTH = np.array([0.0, 0.0, 1.0, 2.0, 8.0])


@dataclass
class PrecisionRow:
    tol: float
    T: float
    moment: str
    pair_rms: float
    exact_mc_rmse: float


def _second_moment_monitor() -> Monitor:
    def ev(q):
        return np.array([q[0], q[1], q[0] * q[0], q[0] * q[1], q[1] * q[1]])
    return Monitor(5, ev, PRECISION_MOMENTS)


def _exact_cthmc_estimates(oracle: GaussianFlowOracle, spec: EventSpec,
                           streams: TrajectoryStreams, q0: np.ndarray,
                           T: float) -> np.ndarray:
    """Continuous-sampling moment estimates from the exact flow, consuming
    the same per-event random numbers as the numerical run."""
    d = oracle.d
    mass = oracle.mass
    p = mass.sample_momentum(streams.generator(0, PURPOSE_INIT_P))
    q = q0.copy()
    g_mean = np.zeros(d)
    g_outer = np.zeros((d, d))
    gb = spec.gamma * spec.beta
    t = 0.0
    k = 0
    while t < T * (1.0 - 1e-15):
        p = refresh_momentum(spec, p, mass, streams.generator(k, PURPOSE_REFRESH))
        u = streams.generator(k, PURPOSE_U).exponential()
        k += 1
        v = min(gb * u, T - t)  # constant rate: Lambda(v) = v/(gamma beta)
        z0 = np.concatenate([q, p])
        g_mean += oracle.integral_z(z0, v)[:d]
        g_outer += oracle.integrated_outer(z0, v)
        zv = oracle.flow_z(z0, v)
        q, p = zv[:d], zv[d:]
        t += v
    return np.array([g_mean[0], g_mean[1], g_outer[0, 0], g_outer[0, 1],
                     g_outer[1, 1]]) / T


def precision_harness(tol_grid, T_grid, replicas: int = 50, seed: int = 0,
                      beta: float = 10.0) -> list[PrecisionRow]:
    """Paired exact-vs-numerical moment discrepancies on a correlated
    bivariate Gaussian with constant event rate 1/beta."""
    sigma = _PRECISION_SIGMA
    mass = MassMatrix.identity(2)
    oracle = GaussianFlowOracle(np.zeros(2), sigma, mass)
    target = gaussian_full(np.zeros(2), sigma)
    monitor = _second_moment_monitor()
    spec = EventSpec("const", beta=beta)
    chol = np.linalg.cholesky(sigma)

    exact_cache: dict[tuple[float, int], np.ndarray] = {}
    rows: list[PrecisionRow] = []
    for T in T_grid:
        exact = np.empty((replicas, 5))
        for r in range(replicas):
            key = (float(T), r)
            if key not in exact_cache:
                streams = TrajectoryStreams(seed, r)
                q0 = chol @ streams.generator(0, PURPOSE_INIT_Q).standard_normal(2)
                exact_cache[key] = _exact_cthmc_estimates(oracle, spec,
                                                          streams, q0, float(T))
            exact[r] = exact_cache[key]
        mc_rmse = np.sqrt(np.mean((exact - _PRECISION_TRUTH) ** 2, axis=0))
        for tol in tol_grid:
            num = np.full((replicas, 5), np.nan)
            for r in range(replicas):
                streams = TrajectoryStreams(seed, r)
                q0 = chol @ streams.generator(0, PURPOSE_INIT_Q).standard_normal(2)
                config = RunConfig(
                    total_time=float(T), num_samples=1, warmup_fraction=0.0,
                    tol_abs=float(tol), tol_rel=float(tol), seed=seed,
                    event_spec=spec, q0=q0,
                )
                out = run_trajectory(target, config, monitor,
                                     trajectory_index=r)
                if out.ok:
                    num[r] = out.moment_estimates()
            disc = np.sqrt(np.nanmean((num - exact) ** 2, axis=0))
            for j, label in enumerate(PRECISION_MOMENTS):
                rows.append(PrecisionRow(float(tol), float(T), label,
                                         float(disc[j]), float(mc_rmse[j])))
    return rows
