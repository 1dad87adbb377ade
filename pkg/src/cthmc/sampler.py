"""The continuous-time HMC loop: refreshes, adaptive flow, harvest, adapt.

A trajectory alternates momentum refreshes with adaptively integrated
Hamiltonian segments. Each segment integrates the augmented second-order
system until the integrated event intensity reaches an Exp(1) threshold or
process time runs out; the event instant is localized inside the step by
dense-output inversion. Discrete samples are interpolated at times i*T/N,
trajectory integrals of the monitors accumulate alongside, and warmup-only
adaptation (mass matrix, event-rate scale) is applied at event boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rkn
from .adaptation import (AdaptConfig, BetaTuner, IsgAverager, NutClock,
                         VariAccumulator, uturn_crossing)
from .events import (ArcLengthProfile, EventSpec, LinearRateProfile,
                     OdeRateProfile, RateProfile, locate_on_profile,
                     refresh_momentum)
from .flow import (DivergenceError, MassMatrix, Monitor, TargetModel,
                   build_augmented_system)
from .rng import (PURPOSE_INIT_P, PURPOSE_INIT_Q, PURPOSE_REFRESH, PURPOSE_U,
                  TrajectoryStreams)

__all__ = [
    "RunConfig",
    "TrajectoryOutput",
    "EventRecord",
    "AdaptRecord",
    "run_trajectory",
    "run_ensemble",
    "STATUS_OK",
    "STATUS_DIVERGED",
    "STATUS_STEP_FLOOR",
]

STATUS_OK = "ok"
STATUS_DIVERGED = "diverged"
STATUS_STEP_FLOOR = "step-floor-abort"

_FLOOR_ABORT_COUNT = 20
_NUT_EXTRA_STEP_CAP = 1000


class _Abort(Exception):
    """Internal: trajectory terminated by the step-floor guard."""


@dataclass
class RunConfig:
    """Everything needed to reproduce an ensemble run."""

    total_time: float
    num_samples: int = 1000
    warmup_fraction: float = 0.5
    tol_abs: float = 1e-3
    tol_rel: float = 1e-3
    seed: int = 0
    num_trajectories: int = 1
    event_spec: EventSpec = field(default_factory=lambda: EventSpec("const"))
    mass_init: np.ndarray | None = None
    adaptation: AdaptConfig | None = None
    q0: np.ndarray | str = "random"
    events_enabled: bool = True

    def __post_init__(self):
        if self.total_time <= 0:
            raise ValueError("total_time must be > 0")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.tol_abs <= 0 or self.tol_rel <= 0:
            raise ValueError("tolerances must be positive")
        if self.num_trajectories < 1:
            raise ValueError("num_trajectories must be >= 1")


@dataclass
class EventRecord:
    """One momentum refresh: time, momentum norms before/after, state."""

    t: float
    p_norm_pre: float
    p_norm_post: float
    q: np.ndarray
    p_post: np.ndarray


@dataclass
class AdaptRecord:
    t: float
    beta: float
    mass_diag: np.ndarray


@dataclass
class TrajectoryOutput:
    """Samples, integrated moments, event log, and run metadata."""

    samples: np.ndarray
    sample_times: np.ndarray
    sample_phase: np.ndarray
    n_samples_recorded: int
    integrated_moments: np.ndarray
    sampling_time: float
    warmup_moments: np.ndarray
    warmup_time: float
    moment_cumulative: np.ndarray
    monitor_at_samples: np.ndarray
    event_log: list[EventRecord]
    adaptation_trace: list[AdaptRecord]
    status: str
    n_rhs: int
    n_accepted: int
    n_rejected: int
    final_mass: np.ndarray
    final_beta: float
    final_q: np.ndarray
    final_p: np.ndarray
    trajectory_index: int
    seed: int

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def moment_estimates(self) -> np.ndarray:
        """Continuous-sampling moment estimates over the sampling window."""
        if self.sampling_time <= 0:
            return np.full_like(self.integrated_moments, np.nan)
        return self.integrated_moments / self.sampling_time


class _Trajectory:
    """Mutable state for one trajectory run; see :func:`run_trajectory`."""

    def __init__(self, target: TargetModel, config: RunConfig,
                 monitor: Monitor, trajectory_index: int):
        self.target = target
        self.config = config
        self.monitor = monitor
        self.d = target.dim_d
        self.m = monitor.dim_m
        self.T = config.total_time
        self.N = config.num_samples
        self.warm_T = config.warmup_fraction * config.total_time
        self.spec = config.event_spec
        self.streams = TrajectoryStreams(config.seed, trajectory_index)
        self.trajectory_index = trajectory_index

        adapt = config.adaptation
        self.adapt = adapt if (adapt is not None and adapt.active) else None
        self.mass = (MassMatrix(np.array(config.mass_init, dtype=float))
                     if config.mass_init is not None
                     else MassMatrix.identity(self.d))
        self.beta = self.spec.beta
        if self.adapt and self.adapt.beta_adapt and self.adapt.beta_init:
            self.beta = self.adapt.beta_init

        a = self.adapt
        self.vari = VariAccumulator.zeros(self.d) if (a and a.mass_mode == "vari") else None
        self.isg = IsgAverager(a.isg_decay) if (a and a.mass_mode == "isg") else None
        self.btuner = BetaTuner(a.ema_decay, self.beta) if (a and a.beta_adapt) else None
        self.adapt_frozen = self.adapt is None

        self.ctrl = rkn.StepController(tol_abs=config.tol_abs,
                                       tol_rel=config.tol_rel)
        self.eps: float | None = None
        self.floor_hits = 0
        self.n_rhs = [0]
        self.n_accepted = 0
        self.n_rejected = 0

        d, m, N, T = self.d, self.m, self.N, self.T
        self.samples = np.full((N, d), np.nan)
        self.sample_times = np.arange(1, N + 1) * (T / N)
        self.sample_phase = self.sample_times > self.warm_T
        self.moment_cum = np.full((N, m), np.nan)
        self.monitor_at = np.full((N, m), np.nan)
        self.g_warm = np.zeros(m)
        self.g_samp = np.zeros(m)
        self.g_run = np.zeros(m)
        self.event_log: list[EventRecord] = []
        self.adapt_trace: list[AdaptRecord] = []
        if self.adapt is not None:
            self.adapt_trace.append(AdaptRecord(0.0, self.beta,
                                                self.mass.diag.copy()))
        self.status = STATUS_OK
        self.t = 0.0
        self.next_sample = 1
        self.event_index = 0
        self.t_tol = 1e-9 * max(1.0, T / N)
        self.lam_slot = d
        self.g_lo, self.g_hi = d + 1, d + 1 + m

        if isinstance(config.q0, str):
            if config.q0 != "random":
                raise ValueError("q0 must be an array or 'random'")
            self.q = self.streams.generator(0, PURPOSE_INIT_Q).standard_normal(d)
        else:
            self.q = np.array(config.q0, dtype=float)
            if self.q.shape != (d,):
                raise ValueError(f"q0 has shape {self.q.shape}, expected ({d},)")
        self.p = self.mass.sample_momentum(self.streams.generator(0, PURPOSE_INIT_P))

    # ------------------------------------------------------------------
    def run(self) -> TrajectoryOutput:
        T = self.T
        try:
            while self.t < T * (1.0 - 1e-15):
                self._refresh()
                t_event = self._segment()
                self.t = t_event if t_event is not None else T
                self._apply_adaptation(t_event)
        except _Abort:
            pass
        except DivergenceError:
            self.status = STATUS_DIVERGED
        warm_time = min(self.t, self.warm_T)
        samp_time = max(0.0, self.t - self.warm_T)
        return TrajectoryOutput(
            samples=self.samples, sample_times=self.sample_times,
            sample_phase=self.sample_phase,
            n_samples_recorded=self.next_sample - 1,
            integrated_moments=self.g_samp, sampling_time=samp_time,
            warmup_moments=self.g_warm, warmup_time=warm_time,
            moment_cumulative=self.moment_cum,
            monitor_at_samples=self.monitor_at,
            event_log=self.event_log, adaptation_trace=self.adapt_trace,
            status=self.status, n_rhs=self.n_rhs[0],
            n_accepted=self.n_accepted, n_rejected=self.n_rejected,
            final_mass=self.mass.diag.copy(), final_beta=self.beta,
            final_q=self.q.copy(), final_p=self.p.copy(),
            trajectory_index=self.trajectory_index, seed=self.config.seed,
        )

    # ------------------------------------------------------------------
    def _refresh(self) -> None:
        p_prev = self.p
        self.p = refresh_momentum(
            self.spec, p_prev, self.mass,
            self.streams.generator(self.event_index, PURPOSE_REFRESH))
        self.u = (self.streams.generator(self.event_index, PURPOSE_U).exponential()
                  if self.config.events_enabled else math.inf)
        self.event_log.append(EventRecord(
            self.t, float(np.linalg.norm(p_prev)), float(np.linalg.norm(self.p)),
            self.q.copy(), self.p.copy()))
        self.event_index += 1

    # ------------------------------------------------------------------
    def _count_floor(self, eps_proposal: float) -> None:
        if eps_proposal <= self.ctrl.eps_min:
            self.floor_hits += 1
            if self.floor_hits >= _FLOOR_ABORT_COUNT:
                self.status = STATUS_STEP_FLOOR
                raise _Abort
        else:
            self.floor_hits = 0

    # ------------------------------------------------------------------
    def _segment(self) -> float | None:
        """Integrate one between-events segment.

        Returns the event process time, or None when the segment ran out the
        clock at t = T.
        """
        d, m = self.d, self.m
        spec, mass, beta = self.spec, self.mass, self.beta
        in_warmup = (self.t < self.warm_T and self.adapt is not None
                     and not self.adapt_frozen)
        inv_gb = 1.0 / (spec.gamma * beta)
        if spec.momentum_dependent:
            rate_fn = None
        elif spec.constant_rate:
            rate_fn = (lambda _q, _r=inv_gb: _r)
        else:
            rate_fn = (lambda _q, _r=inv_gb, _om=spec.omega: _r * float(_om(_q)))
        tail = (self.adapt.mass_mode
                if (in_warmup and self.adapt.mass_mode != "none") else "none")
        sys = build_augmented_system(self.target, mass, self.monitor, rate_fn,
                                     adapt_tail=tail, counter=self.n_rhs)
        tail_lo = self.g_hi
        y = np.zeros(sys.dim_n)
        y[:d] = self.q
        yd = np.zeros(sys.dim_n)
        yd[:d] = self.p * mass.inv_diag
        k1 = sys.rhs(y)
        if self.eps is None:
            self.eps = rkn.initial_step_size(self.ctrl, k1)

        nut = (NutClock(q_anchor=self.q.copy(), segment_start_t=self.t)
               if (in_warmup and self.btuner is not None) else None)
        self._in_warmup = in_warmup
        self._nut_record: float | None = None

        tau = 0.0
        lam_seg = 0.0
        measuring = False
        t_event: float | None = None

        while True:
            clamp = math.inf if measuring else self.T - (self.t + tau)
            if clamp <= 0.0:  # exhausted by rounding; finish at T
                self.q = y[:d].copy()
                self.p = mass.diag * yd[:d]
                return None
            eps_step = min(self.eps, clamp)
            try:
                res = rkn.rkn_step(sys, y, yd, eps_step, k1=k1)
            except (rkn.StepFailure, DivergenceError):
                if measuring:
                    return t_event  # abandon measurement, keep the process
                shrunk = max(eps_step * 0.1, self.ctrl.eps_min)
                self.n_rejected += 1
                self._count_floor(shrunk)
                self.eps = shrunk
                continue
            err = rkn.error_norm(res, self.ctrl)
            if err >= 1.0:
                self.n_rejected += 1
                self.eps = rkn.propose_step(self.ctrl, eps_step, err, accepted=False)
                if measuring and self.eps <= self.ctrl.eps_min:
                    return t_event  # abandon measurement, keep the process
                self._count_floor(self.eps)
                continue
            self.n_accepted += 1
            eps_next = rkn.propose_step(self.ctrl, eps_step, err, accepted=True)
            self._count_floor(eps_next)

            # integrated-intensity profile across this step
            profile: RateProfile
            if spec.momentum_dependent:
                profile = ArcLengthProfile(res, mass, d, lam_seg, inv_gb)
            elif spec.constant_rate:
                profile = LinearRateProfile(float(yd[self.lam_slot]), inv_gb,
                                            eps_step)
            else:
                profile = OdeRateProfile(res, self.lam_slot)

            # no-U-turn measurement runs on the full step: the dynamics
            # continue past an event purely for measurement
            if nut is not None and not nut.resolved:
                xi_u = uturn_crossing(res, nut.q_anchor, mass.diag,
                                      nut.armed, nut.u_prev)
                if xi_u is not None:
                    nut.resolved = True
                    nut.accumulated_base_rate = (spec.gamma * beta
                                                 * profile.value(xi_u))
                    self._nut_record = nut.accumulated_base_rate
                else:
                    u_end = float((res.y_high[:d] - nut.q_anchor)
                                  @ (mass.diag * res.ydot_high[:d]))
                    nut.armed = nut.armed or u_end > 0.0
                    nut.u_prev = u_end

            if measuring:
                nut.extra_steps += 1
                if nut.resolved or nut.extra_steps >= _NUT_EXTRA_STEP_CAP:
                    return t_event
                y, yd = res.y_high, res.ydot_high
                k1 = res.k_last
                lam_seg = profile.end
                self.eps = eps_next
                continue

            # ---- event check on the committed dynamics ----
            xi_end = 1.0
            event_here = False
            if self.config.events_enabled and profile.end >= self.u:
                xi_loc = locate_on_profile(self.u, profile)
                if xi_loc is not None:
                    xi_end = min(max(xi_loc, 0.0), 1.0)
                    event_here = True

            t0 = self.t + tau
            t1 = t0 + xi_end * eps_step
            self._harvest_and_account(res, t0, t1, eps_step, xi_end, yd,
                                      tail, tail_lo, in_warmup)

            if event_here:
                y_c, yd_c = rkn.interpolate(res, xi_end)
                self.q = y_c[:d].copy()
                self.p = mass.diag * yd_c[:d]
                t_event = t1
                self.eps = eps_next
                if nut is not None and not nut.resolved:
                    measuring = True
                    y, yd = res.y_high, res.ydot_high
                    k1 = res.k_last
                    lam_seg = profile.end
                    continue
                return t_event
            if t1 >= self.T - self.t_tol:
                self.q = res.y_high[:d].copy()
                self.p = mass.diag * res.ydot_high[:d]
                self.eps = eps_next
                return None
            y, yd = res.y_high, res.ydot_high
            k1 = res.k_last
            tau += eps_step
            lam_seg = profile.end
            self.eps = eps_next

    # ------------------------------------------------------------------
    def _harvest_and_account(self, res, t0: float, t1: float, eps_step: float,
                             xi_end: float, yd_start: np.ndarray, tail: str,
                             tail_lo: int, in_warmup: bool) -> None:
        d, m = self.d, self.m
        warm_T = self.warm_T

        r_start = yd_start[self.g_lo:self.g_hi].copy() if m else None
        g_base = self.g_run.copy() if m else None
        while (self.next_sample <= self.N
               and self.sample_times[self.next_sample - 1] <= t1 + self.t_tol):
            t_s = self.sample_times[self.next_sample - 1]
            xi_s = min(max((t_s - t0) / eps_step, 0.0), xi_end)
            y_s, yd_s = rkn.interpolate(res, xi_s)
            idx = self.next_sample - 1
            self.samples[idx] = y_s[:d]
            if m:
                self.moment_cum[idx] = g_base + (yd_s[self.g_lo:self.g_hi] - r_start)
                self.monitor_at[idx] = self.monitor.eval(y_s[:d])
            self.next_sample += 1

        if m:
            r_end = (res.ydot_high if xi_end == 1.0
                     else res.interp_ydot(xi_end))[self.g_lo:self.g_hi]
            delta = r_end - r_start
            if t1 <= warm_T:
                self.g_warm += delta
            elif t0 >= warm_T:
                self.g_samp += delta
            else:
                xi_w = min(max((warm_T - t0) / eps_step, 0.0), xi_end)
                r_w = res.interp_ydot(xi_w)[self.g_lo:self.g_hi]
                self.g_warm += r_w - r_start
                self.g_samp += r_end - r_w
            self.g_run += delta

        if in_warmup and tail != "none":
            xi_c = xi_end
            if t1 > warm_T:
                xi_c = min(max((warm_T - t0) / eps_step, 0.0), xi_end)
            if xi_c > 0.0:
                yd_c = res.ydot_high if xi_c == 1.0 else res.interp_ydot(xi_c)
                dr = yd_c[tail_lo:] - yd_start[tail_lo:]
                if self.vari is not None:
                    self.vari.add(dr[:d], dr[d:])
                if self.isg is not None:
                    self.isg.update(dr / (xi_c * eps_step))

    # ------------------------------------------------------------------
    def _apply_adaptation(self, t_event: float | None) -> None:
        if t_event is None or self.adapt is None or self.adapt_frozen:
            return
        if not self._in_warmup or t_event >= self.warm_T:
            # first event at or beyond the boundary freezes all tuning
            self.adapt_frozen = True
            return
        changed = False
        if self.btuner is not None and self._nut_record is not None:
            self.beta = self.btuner.record(self._nut_record)
            changed = True
        if self.vari is not None and t_event > 0.0:
            self.mass = MassMatrix(self.vari.mass(
                t_event, self.adapt.mass_floor, self.adapt.mass_ceiling))
            changed = True
        if self.isg is not None:
            diag = self.isg.mass(self.adapt.mass_floor, self.adapt.mass_ceiling)
            if diag is not None:
                self.mass = MassMatrix(diag)
                changed = True
        if changed:
            self.adapt_trace.append(AdaptRecord(t_event, self.beta,
                                                self.mass.diag.copy()))


def run_trajectory(target: TargetModel, config: RunConfig,
                   monitor: Monitor | None = None,
                   trajectory_index: int = 0) -> TrajectoryOutput:
    """Simulate a single trajectory of process length ``config.total_time``."""
    monitor = monitor if monitor is not None else Monitor.empty()
    return _Trajectory(target, config, monitor, trajectory_index).run()


def run_ensemble(target: TargetModel, config: RunConfig,
                 monitor: Monitor | None = None) -> list[TrajectoryOutput]:
    """Run ``config.num_trajectories`` independent trajectories.

    Stream keys derive from (seed, trajectory index), so results are
    reproducible and independent of execution order; a failed trajectory
    carries its status without aborting the ensemble.
    """
    return [run_trajectory(target, config, monitor, trajectory_index=j)
            for j in range(config.num_trajectories)]
