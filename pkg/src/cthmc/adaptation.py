"""Warmup tuning of the diagonal mass matrix and the event-rate scale.

Mass matrix, two flavors:

* VARI sets each inverse mass to the running temporal-average estimate of
  Var(q_i) over the warmup so far, refreshed at event times.
* ISG tracks an exponential moving average, over integrator steps, of the
  per-step time-average of each squared gradient component; for a Gaussian
  target this estimates the precision diagonal directly.

Event-rate scale beta: per between-events segment, the base-line rate is
integrated along the dynamics until the no-U-turn functional
(q(tau) - q(0))' p(tau) first dips below zero (continuing past an event on
the same dynamics purely for measurement); beta is an EMA of those
integrals, which makes the expected integrated rate over a fresh segment
equal to beta.

All updates are applied at event boundaries only, so every segment
integrates a fixed Hamiltonian; everything here is warmup-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .rkn import RknStepResult

__all__ = [
    "AdaptConfig",
    "NutClock",
    "VariAccumulator",
    "IsgAverager",
    "BetaTuner",
    "vari_update",
    "uturn_crossing",
]

MassMode = Literal["none", "vari", "isg"]


@dataclass(frozen=True)
class AdaptConfig:
    """What to tune during warmup and how aggressively."""

    mass_mode: MassMode = "none"
    beta_adapt: bool = False
    ema_decay: float = 0.95
    isg_decay: float = 0.999
    beta_init: float | None = None
    mass_floor: float = 1e-6
    mass_ceiling: float = 1e6

    def __post_init__(self):
        if not 0.0 < self.ema_decay < 1.0:
            raise ValueError("ema_decay must be in (0, 1)")
        if not 0.0 < self.isg_decay < 1.0:
            raise ValueError("isg_decay must be in (0, 1)")
        if self.mass_floor >= self.mass_ceiling:
            raise ValueError("mass_floor must be below mass_ceiling")
        if self.beta_init is not None and self.beta_init <= 0:
            raise ValueError("beta_init must be positive")

    @property
    def active(self) -> bool:
        return self.mass_mode != "none" or self.beta_adapt


def vari_update(integral_q: np.ndarray, integral_q2: np.ndarray,
                t_star: float, floor: float, ceiling: float) -> np.ndarray:
    """Mass diagonal from running first/second moment integrals over [0, t*].

    m_i^{-1} = (1/t*) int q_i^2 - ((1/t*) int q_i)^2, clamped; a degenerate
    (non-positive) variance estimate maps to the mass ceiling.
    """
    if t_star <= 0.0:
        raise ValueError("t_star must be positive")
    var = integral_q2 / t_star - (integral_q / t_star) ** 2
    mass = np.where(var > 0.0, 1.0 / np.maximum(var, 1e-300), ceiling)
    return np.clip(mass, floor, ceiling)


@dataclass
class VariAccumulator:
    """Cumulative warmup integrals of q and q^2 (trajectory time origin)."""

    integral_q: np.ndarray
    integral_q2: np.ndarray

    @staticmethod
    def zeros(d: int) -> "VariAccumulator":
        return VariAccumulator(np.zeros(d), np.zeros(d))

    def add(self, delta_q: np.ndarray, delta_q2: np.ndarray) -> None:
        self.integral_q += delta_q
        self.integral_q2 += delta_q2

    def mass(self, t_star: float, floor: float, ceiling: float) -> np.ndarray:
        return vari_update(self.integral_q, self.integral_q2, t_star,
                           floor, ceiling)


@dataclass
class IsgAverager:
    """EMA over integrator steps of per-step averaged squared gradients."""

    decay: float
    value: np.ndarray | None = None

    def update(self, step_average: np.ndarray) -> None:
        if self.value is None:
            self.value = np.array(step_average, dtype=float)
        else:
            self.value = self.decay * self.value + (1.0 - self.decay) * step_average

    def mass(self, floor: float, ceiling: float) -> np.ndarray | None:
        if self.value is None:
            return None
        return np.clip(self.value, floor, ceiling)


@dataclass
class BetaTuner:
    """EMA of per-segment integrated base-line rates up to the no-U-turn time."""

    decay: float
    beta: float
    observations: int = 0

    def record(self, integrated_base_rate: float) -> float:
        self.beta = self.decay * self.beta + (1.0 - self.decay) * integrated_base_rate
        self.observations += 1
        return self.beta


@dataclass
class NutClock:
    """Tracks the no-U-turn functional for one between-events segment.

    ``armed`` becomes true once the functional has been positive; only then
    does a downward crossing count (the functional starts at exactly zero).
    """

    q_anchor: np.ndarray
    accumulated_base_rate: float = 0.0
    resolved: bool = False
    armed: bool = False
    u_prev: float = 0.0
    extra_steps: int = 0
    segment_start_t: float = 0.0


_UTURN_TOL = 1e-8


def uturn_crossing(step: RknStepResult, anchor: np.ndarray,
                   mass_diag: np.ndarray, armed: bool,
                   u_start: float) -> float | None:
    """Fraction xi where (q - anchor)' M qdot first crosses below zero.

    ``u_start`` is the functional at the step start; a crossing only counts
    once the functional has been positive (``armed``). Refined by bisection
    on the dense output to 1e-8 in xi.
    """
    d = anchor.shape[0]

    def u_at(xi: float) -> float:
        c = step.interp_coeffs()
        y = ((((c[5] * xi + c[4]) * xi + c[3]) * xi + c[2]) * xi + c[1]) * xi + c[0]
        dp = (((5.0 * c[5] * xi + 4.0 * c[4]) * xi + 3.0 * c[3]) * xi
              + 2.0 * c[2]) * xi + c[1]
        qdot = dp[:d] / step.step_size
        return float((y[:d] - anchor) @ (mass_diag * qdot))

    u_end = float((step.y_high[:d] - anchor)
                  @ (mass_diag * step.ydot_high[:d]))
    if armed:
        if u_end >= 0.0:
            return None
        lo, hi = 0.0, 1.0
    else:
        # not yet armed: scan for a positive excursion followed by a dip
        # inside this same step
        xs = np.linspace(0.0, 1.0, 9)
        vals = np.array([u_start, *(u_at(x) for x in xs[1:8]), u_end])
        pos = np.nonzero(vals > 0.0)[0]
        if pos.size == 0:
            return None
        neg = np.nonzero(vals[pos[0]:] < 0.0)[0]
        if neg.size == 0:
            return None
        j = pos[0] + neg[0]
        lo, hi = xs[j - 1], xs[j]
    while hi - lo > _UTURN_TOL:
        mid = 0.5 * (lo + hi)
        if u_at(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
