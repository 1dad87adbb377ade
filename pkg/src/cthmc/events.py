"""Event specifications, exponential clocks, and event-time localization.

An event specification pairs an event rate with a momentum transition kernel
such that the joint position/momentum target is left invariant:

  1. const          rate 1/(gamma*beta), full refresh p ~ N(0, M)
  2. const_autoreg  rate 1/(gamma*beta), p <- phi*p + N(0, (1-phi^2) M)
  3. arclength      rate sqrt(p'M^{-1}p)/(gamma*beta); refresh density
                    proportional to sqrt(p'M^{-1}p) N(p|0, M), sampled
                    exactly as a chi_{d+1} radius times a uniform direction
  custom            user rate omega(q)/(gamma*beta) >= 0 with a full or
                    autoregressive refresh

Events fire when the integrated rate along the flow reaches an Exp(1)
threshold. Within an accepted integrator step, the integrated rate is a
polynomial profile in the step fraction xi: for position-dependent rates it
is the dense-output interpolant of the rate slot; for the arc-length rate it
is built by Chebyshev-fit quadrature of the interpolated speed. Localization
is direct inversion for constant rates, otherwise bracketed bisection with a
Newton polish.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .flow import MassMatrix
from .rkn import RknStepResult

__all__ = [
    "EventSpec",
    "EventClock",
    "base_rate",
    "refresh_momentum",
    "locate_event",
    "RateProfile",
    "LinearRateProfile",
    "OdeRateProfile",
    "ArcLengthProfile",
]

Kind = Literal["const", "const_autoreg", "arclength", "custom"]


@dataclass(frozen=True)
class EventSpec:
    """Event rate family and its momentum-refresh kernel.

    ``beta`` is the rate scale tuned (possibly adaptively) per target;
    ``gamma`` a user factor, larger meaning longer between-event
    trajectories. ``phi`` is the momentum autoregression coefficient (kinds
    ``const_autoreg`` and ``custom``). ``omega`` is a custom position
    dependent base rate q -> rate >= 0.
    """

    kind: Kind
    beta: float = 1.0
    gamma: float = 1.0
    phi: float = 0.0
    omega: Callable[[np.ndarray], float] | None = None

    def __post_init__(self):
        if self.beta <= 0 or self.gamma <= 0:
            raise ValueError("beta and gamma must be > 0")
        if not -1.0 < self.phi < 1.0:
            raise ValueError("phi must lie strictly inside (-1, 1)")
        if self.kind == "custom" and self.omega is None:
            raise ValueError("custom spec needs an omega(q) rate")

    @property
    def momentum_dependent(self) -> bool:
        return self.kind == "arclength"

    @property
    def constant_rate(self) -> bool:
        return self.kind in ("const", "const_autoreg")


@dataclass
class EventClock:
    """Exp(1) threshold and running integrated intensity for one segment."""

    threshold_u: float
    accumulated: float = 0.0

    def reset(self, u: float) -> None:
        if u <= 0:
            raise ValueError("threshold must be positive")
        self.threshold_u = u
        self.accumulated = 0.0


def base_rate(spec: EventSpec, q: np.ndarray, p: np.ndarray,
              mass: MassMatrix, beta: float | None = None) -> float:
    """Effective event rate lambda(q, p) = base-line rate / (gamma * beta)."""
    b = spec.beta if beta is None else beta
    scale = 1.0 / (spec.gamma * b)
    if spec.constant_rate:
        return scale
    if spec.kind == "arclength":
        return scale * float(np.sqrt(p @ (mass.inv_diag * p)))
    rate = float(spec.omega(q))
    if rate < 0.0 or not np.isfinite(rate):
        raise ValueError(f"custom event rate must be finite and >= 0, got {rate}")
    return scale * rate


def refresh_momentum(spec: EventSpec, p_prev: np.ndarray, mass: MassMatrix,
                     rng: np.random.Generator) -> np.ndarray:
    """Draw a new momentum from the spec's at-event kernel."""
    d = p_prev.shape[0]
    if spec.kind == "const" or (spec.kind == "custom" and spec.phi == 0.0):
        return mass.sample_momentum(rng)
    if spec.kind in ("const_autoreg", "custom"):
        noise = np.sqrt(1.0 - spec.phi ** 2) * mass.sample_momentum(rng)
        return spec.phi * p_prev + noise
    # arclength: radius chi_{d+1} times uniform direction, scaled by M^{1/2}
    r = np.sqrt(rng.chisquare(d + 1))
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    return r * mass.sqrt_diag * u


class RateProfile:
    """Integrated intensity Lambda(tau + xi*eps) over one accepted step."""

    def value(self, xi: float) -> float:
        raise NotImplementedError

    def deriv(self, xi: float) -> float:
        raise NotImplementedError

    @property
    def end(self) -> float:
        raise NotImplementedError


class LinearRateProfile(RateProfile):
    """Constant-rate profile; localization inverts it exactly."""

    def __init__(self, lam0: float, rate: float, eps: float):
        self.lam0 = lam0
        self.rate = rate
        self.eps = eps

    def value(self, xi: float) -> float:
        return self.lam0 + self.rate * self.eps * xi

    def deriv(self, xi: float) -> float:
        return self.rate * self.eps

    @property
    def end(self) -> float:
        return self.lam0 + self.rate * self.eps

    def invert(self, u: float) -> float:
        return (u - self.lam0) / (self.rate * self.eps)


class OdeRateProfile(RateProfile):
    """Profile read from the dense output of the integrated rate slot."""

    def __init__(self, step: RknStepResult, lambda_index: int):
        c = step.interp_coeffs()[:, lambda_index]
        # Lambda(xi) = y'(xi) of the rate slot = P'(xi)/eps with P the
        # quintic y-interpolant; its xi-derivative is P''(xi)/eps.
        self._c = c
        self._eps = step.step_size
        self._end = float(step.ydot_high[lambda_index])

    def value(self, xi: float) -> float:
        c = self._c
        d = (((5.0 * c[5] * xi + 4.0 * c[4]) * xi + 3.0 * c[3]) * xi
             + 2.0 * c[2]) * xi + c[1]
        return float(d) / self._eps

    def deriv(self, xi: float) -> float:
        c = self._c
        dd = ((20.0 * c[5] * xi + 12.0 * c[4]) * xi + 6.0 * c[3]) * xi + 2.0 * c[2]
        return float(dd) / self._eps

    @property
    def end(self) -> float:
        return self._end


# Chebyshev-Lobatto nodes on [0, 1] and the pseudo-inverse of their
# degree-7 Vandermonde matrix, for fitting smooth per-step integrands.
_CHEB_N = 8
CHEB_NODES = 0.5 * (1.0 - np.cos(np.pi * np.arange(_CHEB_N) / (_CHEB_N - 1)))
_VAND_INV = np.linalg.inv(np.vander(CHEB_NODES, _CHEB_N, increasing=True))


class ArcLengthProfile(RateProfile):
    """Quadrature-backed profile for the momentum-dependent arc-length rate.

    The speed sqrt(q''M q') along the step is sampled from the dense output
    at Chebyshev nodes, fitted by a degree-7 polynomial, and integrated
    analytically; the cumulative integral serves as Lambda(xi).
    """

    def __init__(self, step: RknStepResult, mass: MassMatrix, d: int,
                 lam0: float, inv_gamma_beta: float):
        c = step.interp_coeffs()[:, :d]
        xi = CHEB_NODES[:, None]
        dp = (((5.0 * c[5] * xi + 4.0 * c[4]) * xi + 3.0 * c[3]) * xi
              + 2.0 * c[2]) * xi + c[1]
        qdot = dp / step.step_size
        speed = np.sqrt(np.maximum((qdot * qdot * mass.diag).sum(axis=1), 0.0))
        coeffs = _VAND_INV @ speed
        # antiderivative, zero at xi=0, scaled to Lambda units
        scale = step.step_size * inv_gamma_beta
        self._anti = np.concatenate(([0.0], scale * coeffs / np.arange(1, _CHEB_N + 1)))
        self._rate_coeffs = coeffs * scale
        self.lam0 = lam0
        self._end = lam0 + float(np.polyval(self._anti[::-1], 1.0))

    def value(self, xi: float) -> float:
        return self.lam0 + float(np.polyval(self._anti[::-1], xi))

    def deriv(self, xi: float) -> float:
        return float(np.polyval(self._rate_coeffs[::-1], xi))

    @property
    def end(self) -> float:
        return self._end


_BISECT_WIDTH = 1e-12
_LOCATE_RTOL = 1e-10


def locate_on_profile(u: float, profile: RateProfile) -> float | None:
    """Fraction xi in (0, 1] where the integrated intensity reaches u.

    Returns None when the threshold is not reached within the step. The
    caller guarantees profile.value(0) < u.
    """
    if profile.end < u:
        return None
    if isinstance(profile, LinearRateProfile):
        return min(profile.invert(u), 1.0)
    lo, hi = 0.0, 1.0
    glo = profile.value(0.0) - u
    if glo > 0.0:
        raise RuntimeError("event threshold already exceeded at step start")
    while hi - lo > _BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        if profile.value(mid) - u <= 0.0:
            lo = mid
        else:
            hi = mid
    xi = 0.5 * (lo + hi)
    for _ in range(2):
        dv = profile.deriv(xi)
        if dv <= 0.0:
            break
        xi -= (profile.value(xi) - u) / dv
        if not 0.0 <= xi <= 1.0:
            xi = min(max(xi, 0.0), 1.0)
            break
    if abs(profile.value(xi) - u) > _LOCATE_RTOL * (1.0 + abs(u)) and \
            abs(profile.value(0.5 * (lo + hi)) - u) < abs(profile.value(xi) - u):
        xi = 0.5 * (lo + hi)
    return xi


def locate_event(clock: EventClock, step: RknStepResult,
                 lambda_index: int) -> float | None:
    """Locate the event fraction within a step whose rate slot was integrated
    by the ODE (position-dependent rates). See :func:`locate_on_profile`."""
    return locate_on_profile(clock.threshold_u, OdeRateProfile(step, lambda_index))
