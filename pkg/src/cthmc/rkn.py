"""Embedded 6(4) Runge-Kutta-Nystrom stepper with dense output.

Solves time-homogeneous second-order systems y'' = F(y) using the six-stage
FSAL pair RKN6(4)6FD of Dormand, El-Mikkawy & Prince (1987). Each step costs
five new right-hand-side evaluations (the sixth stage is reused as the first
stage of the next step). The companion 4th-order solution drives a PI
step-size controller.

Dense output is a two-point quintic Hermite interpolant built from
(y, y', y'') at both step endpoints; the endpoint accelerations are the FSAL
stages, so interpolation costs no extra F evaluations. It reproduces the
endpoints exactly and is 6th-order accurate in the interior for the step
sizes the controller accepts.

The stage/combination arithmetic is jitted with numba when available (the
per-step state vectors are small, so interpreter dispatch would dominate);
a numpy fallback keeps the module importable without it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

try:
    from numba import njit as _njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def deco(fn):
            return fn
        return deco

__all__ = [
    "SecondOrderSystem",
    "RknStepResult",
    "StepController",
    "StepFailure",
    "rkn_step",
    "interpolate",
    "error_norm",
    "propose_step",
    "initial_step_size",
]


class StepFailure(Exception):
    """A stage evaluation produced a non-finite value; shrink or abort."""


# RKN6(4)6FD tableau (Dormand, El-Mikkawy & Prince 1987, Table 2).
# Stage nodes c, stage matrix A (strictly lower triangular), 6th-order
# weights (B_HIGH for y, BP_HIGH for y') and embedded 4th-order weights.
# The last A row equals B_HIGH, making the scheme FSAL.
C_NODES = np.array([0.0, 1 / 10, 3 / 10, 7 / 10, 17 / 25, 1.0])
A_STAGE = np.zeros((6, 6))
A_STAGE[1, :1] = [1 / 200]
A_STAGE[2, :2] = [-1 / 2200, 1 / 22]
A_STAGE[3, :3] = [637 / 6600, -7 / 110, 7 / 33]
A_STAGE[4, :4] = [225437 / 1968750, -30073 / 281250, 65569 / 281250,
                  -9367 / 984375]
A_STAGE[5, :5] = [151 / 2142, 5 / 116, 385 / 1368, 55 / 168, -6250 / 28101]
B_HIGH = np.array([151 / 2142, 5 / 116, 385 / 1368, 55 / 168,
                   -6250 / 28101, 0.0])
BP_HIGH = np.array([151 / 2142, 25 / 522, 275 / 684, 275 / 252,
                    -78125 / 112404, 1 / 12])
B_LOW = np.array([1349 / 157500, 7873 / 50000, 192199 / 900000,
                  521683 / 2100000, -16 / 125, 0.0])
BP_LOW = np.array([1349 / 157500, 7873 / 45000, 27457 / 90000,
                   521683 / 630000, -2 / 5, 1 / 12])

# Combined weight matrix: rows give the stage contributions to
# (y_high, y'_high, y_low, y'_low).
_W = np.vstack([B_HIGH, BP_HIGH, B_LOW, BP_LOW])
_CH = [float(c) for c in C_NODES]


@_njit(cache=True)
def _stage_state(y, ydot, ceps, e2, arow, k, i):
    """y + c*eps*y' + eps^2 * sum_{j<i} a_ij k_j, one stage prediction."""
    n = y.shape[0]
    out = np.empty(n)
    for c in range(n):
        acc = 0.0
        for j in range(i):
            acc += arow[j] * k[j, c]
        out[c] = y[c] + ceps * ydot[c] + e2 * acc
    return out


@_njit(cache=True)
def _combine(y, ydot, eps, k, W):
    """Weighted stage sums giving the high/low order end states."""
    n = y.shape[0]
    e2 = eps * eps
    yh = np.empty(n)
    ydh = np.empty(n)
    yl = np.empty(n)
    ydl = np.empty(n)
    for c in range(n):
        i0 = 0.0
        i1 = 0.0
        i2 = 0.0
        i3 = 0.0
        for s in range(6):
            ks = k[s, c]
            i0 += W[0, s] * ks
            i1 += W[1, s] * ks
            i2 += W[2, s] * ks
            i3 += W[3, s] * ks
        base = y[c] + eps * ydot[c]
        yh[c] = base + e2 * i0
        ydh[c] = ydot[c] + eps * i1
        yl[c] = base + e2 * i2
        ydl[c] = ydot[c] + eps * i3
    return yh, ydh, yl, ydl


@_njit(cache=True)
def _scaled_error(yh, ydh, yl, ydl, ta, tr):
    err = 0.0
    for c in range(yh.shape[0]):
        v = abs(yh[c] - yl[c]) / (ta + tr * abs(yh[c]))
        w = abs(ydh[c] - ydl[c]) / (ta + tr * abs(ydh[c]))
        if v != v or w != w:  # NaN: force rejection
            return np.inf
        if v > err:
            err = v
        if w > err:
            err = w
    return err


if not _HAVE_NUMBA:  # numpy fallbacks, semantically identical
    def _stage_state(y, ydot, ceps, e2, arow, k, i):  # noqa: F811
        return y + ceps * ydot + e2 * (arow[:i] @ k[:i])

    def _combine(y, ydot, eps, k, W):  # noqa: F811
        inc = W @ k
        e2 = eps * eps
        base = y + eps * ydot
        return (base + e2 * inc[0], ydot + eps * inc[1],
                base + e2 * inc[2], ydot + eps * inc[3])

    def _scaled_error(yh, ydh, yl, ydl, ta, tr):  # noqa: F811
        ey = np.abs(yh - yl) / (ta + tr * np.abs(yh))
        ev = np.abs(ydh - ydl) / (ta + tr * np.abs(ydh))
        err = max(float(ey.max()), float(ev.max()))
        return np.inf if math.isnan(err) else err


@dataclass(frozen=True)
class SecondOrderSystem:
    """A second-order ODE y'' = F(y), y in R^n.

    ``rhs`` must be deterministic and may depend on the position block of y
    only (never on y'). ``dim_n`` is the full augmented dimension.
    """

    dim_n: int
    rhs: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.dim_n < 1:
            raise ValueError("dim_n must be >= 1")


@dataclass(slots=True)
class RknStepResult:
    """One accepted or candidate step, with everything needed to interpolate.

    ``stage_evals`` holds all six stage accelerations; row 0 is the (possibly
    FSAL-reused) acceleration at the step start and row 5 the acceleration at
    the step end, which the next step reuses.
    """

    y0: np.ndarray
    ydot0: np.ndarray
    y_high: np.ndarray
    ydot_high: np.ndarray
    y_low: np.ndarray
    ydot_low: np.ndarray
    stage_evals: np.ndarray
    step_size: float
    _coeffs: np.ndarray | None = field(default=None, repr=False)

    @property
    def k_last(self) -> np.ndarray:
        """Acceleration at the step end; pass as ``k1`` of the next step."""
        return self.stage_evals[5]

    def interp_coeffs(self) -> np.ndarray:
        """Monomial coefficients (6, n) of the quintic Hermite interpolant.

        p(xi) = sum_j coeffs[j] * xi**j approximates y(tau + xi*eps); its
        xi-derivative divided by eps approximates y'(tau + xi*eps).
        """
        if self._coeffs is None:
            h = self.step_size
            y0, y1 = self.y0, self.y_high
            v0, v1 = h * self.ydot0, h * self.ydot_high
            a0 = (h * h) * self.stage_evals[0]
            a1 = (h * h) * self.stage_evals[5]
            c = np.empty((6, y0.shape[0]))
            c[0] = y0
            c[1] = v0
            c[2] = 0.5 * a0
            c[3] = -10.0 * y0 - 6.0 * v0 - 1.5 * a0 + 10.0 * y1 - 4.0 * v1 + 0.5 * a1
            c[4] = 15.0 * y0 + 8.0 * v0 + 1.5 * a0 - 15.0 * y1 + 7.0 * v1 - a1
            c[5] = -6.0 * y0 - 3.0 * v0 - 0.5 * a0 + 6.0 * y1 - 3.0 * v1 + 0.5 * a1
            self._coeffs = c
        return self._coeffs

    def interp_y(self, xi: float) -> np.ndarray:
        c = self.interp_coeffs()
        return ((((c[5] * xi + c[4]) * xi + c[3]) * xi + c[2]) * xi + c[1]) * xi + c[0]

    def interp_ydot(self, xi: float) -> np.ndarray:
        c = self.interp_coeffs()
        d = (((5.0 * c[5] * xi + 4.0 * c[4]) * xi + 3.0 * c[3]) * xi
             + 2.0 * c[2]) * xi + c[1]
        return d / self.step_size


@dataclass
class StepController:
    """PI step-size controller state for an order-5 local error estimate."""

    tol_abs: float = 1e-3
    tol_rel: float = 1e-3
    prev_error_norm: float = 1.0
    eps_min: float = 1e-8
    eps_max: float = 10.0
    safety: float = 0.9
    pi_alpha: float = 0.7 / 5
    pi_beta: float = 0.4 / 5

    def __post_init__(self):
        if self.tol_abs <= 0 or self.tol_rel < 0:
            raise ValueError("tolerances must satisfy tol_abs > 0, tol_rel >= 0")


def rkn_step(sys: SecondOrderSystem, y: np.ndarray, ydot: np.ndarray,
             eps: float, k1: np.ndarray | None = None) -> RknStepResult:
    """Advance (y, y') by one candidate step of size eps.

    ``k1`` is the acceleration F(y) at the start; pass the previous step's
    ``k_last`` to get the FSAL 5-evaluation cost. Raises :class:`StepFailure`
    if any stage acceleration is non-finite.
    """
    if eps <= 0.0:
        raise ValueError("eps must be > 0")
    rhs = sys.rhs
    n = y.shape[0]
    k = np.empty((6, n))
    k[0] = rhs(y) if k1 is None else k1
    e2 = eps * eps
    for i in range(1, 6):
        yi = _stage_state(y, ydot, _CH[i] * eps, e2, A_STAGE[i], k, i)
        k[i] = rhs(yi)
    with np.errstate(invalid="ignore", over="ignore"):
        if not math.isfinite(float(k.sum())):
            raise StepFailure("non-finite acceleration in stage evaluation")
        yh, ydh, yl, ydl = _combine(y, ydot, eps, k, _W)
        if not math.isfinite(float(yh.sum()) + float(ydh.sum())):
            raise StepFailure("non-finite end state")
    return RknStepResult(
        y0=y, ydot0=ydot,
        y_high=yh, ydot_high=ydh, y_low=yl, ydot_low=ydl,
        stage_evals=k, step_size=eps,
    )


def interpolate(result: RknStepResult, xi: float) -> tuple[np.ndarray, np.ndarray]:
    """State (y, y') at fraction xi of an accepted step.

    Endpoints are returned exactly: xi=0 gives the initial state, xi=1 the
    high-order end state.
    """
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"xi must be in [0, 1], got {xi}")
    if xi == 0.0:
        return result.y0.copy(), result.ydot0.copy()
    if xi == 1.0:
        return result.y_high.copy(), result.ydot_high.copy()
    return result.interp_y(xi), result.interp_ydot(xi)


def error_norm(result: RknStepResult, ctrl: StepController) -> float:
    """Max scaled discrepancy between the 6th- and 4th-order solutions.

    Runs over both y and y' components; the step is acceptable iff the
    result is < 1. Non-finite inputs yield +inf, forcing rejection.
    """
    err = _scaled_error(result.y_high, result.ydot_high, result.y_low,
                        result.ydot_low, ctrl.tol_abs, ctrl.tol_rel)
    return err if math.isfinite(err) else math.inf


_ERR_FLOOR = 1e-10
_MAX_GROWTH = 5.0
_MAX_SHRINK = 0.1


def propose_step(ctrl: StepController, eps_prev: float, err: float,
                 accepted: bool) -> float:
    """Next step size from the PI controller; updates memory on accept."""
    if eps_prev <= 0.0:
        raise ValueError("eps_prev must be > 0")
    err = max(err, _ERR_FLOOR)
    if accepted:
        fac = (ctrl.safety * err ** (-ctrl.pi_alpha)
               * max(ctrl.prev_error_norm, _ERR_FLOOR) ** ctrl.pi_beta)
        fac = min(fac, _MAX_GROWTH)
        ctrl.prev_error_norm = err
    else:
        fac = max(ctrl.safety * err ** (-0.2), _MAX_SHRINK)
    return min(max(eps_prev * fac, ctrl.eps_min), ctrl.eps_max)


def initial_step_size(ctrl: StepController, k1: np.ndarray) -> float:
    """Cheap first-step heuristic; the controller corrects it within a few steps."""
    scale = max(1.0, float(np.max(np.abs(k1))) if k1.size else 1.0)
    eps0 = 0.01 * ctrl.tol_abs ** (1 / 6) / scale
    return min(max(eps0, ctrl.eps_min), ctrl.eps_max)
