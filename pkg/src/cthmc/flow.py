"""Hamiltonian flow assembly: targets, mass matrix, monitors, augmented ODE.

The between-events dynamics q'' = M^{-1} grad log pi(q) are augmented with
second-order components R'' so that R' accumulates the running integrals of
the event rate and of user moment functions along the flow. The integrator
then controls the error of dynamics and integrals together.

State layout of the augmented system (dimension n = d + 1 + m [+ tail]):
    y  = [ q (d) | R_rate (1) | R_monitors (m) | R_adapt_tail ]
    y' = [ q'    | integrated rate             | integrated monitors ... ]
The rate slot always sits at index d, even for constant rates, so event
localization indexes one place. Momentum-dependent rates cannot appear in
F(y) (F sees positions only) and leave a zero integrand in that slot; the
sampler integrates them over each step's dense output instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .rkn import SecondOrderSystem

__all__ = [
    "TargetModel",
    "MassMatrix",
    "PhaseState",
    "Monitor",
    "DivergenceError",
    "augmented_rhs",
    "build_augmented_system",
    "hamiltonian",
    "momentum_from_velocity",
    "velocity_from_momentum",
]


class DivergenceError(Exception):
    """Non-finite gradient or log-density; carries the offending position."""

    def __init__(self, message: str, q: np.ndarray | None = None):
        super().__init__(message)
        self.q = None if q is None else np.array(q, copy=True)


@dataclass(frozen=True)
class TargetModel:
    """A target density kernel known through its log-gradient.

    Parameters
    ----------
    dim_d : int
        Dimension of the position space.
    grad_log_density : callable
        q -> gradient of log pi~(q), shape (d,).
    log_density : callable, optional
        q -> log pi~(q) up to an additive constant. Needed for energy
        evaluation and gradient checking, not for sampling itself.
    name : str
        Identifier used by the CLI registry and in outputs.
    """

    dim_d: int
    grad_log_density: Callable[[np.ndarray], np.ndarray]
    log_density: Callable[[np.ndarray], float] | None = None
    name: str = "custom"


@dataclass(frozen=True)
class MassMatrix:
    """Diagonal, strictly positive mass matrix."""

    diag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        object.__setattr__(self, "diag", d)
        if d.ndim != 1 or not np.all(np.isfinite(d)) or np.any(d <= 0.0):
            raise ValueError("mass diagonal must be finite and strictly positive")

    @staticmethod
    def identity(d: int) -> "MassMatrix":
        return MassMatrix(np.ones(d))

    @property
    def inv_diag(self) -> np.ndarray:
        return 1.0 / self.diag

    @property
    def sqrt_diag(self) -> np.ndarray:
        return np.sqrt(self.diag)

    def sample_momentum(self, rng: np.random.Generator) -> np.ndarray:
        """Draw p ~ N(0, M)."""
        return self.sqrt_diag * rng.standard_normal(self.diag.shape[0])


@dataclass
class PhaseState:
    """Position/momentum pair (q, p)."""

    q: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class Monitor:
    """Moment functions g_1..g_m appended to the ODE as integrands.

    ``eval`` maps q to the vector (g_1(q), ..., g_m(q)).
    """

    dim_m: int
    eval: Callable[[np.ndarray], np.ndarray] | None = None
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.dim_m and self.eval is None:
            raise ValueError("non-empty monitor needs an eval contract")
        if self.labels and len(self.labels) != self.dim_m:
            raise ValueError("labels must match dim_m")

    @staticmethod
    def empty() -> "Monitor":
        return Monitor(0, None, ())

    @staticmethod
    def means(d: int) -> "Monitor":
        """Monitors g_i(q) = q_i, for posterior mean estimation."""
        labels = tuple(f"q_{i + 1}" for i in range(d))
        return Monitor(d, lambda q: np.asarray(q, dtype=float), labels)



AdaptTail = Literal["none", "vari", "isg"]


def _tail_len(tail: AdaptTail, d: int) -> int:
    return {"none": 0, "vari": 2 * d, "isg": d}[tail]


def build_augmented_system(target: TargetModel, mass: MassMatrix,
                           monitor: Monitor,
                           rate_fn: Callable[[np.ndarray], float] | None,
                           adapt_tail: AdaptTail = "none",
                           counter: list | None = None) -> SecondOrderSystem:
    """Assemble y'' = F(y) for one between-events segment.

    ``rate_fn`` gives the position-dependent event rate filling slot d, or
    None for a momentum-dependent rate (slot integrand held at zero).
    ``adapt_tail`` appends warmup-only integrands: per-component q and q^2
    for VARI mass tuning, squared gradient components for ISG (these reuse
    the gradient already computed for the force, at no extra model cost).
    ``counter`` is an optional single-element list incremented per evaluation.
    """
    d = target.dim_d
    m = monitor.dim_m
    n = d + 1 + m + _tail_len(adapt_tail, d)
    inv_mass = mass.inv_diag
    grad = target.grad_log_density
    mon_eval = monitor.eval
    g_end = d + 1 + m

    def rhs(y: np.ndarray) -> np.ndarray:
        if counter is not None:
            counter[0] += 1
        q = y[:d]
        g = grad(q)
        with np.errstate(invalid="ignore", over="ignore"):
            if not math.isfinite(float(g.sum())):
                raise DivergenceError("non-finite gradient", q)
        out = np.empty(n)
        out[:d] = inv_mass * g
        out[d] = 0.0 if rate_fn is None else rate_fn(q)
        if m:
            out[d + 1:g_end] = mon_eval(q)
        if adapt_tail == "vari":
            out[g_end:g_end + d] = q
            out[g_end + d:] = q * q
        elif adapt_tail == "isg":
            out[g_end:] = g * g
        return out

    return SecondOrderSystem(dim_n=n, rhs=rhs)


def augmented_rhs(target: TargetModel, mass: MassMatrix, monitor: Monitor,
                  rate_fn: Callable[[np.ndarray], float] | None,
                  y: np.ndarray) -> np.ndarray:
    """One evaluation of the augmented right-hand side (see module docs)."""
    return build_augmented_system(target, mass, monitor, rate_fn).rhs(y)


def hamiltonian(target: TargetModel, mass: MassMatrix, z: PhaseState) -> float:
    """Total energy -log pi~(q) + p' M^{-1} p / 2."""
    if target.log_density is None:
        raise ValueError(f"target {target.name!r} does not provide log_density")
    ld = float(target.log_density(z.q))
    return -ld + 0.5 * float(z.p @ (mass.inv_diag * z.p))


def momentum_from_velocity(mass: MassMatrix, qdot: np.ndarray) -> np.ndarray:
    return mass.diag * qdot


def velocity_from_momentum(mass: MassMatrix, p: np.ndarray) -> np.ndarray:
    return p / mass.diag
