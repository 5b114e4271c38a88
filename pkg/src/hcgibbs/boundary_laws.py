"""Fixed-point systems for boundary laws of the hard-core model.

Every system is written as a residual ``lhs - rhs``; the residual functions
broadcast over numpy arrays so that solvers can evaluate many points at once.

Variables of the 2-state model live in ``(0, 1)``.  For the 3-state model
the translation-invariant unknowns are the scaled fields ``z'_j`` (the
boundary weight divided by ``z_0`` and multiplied by the activity).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .hc_graphs import FertileGraph

log = logging.getLogger(__name__)

TINY = 1e-300


class ConvergenceError(RuntimeError):
    pass


class InvariantSet(str, Enum):
    I1 = "I1"
    I2 = "I2"
    I3 = "I3"
    I4 = "I4"

    def contains(self, z1, z2, z7, z8, tol=1e-12) -> bool:
        close = lambda a, b: abs(a - b) <= tol * max(1.0, abs(a), abs(b))
        if self is InvariantSet.I1:
            return close(z1, z2) and close(z2, z7) and close(z7, z8)
        if self is InvariantSet.I2:
            return close(z1, z7) and close(z2, z8)
        if self is InvariantSet.I3:
            return close(z1, z2) and close(z7, z8)
        return close(z1, z8) and close(z2, z7)

    def expand(self, u, v):
        """Map the two free coordinates to ``(z1, z2, z7, z8)``.

        I1 uses only ``u``.  The free pair is ``(z1, z2)`` for I2 and I4 and
        ``(z1, z7)`` for I3.
        """
        if self is InvariantSet.I1:
            return u, u, u, u
        if self is InvariantSet.I2:
            return u, v, u, v
        if self is InvariantSet.I3:
            return u, u, v, v
        return u, v, v, u


@dataclass(frozen=True)
class WeaklyPeriodicLaw:
    z: tuple[float, ...]
    k: int
    i: int
    lam: float

    def __post_init__(self):
        if len(self.z) != 8:
            raise ValueError("a weakly periodic law has eight components")
        _check_ki(self.k, self.i)
        if self.lam <= 0:
            raise ValueError("activity must be positive")

    def residual(self) -> np.ndarray:
        return wp8_residual(self.z, self.k, self.i, self.lam)

    @property
    def reduced(self) -> tuple[float, float, float, float]:
        z = self.z
        return z[0], z[1], z[6], z[7]


@dataclass(frozen=True)
class TiLaw3:
    z1: float
    z2: float
    graph: FertileGraph
    k: int
    lam: float

    def residual(self) -> np.ndarray:
        return ti3_residual(self.z1, self.z2, self.graph, self.k, self.lam)

    def boundary_weights(self) -> np.ndarray:
        """Per-state weights ``(1, z1/lam, z2/lam)`` entering the finite-volume measure."""
        return np.array([1.0, self.z1 / self.lam, self.z2 / self.lam])


def _check_ki(k: int, i: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 1 <= i <= k + 1:
        raise ValueError(f"i = |A| must lie in 1..{k + 1}, got {i}")


def _positive(*xs) -> None:
    for x in xs:
        if np.any(np.asarray(x) <= 0):
            raise ValueError("arguments must be positive")


def hc_recursion(children, lam: float) -> float:
    """``prod_y (1 + lam z_y)^-1`` over the children values ``z_y``."""
    children = np.asarray(children, dtype=float)
    if children.size == 0:
        raise ValueError("at least one child value is required")
    _positive(children, lam)
    return float(np.prod(1.0 / (1.0 + lam * children)))


def ti2_fixed_point(k: int, lam: float) -> float:
    """The unique root of ``z (1 + lam z)^k = 1`` in ``(0, 1)``."""
    from scipy.optimize import brentq

    _positive(lam)
    return brentq(lambda z: z * (1 + lam * z) ** k - 1.0, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps)


def ti2_residual(z, k: int, lam: float):
    return z - (1.0 + lam * z) ** (-k)


def wp8_residual(z, k: int, i: int, lam: float) -> np.ndarray:
    """Residual of the eight-variable weakly periodic system."""
    _check_ki(k, i)
    z1, z2, z3, z4, z5, z6, z7, z8 = (np.asarray(c) for c in z)
    f = lambda x: 1.0 + lam * x
    return np.array([
        z1 - f(z4) ** -i * f(z2) ** -(k - i),
        z2 - f(z6) ** -i * f(z1) ** -(k - i),
        z3 - f(z4) ** -(i - 1) * f(z2) ** -(k - i + 1),
        z4 - f(z3) ** -(i - 1) * f(z7) ** -(k - i + 1),
        z5 - f(z6) ** -(i - 1) * f(z1) ** -(k - i + 1),
        z6 - f(z5) ** -(i - 1) * f(z8) ** -(k - i + 1),
        z7 - f(z5) ** -i * f(z8) ** -(k - i),
        z8 - f(z3) ** -i * f(z7) ** -(k - i),
    ])


def _clamp(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return x
    x = x.astype(float)
    low = x < TINY
    if np.any(low):
        log.warning("clamped %d argument(s) below %g", int(np.count_nonzero(low)), TINY)
        x = np.where(low, TINY, x)
    return x


def _wp4_row(own_a, own_b, far_a, far_b, k, i, lam):
    """One row of the reduced system: rhs for ``own_a`` given the partner values."""
    head = (1.0 + lam * far_a) ** k / ((1.0 + lam * far_a) ** (k / i) + lam * far_b ** (1.0 - 1.0 / i)) ** i
    return head * (1.0 + lam * own_b) ** -(k - i)


def wp4_rhs(z1, z2, z7, z8, k: int, i: int, lam: float):
    _check_ki(k, i)
    z1, z2, z7, z8 = (_clamp(c) for c in (z1, z2, z7, z8))
    return (
        _wp4_row(z1, z2, z7, z8, k, i, lam),
        _wp4_row(z2, z1, z8, z7, k, i, lam),
        _wp4_row(z7, z8, z1, z2, k, i, lam),
        _wp4_row(z8, z7, z2, z1, k, i, lam),
    )


def wp4_residual(z1, z2, z7, z8, k: int, i: int, lam: float) -> np.ndarray:
    """Residual of the reduced four-variable system in ``(z1, z2, z7, z8)``."""
    _positive(z1, z2, z7, z8, lam)
    rhs = wp4_rhs(z1, z2, z7, z8, k, i, lam)
    return np.array([z1 - rhs[0], z2 - rhs[1], z7 - rhs[2], z8 - rhs[3]])


def invariant_residual(inv: InvariantSet, u, v, k: int, i: int, lam: float) -> np.ndarray:
    """Reduced system restricted to an invariant set, in its free coordinates."""
    z1, z2, z7, z8 = inv.expand(u, v)
    rhs = wp4_rhs(z1, z2, z7, z8, k, i, lam)
    if inv is InvariantSet.I1:
        return np.array([z1 - rhs[0]])
    if inv is InvariantSet.I3:
        return np.array([z1 - rhs[0], z7 - rhs[2]])
    return np.array([z1 - rhs[0], z2 - rhs[1]])


def lift_reduced(z1, z2, z7, z8, k: int, i: int, lam: float, *, damping=0.5, tol=1e-13, max_iter=100_000) -> WeaklyPeriodicLaw:
    """Complete a reduced solution to the full eight-component law.

    The pairs ``(z3, z4)`` and ``(z5, z6)`` are recovered from their own rows
    by damped fixed-point iteration with the retained variables held fixed.
    """
    _check_ki(k, i)
    _positive(z1, z2, z7, z8, lam)
    f = lambda x: 1.0 + lam * x

    def pair(fixed_a, fixed_b, start):
        # x = f(y)^-(i-1) f(fixed_a)^-(k-i+1),  y = f(x)^-(i-1) f(fixed_b)^-(k-i+1)
        x, y = start, start
        for _ in range(max_iter):
            nx = f(y) ** -(i - 1) * f(fixed_a) ** -(k - i + 1)
            ny = f(x) ** -(i - 1) * f(fixed_b) ** -(k - i + 1)
            nx = damping * x + (1 - damping) * nx
            ny = damping * y + (1 - damping) * ny
            if max(abs(nx - x), abs(ny - y)) < tol:
                return nx, ny
            x, y = nx, ny
        raise ConvergenceError(f"lift did not converge in {max_iter} steps")

    z3, z4 = pair(z2, z7, z1)
    z5, z6 = pair(z1, z8, z2)
    return WeaklyPeriodicLaw(tuple(float(c) for c in (z1, z2, z3, z4, z5, z6, z7, z8)), k, i, lam)


# -- specialised systems for k = i = 2 and k = i ----------------------------

def i2_system_residual(s, t, lam: float) -> np.ndarray:
    """Square-root form on I2 (k = i = 2) with ``s = sqrt(z1)``, ``t = sqrt(z2)``."""
    return np.array([
        s - (1 + lam * s**2) / (1 + lam * s**2 + lam * t),
        t - (1 + lam * t**2) / (1 + lam * t**2 + lam * s),
    ])


def i3_system_residual(s, t, lam: float) -> np.ndarray:
    """Square-root form on I3 (k = i = 2) with ``s = sqrt(z1)``, ``t = sqrt(z7)``."""
    return np.array([
        s - (1 + lam * t**2) / (1 + lam * t**2 + lam * t),
        t - (1 + lam * s**2) / (1 + lam * s**2 + lam * s),
    ])


def i4_system_residual(x, y, k: int, lam: float) -> np.ndarray:
    """Polynomial form on I4 for ``k = i`` with ``x = z1^(1/k)``, ``y = z2^(1/k)``."""
    return np.array([
        lam * x**k + lam * x * y**k + x - lam * y**k - 1,
        lam * y**k + lam * y * x**k + y - lam * x**k - 1,
    ])


def ti3_residual(z1, z2, graph: FertileGraph, k: int, lam: float) -> np.ndarray:
    """Translation-invariant equations of the 3-state model in the scaled fields."""
    if graph.num_states != 3:
        raise ValueError("ti3_residual needs a 3-state graph")
    a = graph.incidence.astype(float)
    den = a[0, 0] + a[0, 1] * z1 + a[0, 2] * z2
    if np.any(den <= 0):
        raise ValueError("zero denominator in the translation-invariant equations")
    num1 = a[1, 0] + a[1, 1] * z1 + a[1, 2] * z2
    num2 = a[2, 0] + a[2, 1] * z1 + a[2, 2] * z2
    return np.array([z1 - lam * (num1 / den) ** k, z2 - lam * (num2 / den) ** k])
