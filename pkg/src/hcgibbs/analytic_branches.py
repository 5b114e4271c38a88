"""Closed-form branch curves of the invariant-set systems.

Eliminating one unknown from the I2 (k = i = 2) square-root system yields a
degree-9 polynomial in ``t``; read as a cubic in the activity it has the
three branches ``phi1, phi2, phi3``.  The I3 system yields a cubic in the
activity with branches ``lt1, lt2, lt3``.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as P


def _open_unit(t) -> None:
    t = np.asarray(t)
    if np.any((t <= 0) | (t >= 1)):
        raise ValueError("t must lie in the open interval (0, 1)")


def i2_poly(lam: float) -> np.ndarray:
    """Coefficients (ascending powers of ``t``) of the degree-9 I2 polynomial."""
    l = lam
    return np.array([
        -1.0,
        l + 3,
        -(6 * l + 3),
        2 * l**2 + 11 * l + 1,
        -(7 * l**2 + 9 * l),
        12 * l**2 + 3 * l,
        -(9 * l**2 + 2 * l**3),
        4 * l**3 + 3 * l**2,
        -3 * l**3,
        l**3,
    ])


def i3_poly(lam: float) -> np.ndarray:
    """Coefficients (ascending powers of ``t``) of the degree-5 I3 polynomial."""
    l = lam
    return np.array([
        -1.0 - l,
        1.0,
        -2 * l**2,
        3 * l**2 + 2 * l,
        l**2,
        2 * l**3 + l**2,
    ])


def i2_lambda_cubic(t: float) -> np.ndarray:
    """The I2 polynomial regrouped by powers of the activity (ascending)."""
    return np.array([
        t**3 - 3 * t**2 + 3 * t - 1,
        11 * t**3 - 9 * t**4 + 3 * t**5 - 6 * t**2 + t,
        3 * t**7 - 9 * t**6 + 12 * t**5 - 7 * t**4 + 2 * t**3,
        t**9 - 3 * t**8 + 4 * t**7 - 2 * t**6,
    ])


def i3_lambda_cubic(t: float) -> np.ndarray:
    """The I3 polynomial as a cubic in the activity (ascending)."""
    return np.array([t - 1, 2 * t**3 - 1, t**5 + t**4 + 3 * t**3 - 2 * t**2, 2 * t**5])


def eval_poly(coeffs, x):
    return P.polyval(x, np.asarray(coeffs, dtype=float))


def poly_scale(coeffs, x) -> float:
    """Sum of absolute term magnitudes; the natural scale for a relative residual."""
    coeffs = np.asarray(coeffs, dtype=float)
    return float(np.sum(np.abs(coeffs) * np.abs(x) ** np.arange(len(coeffs))))


def i2_branches(t):
    _open_unit(t)
    phi1 = -((t - 1) ** 2) / (t**2 - 2 * t - 2) ** 2
    phi2 = (1 - t) / t**3
    phi3 = 1 / (t * (1 - t))
    return phi1, phi2, phi3


def i2_negative_branch(t):
    """Third root of the I2 cubic in the activity; negative on (0, 1)."""
    _open_unit(t)
    return -((1 - t) ** 2) / (t**2 * (t**2 - 2 * t + 2))


def i3_discriminant(t):
    return t**4 + 2 * t**3 - 5 * t**2 + 2 * t + 1


def i3_branches(t):
    """Branches ``(lt1, lt2, lt3)``; the last two are ``None`` where the square root is not real."""
    _open_unit(t)
    lt1 = (1 - t) / t**3
    d = i3_discriminant(t)
    if np.ndim(t) == 0:
        if d < 0:
            return lt1, None, None
        r = np.sqrt(d)
    else:
        r = np.sqrt(np.where(d >= 0, d, np.nan))
    lt2 = -(t**2 + t + 1 - r) / (4 * t**2)
    lt3 = -(t**2 + t + 1 + r) / (4 * t**2)
    return lt1, lt2, lt3


def branch_poly_consistency(case: str, t: float) -> float:
    """Largest relative residual of the cubic in the activity over its positive real branches."""
    _open_unit(t)
    if case == "I2":
        cubic = i2_lambda_cubic(t)
        values = i2_branches(t)
    elif case == "I3":
        cubic = i3_lambda_cubic(t)
        values = i3_branches(t)
    else:
        raise ValueError(f"unknown case {case!r}")
    worst = 0.0
    for lam in values:
        if lam is None or not np.isfinite(lam) or lam <= 0:
            continue
        worst = max(worst, abs(eval_poly(cubic, lam)) / poly_scale(cubic, lam))
    return worst


def i4_bracket(x, y, k: int, lam: float):
    """The stated cofactor ``1 + lam (x^(k-1) + ... + y^(k-1)) (2 - x y)`` of ``x - y``."""
    h = sum(x ** (k - 1 - j) * y**j for j in range(k))
    return 1 + lam * h * (2 - x * y)


def i4_cofactor(x, y, k: int, lam: float):
    """Exact cofactor of ``x - y`` in the difference of the two I4 equations.

    ``2 lam (x^k - y^k) - lam x y (x^(k-1) - y^(k-1)) + (x - y)`` divided by
    ``x - y``.  For ``k = 2`` it agrees with :func:`i4_bracket` exactly on the
    line ``x + y = 1``; for ``k = 1`` and ``k >= 3`` the two differ off the
    diagonal.
    """
    h = sum(x ** (k - 1 - j) * y**j for j in range(k))
    h_low = sum(x ** (k - 2 - j) * y**j for j in range(k - 1))
    return 1 + lam * (2 * h - x * y * h_low)


def i4_difference(x, y, k: int, lam: float):
    """First I4 equation minus the second."""
    return (lam * x**k + lam * x * y**k + x - lam * y**k) - (lam * y**k + lam * y * x**k + y - lam * x**k)


def i4_factor_identity(x, y, k: int, lam: float, cofactor=i4_bracket):
    """Gap ``|difference - (x - y) * cofactor|``; the default cofactor is the stated one."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return abs(i4_difference(x, y, k, lam) - (x - y) * cofactor(x, y, k, lam))


def ti_curve_phi(x, k: int):
    _open_unit(x)
    return (1 - x) / x ** (k + 1)
