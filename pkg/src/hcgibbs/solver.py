"""Root isolation, counting and classification for the boundary-law systems.

All two-variable systems are solved by multi-start damped Newton from a
regular seed grid, vectorised over the seeds.  Systems that are symmetric
under swapping their coordinates also get their diagonal root from a
one-dimensional bracketing solve, so the translation-invariant solution is
never lost near a bifurcation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage
from scipy.optimize import brentq, minimize_scalar

from . import analytic_branches as ab
from . import boundary_laws as bl
from .hc_graphs import HINGE, WAND, PIPE, FertileGraph
from .tree_oracle import build_tree, check_consistency, constant_field, weakly_periodic_field

TRANSLATION_INVARIANT = "translation_invariant"
WEAKLY_PERIODIC = "weakly_periodic_nonperiodic"

RESIDUAL_GATE = 1e-10
MERGE_TOL = 1e-8
EQUAL_TOL = 1e-8
TANGENCY_TOL = 1e-9
EDGE = 1e-9
SEEDS = 64


class SolverError(RuntimeError):
    pass


class System(str, Enum):
    I2 = "I2"
    I3 = "I3"
    I4 = "I4"
    WP8 = "WP8"
    TI3_HINGE = "ti3-hinge"
    TI3_WAND = "ti3-wand"
    TI2 = "ti2"

    @classmethod
    def parse(cls, name: str) -> "System":
        for s in cls:
            if name.lower() == s.value.lower():
                return s
        raise ValueError(f"unknown system {name!r}; expected one of {', '.join(s.value for s in cls)}")

    @property
    def graph(self) -> FertileGraph:
        return {System.TI3_HINGE: HINGE, System.TI3_WAND: WAND}.get(self, PIPE)


@dataclass(frozen=True)
class SolutionRecord:
    system: System
    lam: float
    coordinates: tuple[float, ...]
    residual: float
    classification: str
    k: int = 2
    i: int = 2
    tangency: bool = False
    invariant: bl.InvariantSet | None = None

    @property
    def symmetric(self) -> bool:
        c = self.coordinates
        return all(abs(x - c[0]) <= EQUAL_TOL for x in c)

    def reduced(self) -> tuple[float, float, float, float]:
        """The ``(z1, z2, z7, z8)`` values of a 2-state record."""
        c = self.coordinates
        if self.system is System.I2:
            s, t = c
            return s * s, t * t, s * s, t * t
        if self.system is System.I3:
            s, t = c
            return s * s, s * s, t * t, t * t
        if self.system is System.I4:
            x, y = c
            k = self.k
            return x**k, y**k, y**k, x**k
        if self.system is System.WP8:
            if self.invariant is not None:
                return self.invariant.expand(*c) if len(c) == 2 else self.invariant.expand(c[0], c[0])
            return c[0], c[1], c[6], c[7]
        if self.system is System.TI2:
            return (c[0],) * 4
        raise ValueError(f"{self.system.value} records have no weakly periodic form")

    def boundary_law(self) -> bl.WeaklyPeriodicLaw:
        if self.system is System.WP8 and len(self.coordinates) == 8:
            return bl.WeaklyPeriodicLaw(self.coordinates, self.k, self.i, self.lam)
        return bl.lift_reduced(*self.reduced(), self.k, self.i, self.lam)

    def as_dict(self) -> dict:
        return {
            "system": self.system.value,
            "lambda": self.lam,
            "k": self.k,
            "i": self.i,
            "coordinates": list(self.coordinates),
            "residual": self.residual,
            "classification": self.classification,
            "tangency": self.tangency,
        }


def classify(coordinates: Sequence[float], tol: float = EQUAL_TOL) -> str:
    c = [float(x) for x in coordinates]
    if max(c) - min(c) <= tol:
        return TRANSLATION_INVARIANT
    return WEAKLY_PERIODIC


# -- multi-start damped Newton ----------------------------------------------

def _jacobian(F, u, v):
    """Columns ``dF/du`` and ``dF/dv`` by complex-step differentiation, each of shape (2, N)."""
    h = 1e-30
    ju = F(u + 1j * h, v + 0j).imag / h
    jv = F(u + 0j, v + 1j * h).imag / h
    return ju, jv


def multistart_newton(
    F: Callable,
    lower: tuple[float, float],
    upper: tuple[float, float],
    seeds: int = SEEDS,
    max_iter: int = 300,
    tol: float = 1e-13,
    step_tol: float = 1e-10,
) -> np.ndarray:
    """Run damped Newton from a ``seeds x seeds`` grid; return converged points, shape ``(M, 2)``.

    ``F(u, v)`` must broadcast and return an array of shape ``(2, N)``.
    ``F`` must also accept complex input; derivatives use the complex step.
    Iterates are clipped to the box.  A point counts as converged when its
    residual is below ``tol`` and its full (undamped) Newton step is below
    ``step_tol``; points whose damped step vanishes otherwise are dropped.
    """
    gu = np.linspace(lower[0], upper[0], seeds + 2)[1:-1]
    gv = np.linspace(lower[1], upper[1], seeds + 2)[1:-1]
    u, v = (a.ravel() for a in np.meshgrid(gu, gv, indexing="ij"))
    lo = np.array(lower)[:, None]
    hi = np.array(upper)[:, None]
    active = np.ones(u.size, dtype=bool)
    done = np.zeros(u.size, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            x = np.vstack([u[idx], v[idx]])
            f = F(x[0], x[1])
            ju, jv = _jacobian(F, x[0], x[1])
            det = ju[0] * jv[1] - jv[0] * ju[1]
            du = -(jv[1] * f[0] - jv[0] * f[1]) / det
            dv = -(-ju[1] * f[0] + ju[0] * f[1]) / det
            step = np.vstack([du, dv])
            bad = ~np.all(np.isfinite(step), axis=0)
            step[:, bad] = 0.0
            norm0 = np.max(np.abs(f), axis=0)
            t = np.ones(idx.size)
            new = np.clip(x + step, lo, hi)
            for _halve in range(30):
                fn = np.max(np.abs(F(new[0], new[1])), axis=0)
                worse = ~(fn <= norm0) & (t > 1e-9)
                if not worse.any():
                    break
                t = np.where(worse, t / 2, t)
                new = np.clip(x + t * step, lo, hi)
            moved = np.max(np.abs(new - x), axis=0)
            full = np.max(np.abs(step), axis=0)
            u[idx], v[idx] = new[0], new[1]
            conv = (fn < tol) & (full < step_tol * np.maximum(1.0, np.max(np.abs(x), axis=0)))
            done[idx[conv]] = True
            stalled = bad | (moved == 0) & ~conv
            active[idx[conv | stalled]] = False
    pts = np.column_stack([u[done], v[done]])
    return pts


def _uncertainty_radius(F: Callable, pts: np.ndarray, floor: float) -> np.ndarray:
    """Positional uncertainty ``floor / sigma_min(J)`` of each point as a root of ``F``."""
    if pts.size == 0:
        return np.zeros(0)
    with np.errstate(all="ignore"):
        ju, jv = _jacobian(F, pts[:, 0], pts[:, 1])
        J = np.stack([ju, jv], axis=-1).transpose(1, 0, 2)
        sigma = np.linalg.svd(J, compute_uv=False)[:, -1]
        return np.where(sigma > 0, floor / sigma, np.inf)


def merge_points(points: np.ndarray, tol: float = MERGE_TOL, F: Callable | None = None, floor: float = 1e-14) -> np.ndarray:
    """Drop duplicates, keeping the first occurrence.

    Points closer than ``tol`` in max-norm are duplicates.  With ``F`` given,
    each point also carries the radius ``floor / sigma_min(J)`` within which a
    residual of size ``floor`` cannot locate it; two points are duplicates
    when they lie within the larger of their radii.  Near a degenerate root
    the Jacobian is almost singular and Newton stalls on a whole patch of
    numerically exact zeros, which this collapses to one point.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    radius = _uncertainty_radius(F, pts, floor) if F is not None else np.zeros(len(pts))
    kept: list[int] = []
    for j, p in enumerate(pts):
        if any(np.max(np.abs(p - pts[q])) <= max(tol, radius[j], radius[q]) for q in kept):
            continue
        kept.append(j)
    return pts[kept]


def _diagonal_roots(F, lo: float, hi: float, n: int = 4000) -> list[float]:
    """Roots of the first component along ``u = v`` by sign changes and Brent refinement."""
    g = lambda x: float(F(np.array([x]), np.array([x]))[0][0])
    xs = np.linspace(lo, hi, n)
    vals = F(xs, xs)[0]
    roots = []
    for a, b, fa, fb in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if fa == 0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return roots


def _triangle_hits(c, p, q) -> np.ndarray:
    """Whether the two planes ``c + p a + q b`` share a zero in the unit triangle ``a, b >= 0, a + b <= 1``."""
    det = p[0] * q[1] - q[0] * p[1]
    with np.errstate(all="ignore"):
        a = (-c[0] * q[1] + q[0] * c[1]) / det
        b = (-p[0] * c[1] + c[0] * p[1]) / det
    return (det != 0) & (a >= 0) & (b >= 0) & (a + b <= 1)


def grid_scan_count(F: Callable, lower, upper, n: int = 2000) -> int:
    """Count roots on an ``n x n`` cell grid by piecewise-linear interpolation.

    Independent of the Newton path.  Each cell is split into two triangles on
    which both residual components are replaced by their linear
    interpolants; a triangle is marked when the two interpolated zero lines
    cross inside it.  Marked cells are grouped by connectivity and each
    group counts once.
    """
    gu = np.linspace(lower[0], upper[0], n + 1)
    gv = np.linspace(lower[1], upper[1], n + 1)
    U, V = np.meshgrid(gu, gv, indexing="ij")
    with np.errstate(all="ignore"):
        R = F(U, V)
    f00, f10, f01, f11 = R[:, :-1, :-1], R[:, 1:, :-1], R[:, :-1, 1:], R[:, 1:, 1:]
    lower_tri = _triangle_hits(f00, f10 - f00, f01 - f00)
    upper_tri = _triangle_hits(f11, f01 - f11, f10 - f11)
    cells = lower_tri | upper_tri
    _, count = ndimage.label(cells, structure=np.ones((3, 3)))
    return int(count)


# -- systems -----------------------------------------------------------------

def _box01():
    return (EDGE, EDGE), (1 - EDGE, 1 - EDGE)


def _records(system, lam, pts, resid_fn, k, i, invariant=None, transform=None):
    recs = []
    for p in pts:
        coords = tuple(float(c) for c in (transform(p) if transform else p))
        r = float(np.max(np.abs(resid_fn(*coords))))
        if r >= RESIDUAL_GATE:
            continue
        recs.append(SolutionRecord(system, lam, coords, r, classify(coords), k, i, invariant=invariant))
    return recs


def _solve_swap_symmetric(system, lam, F, lower, upper, resid_fn, k, i, transform=None, invariant=None):
    pts = multistart_newton(F, lower, upper)
    diag = _diagonal_roots(F, lower[0], upper[0])
    pts = merge_points(np.vstack([np.array([[d, d] for d in diag]).reshape(-1, 2), pts]), F=F)
    recs = _records(system, lam, pts, resid_fn, k, i, invariant, transform)
    return sorted(recs, key=lambda r: r.coordinates)


def _check_lam(lam):
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"activity must be a positive finite number, got {lam}")


def solve_I2(lam: float) -> list[SolutionRecord]:
    """All solutions of the I2 square-root system (k = i = 2) in ``(0, 1)^2``."""
    _check_lam(lam)
    F = lambda s, t: bl.i2_system_residual(s, t, lam)
    resid = lambda s, t: bl.i2_system_residual(s, t, lam)
    lower, upper = _box01()
    fold = critical_lambda(System.I2, 2, 2)
    if abs(lam - fold.lam) <= TANGENCY_TOL + 8 * np.finfo(float).eps * fold.lam:
        # the asymmetric branch is tangent here: one symmetric root plus one fold root
        diag = _diagonal_roots(F, lower[0], upper[0])
        recs = _records(System.I2, lam, np.array([[d, d] for d in diag]), resid, 2, 2)
        t = fold.argument
        tangent = (1 - t, t)
        r = float(np.max(np.abs(resid(*tangent))))
        recs.append(SolutionRecord(System.I2, lam, tangent, r, classify(tangent), 2, 2, tangency=True))
        return recs
    return _solve_swap_symmetric(System.I2, lam, F, lower, upper, resid, 2, 2)


def solve_I3(lam: float) -> list[SolutionRecord]:
    _check_lam(lam)
    F = lambda s, t: bl.i3_system_residual(s, t, lam)
    lower, upper = _box01()
    return _solve_swap_symmetric(System.I3, lam, F, lower, upper, F, 2, 2)


def solve_I4(lam: float, k: int) -> list[SolutionRecord]:
    """Solutions of the polynomial I4 system for ``k = i``."""
    _check_lam(lam)
    if k < 2:
        raise ValueError("the I4 polynomial form needs k >= 2")
    F = lambda x, y: bl.i4_system_residual(x, y, k, lam)
    lower, upper = _box01()
    return _solve_swap_symmetric(System.I4, lam, F, lower, upper, F, k, k)


def ti3_box(graph: FertileGraph, k: int, lam: float) -> float:
    """Upper bound on either scaled field at a translation-invariant solution."""
    a = graph.incidence
    return lam if a[0, 0] == 1 else max(1.0, lam * 2.0**k)


def solve_TI3(graph: FertileGraph | str, k: int, lam: float) -> list[SolutionRecord]:
    """Translation-invariant solutions of a 3-state model, searched in log coordinates."""
    _check_lam(lam)
    if isinstance(graph, str):
        from .hc_graphs import fertile_graph

        graph = fertile_graph(graph)
    system = {"hinge": System.TI3_HINGE, "wand": System.TI3_WAND}.get(graph.name)
    if system is None:
        raise ValueError("translation-invariant 3-state solutions need the hinge or wand graph")
    zmax = ti3_box(graph, k, lam)
    resid = lambda z1, z2: bl.ti3_residual(z1, z2, graph, k, lam)
    F = lambda a, b: bl.ti3_residual(np.exp(a), np.exp(b), graph, k, lam)
    lower = (math.log(zmax) - 30.0,) * 2
    upper = (math.log(zmax),) * 2
    recs = _solve_swap_symmetric(system, lam, F, lower, upper, resid, k, k, transform=np.exp)
    # every solution here is translation invariant; asymmetry is between the two occupied states
    return [replace(r, classification=TRANSLATION_INVARIANT) for r in recs]


def solve_TI2(k: int, lam: float) -> list[SolutionRecord]:
    _check_lam(lam)
    z = bl.ti2_fixed_point(k, lam)
    r = abs(float(bl.ti2_residual(z, k, lam)))
    return [SolutionRecord(System.TI2, lam, (z,), r, TRANSLATION_INVARIANT, k, 1)]


def solve_invariant(inv: bl.InvariantSet | str, k: int, i: int, lam: float) -> list[SolutionRecord]:
    """Solutions of the reduced system restricted to an invariant set, for any ``(k, i)``.

    Coordinates are the free ``z`` values (``(z1, z2)`` on I2 and I4,
    ``(z1, z7)`` on I3, ``(z1,)`` on I1).
    """
    _check_lam(lam)
    inv = bl.InvariantSet(inv)
    bl._check_ki(k, i)
    resid = lambda u, v=None: bl.invariant_residual(inv, u, u if v is None else v, k, i, lam)
    if inv is bl.InvariantSet.I1:
        g = lambda z: float(bl.invariant_residual(inv, z, z, k, i, lam)[0])
        roots = _diagonal_roots(lambda u, v: bl.invariant_residual(inv, u, v, k, i, lam), EDGE, 1 - EDGE)
        return [
            SolutionRecord(System.WP8, lam, (z,), abs(g(z)), TRANSLATION_INVARIANT, k, i, invariant=inv)
            for z in roots
            if abs(g(z)) < RESIDUAL_GATE
        ]
    F = lambda u, v: bl.invariant_residual(inv, u, v, k, i, lam)
    lower, upper = _box01()
    return _solve_swap_symmetric(System.WP8, lam, F, lower, upper, resid, k, i, invariant=inv)


def solve(system: System | str, lam: float, k: int = 2, i: int | None = None) -> list[SolutionRecord]:
    system = System.parse(system) if isinstance(system, str) else system
    if system is System.I2:
        _require_k2(system, k, i)
        return solve_I2(lam)
    if system is System.I3:
        _require_k2(system, k, i)
        return solve_I3(lam)
    if system is System.I4:
        if i is not None and i != k:
            raise ValueError("the I4 system is solved for k = i only")
        return solve_I4(lam, k)
    if system is System.TI3_HINGE:
        return solve_TI3(HINGE, k, lam)
    if system is System.TI3_WAND:
        return solve_TI3(WAND, k, lam)
    if system is System.TI2:
        return solve_TI2(k, lam)
    raise ValueError("use solve_invariant for the general reduced system")


def _require_k2(system, k, i):
    if k != 2 or (i is not None and i != 2):
        raise ValueError(f"the {system.value} square-root system is defined for k = i = 2")


def count_solutions(records: Sequence[SolutionRecord]) -> int:
    return len(records)


# -- critical activities -----------------------------------------------------

@dataclass(frozen=True)
class CriticalPoint:
    system: str
    lam: float
    argument: float | None
    method: str
    counts: tuple[int, int] | None = None


class CriticalNotFound(LookupError):
    pass


def _i2_fold() -> CriticalPoint:
    phi3 = lambda t: ab.i2_branches(t)[2]
    gs = minimize_scalar(phi3, bracket=(0.1, 0.3, 0.9), method="golden", tol=1e-10)
    # polish on the sign of the derivative, bracketed around the golden-section estimate
    d = lambda t: (2 * t - 1) / (t * (1 - t)) ** 2
    a, b = max(gs.x - 1e-3, 1e-6), min(gs.x + 1e-3, 1 - 1e-6)
    t = brentq(d, a, b, xtol=1e-16, rtol=4 * np.finfo(float).eps) if d(a) * d(b) < 0 else gs.x
    return CriticalPoint("I2", float(phi3(t)), float(t), "golden-section+polish")


@lru_cache(maxsize=None)
def _critical_cached(system: System, k: int, i: int, lam_min: float, lam_max: float, tol: float) -> CriticalPoint:
    if system is System.I2 and k == 2 and i == 2:
        return _i2_fold()
    counter = _counter(system, k, i)
    grid = np.geomspace(lam_min, lam_max, 60)
    counts = [counter(l) for l in grid]
    for a, b, ca, cb in zip(grid[:-1], grid[1:], counts[:-1], counts[1:]):
        if ca != cb:
            lam = bisect_count(counter, a, b, ca, cb, tol)
            return CriticalPoint(system.value, float(lam), None, "count-bisection", (ca, cb))
    raise CriticalNotFound(f"no change in solution count for {system.value} on [{lam_min}, {lam_max}]")


def critical_lambda(system: System | str, k: int = 2, i: int = 2, lam_min: float = 0.05, lam_max: float = 50.0, tol: float = 1e-8) -> CriticalPoint:
    """First activity at which the number of solutions changes."""
    system = System.parse(system) if isinstance(system, str) else system
    if system in (System.I3, System.I4, System.TI2):
        raise CriticalNotFound(f"{system.value} has a unique solution for every activity")
    return _critical_cached(system, k, i, lam_min, lam_max, tol)


def _counter(system: System, k: int, i: int, invariant: bl.InvariantSet | None = None):
    if system is System.WP8:
        return lambda lam: len(solve_invariant(invariant or bl.InvariantSet.I2, k, i, lam))
    if system is System.I2:
        # raw Newton count; the tangency convention applies only at the reported fold
        return lambda lam: len(_solve_swap_symmetric(System.I2, lam, _i2F(lam), *_box01(), _i2F(lam), 2, 2))
    return lambda lam: len(solve(system, lam, k, i if system is not System.TI2 else None))


def _i2F(lam):
    return lambda s, t: bl.i2_system_residual(s, t, lam)


def bisect_count(counter, a: float, b: float, ca: int, cb: int, tol: float) -> float:
    """Shrink ``[a, b]`` around a change of ``counter`` from ``ca`` to ``cb``."""
    while b - a > tol:
        mid = 0.5 * (a + b)
        c = counter(mid)
        if c == ca:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


# -- sweeps -----------------------------------------------------------------

@dataclass
class SweepPoint:
    lam: float
    records: list[SolutionRecord] = field(default_factory=list)
    error: str | None = None

    @property
    def count(self) -> int | None:
        return None if self.error else len(self.records)


@dataclass
class SweepReport:
    system: str
    k: int
    i: int
    points: list[SweepPoint]
    criticals: list[CriticalPoint]

    @property
    def lams(self) -> list[float]:
        return [p.lam for p in self.points]

    @property
    def counts(self) -> list[int | None]:
        return [p.count for p in self.points]


def sweep(
    system: System | str,
    k: int,
    i: int,
    lam_min: float,
    lam_max: float,
    steps: int,
    invariant=None,
    workers: int = 1,
) -> SweepReport:
    """Solve on an evenly spaced activity grid and locate every change in count.

    Grid points are solved by up to ``workers`` threads; results keep grid order.
    """
    system = System.parse(system) if isinstance(system, str) else system
    if not lam_min > 0 or lam_max <= lam_min:
        raise ValueError("need 0 < lam_min < lam_max")
    if steps < 2:
        raise ValueError("steps must be at least 2")
    inv = bl.InvariantSet(invariant) if invariant else None
    if system is System.WP8:
        run = lambda lam: solve_invariant(inv or bl.InvariantSet.I2, k, i, lam)
    else:
        run = lambda lam: solve(system, lam, k, i)
    grid = np.linspace(lam_min, lam_max, steps)

    def one(lam):
        try:
            return SweepPoint(float(lam), run(float(lam)))
        except (SolverError, ValueError, ArithmeticError) as exc:
            return SweepPoint(float(lam), error=str(exc))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(one, grid))
    else:
        points = [one(lam) for lam in grid]
    tol = (grid[1] - grid[0]) * 1e-3
    counter = lambda lam: len(run(lam))
    criticals = []
    for p, q in zip(points[:-1], points[1:]):
        if p.count is None or q.count is None or p.count == q.count:
            continue
        lam = bisect_count(counter, p.lam, q.lam, p.count, q.count, tol)
        criticals.append(CriticalPoint(system.value, lam, None, "count-bisection", (p.count, q.count)))
    return SweepReport(system.value, k, i, points, criticals)


# -- oracle chain -----------------------------------------------------------

def oracle_residual(record: SolutionRecord, n: int = 2, scale: float = 1.0) -> float:
    """Place the record's boundary law on ``V_n`` and return the consistency residual.

    ``scale`` multiplies every field value, which gives a perturbed law for
    negative controls.
    """
    tree = build_tree(record.k, n)
    if record.system in (System.TI3_HINGE, System.TI3_WAND):
        law = bl.TiLaw3(*record.coordinates, record.system.graph, record.k, record.lam)
        w = law.boundary_weights()
        w[1:] *= scale
        return check_consistency(tree, law.graph, record.lam, constant_field(tree, law.graph, record.lam, w))
    law = record.boundary_law()
    z8 = np.asarray(law.z) * scale
    return check_consistency(tree, PIPE, record.lam, weakly_periodic_field(tree, PIPE, record.lam, z8, law.i))
