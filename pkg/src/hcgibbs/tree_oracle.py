"""Finite Cayley-tree volumes and the exact-enumeration consistency oracle.

Vertices of ``V_n`` are numbered breadth first, so the first ``|V_{n-1}|``
vertices of a depth-``n`` tree form ``V_{n-1}``.  Configurations are rows
of an ``int8`` array indexed by vertex.

Boundary fields are arrays of shape ``(num_vertices, num_states)`` holding
the per-state weights ``z_{s,x}`` that enter the finite-volume measure
through the outermost level.  With ``z_{0,x} = 1`` the 2-state weight
``z_{1,x}`` is exactly the boundary-law variable of the recursion
``z_x = prod_y (1 + lam z_y)^-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Iterable

import numpy as np

from .hc_graphs import FertileGraph

MAX_VERTICES = 32
MAX_RAW_CONFIGURATIONS = 10**8


class CapacityError(ValueError):
    pass


class CosetClass(IntEnum):
    H0 = 0  # even A-count, even length
    H1 = 1  # odd A-count, even length
    H2 = 2  # even A-count, odd length
    H3 = 3  # odd A-count, odd length


# (own class, parent class) -> index 1..8 of the weakly periodic 8-tuple
SLOT_OF_PAIR = {
    (CosetClass.H3, CosetClass.H1): 1,
    (CosetClass.H1, CosetClass.H3): 2,
    (CosetClass.H3, CosetClass.H0): 3,
    (CosetClass.H0, CosetClass.H3): 4,
    (CosetClass.H1, CosetClass.H2): 5,
    (CosetClass.H2, CosetClass.H1): 6,
    (CosetClass.H2, CosetClass.H0): 7,
    (CosetClass.H0, CosetClass.H2): 8,
}


@dataclass(frozen=True)
class FiniteTree:
    """The ball ``V_n`` of radius ``n`` around the root of a Cayley tree of order ``k``.

    ``label[x]`` is the generator label (``1..k+1``) of the edge joining ``x``
    to its parent, ``0`` for the root.
    """

    k: int
    n: int
    parent: tuple[int, ...]
    depth: tuple[int, ...]
    label: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.parent)

    def level(self, j: int) -> list[int]:
        return [x for x, d in enumerate(self.depth) if d == j]

    def level_size(self, j: int) -> int:
        """Number of vertices in ``V_j``."""
        return sum(1 for d in self.depth if d <= j)

    def path_labels(self, x: int) -> list[int]:
        labels = []
        while x != 0:
            labels.append(self.label[x])
            x = self.parent[x]
        return labels[::-1]

    def edge_labels_at(self, x: int) -> list[int]:
        own = [self.label[x]] if x != 0 else []
        return own + [self.label[y] for y in self.children[x]]


def tree_size(k: int, n: int) -> int:
    return 1 + sum((k + 1) * k ** (j - 1) for j in range(1, n + 1))


@lru_cache(maxsize=None)
def build_tree(k: int, n: int) -> FiniteTree:
    if k < 1 or n < 0:
        raise ValueError(f"need k >= 1 and n >= 0, got k={k}, n={n}")
    if tree_size(k, n) > MAX_VERTICES:
        raise CapacityError(f"|V_{n}| = {tree_size(k, n)} for k={k} exceeds {MAX_VERTICES} vertices")
    parent, depth, label = [-1], [0], [0]
    children: list[list[int]] = [[]]
    frontier = [0]
    for d in range(1, n + 1):
        nxt = []
        for x in frontier:
            # smallest labels first, skipping the label of the edge to the parent
            for a in range(1, k + 2):
                if a == label[x]:
                    continue
                y = len(parent)
                parent.append(x)
                depth.append(d)
                label.append(a)
                children.append([])
                children[x].append(y)
                nxt.append(y)
        frontier = nxt
    return FiniteTree(k, n, tuple(parent), tuple(depth), tuple(label), tuple(tuple(c) for c in children))


def coset_class(tree: FiniteTree, x: int, A: Iterable[int]) -> CosetClass:
    A = set(A)
    labels = tree.path_labels(x)
    a_odd = sum(1 for a in labels if a in A) % 2
    return CosetClass(2 * (len(labels) % 2) + a_odd)


def classify_vertex(tree: FiniteTree, x: int, A: Iterable[int]) -> tuple[CosetClass, CosetClass]:
    """Coset classes of ``x`` and of its parent ``x_down``."""
    if x == 0:
        raise ValueError("the root has no parent; its class is H0")
    A = tuple(A)
    return coset_class(tree, x, A), coset_class(tree, tree.parent[x], A)


def slot_index(tree: FiniteTree, x: int, A: Iterable[int]) -> int:
    """Index ``1..8`` of the weakly periodic value carried by non-root vertex ``x``."""
    return SLOT_OF_PAIR[classify_vertex(tree, x, A)]


def _check_capacity(tree: FiniteTree, graph: FertileGraph) -> None:
    if graph.num_states**tree.size > MAX_RAW_CONFIGURATIONS:
        raise CapacityError(
            f"{graph.num_states}^{tree.size} raw configurations exceed {MAX_RAW_CONFIGURATIONS:.0e}"
        )


@lru_cache(maxsize=16)
def _enumerate(tree: FiniteTree, graph_name: str, incidence_bytes: bytes, m: int) -> np.ndarray:
    a = np.frombuffer(incidence_bytes, dtype=np.int8).reshape(m, m)
    configs = np.arange(m, dtype=np.int8).reshape(m, 1)
    for v in range(1, tree.size):
        rows = np.repeat(configs, m, axis=0)
        col = np.tile(np.arange(m, dtype=np.int8), len(configs))
        keep = a[rows[:, tree.parent[v]], col] == 1
        configs = np.concatenate([rows[keep], col[keep, None]], axis=1)
    configs.setflags(write=False)
    return configs


def enumerate_admissible(tree: FiniteTree, graph: FertileGraph) -> np.ndarray:
    """All G-admissible configurations on ``V_n``, one per row, in lexicographic vertex order."""
    _check_capacity(tree, graph)
    return _enumerate(tree, graph.name, graph.incidence.tobytes(), graph.num_states)


def transfer_matrix_count(tree: FiniteTree, graph: FertileGraph) -> int:
    """Number of admissible configurations by leaf-to-root dynamic programming."""
    a = graph.incidence.astype(object)
    counts: list = [None] * tree.size
    for x in reversed(range(tree.size)):
        c = np.ones(graph.num_states, dtype=object)
        for y in tree.children[x]:
            c = c * a.dot(counts[y])
        counts[x] = c
    return int(sum(counts[0]))


def _validate_field(tree: FiniteTree, graph: FertileGraph, boundary, levels: Iterable[int]) -> np.ndarray:
    field = np.asarray(boundary, dtype=float)
    if field.shape != (tree.size, graph.num_states):
        raise ValueError(f"boundary field must have shape {(tree.size, graph.num_states)}, got {field.shape}")
    for j in levels:
        rows = field[tree.level(j)]
        if not np.all(np.isfinite(rows)) or np.any(rows <= 0):
            raise ValueError(f"boundary weights on level {j} must be positive")
    return field


def _volume_weights(tree: FiniteTree, graph: FertileGraph, lam: float, field: np.ndarray, n: int):
    """Unnormalised weights of every admissible configuration on ``V_n``."""
    configs = enumerate_admissible(build_tree(tree.k, n), graph)
    occupied = np.count_nonzero(configs, axis=1)
    log_w = occupied * np.log(lam)
    for x in tree.level(n):
        log_w = log_w + np.log(field[x, configs[:, x]])
    # rescale before exponentiating; the normalisation absorbs it
    w = np.exp(log_w - log_w.max())
    return configs, w


def finite_volume_measure(tree: FiniteTree, graph: FertileGraph, lam: float, boundary) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(configurations, probabilities)`` of ``mu^(n)`` on ``V_n``."""
    if lam <= 0:
        raise ValueError("activity must be positive")
    field = _validate_field(tree, graph, boundary, [tree.n])
    configs, w = _volume_weights(tree, graph, lam, field, tree.n)
    return configs, w / w.sum()


def partition_function(tree: FiniteTree, graph: FertileGraph, lam: float, boundary) -> float:
    field = _validate_field(tree, graph, boundary, [tree.n])
    configs = enumerate_admissible(tree, graph)
    w = lam ** np.count_nonzero(configs, axis=1).astype(float)
    for x in tree.level(tree.n):
        w = w * field[x, configs[:, x]]
    return float(w.sum())


def measure_mu_n(tree: FiniteTree, graph: FertileGraph, lam: float, boundary, sigma) -> float:
    sigma = np.asarray(sigma, dtype=np.int8)
    if sigma.shape != (tree.size,):
        raise ValueError(f"configuration must assign a state to each of the {tree.size} vertices")
    for x in range(1, tree.size):
        if not graph.admissible(int(sigma[tree.parent[x]]), int(sigma[x])):
            raise ValueError(f"configuration is not {graph.name}-admissible at edge ({tree.parent[x]}, {x})")
    configs, probs = finite_volume_measure(tree, graph, lam, boundary)
    hit = np.flatnonzero(np.all(configs == sigma, axis=1))
    return float(probs[hit[0]])


def _codes(configs: np.ndarray, m: int) -> np.ndarray:
    radix = m ** np.arange(configs.shape[1], dtype=np.int64)
    return configs.astype(np.int64) @ radix


def consistency_residuals(tree: FiniteTree, graph: FertileGraph, lam: float, boundary) -> np.ndarray:
    """Per-configuration residuals of the projection ``mu^(n) -> mu^(n-1)``.

    Entry ``j`` corresponds to the ``j``-th admissible configuration on
    ``V_{n-1}`` and equals the marginal of ``mu^(n)`` minus ``mu^(n-1)``.
    """
    n = tree.n
    if n < 1:
        raise ValueError("consistency needs n >= 1")
    if lam <= 0:
        raise ValueError("activity must be positive")
    field = _validate_field(tree, graph, boundary, [n, n - 1])
    m = graph.num_states
    configs_n, w_n = _volume_weights(tree, graph, lam, field, n)
    configs_p, w_p = _volume_weights(tree, graph, lam, field, n - 1)
    inner = tree.level_size(n - 1)
    codes_p = _codes(configs_p, m)
    # configs_p is sorted lexicographically with vertex 0 most significant; codes are
    # little-endian so sort explicitly before matching
    order = np.argsort(codes_p)
    pos = np.searchsorted(codes_p[order], _codes(configs_n[:, :inner], m))
    marginal = np.bincount(order[pos], weights=w_n, minlength=len(configs_p))
    return marginal / w_n.sum() - w_p / w_p.sum()


def check_consistency(tree: FiniteTree, graph: FertileGraph, lam: float, boundary) -> float:
    """Largest absolute consistency residual between ``mu^(n)`` and ``mu^(n-1)``."""
    return float(np.max(np.abs(consistency_residuals(tree, graph, lam, boundary))))


# -- placing boundary laws on a finite tree ---------------------------------

def parent_weights(graph: FertileGraph, lam: float, child_rows: np.ndarray) -> np.ndarray:
    """Weights at a vertex that make the projection exact given its children's weights."""
    a = graph.incidence.astype(float)
    act = np.ones(graph.num_states)
    act[1:] = lam
    sums = (child_rows * act) @ a.T  # sums[y, j] = sum_s a_js lam^[s>0] w_s(y)
    w = np.prod(sums, axis=0)
    return w / w[0]


def _fill_root(tree: FiniteTree, graph: FertileGraph, lam: float, field: np.ndarray) -> np.ndarray:
    if tree.n >= 1:
        field[0] = parent_weights(graph, lam, field[list(tree.children[0])])
    else:
        field[0] = 1.0
    return field


def constant_field(tree: FiniteTree, graph: FertileGraph, lam: float, weights) -> np.ndarray:
    """Translation-invariant field: the same per-state weights at every non-root vertex."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (graph.num_states,):
        raise ValueError(f"need {graph.num_states} per-state weights")
    field = np.tile(weights, (tree.size, 1))
    return _fill_root(tree, graph, lam, field)


def weakly_periodic_field(tree: FiniteTree, graph: FertileGraph, lam: float, z8, i: int) -> np.ndarray:
    """2-state field carrying ``z8[slot - 1]`` at each non-root vertex, with ``A = {1..i}``."""
    if graph.num_states != 2:
        raise ValueError("weakly periodic laws are defined for the 2-state model")
    z8 = np.asarray(z8, dtype=float)
    if z8.shape != (8,):
        raise ValueError("need the eight values z1..z8")
    if not 1 <= i <= tree.k + 1:
        raise ValueError(f"i must lie in 1..{tree.k + 1}")
    A = range(1, i + 1)
    field = np.ones((tree.size, 2))
    for x in range(1, tree.size):
        field[x, 1] = z8[slot_index(tree, x, A) - 1]
    return _fill_root(tree, graph, lam, field)
