"""Fertile constraint graphs for hard-core models.

States are integers ``0..m`` with ``0`` the vacant state.  A pair of
neighbouring states is admissible when it is an edge of the graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class UnknownGraphError(ValueError):
    pass


_EDGES = {
    "pipe": (2, [(0, 0), (0, 1)]),
    "hinge": (3, [(0, 0), (0, 1), (0, 2), (1, 1), (2, 2)]),
    "wand": (3, [(0, 1), (0, 2), (1, 1), (2, 2)]),
}

GRAPH_NAMES = tuple(_EDGES)


@dataclass(frozen=True)
class FertileGraph:
    name: str
    num_states: int
    edges: tuple[tuple[int, int], ...]
    _incidence: np.ndarray = field(repr=False, compare=False)

    @property
    def incidence(self) -> np.ndarray:
        return self._incidence.copy()

    def admissible(self, a: int, b: int) -> bool:
        return is_admissible_pair(self, a, b)


def fertile_graph(name: str) -> FertileGraph:
    """Look up one of the named graphs (``pipe``, ``hinge`` or ``wand``)."""
    if name not in _EDGES:
        if name == "wrench":
            raise UnknownGraphError("the wrench graph has no known edge set and is not supported")
        raise UnknownGraphError(f"unknown graph {name!r}; expected one of {', '.join(GRAPH_NAMES)}")
    m, edges = _EDGES[name]
    a = np.zeros((m, m), dtype=np.int8)
    for i, j in edges:
        a[i, j] = a[j, i] = 1
    a.setflags(write=False)
    return FertileGraph(name, m, tuple(edges), a)


def incidence_matrix(graph: FertileGraph | str) -> np.ndarray:
    if isinstance(graph, str):
        graph = fertile_graph(graph)
    return graph.incidence


def is_admissible_pair(graph: FertileGraph, a: int, b: int) -> bool:
    for s in (a, b):
        if not 0 <= s < graph.num_states:
            raise ValueError(f"state {s} out of range for {graph.name} (0..{graph.num_states - 1})")
    return bool(graph._incidence[a, b])


PIPE = fertile_graph("pipe")
HINGE = fertile_graph("hinge")
WAND = fertile_graph("wand")
