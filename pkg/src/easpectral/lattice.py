"""Finite grid graphs, edge sets and cutsets.

Vertices are 1-based ``(x, y)`` pairs with ``1 <= x <= n_cols`` and
``1 <= y <= n_rows``; ``y`` grows upwards.  Vertex ``(x, y)`` has index
``(y - 1) * n_cols + (x - 1)``.

Edge indexing is frozen so that experiment files stay portable:

* horizontal edges ``((x, y), (x + 1, y))`` come first, row-major,
  index ``(y - 1) * (n_cols - 1) + (x - 1)``;
* vertical edges ``((x, y), (x, y + 1))`` follow, index
  ``H + (y - 1) * n_cols + (x - 1)`` with ``H = n_rows * (n_cols - 1)``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator

import numpy as np


class SizingError(ValueError):
    """Grid or problem size outside what an operation supports."""


class GeometryError(ValueError):
    """Requested geometry does not exist on the grid."""


Vertex = tuple[int, int]


@dataclass(frozen=True)
class GridGraph:
    n_cols: int
    n_rows: int

    def __post_init__(self):
        if int(self.n_cols) < 1 or int(self.n_rows) < 1:
            raise SizingError(f"grid dimensions must be positive, got {self.n_cols}x{self.n_rows}")

    @property
    def n_vertices(self) -> int:
        return self.n_cols * self.n_rows

    @property
    def n_horizontal(self) -> int:
        return self.n_rows * (self.n_cols - 1)

    @property
    def n_edges(self) -> int:
        return self.n_horizontal + self.n_cols * (self.n_rows - 1)

    def vertex_index(self, w: Vertex) -> int:
        x, y = w
        if not (1 <= x <= self.n_cols and 1 <= y <= self.n_rows):
            raise GeometryError(f"vertex {w} outside {self.n_cols}x{self.n_rows} grid")
        return (y - 1) * self.n_cols + (x - 1)

    def vertex(self, i: int) -> Vertex:
        return (i % self.n_cols + 1, i // self.n_cols + 1)

    def horizontal_edge(self, x: int, y: int) -> int:
        """Index of the edge ``((x, y), (x + 1, y))``."""
        if not (1 <= x < self.n_cols and 1 <= y <= self.n_rows):
            raise GeometryError(f"no horizontal edge at ({x}, {y})")
        return (y - 1) * (self.n_cols - 1) + (x - 1)

    def vertical_edge(self, x: int, y: int) -> int:
        """Index of the edge ``((x, y), (x, y + 1))``."""
        if not (1 <= x <= self.n_cols and 1 <= y < self.n_rows):
            raise GeometryError(f"no vertical edge at ({x}, {y})")
        return self.n_horizontal + (y - 1) * self.n_cols + (x - 1)

    def edge_between(self, a: Vertex, b: Vertex) -> int:
        (xa, ya), (xb, yb) = a, b
        if ya == yb and abs(xa - xb) == 1:
            return self.horizontal_edge(min(xa, xb), ya)
        if xa == xb and abs(ya - yb) == 1:
            return self.vertical_edge(xa, min(ya, yb))
        raise GeometryError(f"{a} and {b} are not nearest neighbours")

    def is_horizontal(self, e: int) -> bool:
        return e < self.n_horizontal

    @cached_property
    def edges(self) -> np.ndarray:
        """``(n_edges, 2)`` array of vertex indices, lower index first."""
        out = np.empty((self.n_edges, 2), dtype=np.int64)
        c, r = self.n_cols, self.n_rows
        k = 0
        for y in range(r):
            for x in range(c - 1):
                out[k] = (y * c + x, y * c + x + 1)
                k += 1
        for y in range(r - 1):
            for x in range(c):
                out[k] = (y * c + x, (y + 1) * c + x)
                k += 1
        return out

    def edge_vertices(self, e: int) -> tuple[Vertex, Vertex]:
        a, b = self.edges[e]
        return self.vertex(int(a)), self.vertex(int(b))

    @cached_property
    def incidence(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per vertex: tuple of ``(neighbour, edge)`` pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_vertices)]
        for e, (a, b) in enumerate(self.edges.tolist()):
            adj[a].append((b, e))
            adj[b].append((a, e))
        return tuple(tuple(sorted(lst)) for lst in adj)

    def all_edges(self) -> "EdgeSet":
        return EdgeSet(self.n_edges, (1 << self.n_edges) - 1)

    def no_edges(self) -> "EdgeSet":
        return EdgeSet(self.n_edges, 0)

    def edge_set(self, indices: Iterable[int]) -> "EdgeSet":
        return EdgeSet.from_indices(self.n_edges, indices)


def build_grid(n_cols: int, n_rows: int) -> GridGraph:
    return GridGraph(int(n_cols), int(n_rows))


@dataclass(frozen=True)
class EdgeSet:
    """Immutable subset of ``range(n_edges)`` stored as an integer bit-set."""

    n_edges: int
    bits: int = 0

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.n_edges:
            raise ValueError("edge set has members outside the edge range")

    @classmethod
    def from_indices(cls, n_edges: int, indices: Iterable[int]) -> "EdgeSet":
        bits = 0
        for e in indices:
            e = int(e)
            if not 0 <= e < n_edges:
                raise ValueError(f"edge index {e} outside [0, {n_edges})")
            bits |= 1 << e
        return cls(n_edges, bits)

    @classmethod
    def from_mask(cls, mask) -> "EdgeSet":
        mask = np.asarray(mask, dtype=bool)
        return cls.from_indices(mask.size, np.flatnonzero(mask))

    def _check(self, other: "EdgeSet"):
        if self.n_edges != other.n_edges:
            raise ValueError("edge sets belong to different graphs")

    def __or__(self, other: "EdgeSet") -> "EdgeSet":
        self._check(other)
        return EdgeSet(self.n_edges, self.bits | other.bits)

    def __and__(self, other: "EdgeSet") -> "EdgeSet":
        self._check(other)
        return EdgeSet(self.n_edges, self.bits & other.bits)

    def __sub__(self, other: "EdgeSet") -> "EdgeSet":
        self._check(other)
        return EdgeSet(self.n_edges, self.bits & ~other.bits)

    def __xor__(self, other: "EdgeSet") -> "EdgeSet":
        self._check(other)
        return EdgeSet(self.n_edges, self.bits ^ other.bits)

    def __invert__(self) -> "EdgeSet":
        return self.complement()

    def complement(self) -> "EdgeSet":
        return EdgeSet(self.n_edges, ((1 << self.n_edges) - 1) ^ self.bits)

    def __contains__(self, e: int) -> bool:
        return 0 <= e < self.n_edges and bool(self.bits >> e & 1)

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __bool__(self) -> bool:
        return self.bits != 0

    def __iter__(self) -> Iterator[int]:
        b = self.bits
        while b:
            low = b & -b
            yield low.bit_length() - 1
            b ^= low

    def issubset(self, other: "EdgeSet") -> bool:
        self._check(other)
        return self.bits & ~other.bits == 0

    def isdisjoint(self, other: "EdgeSet") -> bool:
        self._check(other)
        return self.bits & other.bits == 0

    def with_edge(self, e: int) -> "EdgeSet":
        return EdgeSet(self.n_edges, self.bits | (1 << e))

    def without_edge(self, e: int) -> "EdgeSet":
        return EdgeSet(self.n_edges, self.bits & ~(1 << e))

    def indices(self) -> np.ndarray:
        return np.fromiter(iter(self), dtype=np.int64, count=len(self))

    def mask(self) -> np.ndarray:
        m = np.zeros(self.n_edges, dtype=bool)
        m[self.indices()] = True
        return m

    def to_json(self) -> str:
        return json.dumps([int(e) for e in self])

    @classmethod
    def from_json(cls, n_edges: int, text: str) -> "EdgeSet":
        return cls.from_indices(n_edges, json.loads(text))

    def vertex_pairs(self, graph: GridGraph) -> list[tuple[Vertex, Vertex]]:
        """Human-readable form: list of ``((x, y), (x', y'))`` pairs."""
        if graph.n_edges != self.n_edges:
            raise ValueError("edge set does not belong to this graph")
        return [graph.edge_vertices(e) for e in self]

    def __repr__(self) -> str:
        return f"EdgeSet(n_edges={self.n_edges}, {list(self)})"


@dataclass(frozen=True)
class TerminalPair:
    u: Vertex
    v: Vertex

    def __post_init__(self):
        if tuple(self.u) == tuple(self.v):
            raise GeometryError("terminal pair needs two distinct vertices")
        object.__setattr__(self, "u", tuple(int(c) for c in self.u))
        object.__setattr__(self, "v", tuple(int(c) for c in self.v))

    def indices(self, graph: GridGraph) -> tuple[int, int]:
        return graph.vertex_index(self.u), graph.vertex_index(self.v)

    @property
    def distance(self) -> int:
        return abs(self.u[0] - self.v[0]) + abs(self.u[1] - self.v[1])


def canonical_row(n_rows: int) -> int:
    """Row of the canonical pair: ``n/2`` for even ``n``, ``ceil(n/2)`` for odd."""
    return n_rows // 2 if n_rows % 2 == 0 else (n_rows + 1) // 2


def canonical_pair(graph: GridGraph) -> TerminalPair:
    """``u = (1, row)``, ``v = (n_cols, row)`` with ``row = canonical_row(n_rows)``."""
    if graph.n_cols < 2:
        raise GeometryError("canonical pair needs at least two columns")
    row = canonical_row(graph.n_rows)
    return TerminalPair((1, row), (graph.n_cols, row))


def line_L(graph: GridGraph, pair: TerminalPair) -> EdgeSet:
    """Horizontal edges joining ``u`` and ``v`` along their common row."""
    (xu, yu), (xv, yv) = pair.u, pair.v
    if yu != yv:
        raise GeometryError(f"{pair.u} and {pair.v} are not on one row")
    graph.vertex_index(pair.u)
    graph.vertex_index(pair.v)
    lo, hi = sorted((xu, xv))
    return graph.edge_set(graph.horizontal_edge(x, yu) for x in range(lo, hi))


def _component(graph: GridGraph, S: EdgeSet, start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    bits = S.bits
    inc = graph.incidence
    while queue:
        a = queue.popleft()
        for b, e in inc[a]:
            if bits >> e & 1 and b not in seen:
                seen.add(b)
                queue.append(b)
    return seen


def component_of(graph: GridGraph, S: EdgeSet, w: Vertex) -> set[int]:
    """Vertex indices reachable from ``w`` using only edges of ``S``."""
    return _component(graph, S, graph.vertex_index(w))


def is_connecting(graph: GridGraph, S: EdgeSet, pair: TerminalPair) -> bool:
    iu, iv = pair.indices(graph)
    return iv in _component(graph, S, iu)


def vertical_cutset(graph: GridGraph, x: int) -> EdgeSet:
    """All horizontal edges between columns ``x`` and ``x + 1``."""
    if not 1 <= x < graph.n_cols:
        raise GeometryError(f"column {x} has no right neighbour in a grid of width {graph.n_cols}")
    return graph.edge_set(graph.horizontal_edge(x, y) for y in range(1, graph.n_rows + 1))


@dataclass(frozen=True)
class Cutset:
    """A cutset together with the two vertex classes it induces."""

    edges: EdgeSet
    side_u: frozenset[int]
    side_v: frozenset[int]


def cutset_sides(graph: GridGraph, C: EdgeSet, pair: TerminalPair) -> Cutset:
    """Split ``V`` into ``V_u(C)`` (reachable from ``u`` off ``C``) and the rest."""
    iu, iv = pair.indices(graph)
    side_u = _component(graph, C.complement(), iu)
    if iv in side_u:
        raise GeometryError("C does not separate u from v")
    return Cutset(C, frozenset(side_u), frozenset(range(graph.n_vertices)) - side_u)


def component_boundary_cutset(graph: GridGraph, S: EdgeSet, pair: TerminalPair) -> Cutset:
    """Boundary edges of the ``S``-component of ``u``.

    The result separates ``u`` from ``v`` and is disjoint from ``S``.
    """
    iu, iv = pair.indices(graph)
    comp = _component(graph, S, iu)
    if iv in comp:
        raise GeometryError("S connects u and v; no cutset disjoint from S exists")
    ends = graph.edges
    inside = np.zeros(graph.n_vertices, dtype=bool)
    inside[list(comp)] = True
    boundary = np.flatnonzero(inside[ends[:, 0]] != inside[ends[:, 1]])
    C = graph.edge_set(boundary)
    return Cutset(C, frozenset(comp), frozenset(range(graph.n_vertices)) - comp)
