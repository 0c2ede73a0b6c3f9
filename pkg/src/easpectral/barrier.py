"""Barrier configurations, the lower-bound construction and straight columns.

Barrier geometry is kept in one table of offsets relative to the left
endpoint of the centre edge ``e``, which sits at offset ``(2, 0)``-``(3, 0)``.
The frame is the box ``1 <= dx <= 4``, ``-1 <= dy <= 1``; its boundary
path ``w_1, ..., w_10`` starts at the top-right corner ``(4, 1)`` and runs
anti-clockwise.  High edges are the nine steps of that path.  Low edges
are every other edge touching a boundary vertex, 21 in total.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import log_ndtr

from .ground_state import CouplingField, SpinConfig, relative_spins, solve
from .lattice import (
    EdgeSet,
    GeometryError,
    GridGraph,
    TerminalPair,
    is_connecting,
    line_L,
)
from .streams import SeedLike, as_seed_sequence, parallel_map, stream

BARRIER_WIDTH = 5
CENTER = ((2, 0), (3, 0))

WALK = ((4, 1), (3, 1), (2, 1), (1, 1), (1, 0), (1, -1), (2, -1), (3, -1), (4, -1), (4, 0))

HIGH_TEMPLATE = tuple((WALK[i], WALK[i + 1]) for i in range(9))

LOW_TEMPLATE = (
    # central axis either side of e
    ((1, 0), (2, 0)),
    ((3, 0), (4, 0)),
    # spokes from the interior to the long sides
    ((2, 0), (2, 1)),
    ((3, 0), (3, 1)),
    ((2, 0), (2, -1)),
    ((3, 0), (3, -1)),
    # the one frame side that is not on the walk
    ((4, 0), (4, 1)),
    # outward verticals above and below the frame
    ((1, 1), (1, 2)),
    ((2, 1), (2, 2)),
    ((3, 1), (3, 2)),
    ((4, 1), (4, 2)),
    ((1, -1), (1, -2)),
    ((2, -1), (2, -2)),
    ((3, -1), (3, -2)),
    ((4, -1), (4, -2)),
    # horizontal stubs left and right of the frame
    ((0, -1), (1, -1)),
    ((0, 0), (1, 0)),
    ((0, 1), (1, 1)),
    ((4, -1), (5, -1)),
    ((4, 0), (5, 0)),
    ((4, 1), (5, 1)),
)

BOX = tuple((dx, dy) for dx in range(1, 5) for dy in (-1, 0, 1))


@dataclass(frozen=True)
class BarrierSpec:
    graph: GridGraph
    center: int
    low_edges: EdgeSet
    high_edges: EdgeSet
    low_threshold: float
    high_threshold: float
    boundary_walk: tuple[int, ...]
    walk_edges: tuple[int, ...]

    @property
    def gap(self) -> float:
        """``2 h - 2 |Low| l``; the barrier argument needs it positive."""
        return 2 * self.high_threshold - 2 * len(self.low_edges) * self.low_threshold

    @property
    def participating(self) -> EdgeSet:
        return (self.low_edges | self.high_edges).with_edge(self.center)

    def satisfied_by(self, J: CouplingField) -> bool:
        mag = J.magnitude
        return bool(
            np.all(mag[self.low_edges.indices()] <= self.low_threshold)
            and np.all(mag[self.high_edges.indices()] > self.high_threshold)
        )

    def to_dict(self) -> dict:
        g = self.graph
        return {
            "graph": [g.n_cols, g.n_rows],
            "center": self.center,
            "center_vertices": [list(w) for w in g.edge_vertices(self.center)],
            "low_edges": [int(e) for e in self.low_edges],
            "high_edges": [int(e) for e in self.high_edges],
            "low_threshold": self.low_threshold,
            "high_threshold": self.high_threshold,
            "boundary_walk": [list(g.vertex(w)) for w in self.boundary_walk],
        }


def _place(origin, offset):
    return origin[0] + offset[0], origin[1] + offset[1]


def build_barrier_spec(
    graph: GridGraph,
    e: int,
    low_threshold: float = 1.0,
    high_threshold: float = 100.0,
    pair: Optional[TerminalPair] = None,
) -> BarrierSpec:
    """Instantiate the barrier template around the horizontal edge ``e``.

    The whole template must fit in the grid.  When ``pair`` is given, both
    terminals must lie at distance at least 2 from the endpoints of ``e``
    and outside the closed frame.
    """
    if low_threshold <= 0 or high_threshold <= 0:
        raise ValueError("thresholds must be positive")
    if not graph.is_horizontal(e):
        raise GeometryError(f"edge {e} is not horizontal")
    (xa, ya), (xb, _) = graph.edge_vertices(e)
    left = (min(xa, xb), ya)
    origin = (left[0] - CENTER[0][0], left[1] - CENTER[0][1])
    try:
        low = [graph.edge_between(_place(origin, a), _place(origin, b)) for a, b in LOW_TEMPLATE]
        high = [graph.edge_between(_place(origin, a), _place(origin, b)) for a, b in HIGH_TEMPLATE]
        walk = tuple(graph.vertex_index(_place(origin, w)) for w in WALK)
    except GeometryError as exc:
        raise GeometryError(f"barrier template around edge {e} does not fit the grid") from exc
    if pair is not None:
        box = {_place(origin, b) for b in BOX}
        ends = [_place(origin, w) for w in CENTER]
        for t in (pair.u, pair.v):
            near = min(abs(t[0] - w[0]) + abs(t[1] - w[1]) for w in ends)
            if near < 2 or t in box:
                raise GeometryError(f"terminal {t} is too close to the barrier around edge {e}")
    n = graph.n_edges
    return BarrierSpec(
        graph,
        e,
        EdgeSet.from_indices(n, low),
        EdgeSet.from_indices(n, high),
        float(low_threshold),
        float(high_threshold),
        walk,
        tuple(high),
    )


def barrier_centers(graph: GridGraph, pair: TerminalPair) -> list[int]:
    """Edges of the line ``L`` around which a full barrier fits."""
    out = []
    for e in line_L(graph, pair):
        try:
            build_barrier_spec(graph, e, pair=pair)
        except GeometryError:
            continue
        out.append(e)
    return out


def disjoint_barrier_centers(graph: GridGraph, pair: TerminalPair) -> list[int]:
    """Greedy left-to-right selection of centres whose templates share no edge."""
    chosen: list[int] = []
    used = graph.no_edges()
    for e in barrier_centers(graph, pair):
        part = build_barrier_spec(graph, e, pair=pair).participating
        if part.isdisjoint(used):
            chosen.append(e)
            used = used | part
    return chosen


def sample_barrier_couplings(spec: BarrierSpec, base: CouplingField, rng: np.random.Generator) -> CouplingField:
    """Overwrite low/high edges with magnitudes in ``(0, l)`` / ``(h, h + 1)`` and random signs."""
    low = spec.low_edges.indices()
    high = spec.high_edges.indices()
    vals = base.values.copy()
    lo_mag = rng.uniform(0.0, spec.low_threshold, low.size)
    hi_mag = rng.uniform(spec.high_threshold, spec.high_threshold + 1.0, high.size)
    signs = rng.choice(np.array([-1.0, 1.0]), low.size + high.size)
    vals[low] = signs[: low.size] * lo_mag
    vals[high] = signs[low.size :] * hi_mag
    return CouplingField(base.graph, vals)


def walk_products(spec: BarrierSpec, J: CouplingField, s: SpinConfig) -> np.ndarray:
    """``s_{w_i} s_{w_{i+1}} J_(w_i, w_{i+1})`` for ``i = 1..9``."""
    w = np.array(spec.boundary_walk)
    sp = s.spins.astype(np.float64)
    return sp[w[:-1]] * sp[w[1:]] * J.values[list(spec.walk_edges)]


@dataclass
class ObliviousnessReport:
    passed: bool
    relspin_plus: int
    relspin_minus: int
    walk_ok_plus: bool
    walk_ok_minus: bool
    counterexample: Optional[dict] = field(default=None, repr=False)


def verify_barrier_obliviousness(
    graph: GridGraph, pair: TerminalPair, J: CouplingField, spec: BarrierSpec, method: str = "auto"
) -> ObliviousnessReport:
    """Solve with ``J_e`` and ``-J_e``; relative spin and walk signs must agree."""
    if not spec.satisfied_by(J):
        raise ValueError("couplings do not satisfy the barrier constraints")
    Jm = J.replace([spec.center], -J.values[spec.center])
    gs_p = solve(graph, J, method)
    gs_m = solve(graph, Jm, method)
    rp, rm = gs_p.spins.relative(pair), gs_m.spins.relative(pair)
    wp = bool(np.all(walk_products(spec, J, gs_p.spins) > 0))
    wm = bool(np.all(walk_products(spec, Jm, gs_m.spins) > 0))
    passed = rp == rm and wp and wm
    cx = None
    if not passed:
        cx = {
            "couplings": J.values.tolist(),
            "spin_config_plus": gs_p.spins.spins.astype(int).tolist(),
            "spin_config_minus": gs_m.spins.spins.astype(int).tolist(),
            "spec": spec.to_dict(),
        }
    return ObliviousnessReport(passed, rp, rm, wp, wm, cx)


def counterexample_json(report: ObliviousnessReport) -> str:
    return json.dumps(report.counterexample, sort_keys=True)


def _log_prob_small(l: float) -> float:
    # log P(|xi| <= l)
    if math.isinf(l):
        return 0.0
    return math.log1p(-2.0 * math.exp(log_ndtr(-l)))


def _log_prob_large(h: float) -> float:
    # log P(|xi| >= h)
    return math.log(2.0) + float(log_ndtr(-h))


def barrier_probability(spec: BarrierSpec) -> float:
    """Natural log of ``P(Barrier(e))`` for i.i.d. standard Gaussian couplings.

    At the default thresholds this is about ``-4.5e4``: far too small to
    hit by unconditioned sampling, hence ``sample_barrier_couplings``.
    """
    return len(spec.low_edges) * _log_prob_small(spec.low_threshold) + len(spec.high_edges) * _log_prob_large(
        spec.high_threshold
    )


def good_event_log_failure(log_p: float, n_templates: int) -> float:
    """``log P(no barrier)`` over ``n_templates`` independent disjoint templates."""
    if log_p == 0.0:
        return -math.inf
    return n_templates * math.log1p(-math.exp(log_p))


# -- lower bound -------------------------------------------------------------


def line_neighbourhood(graph: GridGraph, pair: TerminalPair) -> EdgeSet:
    """``L`` together with every edge sharing a vertex with ``L``."""
    L = line_L(graph, pair)
    verts = set()
    for e in L:
        verts.update(int(w) for w in graph.edges[e])
    ends = graph.edges
    touch = np.isin(ends[:, 0], list(verts)) | np.isin(ends[:, 1], list(verts))
    return graph.edge_set(np.flatnonzero(touch))


def build_lower_bound_field(graph: GridGraph, pair: TerminalPair, rng: np.random.Generator) -> CouplingField:
    """Couplings in ``(100, 101)`` on ``L``, ``|J| < 1/n`` next to it, Gaussian elsewhere.

    ``n`` is the number of grid columns.
    """
    L = line_L(graph, pair)
    ring = line_neighbourhood(graph, pair) - L
    n = graph.n_cols
    vals = rng.standard_normal(graph.n_edges)
    vals[L.indices()] = rng.uniform(100.0, 101.0, len(L))
    vals[ring.indices()] = rng.uniform(-1.0 / n, 1.0 / n, len(ring))
    return CouplingField(graph, vals)


@dataclass(frozen=True)
class LowerBoundReport:
    n: int
    relspin: int
    line_aligned: bool
    resamples: int
    inner_mean: float
    all_identical: bool

    @property
    def passed(self) -> bool:
        return self.relspin == 1 and self.line_aligned and self.all_identical and abs(self.inner_mean) == 1.0


def lower_bound_check(
    graph: GridGraph, pair: TerminalPair, resamples: int, rng: SeedLike = None, threads: int | None = None
) -> LowerBoundReport:
    """Build the lower-bound field, then resample everything off the line neighbourhood."""
    root = as_seed_sequence(rng)
    J = build_lower_bound_field(graph, pair, stream(root, 0))
    gs = solve(graph, J)
    s = gs.spins.spins
    iu = graph.vertex_index(pair.u)
    line_verts = np.unique(graph.edges[line_L(graph, pair).indices()])
    aligned = bool(np.all(s[line_verts] == s[iu]))
    outside = line_neighbourhood(graph, pair).complement().indices()

    def block(b):
        lo, hi = b
        X = np.tile(J.values, (hi - lo, 1))
        X[:, outside] = stream(root, 1, lo).standard_normal((hi - lo, outside.size))
        return relative_spins(graph, X, pair)[0]

    rel = np.concatenate(parallel_map(block, [(a, min(resamples, a + 256)) for a in range(0, resamples, 256)], threads))
    mean = int(rel.astype(np.int64).sum()) / resamples
    return LowerBoundReport(
        graph.n_cols, gs.spins.relative(pair), aligned, resamples, mean, bool(np.all(rel == rel[0]))
    )


# -- straight columns --------------------------------------------------------


@dataclass(frozen=True)
class ColumnClass:
    """Straight columns of a set ``S``: 1-based column indices and segment rows.

    Column ``j`` covers horizontal positions ``x`` with
    ``origin + (j - 1) W <= x < origin + j W`` (an edge ``((x, y), (x+1, y))``
    has position ``x``).  Its interior is those horizontal edges plus the
    vertical edges strictly between its two boundary lines.
    """

    J_set: tuple[int, ...]
    Y_set: tuple[int, ...]
    width: int
    origin: int
    n_columns: int

    @property
    def theta(self) -> float:
        return len(self.J_set) / self.n_columns if self.n_columns else 1.0


@lru_cache(maxsize=4096)
def column_interior(graph: GridGraph, origin: int, width: int, j: int) -> EdgeSet:
    a = origin + (j - 1) * width
    idx = [graph.horizontal_edge(x, y) for x in range(a, a + width) for y in range(1, graph.n_rows + 1)]
    idx += [graph.vertical_edge(x, y) for x in range(a + 1, a + width) for y in range(1, graph.n_rows)]
    return graph.edge_set(idx)


@lru_cache(maxsize=4096)
def segment(graph: GridGraph, origin: int, width: int, j: int, y: int) -> EdgeSet:
    a = origin + (j - 1) * width
    return graph.edge_set(graph.horizontal_edge(x, y) for x in range(a, a + width))


def _span(graph: GridGraph, pair: Optional[TerminalPair]) -> tuple[int, int]:
    if pair is None:
        return 1, graph.n_cols
    lo, hi = sorted((pair.u[0], pair.v[0]))
    return lo, hi


def straight_columns(graph: GridGraph, S: EdgeSet, W: int = BARRIER_WIDTH, pair: Optional[TerminalPair] = None) -> ColumnClass:
    """Classify the width-``W`` columns between ``u`` and ``v`` (default: the whole width).

    A trailing block narrower than ``W`` is not a column and never straight.
    """
    if W < 1:
        raise ValueError("column width must be positive")
    lo, hi = _span(graph, pair)
    n_cols = (hi - lo) // W
    J_set, Y_set = [], []
    for j in range(1, n_cols + 1):
        inter = column_interior(graph, lo, W, j) & S
        if len(inter) != W:
            continue
        idx = inter.indices()
        if not all(graph.is_horizontal(int(e)) for e in idx):
            continue
        rows = {graph.edge_vertices(int(e))[0][1] for e in idx}
        if len(rows) != 1:
            continue
        y = rows.pop()
        if inter == segment(graph, lo, W, j, y):
            J_set.append(j)
            Y_set.append(y)
    return ColumnClass(tuple(J_set), tuple(Y_set), W, lo, n_cols)


def envelope(graph: GridGraph, cls: ColumnClass) -> EdgeSet:
    """Union of the straight segments with every edge outside straight-column interiors."""
    out = graph.all_edges()
    for j, y in zip(cls.J_set, cls.Y_set):
        inter = column_interior(graph, cls.origin, cls.width, j)
        out = (out - inter) | segment(graph, cls.origin, cls.width, j, y)
    return out


def sample_detour_set(
    graph: GridGraph, pair: TerminalPair, eps: float, rng: np.random.Generator, extra_edges: bool = True
) -> EdgeSet:
    """Random connecting set of at most ``(1 + eps) d`` edges, ``d = |u - v|_1``.

    Builds a walk with ``d + b`` right steps, ``b`` left steps and ``a`` up
    and ``a`` down steps (``2a + 2b <= eps d``) in random order, retrying
    until it stays on the grid; leftover budget is spent on extra edges
    adjacent to the walk.
    """
    (xu, yu), (xv, yv) = pair.u, pair.v
    if yu != yv or xv <= xu:
        raise GeometryError("detour sampler needs v to the right of u on the same row")
    d = xv - xu
    budget = int(math.floor(eps * d + 1e-9))
    a = int(rng.integers(0, budget // 2 + 1))
    b = int(rng.integers(0, (budget - 2 * a) // 2 + 1))
    moves = np.array([(1, 0)] * (d + b) + [(-1, 0)] * b + [(0, 1)] * a + [(0, -1)] * a, dtype=np.int64)
    for _ in range(10000):
        order = moves[rng.permutation(len(moves))]
        path = np.cumsum(np.vstack([[xu, yu], order]), axis=0)
        if path[:, 0].min() >= 1 and path[:, 0].max() <= graph.n_cols and path[:, 1].min() >= 1 and path[:, 1].max() <= graph.n_rows:
            break
    else:
        raise GeometryError("could not place a detour path on the grid")
    edges = {graph.edge_between(tuple(p), tuple(q)) for p, q in zip(path[:-1].tolist(), path[1:].tolist())}
    if extra_edges:
        slack = int(math.floor((1 + eps) * d + 1e-9)) - len(edges)
        verts = {int(graph.vertex_index(tuple(p))) for p in path.tolist()}
        for _ in range(int(rng.integers(0, slack + 1))):
            w = sorted(verts)[int(rng.integers(0, len(verts)))]
            cand = [e for _, e in graph.incidence[w] if e not in edges]
            if cand:
                e = cand[int(rng.integers(0, len(cand)))]
                edges.add(e)
                verts.update(int(z) for z in graph.edges[e])
    return graph.edge_set(edges)


@dataclass
class StraightFractionReport:
    samples: int
    width: int
    eps: float
    bound: float
    min_theta: float
    theta_failures: list = field(default_factory=list)
    envelope_failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.theta_failures and not self.envelope_failures


def straight_fraction_bound_check(
    graph: GridGraph, samples: Sequence[EdgeSet], W: int, eps: float, pair: TerminalPair
) -> StraightFractionReport:
    """Check ``theta >= 1 - eps W`` and ``S`` inside its envelope for each sample.

    Samples must connect ``u`` to ``v`` with at most ``(1 + eps) d`` edges,
    where ``d = |u - v|_1`` must be a multiple of ``W``.
    """
    lo, hi = _span(graph, pair)
    d = hi - lo
    if pair.u[1] != pair.v[1] or d % W:
        raise GeometryError("terminals must share a row and W must divide their distance")
    bound = 1.0 - eps * W
    rep = StraightFractionReport(len(samples), W, eps, bound, 1.0)
    cap = (1 + eps) * d + 1e-9
    for i, S in enumerate(samples):
        if len(S) > cap or not is_connecting(graph, S, pair):
            raise ValueError(f"sample {i} is not a connecting set of size <= (1 + eps) d")
        cls = straight_columns(graph, S, W, pair)
        rep.min_theta = min(rep.min_theta, cls.theta)
        if cls.theta < bound - 1e-12:
            rep.theta_failures.append({"sample": i, "theta": cls.theta, "S": [int(e) for e in S]})
        if not S.issubset(envelope(graph, cls)):
            rep.envelope_failures.append({"sample": i, "S": [int(e) for e in S]})
    return rep
