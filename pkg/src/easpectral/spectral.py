"""Hermite-Fourier spectrum of the relative spin ``s_u s_v``.

Coefficients ``alpha_k = E[s_u s_v h_k(J)]`` are computed either by tensor
quadrature (tiny graphs) or Monte Carlo.  Subset masses
``sum_{E_k subset S} alpha_k^2 = E[E[s_u s_v | J_S]^2]`` are estimated by
nested Monte Carlo with two independent inner half-batches, whose product
is unbiased for the squared conditional mean.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .ground_state import NEAR_TIE, relative_spins
from .hermite import MultiIndex, hermite_table, split_rule
from .lattice import EdgeSet, GridGraph, SizingError, TerminalPair, component_boundary_cutset, is_connecting, line_L
from .ou_flow import DEFAULT_T_GRID, decorrelation_experiment
from .streams import SeedLike, as_seed_sequence, parallel_map, stream

MAX_QUAD_EDGES = 8
MAX_CENSUS_EDGES = 5
DEFAULT_ORDER = 12
DEFAULT_DEGREE_CAP = 9
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SpectralEstimate:
    k: MultiIndex
    alpha_hat: float
    stderr: float
    method: str
    samples: int = 0
    excluded: int = 0


@dataclass(frozen=True)
class SubsetMassEstimate:
    S: EdgeSet
    mass_hat: float
    stderr: float
    outer_samples: int
    inner_samples: int
    antithetic: bool
    excluded: int = 0
    cutset: EdgeSet | None = None

    def confidence_interval(self, z: float = 1.959963984540054) -> tuple[float, float]:
        return self.mass_hat - z * self.stderr, self.mass_hat + z * self.stderr


# -- quadrature side ---------------------------------------------------------


def _configs(graph: GridGraph) -> np.ndarray:
    """All spin vectors with vertex 0 pinned to +1, ``(2**(V-1), V)``."""
    V = graph.n_vertices
    idx = np.arange(1 << (V - 1), dtype=np.int64)[:, None]
    bits = np.zeros((idx.shape[0], V), dtype=np.int64)
    bits[:, 1:] = (idx >> np.arange(V - 1)) & 1
    return 1 - 2 * bits


def tie_averaged_relspin(graph: GridGraph, pair: TerminalPair, points: np.ndarray) -> np.ndarray:
    """``s_u s_v`` of the ground state at each row of ``points``.

    When several configurations attain the maximum (within a relative
    ``1e-12``), the relative spin is averaged over all of them.  This keeps
    the integrand exactly odd under every cutset flip, which is what makes
    quadrature coefficients of non-connecting supports vanish.
    """
    if graph.n_vertices > 16:
        raise SizingError("tie-averaged evaluation enumerates all states; graph too large")
    cfg = _configs(graph).astype(np.float64)
    ends = graph.edges
    prods = cfg[:, ends[:, 0]] * cfg[:, ends[:, 1]]
    iu, iv = pair.indices(graph)
    rel = cfg[:, iu] * cfg[:, iv]
    points = np.atleast_2d(points)
    energies = points @ prods.T
    best = energies.max(axis=1, keepdims=True)
    tol = TIE_RTOL * np.maximum(1.0, np.abs(points).sum(axis=1, keepdims=True))
    top = energies >= best - tol
    return (top * rel).sum(axis=1) / top.sum(axis=1)


def _grid_points(q: int, n_edges: int, start: int, stop: int, nodes: np.ndarray) -> np.ndarray:
    flat = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((flat.size, n_edges), dtype=np.int64)
    for e in range(n_edges - 1, -1, -1):
        digits[:, e] = flat % q
        flat //= q
    return nodes[digits]


@lru_cache(maxsize=32)
def relspin_tensor(graph: GridGraph, pair: TerminalPair, q: int) -> np.ndarray:
    """Tie-averaged ``s_u s_v`` on the full tensor grid, shape ``(q,) * n_edges``."""
    E = graph.n_edges
    rule = split_rule(q)
    total = q**E
    out = np.empty(total)
    step = 1 << 15
    for a in range(0, total, step):
        b = min(total, a + step)
        out[a:b] = tie_averaged_relspin(graph, pair, _grid_points(q, E, a, b, rule.nodes))
    out.setflags(write=False)
    return out.reshape((q,) * E)


def _check_quad(graph: GridGraph, cap: int):
    if graph.n_edges > cap:
        raise SizingError(f"{graph.n_edges} edges is too many for tensor quadrature (cap {cap})")
    if graph.n_edges == 0:
        raise SizingError("graph has no edges")


def coefficient_quadrature(graph: GridGraph, pair: TerminalPair, k: MultiIndex, q: int = DEFAULT_ORDER) -> SpectralEstimate:
    """Deterministic ``alpha_k`` by tensor Gauss quadrature over every edge.

    Each edge uses the split rule (mirrored half-range Gauss rules), since
    ``s_u s_v`` jumps whenever a coupling changes sign.
    """
    _check_quad(graph, MAX_QUAD_EDGES)
    E = graph.n_edges
    if any(e >= E for e, _ in k.degrees):
        raise ValueError("multi-index refers to an edge outside the graph")
    rule = split_rule(q)
    kmax = max((d for _, d in k.degrees), default=0)
    H = hermite_table(kmax, rule.nodes) * rule.weights
    dense = k.dense(E)
    T = relspin_tensor(graph, pair, q)
    for e in range(E):
        T = np.tensordot(H[dense[e]], T, axes=([0], [0]))
    return SpectralEstimate(k, float(T), 0.0, "quadrature")


def coefficient_tensor(graph: GridGraph, pair: TerminalPair, D: int, q: int = DEFAULT_ORDER) -> np.ndarray:
    """All ``alpha_k`` with every ``k_e <= D``; shape ``(D + 1,) * n_edges``."""
    _check_quad(graph, MAX_QUAD_EDGES)
    rule = split_rule(q)
    H = hermite_table(D, rule.nodes) * rule.weights
    T = relspin_tensor(graph, pair, q)
    for _ in range(graph.n_edges):
        # contracting the leading axis rotates the new degree axis to the back
        T = np.tensordot(T, H, axes=([0], [1]))
    return T


# -- Monte Carlo side --------------------------------------------------------


def coefficient_mc(
    graph: GridGraph,
    pair: TerminalPair,
    k: MultiIndex,
    N: int,
    rng: SeedLike,
    threads: int | None = None,
    batch: int = 4096,
) -> SpectralEstimate:
    """Sample mean of ``s_u s_v h_k(J)`` over ``N`` independent coupling draws."""
    if N < 2:
        raise ValueError("need at least two samples")
    root = as_seed_sequence(rng)
    E = graph.n_edges

    def work(b):
        lo, hi = b
        J = stream(root, lo).standard_normal((hi - lo, E))
        rel, margin = relative_spins(graph, J, pair)
        ok = margin >= NEAR_TIE
        h = np.ones(hi - lo)
        for e, d in k.degrees:
            h = h * hermite_table(d, J[:, e])[d]
        return np.where(ok, rel * h, 0.0), ok

    parts = parallel_map(work, [(a, min(N, a + batch)) for a in range(0, N, batch)], threads)
    vals = np.concatenate([p[0] for p in parts])
    ok = np.concatenate([p[1] for p in parts])
    x = vals[ok]
    n = x.size
    return SpectralEstimate(k, float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)), "monte_carlo", n, int(N - n))


def _half_sum(rel, ok):
    return int(rel[ok].astype(np.int64).sum()), int(ok.sum())


def subset_mass(
    graph: GridGraph,
    pair: TerminalPair,
    S: EdgeSet,
    N_outer: int,
    M_inner: int,
    antithetic: bool = False,
    rng: SeedLike = None,
    threads: int | None = None,
) -> SubsetMassEstimate:
    """Nested Monte Carlo estimate of ``E[E[s_u s_v | J_S]^2]``.

    Outer draw ``j`` uses the stream ``j`` of the master seed: first ``J_S``
    (in edge order), then an ``(M_inner, |S^c|)`` block for the inner draws.
    The first ``M_inner // 2`` inner draws form half-batch A, the rest B, and
    the outer sample is ``mean_A * mean_B``.

    With ``antithetic=True`` and ``S`` not connecting ``u`` to ``v``, every
    inner draw is paired with its sign flip along the boundary cutset of the
    ``S``-component of ``u``.  The pair's relative spins cancel exactly, so
    the estimate is exactly zero.
    """
    if N_outer < 2 or M_inner < 2:
        raise ValueError("need N_outer >= 2 and M_inner >= 2")
    if S.n_edges != graph.n_edges:
        raise ValueError("edge set does not belong to the graph")
    root = as_seed_sequence(rng)
    s_idx = S.indices()
    c_idx = S.complement().indices()
    cut = None
    if antithetic and not is_connecting(graph, S, pair):
        cut = component_boundary_cutset(graph, S, pair).edges
    flip = cut.indices() if cut is not None else None
    half = M_inner // 2

    def outer(j):
        g = stream(root, j)
        js = g.standard_normal(s_idx.size)
        inner = g.standard_normal((M_inner, c_idx.size))
        J = np.empty((M_inner, graph.n_edges))
        J[:, s_idx] = js
        J[:, c_idx] = inner
        if flip is not None:
            Jf = J.copy()
            Jf[:, flip] = -Jf[:, flip]
            rel, margin = relative_spins(graph, np.concatenate([J, Jf]), pair)
            ok = (margin[:M_inner] >= NEAR_TIE) & (margin[M_inner:] >= NEAR_TIE)
            ok2 = np.concatenate([ok, ok])
            halfA = np.r_[0:half, M_inner : M_inner + half]
            halfB = np.r_[half:M_inner, M_inner + half : 2 * M_inner]
            sa, na = _half_sum(rel[halfA], ok2[halfA])
            sb, nb = _half_sum(rel[halfB], ok2[halfB])
            excl = 2 * int((~ok).sum())
        else:
            rel, margin = relative_spins(graph, J, pair)
            ok = margin >= NEAR_TIE
            sa, na = _half_sum(rel[:half], ok[:half])
            sb, nb = _half_sum(rel[half:], ok[half:])
            excl = int((~ok).sum())
        if na == 0 or nb == 0:
            return math.nan, excl
        # integer numerator: an exactly cancelled half gives +0.0
        return (sa * sb) / (na * nb), excl

    res = parallel_map(outer, range(N_outer), threads)
    prods = np.array([r[0] for r in res])
    excluded = sum(r[1] for r in res)
    prods = prods[~np.isnan(prods)]
    n = prods.size
    mass = float(prods.sum() / n)
    stderr = float(prods.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return SubsetMassEstimate(S, mass, stderr, N_outer, M_inner, flip is not None, excluded, cut)


def line_mass(
    graph: GridGraph,
    pair: TerminalPair,
    N_outer: int,
    M_inner: int,
    rng: SeedLike = None,
    threads: int | None = None,
) -> SubsetMassEstimate:
    """Mass of the straight line between ``u`` and ``v``.

    Strict subsets of the line do not connect ``u`` and ``v`` and carry no
    spectral mass, so the subset mass of the line is the mass of the line
    itself.
    """
    return subset_mass(graph, pair, line_L(graph, pair), N_outer, M_inner, False, rng, threads)


# -- census ------------------------------------------------------------------


def multi_indices(n_edges: int, D: int) -> Iterator[tuple[int, ...]]:
    """Dense multi-indices with total degree ``<= D`` in lexicographic order."""

    def rec(prefix, left, remaining):
        if remaining == 0:
            yield tuple(prefix)
            return
        for d in range(left + 1):
            yield from rec(prefix + [d], left - d, remaining - 1)

    yield from rec([], D, n_edges)


@dataclass(frozen=True)
class CensusEntry:
    k: MultiIndex
    alpha_sq: float
    weight: int
    support_connects: bool


@dataclass(frozen=True)
class Census:
    graph: GridGraph
    pair: TerminalPair
    degree_cap: int
    order: int
    entries: tuple[CensusEntry, ...] = field(repr=False)

    @property
    def captured_mass(self) -> float:
        return float(math.fsum(e.alpha_sq for e in self.entries))

    def violations(self, threshold: float = 1e-8) -> list[CensusEntry]:
        """Entries with visible mass on a support that does not connect ``u``, ``v``."""
        return [e for e in self.entries if e.alpha_sq > threshold and not e.support_connects]

    def decorrelation(self, t: float) -> float:
        return float(math.fsum(e.alpha_sq * math.exp(-e.weight * t) for e in self.entries))

    def to_json(self, metadata: dict | None = None) -> str:
        body = {
            "metadata": metadata or {},
            "graph": [self.graph.n_cols, self.graph.n_rows],
            "u": list(self.pair.u),
            "v": list(self.pair.v),
            "degree_cap": self.degree_cap,
            "order": self.order,
            "captured_mass": self.captured_mass,
            "entries": [
                {
                    "multi_index": e.k.to_pairs(),
                    "alpha_sq": e.alpha_sq,
                    "weight": e.weight,
                    "support_connects": e.support_connects,
                }
                for e in self.entries
            ],
        }
        return json.dumps(body, indent=1, sort_keys=True)


def spectral_support_census(
    graph: GridGraph, pair: TerminalPair, D: int = DEFAULT_DEGREE_CAP, q: int = DEFAULT_ORDER
) -> Census:
    """Quadrature ``alpha_k^2`` for every ``|k| <= D`` with connectivity flags."""
    _check_quad(graph, MAX_CENSUS_EDGES)
    if D < 0:
        raise ValueError("degree cap must be nonnegative")
    A = coefficient_tensor(graph, pair, D, q)
    E = graph.n_edges
    connects: dict[int, bool] = {}
    entries = []
    for ks in multi_indices(E, D):
        k = MultiIndex.from_dense(ks)
        supp = k.support(E)
        if supp.bits not in connects:
            connects[supp.bits] = is_connecting(graph, supp, pair)
        a = float(A[ks])
        entries.append(CensusEntry(k, a * a, k.weight, connects[supp.bits]))
    return Census(graph, pair, D, q, tuple(entries))


@dataclass(frozen=True)
class IdentityRow:
    t: float
    mc_cov: float
    mc_stderr: float
    census_value: float
    tail_allowance: float
    agrees: bool


def decorrelation_identity_check(
    graph: GridGraph,
    pair: TerminalPair,
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    D: int = DEFAULT_DEGREE_CAP,
    q: int = DEFAULT_ORDER,
    replicas: int = 20000,
    rng: SeedLike = 0,
    threads: int | None = None,
) -> list[IdentityRow]:
    """Monte Carlo ``Cov(s^t_u s^t_v, s^0_u s^0_v)`` against ``sum alpha^2 e^{-|k| t}``.

    The truncated series misses at most ``(1 - captured) e^{-(D+1) t}``,
    which is granted on top of three standard errors.
    """
    census = spectral_support_census(graph, pair, D, q)
    captured = census.captured_mass
    seed = rng if isinstance(rng, int) else int(as_seed_sequence(rng).generate_state(1)[0])
    mc = decorrelation_experiment(graph, pair, t_grid, replicas, seed, threads)
    rows = []
    for r in mc:
        cv = census.decorrelation(r.t)
        tail = max(0.0, 1.0 - captured) * math.exp(-(D + 1) * r.t)
        ok = abs(r.mean_cov - cv) <= 3 * r.stderr + tail + 1e-12
        rows.append(IdentityRow(r.t, r.mean_cov, r.stderr, cv, tail, ok))
    return rows


MASS_CSV_COLUMNS = ("n", "S", "estimate", "stderr", "N_outer", "M_inner", "antithetic", "seed")


def mass_rows_to_csv(rows: Sequence[tuple[int, str, SubsetMassEstimate, int]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MASS_CSV_COLUMNS)
    for n, desc, est, seed in rows:
        w.writerow([n, desc, repr(est.mass_hat), repr(est.stderr), est.outer_samples, est.inner_samples,
                    int(est.antithetic), seed])
    return buf.getvalue()
