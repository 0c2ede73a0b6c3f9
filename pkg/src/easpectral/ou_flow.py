"""Ornstein-Uhlenbeck evolution of the couplings and ground-state overlaps.

The flow is never discretised: ``J^t = e^{-t} J^0 + sqrt(1 - e^{-2t}) J'``
with fresh independent ``J'`` is the exact transition of
``dX = -X dt + sqrt(2) dB``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ground_state import MAX_TM_ROWS, CouplingField, SpinConfig, solve_batch, solve_enumeration
from .lattice import GridGraph, TerminalPair
from .streams import SeedLike, as_seed_sequence, chunks, parallel_map, stream

DEFAULT_T_GRID = (0.0, 0.1, 0.25, 0.5, 1.0, 2.0)
CSV_COLUMNS = ("t", "n", "replicas", "mean_R2", "mean_cov", "stderr", "seed")


def _check_time(t: float):
    if t < 0 or not math.isfinite(t):
        raise ValueError(f"time must be finite and nonnegative, got {t}")


def evolve_values(J0: np.ndarray, t: float, rng: np.random.Generator) -> np.ndarray:
    _check_time(t)
    J0 = np.asarray(J0, dtype=np.float64)
    if t == 0:
        return J0.copy()
    decay = math.exp(-t)
    return decay * J0 + math.sqrt(-math.expm1(-2.0 * t)) * rng.standard_normal(J0.shape)


def evolve(J0: CouplingField, t: float, rng: np.random.Generator) -> CouplingField:
    """One exact OU step of length ``t`` applied edge-wise."""
    return CouplingField(J0.graph, evolve_values(J0.values, t, rng))


@dataclass(frozen=True)
class FlowSample:
    J0: CouplingField
    Jt: CouplingField
    t: float
    seed: tuple


def sample_flow(graph: GridGraph, t: float, seed: SeedLike, key: Sequence[int] = (0,)) -> FlowSample:
    """Draw ``J0`` and evolve it to time ``t`` from the stream ``key``."""
    root = as_seed_sequence(seed)
    J0 = CouplingField(graph, stream(root, *key, 0).standard_normal(graph.n_edges))
    Jt = evolve(J0, t, stream(root, *key, 1))
    return FlowSample(J0, Jt, t, (root.entropy, *root.spawn_key, *key))


def overlap(s0: SpinConfig, st: SpinConfig) -> float:
    """Site overlap ``<s0, st> / |V|`` in ``[-1, 1]``."""
    if s0.graph != st.graph:
        raise ValueError("spin configurations live on different graphs")
    return float(np.dot(s0.spins.astype(np.int64), st.spins.astype(np.int64))) / s0.graph.n_vertices


def ground_spins(graph: GridGraph, values: np.ndarray, method: str = "auto") -> np.ndarray:
    """Pinned ground-state spins for a ``(B, n_edges)`` batch."""
    if method == "auto":
        method = "transfer_matrix" if graph.n_rows <= MAX_TM_ROWS else "enumeration"
    if method == "transfer_matrix":
        return solve_batch(graph, values)[0]
    if method == "enumeration":
        return np.stack([solve_enumeration(graph, CouplingField(graph, v)).spins.spins for v in values])
    raise ValueError(f"unknown solver {method!r}")


@dataclass(frozen=True)
class DecorrelationRow:
    t: float
    n: int
    replicas: int
    mean_R2: float
    mean_cov: float
    stderr: float
    seed: int


def _replica_block(graph, pair, t_grid, root, block, method):
    iu, iv = pair.indices(graph)
    E = graph.n_edges
    T = len(t_grid)
    J0 = np.stack([stream(root, r, 0).standard_normal(E) for r in block])
    Jt = np.empty((len(block), T, E))
    for j, r in enumerate(block):
        for i, t in enumerate(t_grid):
            Jt[j, i] = evolve_values(J0[j], t, stream(root, r, i + 1))
    s0 = ground_spins(graph, J0, method).astype(np.int64)
    st = ground_spins(graph, Jt.reshape(-1, E), method).astype(np.int64).reshape(len(block), T, -1)
    R = np.einsum("bv,btv->bt", s0, st) / graph.n_vertices
    rel0 = s0[:, iu] * s0[:, iv]
    relt = st[:, :, iu] * st[:, :, iv]
    return R * R, rel0[:, None] * relt


def decorrelation_samples(
    graph: GridGraph,
    pair: TerminalPair,
    t_grid: Sequence[float],
    replicas: int,
    seed: SeedLike,
    threads: int | None = None,
    method: str = "auto",
    block: int = 512,
):
    """Per-replica ``R(t)^2`` and ``s_u^0 s_v^0 s_u^t s_v^t``, each ``(replicas, len(t_grid))``."""
    for t in t_grid:
        _check_time(t)
    if replicas < 2:
        raise ValueError("need at least two replicas for a standard error")
    root = as_seed_sequence(seed)
    parts = parallel_map(
        lambda b: _replica_block(graph, pair, tuple(t_grid), root, b, method), chunks(replicas, block), threads
    )
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def decorrelation_experiment(
    graph: GridGraph,
    pair: TerminalPair,
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    replicas: int = 1000,
    seed: int = 0,
    threads: int | None = None,
    method: str = "auto",
) -> list[DecorrelationRow]:
    """Mean overlap and relative-spin covariance along the OU flow.

    ``E[s_u s_v] = 0`` by gauge symmetry, so the covariance is estimated by
    the mean of the product of relative spins at times 0 and ``t``.
    """
    r2, prod = decorrelation_samples(graph, pair, t_grid, replicas, seed, threads, method)
    rows = []
    for i, t in enumerate(t_grid):
        p = prod[:, i].astype(np.float64)
        rows.append(
            DecorrelationRow(
                float(t),
                graph.n_cols,
                replicas,
                float(r2[:, i].mean()),
                float(p.mean()),
                float(p.std(ddof=1) / math.sqrt(replicas)),
                int(seed),
            )
        )
    return rows


def rows_to_csv(rows: Sequence[DecorrelationRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([repr(r.t), r.n, r.replicas, repr(r.mean_R2), repr(r.mean_cov), repr(r.stderr), r.seed])
    return buf.getvalue()
