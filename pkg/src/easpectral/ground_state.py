"""Exact ground states of H(s) = sum_e J_e s_a s_b (maximisation convention).

Two exact solvers are provided: Gray-code enumeration for small graphs and a
column transfer-matrix (Viterbi) sweep for strips of up to ``MAX_TM_ROWS``
rows.  Both pin vertex ``(1, 1)`` to +1, which removes the global sign
ambiguity; every relative-spin quantity is independent of that pin.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .lattice import EdgeSet, GridGraph, SizingError, TerminalPair

MAX_ENUM_VERTICES = 26
MAX_TM_ROWS = 14
NEAR_TIE = 1e-12

DUMP_MAGIC = b"EAJF"
DUMP_VERSION = 1


@dataclass(frozen=True, eq=False)
class CouplingField:
    graph: GridGraph
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != (self.graph.n_edges,):
            raise ValueError(f"expected {self.graph.n_edges} couplings, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def gaussian(cls, graph: GridGraph, rng: np.random.Generator) -> "CouplingField":
        return cls(graph, rng.standard_normal(graph.n_edges))

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def sign(self) -> np.ndarray:
        return np.where(self.values < 0, -1, 1).astype(np.int8)

    @classmethod
    def from_parts(cls, graph: GridGraph, magnitude, sign) -> "CouplingField":
        return cls(graph, np.asarray(sign, dtype=np.float64) * np.asarray(magnitude, dtype=np.float64))

    def replace(self, edges, new_values) -> "CouplingField":
        vals = self.values.copy()
        vals[np.asarray(edges, dtype=np.int64)] = new_values
        return CouplingField(self.graph, vals)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CouplingField)
            and other.graph == self.graph
            and np.array_equal(other.values, self.values)
        )

    def grid_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """``(Jh, Jv)`` views shaped ``(R, C-1)`` and ``(R-1, C)``."""
        return split_grid(self.graph, self.values)

    def to_json(self) -> str:
        return json.dumps(
            {"n_cols": self.graph.n_cols, "n_rows": self.graph.n_rows, "couplings": self.values.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "CouplingField":
        d = json.loads(text)
        return cls(GridGraph(d["n_cols"], d["n_rows"]), np.array(d["couplings"], dtype=np.float64))


def split_grid(graph: GridGraph, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reshape edge-indexed values (last axis) into horizontal/vertical grids."""
    R, C = graph.n_rows, graph.n_cols
    H = graph.n_horizontal
    lead = values.shape[:-1]
    Jh = values[..., :H].reshape(lead + (R, C - 1))
    Jv = values[..., H:].reshape(lead + (R - 1, C))
    return Jh, Jv


@dataclass(frozen=True, eq=False)
class SpinConfig:
    """One +-1 spin per vertex, with the gauge pin recorded.

    ``bits`` is the compact bit-set form: bit ``w`` is set iff vertex ``w``
    carries spin -1.
    """

    graph: GridGraph
    spins: np.ndarray
    pinned: Optional[int] = 0

    def __post_init__(self):
        s = np.array(self.spins, dtype=np.int8).reshape(-1)
        if s.shape != (self.graph.n_vertices,):
            raise ValueError(f"expected {self.graph.n_vertices} spins, got {s.size}")
        if not np.all(np.abs(s) == 1):
            raise ValueError("spins must be +1 or -1")
        if self.pinned is not None and s[self.pinned] != 1:
            raise ValueError(f"pinned vertex {self.pinned} must carry +1")
        s.setflags(write=False)
        object.__setattr__(self, "spins", s)

    @classmethod
    def from_bits(cls, graph: GridGraph, bits: int, pinned: Optional[int] = 0) -> "SpinConfig":
        idx = np.arange(graph.n_vertices)
        s = 1 - 2 * ((bits >> idx) & 1) if graph.n_vertices < 63 else np.array(
            [1 - 2 * (bits >> int(i) & 1) for i in idx]
        )
        return cls(graph, s, pinned)

    @classmethod
    def unpinned(cls, graph: GridGraph, spins) -> "SpinConfig":
        return cls(graph, spins, None)

    @property
    def bits(self) -> int:
        out = 0
        for w in np.flatnonzero(self.spins < 0):
            out |= 1 << int(w)
        return out

    def pin(self, vertex: int = 0) -> "SpinConfig":
        """Global flip so that ``vertex`` carries +1."""
        s = self.spins if self.spins[vertex] == 1 else -self.spins
        return SpinConfig(self.graph, s, vertex)

    def __mul__(self, other: "SpinConfig") -> "SpinConfig":
        return SpinConfig(self.graph, self.spins * other.spins, None)

    def __neg__(self) -> "SpinConfig":
        return SpinConfig(self.graph, -self.spins, None)

    def __eq__(self, other) -> bool:
        return isinstance(other, SpinConfig) and other.graph == self.graph and np.array_equal(other.spins, self.spins)

    def relative(self, pair: TerminalPair) -> int:
        iu, iv = pair.indices(self.graph)
        return int(self.spins[iu]) * int(self.spins[iv])

    def to_json(self) -> str:
        return json.dumps(self.spins.astype(int).tolist())

    @classmethod
    def from_json(cls, graph: GridGraph, text: str, pinned: Optional[int] = 0) -> "SpinConfig":
        return cls(graph, np.array(json.loads(text)), pinned)


@dataclass(frozen=True)
class GroundStateResult:
    spins: SpinConfig
    energy: float
    degeneracy_gap: Optional[float] = None
    method: str = ""

    @property
    def near_tie(self) -> bool:
        return self.degeneracy_gap is not None and self.degeneracy_gap < NEAR_TIE


def _check_shapes(graph: GridGraph, J: CouplingField, s: Optional[SpinConfig] = None):
    if J.graph != graph:
        raise ValueError(f"coupling field is for {J.graph}, not {graph}")
    if s is not None and s.graph != graph:
        raise ValueError(f"spin configuration is for {s.graph}, not {graph}")


def energy(graph: GridGraph, J: CouplingField, s: SpinConfig) -> float:
    _check_shapes(graph, J, s)
    return float(edge_energies(graph, J, s).sum())


def edge_energies(graph: GridGraph, J: CouplingField, s: SpinConfig) -> np.ndarray:
    """Per-edge terms ``J_e s_a s_b``."""
    _check_shapes(graph, J, s)
    ends = graph.edges
    sp = s.spins.astype(np.float64)
    return J.values * sp[ends[:, 0]] * sp[ends[:, 1]]


def _neighbour_tables(graph: GridGraph):
    V = graph.n_vertices
    nbr = np.zeros((V, 4), dtype=np.int64)
    nbr_edge = np.zeros((V, 4), dtype=np.int64)
    deg = np.zeros(V, dtype=np.int64)
    for w, lst in enumerate(graph.incidence):
        deg[w] = len(lst)
        for k, (b, e) in enumerate(lst):
            nbr[w, k] = b
            nbr_edge[w, k] = e
    return nbr, nbr_edge, deg


def solve_enumeration(
    graph: GridGraph, J: CouplingField, max_vertices: int = MAX_ENUM_VERTICES
) -> GroundStateResult:
    """Exhaustive ground state; also reports the gap to the runner-up."""
    _check_shapes(graph, J)
    V = graph.n_vertices
    if V > max_vertices:
        raise SizingError(
            f"{V} vertices exceeds the enumeration cap of {max_vertices}; use solve_transfer_matrix"
        )
    if V == 1:
        s = SpinConfig(graph, [1])
        return GroundStateResult(s, 0.0, None, "enumeration")
    nbr, nbr_edge, deg = _neighbour_tables(graph)
    best_bits, _, second = _kernels.gray_enumerate(nbr, nbr_edge, deg, J.values, V)
    s = SpinConfig.from_bits(graph, int(best_bits))
    e = energy(graph, J, s)
    gap = None if not np.isfinite(second) else max(0.0, e - float(second))
    return GroundStateResult(s, e, gap, "enumeration")


def _check_tm(graph: GridGraph, max_rows: int):
    if graph.n_rows > max_rows:
        raise SizingError(f"{graph.n_rows} rows exceeds the transfer-matrix cap of {max_rows}")


def solve_transfer_matrix(graph: GridGraph, J: CouplingField, max_rows: int = MAX_TM_ROWS) -> GroundStateResult:
    """Column-by-column dynamic program; linear in ``n_cols``, ``2**n_rows`` states."""
    _check_shapes(graph, J)
    spins, energies = solve_batch(graph, J.values[None, :], max_rows=max_rows)
    s = SpinConfig(graph, spins[0])
    return GroundStateResult(s, energy(graph, J, s), None, "transfer_matrix")


def solve_batch(graph: GridGraph, values: np.ndarray, max_rows: int = MAX_TM_ROWS):
    """Transfer-matrix ground states for a ``(B, n_edges)`` array of couplings.

    Returns ``(spins, energies)`` with ``spins`` shaped ``(B, n_vertices)``.
    """
    _check_tm(graph, max_rows)
    values = np.ascontiguousarray(values, dtype=np.float64)
    B = values.shape[0]
    Jh, Jv = split_grid(graph, values)
    pins = np.zeros((graph.n_rows, graph.n_cols), dtype=np.int64)
    pins[0, 0] = 1
    out = np.empty((B, graph.n_rows, graph.n_cols), dtype=np.int8)
    energies = np.empty(B)
    _kernels.tm_solve_batch(np.ascontiguousarray(Jh), np.ascontiguousarray(Jv), pins, out, energies)
    return out.reshape(B, graph.n_vertices), energies


def relative_spins(graph: GridGraph, values: np.ndarray, pair: TerminalPair, max_rows: int = MAX_TM_ROWS):
    """``s_u s_v`` of the ground state for each row of a ``(B, n_edges)`` array.

    Returns ``(rel, margin)``: ``rel`` is int8 in {-1, 0, +1} (0 only on an
    exact tie) and ``margin`` is the energy gap between the best
    configurations with ``s_u s_v = +1`` and ``-1``.
    """
    _check_tm(graph, max_rows)
    values = np.ascontiguousarray(np.atleast_2d(values), dtype=np.float64)
    Jh, Jv = split_grid(graph, values)
    (ux, uy), (vx, vy) = pair.u, pair.v
    graph.vertex_index(pair.u)
    graph.vertex_index(pair.v)
    B = values.shape[0]
    rel = np.empty(B, dtype=np.int8)
    margin = np.empty(B)
    _kernels.tm_relspin_batch(
        np.ascontiguousarray(Jh), np.ascontiguousarray(Jv), uy - 1, ux - 1, vy - 1, vx - 1, rel, margin
    )
    return rel, margin


def solve(graph: GridGraph, J: CouplingField, method: str = "auto") -> GroundStateResult:
    """Dispatch to an exact solver; ``auto`` prefers the transfer matrix."""
    if method == "enumeration":
        return solve_enumeration(graph, J)
    if method == "transfer_matrix":
        return solve_transfer_matrix(graph, J)
    if method != "auto":
        raise ValueError(f"unknown solver {method!r}")
    if graph.n_rows <= MAX_TM_ROWS:
        return solve_transfer_matrix(graph, J)
    return solve_enumeration(graph, J)


def gauge_transform(J: CouplingField, tau: SpinConfig) -> CouplingField:
    """``J^tau_(a,b) = tau_a J_(a,b) tau_b``; an involution."""
    if tau.graph != J.graph:
        raise ValueError("gauge vector and couplings live on different graphs")
    ends = J.graph.edges
    t = tau.spins.astype(np.float64)
    return CouplingField(J.graph, J.values * t[ends[:, 0]] * t[ends[:, 1]])


def flip_cutset(J: CouplingField, C: EdgeSet) -> CouplingField:
    """Negate the couplings on ``C``."""
    if C.n_edges != J.graph.n_edges:
        raise ValueError("edge set does not belong to the coupling field's graph")
    vals = J.values.copy()
    idx = C.indices()
    vals[idx] = -vals[idx]
    return CouplingField(J.graph, vals)


def flip_side(s: SpinConfig, side: Sequence[int] | frozenset) -> SpinConfig:
    """Negate the spins on a vertex set."""
    sp = s.spins.copy()
    sp[np.fromiter(side, dtype=np.int64)] *= -1
    return SpinConfig(s.graph, sp, None)


def dump_couplings(path, fields: Sequence[CouplingField]) -> None:
    """Binary sweep dump: 16-byte header then ``float64`` rows, little-endian.

    Header: 4-byte magic, then ``uint32`` version, ``n_cols``, ``n_rows``.
    """
    if not fields:
        raise ValueError("nothing to dump")
    g = fields[0].graph
    if any(f.graph != g for f in fields):
        raise ValueError("all fields in one dump must share a graph")
    data = np.stack([f.values for f in fields]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC + struct.pack("<III", DUMP_VERSION, g.n_cols, g.n_rows))
        fh.write(data.tobytes())


def load_couplings(path) -> list[CouplingField]:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != DUMP_MAGIC:
        raise ValueError(f"{path} is not a coupling dump")
    version, n_cols, n_rows = struct.unpack("<III", raw[4:16])
    if version != DUMP_VERSION:
        raise ValueError(f"unsupported dump version {version}")
    g = GridGraph(n_cols, n_rows)
    data = np.frombuffer(raw[16:], dtype="<f8")
    if data.size % g.n_edges:
        raise ValueError("truncated coupling dump")
    return [CouplingField(g, row) for row in data.reshape(-1, g.n_edges)]
