"""Orthonormal (probabilists') Hermite polynomials and Gaussian quadrature."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import mpmath
import numpy as np
from scipy.linalg import eigh_tridiagonal

from .lattice import EdgeSet

MAX_ORDER = 64


def hermite_eval(k: int, x):
    """``h_k(x)`` with ``E h_k(xi) h_m(xi) = delta_km`` for standard Gaussian ``xi``.

    Uses ``h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k + 1)``.
    """
    if k < 0:
        raise ValueError("degree must be nonnegative")
    return hermite_table(k, x)[k]


def hermite_table(kmax: int, x) -> np.ndarray:
    """Rows ``h_0(x), ..., h_kmax(x)`` stacked along a new leading axis."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = x
    for k in range(1, kmax):
        out[k + 1] = (x * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
    return out


@dataclass(frozen=True)
class MultiIndex:
    """Sparse multi-index: edge -> degree, zero degrees omitted."""

    degrees: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        items = sorted((int(e), int(k)) for e, k in self.degrees)
        if any(k < 0 for _, k in items):
            raise ValueError("degrees must be nonnegative")
        edges = [e for e, _ in items]
        if len(set(edges)) != len(edges):
            raise ValueError("repeated edge in multi-index")
        object.__setattr__(self, "degrees", tuple((e, k) for e, k in items if k > 0))

    @classmethod
    def of(cls, mapping: Mapping[int, int] | Iterable[tuple[int, int]] = ()) -> "MultiIndex":
        items = mapping.items() if isinstance(mapping, Mapping) else mapping
        return cls(tuple(items))

    @classmethod
    def from_dense(cls, ks) -> "MultiIndex":
        return cls(tuple((e, int(k)) for e, k in enumerate(ks) if k))

    @property
    def weight(self) -> int:
        return sum(k for _, k in self.degrees)

    def support(self, n_edges: int) -> EdgeSet:
        return EdgeSet.from_indices(n_edges, (e for e, _ in self.degrees))

    def __getitem__(self, e: int) -> int:
        return dict(self.degrees).get(e, 0)

    def dense(self, n_edges: int) -> np.ndarray:
        out = np.zeros(n_edges, dtype=np.int64)
        for e, k in self.degrees:
            out[e] = k
        return out

    def to_pairs(self) -> list[list[int]]:
        return [[e, k] for e, k in self.degrees]


def hermite_tensor_eval(k: MultiIndex, J) -> np.ndarray | float:
    """``prod_e h_{k_e}(J_e)`` over the support of ``k``.

    ``J`` may be a :class:`CouplingField`, a 1-D array or a ``(B, n_edges)``
    batch.
    """
    vals = np.asarray(getattr(J, "values", J), dtype=np.float64)
    out = np.ones(vals.shape[:-1])
    for e, d in k.degrees:
        out = out * hermite_eval(d, vals[..., e])
    return out if out.ndim else float(out)


def ou_kernel(k: int, m: int, t: float) -> float:
    """``E[h_k(X_0) h_m(X_t)]`` for the stationary OU flow: ``delta_km exp(-k t)``."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    return math.exp(-k * t) if k == m else 0.0


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights integrating against the standard Gaussian density."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "gauss_hermite"

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def to_json(self) -> str:
        return json.dumps(
            {"order": self.order, "kind": self.kind, "nodes": self.nodes.tolist(), "weights": self.weights.tolist()}
        )


def _check_order(q: int, hi: int = MAX_ORDER):
    if not 1 <= q <= hi:
        raise ValueError(f"quadrature order must lie in [1, {hi}], got {q}")


@lru_cache(maxsize=None)
def quadrature_rule(q: int) -> QuadratureRule:
    """Gauss rule for N(0, 1) from the Jacobi matrix of the ``h_k`` recurrence."""
    _check_order(q)
    if q == 1:
        return QuadratureRule(1, np.zeros(1), np.ones(1))
    off = np.sqrt(np.arange(1, q, dtype=np.float64))
    nodes = eigh_tridiagonal(np.zeros(q), off, eigvals_only=True)
    # exact antisymmetry of the nodes
    nodes = 0.5 * (nodes - nodes[::-1])
    # Christoffel numbers; squared eigenvector entries underflow at the outer nodes
    weights = 1.0 / np.sum(hermite_table(q - 1, nodes) ** 2, axis=0)
    weights = 0.5 * (weights + weights[::-1])
    return QuadratureRule(q, nodes, weights / weights.sum())


def _half_moments(n: int):
    # int_0^inf x^j phi(x) dx = 2^(j/2) Gamma((j+1)/2) / (2 sqrt(pi))
    return [mpmath.power(2, mpmath.mpf(j) / 2) * mpmath.gamma(mpmath.mpf(j + 1) / 2) / (2 * mpmath.sqrt(mpmath.pi))
            for j in range(2 * n)]


def _chebyshev(moments, n: int):
    """Recurrence coefficients from ordinary moments (Chebyshev algorithm)."""
    alpha = [mpmath.mpf(0)] * n
    beta = [mpmath.mpf(0)] * n
    prev = [mpmath.mpf(0)] * (2 * n)
    cur = list(moments)
    alpha[0] = moments[1] / moments[0]
    beta[0] = moments[0]
    for k in range(1, n):
        nxt = [mpmath.mpf(0)] * (2 * n)
        for l in range(k, 2 * n - k):
            nxt[l] = cur[l + 1] - alpha[k - 1] * cur[l] - beta[k - 1] * prev[l]
        alpha[k] = nxt[k + 1] / nxt[k] - cur[k] / cur[k - 1]
        beta[k] = nxt[k] / cur[k - 1]
        prev, cur = cur, nxt
    return alpha, beta


@lru_cache(maxsize=None)
def half_range_rule(q: int) -> QuadratureRule:
    """Gauss rule for ``int_0^inf f(x) phi(x) dx`` (weights sum to 1/2)."""
    _check_order(q, MAX_ORDER // 2)
    with mpmath.workdps(40 + 3 * q):
        alpha, beta = _chebyshev(_half_moments(q), q)
        A = mpmath.matrix(q, q)
        for i in range(q):
            A[i, i] = alpha[i]
            if i + 1 < q:
                A[i, i + 1] = A[i + 1, i] = mpmath.sqrt(beta[i + 1])
        E, Q = mpmath.eigsy(A)
        order = sorted(range(q), key=lambda i: E[i])
        nodes = np.array([float(E[i]) for i in order])
        weights = np.array([float(beta[0] * Q[0, i] ** 2) for i in order])
    return QuadratureRule(q, nodes, weights, "half_range")


@lru_cache(maxsize=None)
def split_rule(q: int) -> QuadratureRule:
    """Gaussian rule built from two mirrored half-range rules of ``q // 2`` nodes.

    Exact for functions that are polynomials of degree ``<= q - 1`` on each
    half-line separately, e.g. ``sign(x) p(x)``.  Nodes are symmetric about 0
    with mirrored weights.
    """
    if q < 2 or q % 2:
        raise ValueError("split rule needs an even order >= 2")
    half = half_range_rule(q // 2)
    nodes = np.concatenate([-half.nodes[::-1], half.nodes])
    weights = np.concatenate([half.weights[::-1], half.weights])
    return QuadratureRule(q, nodes, weights, "split_half_range")
