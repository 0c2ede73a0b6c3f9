"""Compiled inner loops for the exact solvers.

Spin convention inside the kernels: bit value 0 is spin +1, bit value 1 is
spin -1.  Grid arrays are indexed ``[y, x]`` with 0-based coordinates;
``Jh[y, x]`` couples ``(x, y)`` to ``(x + 1, y)`` and ``Jv[y, x]`` couples
``(x, y)`` to ``(x, y + 1)``.
"""

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True, nogil=True)
def gray_enumerate(nbr, nbr_edge, deg, J, n_vertices):
    """Exhaustive maximisation with vertex 0 pinned to +1.

    Walks the ``2**(n_vertices - 1)`` configurations in Gray-code order,
    updating the energy by single-spin deltas.  Returns the best bit-set,
    its energy and the runner-up energy.  Equal maxima resolve to the
    smallest bit-set.
    """
    spin = np.ones(n_vertices, dtype=np.int64)
    energy = 0.0
    for e in range(J.shape[0]):
        energy += J[e]
    bits = np.int64(0)
    best = energy
    best_bits = np.int64(0)
    second = NEG_INF
    total = np.int64(1) << (n_vertices - 1)
    for i in range(1, total):
        j = 0
        t = i
        while (t & 1) == 0:
            t >>= 1
            j += 1
        w = j + 1
        local = 0.0
        for k in range(deg[w]):
            local += J[nbr_edge[w, k]] * spin[nbr[w, k]]
        energy -= 2.0 * spin[w] * local
        spin[w] = -spin[w]
        bits ^= np.int64(1) << w
        if energy > best:
            second = best
            best = energy
            best_bits = bits
        elif energy == best:
            second = energy
            if bits < best_bits:
                best_bits = bits
        elif energy > second:
            second = energy
    return best_bits, best, second


@njit(cache=True, nogil=True)
def _forward(Jh, Jv, pins, V, choice, store):
    """Site-by-site max-plus sweep over column spin patterns.

    ``V[s]`` ends up holding the best energy of any configuration whose last
    column reads ``s``.  ``pins[y, x]`` is 0 (free), +1 or -1.
    """
    R, C = pins.shape
    S = 1 << R
    for s in range(S):
        val = 0.0
        ok = True
        for y in range(R):
            sp = 1 - 2 * ((s >> y) & 1)
            if pins[y, 0] != 0 and pins[y, 0] != sp:
                ok = False
            if y > 0:
                below = 1 - 2 * ((s >> (y - 1)) & 1)
                val += Jv[y - 1, 0] * below * sp
        V[s] = val if ok else NEG_INF
    for x in range(1, C):
        for y in range(R):
            m = 1 << y
            jh = Jh[y, x - 1]
            pin = pins[y, x]
            for s0 in range(S):
                if s0 & m:
                    continue
                s1 = s0 | m
                a = V[s0]
                b = V[s1]
                # new spin +1: previous row-y spin +1 (a) or -1 (b)
                p0 = a + jh
                q0 = b - jh
                if p0 >= q0:
                    n0 = p0
                    c0 = 0
                else:
                    n0 = q0
                    c0 = 1
                # new spin -1
                p1 = a - jh
                q1 = b + jh
                if p1 >= q1:
                    n1 = p1
                    c1 = 0
                else:
                    n1 = q1
                    c1 = 1
                if y > 0:
                    jv = Jv[y - 1, x] * (1 - 2 * ((s0 >> (y - 1)) & 1))
                    n0 = n0 + jv
                    n1 = n1 - jv
                if pin == -1:
                    n0 = NEG_INF
                elif pin == 1:
                    n1 = NEG_INF
                V[s0] = n0
                V[s1] = n1
                if store:
                    choice[x, y, s0] = c0
                    choice[x, y, s1] = c1


@njit(cache=True, nogil=True)
def _backtrack(V, choice, R, C, out):
    S = 1 << R
    best = 0
    for s in range(1, S):
        if V[s] > V[best]:
            best = s
    s = best
    for x in range(C - 1, 0, -1):
        for y in range(R):
            out[y, x] = 1 - 2 * ((s >> y) & 1)
        for y in range(R - 1, -1, -1):
            c = choice[x, y, s]
            s = (s & ~(1 << y)) | (c << y)
    for y in range(R):
        out[y, 0] = 1 - 2 * ((s >> y) & 1)
    return V[best]


@njit(cache=True, nogil=True)
def tm_solve_batch(Jh, Jv, pins, spins, energies):
    """Ground states for a batch; ``spins`` is ``(B, R, C)`` int8 output."""
    B = Jh.shape[0]
    R, C = pins.shape
    S = 1 << R
    V = np.empty(S)
    choice = np.zeros((C, R, S), dtype=np.uint8)
    for i in range(B):
        _forward(Jh[i], Jv[i], pins, V, choice, True)
        energies[i] = _backtrack(V, choice, R, C, spins[i])


@njit(cache=True, nogil=True)
def tm_relspin_batch(Jh, Jv, uy, ux, vy, vx, rel, margin):
    """Relative spin ``s_u s_v`` of the ground state for each batch entry.

    ``margin`` is the energy gap between the best configuration with
    ``s_u s_v = +1`` and the best with ``s_u s_v = -1``; ``rel`` is 0 when
    they tie exactly.
    """
    B = Jh.shape[0]
    R = Jh.shape[1]
    C = Jv.shape[2]
    S = 1 << R
    V = np.empty(S)
    dummy = np.zeros((1, 1, 1), dtype=np.uint8)
    pins = np.zeros((R, C), dtype=np.int64)
    last_col = vx == C - 1 and not (ux == vx and uy == vy)
    for i in range(B):
        if last_col:
            pins[:, :] = 0
            pins[uy, ux] = 1
            _forward(Jh[i], Jv[i], pins, V, dummy, False)
            e_same = NEG_INF
            e_opp = NEG_INF
            for s in range(S):
                if (s >> vy) & 1:
                    if V[s] > e_opp:
                        e_opp = V[s]
                elif V[s] > e_same:
                    e_same = V[s]
        else:
            pins[:, :] = 0
            pins[uy, ux] = 1
            pins[vy, vx] = 1
            _forward(Jh[i], Jv[i], pins, V, dummy, False)
            e_same = NEG_INF
            for s in range(S):
                if V[s] > e_same:
                    e_same = V[s]
            pins[vy, vx] = -1
            _forward(Jh[i], Jv[i], pins, V, dummy, False)
            e_opp = NEG_INF
            for s in range(S):
                if V[s] > e_opp:
                    e_opp = V[s]
        if e_same > e_opp:
            rel[i] = 1
            margin[i] = e_same - e_opp
        elif e_opp > e_same:
            rel[i] = -1
            margin[i] = e_opp - e_same
        else:
            rel[i] = 0
            margin[i] = 0.0
