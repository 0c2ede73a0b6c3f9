"""Spectral mass of the straight line between u and v.

The mass sum_{E_k subset L} alpha_k^2 is estimated by nested Monte Carlo;
it drops quickly with the grid size.

Run: python3 demos/03_line_mass.py
"""

import time

import numpy as np

from easpectral.lattice import build_grid, canonical_pair, line_L
from easpectral.spectral import line_mass, subset_mass

for n in (2, 4, 6, 8):
    g = build_grid(n, n)
    t0 = time.perf_counter()
    est = line_mass(g, canonical_pair(g), N_outer=600, M_inner=100, rng=np.random.SeedSequence(11, spawn_key=(n,)))
    lo, hi = est.confidence_interval()
    print(f"n={n}:  mass(L) = {est.mass_hat:.5f}  95% CI [{lo:.5f}, {hi:.5f}]  ({time.perf_counter() - t0:.1f}s)")

# Dropping one edge of L disconnects u from v; antithetic pairing then gives exactly zero.
g = build_grid(6, 6)
pair = canonical_pair(g)
S = line_L(g, pair).without_edge(int(line_L(g, pair).indices()[2]))
print("\nL minus one edge, antithetic:", subset_mass(g, pair, S, 100, 20, antithetic=True, rng=0).mass_hat)
plain = subset_mass(g, pair, S, 400, 40, rng=0)
print("L minus one edge, plain: %.5f +- %.5f" % (plain.mass_hat, plain.stderr))
