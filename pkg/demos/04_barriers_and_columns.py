"""Barriers around an edge of the line, and straight columns of short connecting sets.

Run: python3 demos/04_barriers_and_columns.py
"""

import math

import numpy as np

from easpectral.barrier import (
    barrier_centers,
    barrier_probability,
    build_barrier_spec,
    envelope,
    sample_barrier_couplings,
    sample_detour_set,
    straight_columns,
    verify_barrier_obliviousness,
)
from easpectral.ground_state import CouplingField
from easpectral.lattice import TerminalPair, build_grid

g = build_grid(7, 7)
pair = TerminalPair((1, 4), (7, 4))
e = barrier_centers(g, pair)[0]
spec = build_barrier_spec(g, e, pair=pair)
print("centre edge", g.edge_vertices(e), " |low| =", len(spec.low_edges), " |high| =", len(spec.high_edges))
print("energy gap 2h - 2|low|l =", spec.gap)
print("log10 P(barrier) = %.1f" % (barrier_probability(spec) / math.log(10)))

# Conditioned sampling hits the event directly; flipping J_e never changes s_u s_v.
rng = np.random.default_rng(5)
ok = 0
for _ in range(100):
    J = sample_barrier_couplings(spec, CouplingField.gaussian(g, rng), rng)
    ok += verify_barrier_obliviousness(g, pair, J, spec).passed
print("obliviousness:", ok, "/ 100")

# Straight columns of a random short connecting set.
G = build_grid(61, 21)
P = TerminalPair((1, 11), (61, 11))
S = sample_detour_set(G, P, eps=0.1, rng=np.random.default_rng(2))
cls = straight_columns(G, S, 5, P)
print("\n|S| =", len(S), " straight columns", cls.J_set, " theta = %.2f" % cls.theta, " bound", 1 - 0.1 * 5)
print("rows of the straight segments", cls.Y_set)
print("S inside its envelope:", S.issubset(envelope(G, cls)))
