"""Hermite spectrum of s_u s_v on the smallest graphs.

On one edge s_u s_v = sign(J), whose coefficients are known in closed form.
The census shows that all visible mass sits on connecting supports, and the
Ornstein-Uhlenbeck curve matches sum alpha_k^2 exp(-|k| t).

Run: python3 demos/02_single_edge_spectrum.py
"""

import math

from easpectral.hermite import MultiIndex
from easpectral.lattice import TerminalPair, build_grid
from easpectral.spectral import coefficient_quadrature, decorrelation_identity_check, spectral_support_census

edge = build_grid(2, 1)
pair = TerminalPair((1, 1), (2, 1))
for k in range(1, 8, 2):
    a = coefficient_quadrature(edge, pair, MultiIndex.of({0: k})).alpha_hat
    print(f"alpha_{k} = {a:+.10f}")
print("sqrt(2/pi) =", math.sqrt(2 / math.pi))

census = spectral_support_census(edge, pair, D=9)
print("mass captured up to degree 9: %.7f" % census.captured_mass)

square = build_grid(2, 2)
diag = TerminalPair((1, 1), (2, 2))
c = spectral_support_census(square, diag, D=7, q=10)
top = sorted(c.entries, key=lambda e: -e.alpha_sq)[:6]
print("\n2x2 grid, diagonal pair, largest coefficients:")
for e in top:
    print("  k =", e.k.to_pairs(), " alpha^2 = %.5f" % e.alpha_sq, " connects:", e.support_connects)
print("violations:", len(c.violations()))

print("\nOU decorrelation on one edge:")
for r in decorrelation_identity_check(edge, pair, replicas=20000, rng=3):
    print(f"  t={r.t:<4}  MC {r.mc_cov:.4f} +- {r.mc_stderr:.4f}   series {r.census_value:.4f}   ok={r.agrees}")
