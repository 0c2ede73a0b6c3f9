import math

import numpy as np
import pytest

from easpectral.ground_state import CouplingField, SpinConfig
from easpectral.lattice import TerminalPair, build_grid, canonical_pair
from easpectral.ou_flow import (
    CSV_COLUMNS,
    decorrelation_experiment,
    decorrelation_samples,
    evolve,
    evolve_values,
    overlap,
    rows_to_csv,
    sample_flow,
)


def test_zero_time_is_identity():
    g = build_grid(3, 3)
    rng = np.random.default_rng(0)
    J = CouplingField.gaussian(g, rng)
    assert evolve(J, 0.0, rng) == J
    with pytest.raises(ValueError):
        evolve(J, -1.0, rng)


@pytest.mark.parametrize("t", [0.1, 0.5, 2.0])
def test_stationary_moments(t):
    rng = np.random.default_rng(12)
    n = 200_000
    x0 = rng.standard_normal(n)
    xt = evolve_values(x0, t, rng)
    assert abs(xt.var() - 1) < 5 * math.sqrt(2 / n)
    c = x0 * xt
    assert abs(c.mean() - math.exp(-t)) < 5 * c.std() / math.sqrt(n)


def test_sample_flow_reproducible():
    g = build_grid(4, 2)
    a = sample_flow(g, 0.3, 5, (2,))
    b = sample_flow(g, 0.3, 5, (2,))
    assert a.J0 == b.J0 and a.Jt == b.Jt
    assert not (sample_flow(g, 0.3, 5, (3,)).J0 == a.J0)


def test_overlap():
    g = build_grid(2, 2)
    s = SpinConfig(g, [1, -1, 1, 1])
    assert overlap(s, s) == 1.0
    assert overlap(s, -s) == -1.0
    assert overlap(s, SpinConfig(g, [1, 1, 1, 1])) == 0.5


def test_decorrelation_rows():
    g = build_grid(4, 4)
    pair = canonical_pair(g)
    rows = decorrelation_experiment(g, pair, (0.0, 0.5, 5.0), 400, seed=3)
    assert rows[0].mean_cov == 1.0 and rows[0].mean_R2 == 1.0
    assert rows[0].mean_cov >= rows[1].mean_cov
    assert abs(rows[2].mean_cov) < 4 * rows[2].stderr + 0.05
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)


def test_thread_count_does_not_change_samples():
    g = build_grid(3, 3)
    pair = TerminalPair((1, 2), (3, 2))
    a = decorrelation_samples(g, pair, (0.1, 1.0), 300, 4, threads=1, block=64)
    b = decorrelation_samples(g, pair, (0.1, 1.0), 300, 4, threads=4, block=64)
    c = decorrelation_samples(g, pair, (0.1, 1.0), 300, 4, threads=2, block=512)
    for x, y, z in zip(a, b, c):
        assert np.array_equal(x, y) and np.array_equal(x, z)


def test_enumeration_path_matches_transfer_matrix():
    g = build_grid(3, 3)
    pair = canonical_pair(g)
    a = decorrelation_samples(g, pair, (0.2,), 50, 1, method="enumeration")
    b = decorrelation_samples(g, pair, (0.2,), 50, 1, method="transfer_matrix")
    assert np.array_equal(a[1], b[1])
