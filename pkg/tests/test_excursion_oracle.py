import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rrgperc import InvalidInput
from rrgperc.excursion_oracle import (
    GridPath, cdf_table, excursion_lengths, reflect, sample_gamma, sample_gamma_refined, simulate_b_lambda,
    write_cdf_csv, write_lengths_csv,
)


def test_grid_shape_and_noiseless_drift():
    p = simulate_b_lambda(3, 1.0, 2.0, 0.01)
    assert p.values.size == 201 and p.values[0] == 0
    assert p.s_max == pytest.approx(2.0)
    s = p.grid
    assert np.allclose(p.values, s - s ** 2 / 6, atol=1e-15)
    assert simulate_b_lambda(3, 0.0, 1.0, 0.3).values.size == 4


@pytest.mark.parametrize("kw", [dict(ds=0), dict(ds=-1e-3), dict(s_max=1e-4, ds=1e-3)])
def test_invalid_grid(kw):
    with pytest.raises(InvalidInput):
        simulate_b_lambda(3, 0.0, rng=np.random.default_rng(0), **{"s_max": 1.0, **kw})
    with pytest.raises(InvalidInput):
        simulate_b_lambda(2, 0.0)


@pytest.mark.parametrize("d,s,lam", [(3, 1.0, 0.0), (4, 2.0, 0.5), (5, 0.5, -1.0)])
def test_moments_at_fixed_s(d, s, lam):
    rng = np.random.default_rng(d)
    k = int(round(s / 0.01))
    vals = np.array([simulate_b_lambda(d, lam, s, 0.01, rng).values[k] for _ in range(8000)])
    mean = lam * s - (d - 2) * s * s / (2 * d)
    var = (d - 2) / (d - 1) * s
    se = np.sqrt(var / vals.size)
    assert abs(vals.mean() - mean) < 4 * se
    # standard error of the sample variance for a Gaussian
    assert abs(vals.var() - var) < 4 * var * np.sqrt(2 / vals.size)


def test_moments_at_one_for_d3():
    rng = np.random.default_rng(7)
    vals = np.array([simulate_b_lambda(3, 0.0, 1.0, 0.01, rng).values[-1] for _ in range(8000)])
    assert abs(vals.mean() + 1 / 6) < 4 * np.sqrt(0.5 / 8000)
    assert abs(vals.var() - 0.5) < 4 * 0.5 * np.sqrt(2 / 8000)


def test_reflect_examples():
    up = GridPath(0.1, np.linspace(0, 3, 31), 3, 0.0)
    assert np.array_equal(reflect(up).values, up.values)
    down = GridPath(0.1, -np.linspace(0, 3, 31), 3, 0.0)
    assert np.all(reflect(down).values == 0)


@given(seed=st.integers(0, 10 ** 6), lam=st.floats(-3, 3), d=st.integers(3, 6))
@settings(max_examples=50, deadline=None)
def test_reflection_properties(seed, lam, d):
    w = reflect(simulate_b_lambda(d, lam, 5.0, 0.01, np.random.default_rng(seed)))
    assert w.values[0] == 0 and w.values.min() == 0
    assert np.all(w.values >= 0)
    ex = excursion_lengths(w, 4)
    assert np.all(np.diff(ex.lengths) <= 0)
    assert ex.lengths.sum() <= w.s_max + 1e-9


@pytest.mark.parametrize("d,lam", [(3, 1.0), (3, 2.0), (4, 1.0), (6, 0.5)])
def test_noiseless_single_excursion(d, lam):
    ds = 1e-3
    ex = excursion_lengths(reflect(simulate_b_lambda(d, lam, 20.0, ds)), 3)
    root = 2 * d * lam / (d - 2)
    assert abs(ex.lengths[0] - root) <= ds + 1e-12
    assert np.all(ex.lengths[1:] == 0)
    assert not ex.truncated
    g = sample_gamma(d, lam, 20.0, ds, trials=2, m=3, rng=None)
    assert np.allclose(g.lengths[:, 0], ex.lengths[0])


def test_zero_path_has_no_excursions():
    ex = excursion_lengths(GridPath(0.1, np.zeros(20), 3, 0.0), 4)
    assert ex.lengths.tolist() == [0, 0, 0, 0] and not ex.truncated


def test_trailing_excursion_is_flagged():
    w = reflect(GridPath(0.5, np.array([0, -1, 0.5, 1, 2.0]), 3, 0.0))
    ex = excursion_lengths(w, 2)
    assert ex.truncated and ex.longest_truncated
    assert ex.lengths.tolist() == [1.5, 0]


def test_kernel_matches_path_extractor():
    # two routes on the same normals: full path + reflection versus the streaming kernel
    for lam in (-1.0, 0.0, 1.5):
        for seed in range(5):
            ex = excursion_lengths(reflect(simulate_b_lambda(3, lam, 8.0, 0.01, np.random.default_rng(seed))), 4)
            g = sample_gamma(3, lam, 8.0, 0.01, trials=1, m=4, rng=np.random.default_rng(seed))
            assert np.allclose(g.lengths[0], ex.lengths)
            assert g.truncated[0] == ex.longest_truncated


def test_m_does_not_change_leading_coordinates():
    a = sample_gamma(3, 0.0, 10.0, 0.01, 50, 1, np.random.default_rng(3))
    b = sample_gamma(3, 0.0, 10.0, 0.01, 50, 3, np.random.default_rng(3))
    assert np.array_equal(a.lengths[:, 0], b.lengths[:, 0])


def test_median_ordering_in_lambda():
    rng = np.random.default_rng(11)
    lo = sample_gamma(3, -10.0, 20.0, 1e-3, 400, 1, rng)
    mid = sample_gamma(3, 0.0, 20.0, 1e-3, 400, 1, rng)
    assert np.median(lo.lengths[:, 0]) < np.median(mid.lengths[:, 0])
    assert lo.truncation_rate == 0


def test_large_lambda_approaches_drift_root():
    g = sample_gamma(3, 3.0, 30.0, 1e-3, 400, 1, np.random.default_rng(2))
    assert np.median(g.lengths[:, 0]) == pytest.approx(18.0, rel=0.05)


@pytest.mark.slow
def test_grid_refinement_is_within_monte_carlo_error():
    coarse, fine = sample_gamma_refined(3, 0.0, 20.0, 1e-3, 10 ** 4, 1, np.random.default_rng(21))
    a, b = coarse.lengths[:, 0], fine.lengths[:, 0]
    # standard error of the median from the density at the median
    iqr = np.subtract(*np.percentile(a, [75, 25]))
    se = 1.2533 * (iqr / 1.349) / np.sqrt(a.size)
    assert abs(np.median(a) - np.median(b)) < se
    assert coarse.truncation_rate < 0.01


def test_cdf_and_csv(tmp_path):
    tab = cdf_table([2.0, 1.0, 2.0, 3.0])
    assert tab.tolist() == [[1.0, 0.25], [2.0, 0.75], [3.0, 1.0]]
    g = sample_gamma(3, 0.0, 2.0, 0.01, 5, 2, np.random.default_rng(0))
    write_lengths_csv(g, tmp_path / "g.csv")
    rows = list(csv.reader(open(tmp_path / "g.csv")))
    assert rows[0] == ["gamma_1", "gamma_2", "truncated"] and len(rows) == 6
    assert float(rows[1][0]) == g.lengths[0, 0]
    write_cdf_csv(g.lengths[:, 0], tmp_path / "c.csv")
    back = np.loadtxt(tmp_path / "c.csv", delimiter=",", skiprows=1, ndmin=2)
    assert back[-1, 1] == 1.0
