"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL verdict (printed in the terminal
summary) and then asserts it.  Heavy Monte Carlo sweeps are written to a
results directory so a rerun can resume them; set ``RRGPERC_ACCEPTANCE_DIR``
to keep that directory between sessions.
"""

import itertools
import os
from math import exp, log, sqrt
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import CRITERIA
from rrgperc import DegreeSequence, contract, is_simple, sample_matching
from rrgperc import walk_theory as wt
from rrgperc.components import ks_two_sample, union_find_components
from rrgperc.excursion_oracle import excursion_lengths, reflect, sample_gamma, sample_gamma_refined, simulate_b_lambda
from rrgperc.exploration import explore
from rrgperc.harness import (
    ExperimentConfig, clt_path_check, compare_window, prop1_bounds_check, run_sweep, window_tail_fit,
)

pytestmark = pytest.mark.slow


def verdict(k, ok, detail):
    line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA[k] = line
    print(line)
    return ok


@pytest.fixture(scope="session")
def results_dir(tmp_path_factory):
    keep = os.environ.get("RRGPERC_ACCEPTANCE_DIR")
    if keep:
        path = Path(keep)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp("acceptance")


# criteria 1 and 2 share the same runs

@pytest.fixture(scope="module")
def small_runs():
    combos = [(n, d, p) for n in (10, 50, 200) for d in (3, 4, 5) for p in (0.2, 1 / (d - 1), 0.9)]
    rng = np.random.default_rng(20240601)
    out = []
    for i in range(1000):
        n, d, p = combos[i % len(combos)]
        deg = DegreeSequence.regular(n, d)
        run = explore(deg, p, rng)
        out.append((d, run, run.traces()))
    return out


def test_criterion_01_exploration_equals_union_find(small_runs):
    mismatches = 0
    for d, run, traces in small_runs:
        g = contract(run.matching, run.deg, open_only=True)
        oracle = union_find_components(g).sizes
        if sorted(t.size for t in traces) != sorted(oracle.tolist()):
            mismatches += 1
    assert verdict(1, mismatches == 0, f"{mismatches} mismatches over {len(small_runs)} trials")


def test_criterion_02_component_sandwich(small_runs):
    lower = upper = total = 0
    worst = 0.0
    for d, run, traces in small_runs:
        for tr in traces:
            mid, right = tr.sandwich(d)
            total += 1
            if mid < 0:
                lower += 1
                worst = min(worst, mid)
            if mid > right:
                upper += 1
    ok = lower == 0 and upper == 0
    assert verdict(2, ok, f"{total} traces: {lower} lower-bound violations (min middle term {worst:.3f}), "
                          f"{upper} upper-bound violations")


def test_criterion_03_matching_uniformity_and_simplicity():
    index = {}
    for perm in itertools.permutations(range(6)):
        partner = [0] * 6
        for a, b in zip(perm[0::2], perm[1::2]):
            partner[a], partner[b] = b, a
        index.setdefault(tuple(partner), len(index))
    assert len(index) == 15
    rng = np.random.default_rng(3)
    counts = np.zeros(15)
    for _ in range(150000):
        counts[index[tuple(sample_matching(6, rng).partner.tolist())]] += 1
    pval = chisquare(counts).pvalue
    deg = DegreeSequence.regular(1000, 3)
    hits = sum(is_simple(contract(sample_matching(3000, rng), deg)) for _ in range(20000))
    rate = hits / 20000
    ok = pval > 1e-3 and abs(rate - exp(-2)) <= 0.015
    assert verdict(3, ok, f"chi-square p={pval:.3g}; simple rate {rate:.4f} vs e^-2={exp(-2):.4f}")


def test_criterion_04_tilting_closed_forms():
    b = wt.binomial_shift_law(3, 0.45)
    tb = wt.solve_theta0(b)
    t = wt.two_point_law(3, 0.45)
    tt = wt.solve_theta0(t)
    closed = (abs(tb - log(11 / 9)) < 1e-10 and abs(wt.mgf(b, tb) - 0.99) < 1e-10
              and abs(tt - 0.5 * log(11 / 9)) < 1e-10 and abs(wt.mgf(t, tt) - 2 * sqrt(0.2475)) < 1e-10)
    ratios = {}
    for d in (3, 4):
        for name, make, first in (
            ("binomial", lambda e, d=d: wt.binomial_shift_law(d, (1 - e) / (d - 1)), lambda e, d=d: (d - 1) * e / (d - 2)),
            ("two-point", lambda e, d=d: wt.two_point_law(d, (1 - e) / (d - 1)), lambda e, d=d: e / (d - 2)),
        ):
            err = [abs(wt.solve_theta0(make(e)) - first(e)) for e in (0.02, 0.01)]
            ratios[(name, d)] = err[0] / err[1]
    # at d = 3 both laws are symmetric about the tilt and the quadratic term vanishes (ratio 8);
    # the quadratic-order check is therefore read at d = 4, and d = 3 must be at least as good
    quad = all(2.5 <= ratios[(k, 4)] <= 6 for k in ("binomial", "two-point"))
    at_least = all(ratios[(k, 3)] >= 2.5 for k in ("binomial", "two-point"))
    ok = closed and quad and at_least
    detail = f"closed forms {'ok' if closed else 'off'}; error ratios " + ", ".join(
        f"{k}/d={d}: {r:.2f}" for (k, d), r in sorted(ratios.items()))
    assert verdict(4, ok, detail)


def test_criterion_05_hitting_time_tail():
    notes, ok = [], True
    for name, law in (("two-point", wt.two_point_law(3, 0.45)), ("binomial", wt.binomial_shift_law(3, 0.45))):
        dp = wt.tau_tail_dp(law, 1, 2000)
        _, rep = wt.tau_tail_fit(law, dp, window=(100, 2000))
        shape = 1 / 3 <= rep.min_ratio and rep.max_ratio <= 3
        tau, _ = wt.simulate_walk(law, 1, 10 ** 5, 2000, np.random.default_rng(17))
        # survival P(tau > l) from both routes
        mc_ok = True
        for ell in (5, 20, 100, 500):
            exact = 1 - dp[: ell + 1].sum()
            emp = np.mean((tau > ell) | (tau < 0))
            se = sqrt(exact * (1 - exact) / tau.size)
            mc_ok &= abs(emp - exact) <= 3 * se
        ok &= shape and mc_ok
        notes.append(f"{name}: ratio [{rep.min_ratio:.3f}, {rep.max_ratio:.3f}], MC within 3 sigma={mc_ok}")
    m = []
    for e in (0.1, 0.05):
        law = wt.two_point_law(3, (1 - e) / 2)
        _, rep = wt.tau_tail_fit(law, wt.tau_tail_dp(law, 1, 60000))
        m.append(rep.second_moment)
    ratio = m[1] / m[0]
    ok &= 5.6 <= ratio <= 10.4
    notes.append(f"E[tau^2] ratio {ratio:.2f}")
    assert verdict(5, ok, "; ".join(notes))


def test_criterion_06_cyclic_shift_count():
    bad = total = 0
    for seq, d, count in wt.enumerate_spitzer((-1, 0, 1, 2), 7, (1, 2, 3)):
        total += 1
        bad += not 1 <= count <= d
    assert verdict(6, bad == 0 and total > 0, f"{total} sequences, {bad} outside [1, d]")


def test_criterion_07_subcritical(results_dir):
    cfg = ExperimentConfig(mode="subcritical", n=10 ** 6, d=3, eps=0.1, trials=200, master_seed=7,
                           out=str(results_dir / "sub.jsonl"))
    recs = run_sweep(cfg)
    c1 = np.array([r.sizes[0] for r in recs], dtype=float)
    c3 = np.array([r.sizes[2] for r in recs], dtype=float)
    pred = wt.predict_subcritical(10 ** 6, 3, 0.1)
    med = np.median(c1)
    frac = np.median(c3 / c1)
    ok = 0.7 * pred <= med <= 1.3 * pred and 0.6 <= frac <= 1.0
    assert verdict(7, ok, f"median |C1| {med:.0f} = {med / pred:.3f} x {pred:.1f}; median |C3|/|C1| {frac:.3f}")


def test_criterion_08_supercritical(results_dir):
    cfg = ExperimentConfig(mode="supercritical", n=10 ** 6, d=3, eps=0.05, trials=100, master_seed=8,
                           out=str(results_dir / "super.jsonl"))
    recs = run_sweep(cfg)
    c1 = np.mean([r.sizes[0] for r in recs])
    m1 = np.mean([r.M1 for r in recs])
    band = np.mean([r.giant_ok for r in recs])
    rem = np.median([r.remainder_sizes[0] for r in recs])
    g, dm, c2 = (wt.predict_giant(10 ** 6, 3, 0.05), wt.predict_damage(10 ** 6, 3, 0.05),
                 wt.predict_second(10 ** 6, 3, 0.05))
    ok = (abs(c1 - g) <= 0.1 * g and abs(m1 - dm) <= 0.1 * dm and band >= 0.95 and 0.5 * c2 <= rem <= 2 * c2)
    assert verdict(8, ok, f"mean |C1| {c1:.0f} ({c1 / g:.3f} x), mean |M1| {m1:.0f} ({m1 / dm:.3f} x), "
                          f"band rate {band:.2f}, remainder median |C2| {rem:.0f} ({rem / c2:.3f} x {c2:.0f})")


@pytest.fixture(scope="module")
def critical_runs(results_dir):
    big = ExperimentConfig(mode="critical", n=10 ** 6, d=3, lam=0.0, trials=1000, master_seed=9,
                           out=str(results_dir / "crit_1e6.jsonl"))
    small = ExperimentConfig(mode="critical", n=10 ** 4, d=3, lam=0.0, trials=1000, master_seed=10,
                             out=str(results_dir / "crit_1e4.jsonl"))
    return big, run_sweep(big), small, run_sweep(small)


@pytest.fixture(scope="module")
def oracle(results_dir):
    cache = results_dir / "oracle_1e5.npz"
    if cache.exists():
        z = np.load(cache)
        lengths, trunc = z["lengths"], float(z["trunc"])
    else:
        g = sample_gamma(3, 0.0, 20.0, 1e-3, 10 ** 5, 4, np.random.default_rng(99))
        lengths, trunc = g.lengths, g.truncation_rate
        np.savez(cache, lengths=lengths, trunc=trunc)
    from rrgperc.excursion_oracle import GammaSample
    return GammaSample(lengths, trunc, np.zeros(len(lengths), bool), 3, 0.0, 1e-3, 20.0)


def test_criterion_09_critical_window(critical_runs, oracle, results_dir):
    big, big_recs, small, small_recs = critical_runs
    rep_big = compare_window(big, big_recs, oracle=oracle, cdf_dir=results_dir / "cdf_1e6")
    rep_small = compare_window(small, small_recs, oracle=oracle)
    ks_big, ks_small = rep_big["ks"][0]["ks"], rep_small["ks"][0]["ks"]
    tail = window_tail_fit(big_recs, big.n, (1.0, 1.5, 2.0))
    ok = ks_big <= 0.08 and ks_small > ks_big and tail["ok"]
    assert verdict(9, ok, f"KS(C1) n=1e6 {ks_big:.4f}, n=1e4 {ks_small:.4f}; tail P {np.round(tail['prob'], 4).tolist()} "
                          f"c={tail['c']}, fit ok={tail['ok']}")


def test_criterion_10_functional_clt(critical_runs):
    big, big_recs, _, _ = critical_runs
    row = clt_path_check(big, big_recs)["rows"][0]
    ok = abs(row["mean"] + 1 / 3) <= 0.15 and 1.7 <= row["var"] <= 2.3
    assert verdict(10, ok, f"s=1: mean {row['mean']:.4f} (target -1/3), variance {row['var']:.4f} (target 2), "
                           f"{row['count']} paths")


def test_criterion_11_prop1_bound(results_dir):
    notes, violations = [], 0
    for graph in ("circulant", "simple"):
        for d in (3, 4):
            cfg = ExperimentConfig(mode="prop1", n=10 ** 5, d=d, trials=500, graph_mode=graph, master_seed=11,
                                   out=str(results_dir / f"prop1_{graph}_{d}.jsonl"))
            rep = prop1_bounds_check(cfg, A_values=(4.0, 6.0))
            violations += sum(r["violation"] for r in rep["rows"])
            notes.append(f"{graph}/d={d}: " + ", ".join(f"A={r['A']:g} rate {r['rate']:.3f}<={r['bound']:.3f}"
                                                        for r in rep["rows"]))
    assert verdict(11, violations == 0, f"{violations} violations; " + "; ".join(notes))


def test_criterion_12_excursion_oracle():
    notes, ok = [], True
    for d, lam in ((3, 1.0), (4, 2.0)):
        ex = excursion_lengths(reflect(simulate_b_lambda(d, lam, 20.0, 1e-3)), 1)
        root = 2 * d * lam / (d - 2)
        ok &= abs(ex.lengths[0] - root) <= 1e-3 + 1e-12
        notes.append(f"zero-noise (d={d}, lam={lam:g}) {ex.lengths[0]:.3f} vs {root:g}")
    coarse, fine = sample_gamma_refined(3, 0.0, 20.0, 1e-3, 10 ** 4, 1, np.random.default_rng(12))
    a, b = coarse.lengths[:, 0], fine.lengths[:, 0]
    iqr = np.subtract(*np.percentile(a, [75, 25]))
    se = 1.2533 * (iqr / 1.349) / sqrt(a.size)
    diff = abs(np.median(a) - np.median(b))
    ok &= diff < se
    notes.append(f"median shift under ds halving {diff:.4f} < SE {se:.4f}")
    rates = {}
    for lam in (-2.0, -1.0, 0.0, 1.0, 2.0):
        rates[lam] = sample_gamma(3, lam, 20.0, 1e-3, 2000, 1, np.random.default_rng(int(lam * 10) + 50)).truncation_rate
    ok &= max(rates.values()) < 0.01
    notes.append("truncation " + ", ".join(f"{k:g}:{v:.4f}" for k, v in rates.items()))
    assert verdict(12, ok, "; ".join(notes))
