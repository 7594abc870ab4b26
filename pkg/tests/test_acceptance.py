"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE <id> PASS|FAIL`` line with the measured
quantities, then asserts. Run alone with::

    pytest tests/test_acceptance.py -v
"""
import math
import time

import numpy as np
import pytest

from aurc.dataio import load_dataset, write_dataset
from aurc.estimators import NAIVE_MAX_N, EstimatorKind, naive_empirical_aurc, plugin_aurc, sele_score
from aurc.harness import (
    DEFAULT_SIZES,
    counterexample_demo,
    equivalence_check,
    generate_population,
    population_convergence,
)
from aurc.losses import compute_losses, confidence_score
from aurc.ranking import alpha_hat_weights, alpha_prime_weights, sele_weights
from aurc.special import make_rng
from aurc.stat_props import (
    avg_mse_closed_form,
    bias_alpha_hat,
    bias_curve,
    mse_alpha_hat,
    mse_bound,
    mse_curve,
    rank_for_beta,
)

GRID_N = (8, 16, 32, 64, 128)
GRID_BETA = np.round(np.arange(1, 20) * 0.05, 2)


@pytest.fixture
def verdict(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {label:<28} {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


def test_1_plugin_matches_naive(verdict):
    rng = make_rng(2024, 1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 257))
        losses = rng.random(n)
        scores = rng.permutation(n) + rng.random(n) * 0.5
        worst = max(worst, abs(plugin_aurc(losses, scores).value - naive_empirical_aurc(losses, scores)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10
    assert verdict("1 plugin-vs-naive", ok, f"max|diff|={worst:.2e} time={elapsed:.2f}s")


def test_2_weight_identities(verdict):
    t0 = time.perf_counter()
    worst_mean = 0.0
    for n in range(1, 10**4 + 1):
        worst_mean = max(worst_mean, abs(alpha_hat_weights(n, np.arange(1, n + 1)).weights.mean() - 1.0))
    prime_means = {n: alpha_prime_weights(n, np.arange(1, n + 1)).weights.mean() for n in (1, 10, 100, 1000, 10**4)}
    prime_below = all(m < 1.0 for m in prime_means.values())
    gaps = [1 - prime_means[n] for n in sorted(prime_means)]
    prime_to_one = all(a > b for a, b in zip(gaps, gaps[1:])) and gaps[-1] < 1e-3
    dominance = True
    for n in range(1, 513):
        r = np.arange(1, n + 1)
        hat = alpha_hat_weights(n, r).weights
        dominance &= bool(np.all(alpha_prime_weights(n, r).weights <= hat) and np.all(sele_weights(n, r).weights <= hat))
    elapsed = time.perf_counter() - t0
    ok = worst_mean <= 1e-12 and prime_below and prime_to_one and dominance
    assert verdict("2 weight identities", ok,
                   f"max|mean-1|={worst_mean:.1e} prime_gap(1e4)={gaps[-1]:.2e} dominance={dominance} "
                   f"time={elapsed:.2f}s")


def test_3_counterexample(verdict):
    rep = counterexample_demo()
    ok = (abs(rep.top_weight - 2.283333) <= 1e-6 and abs(rep.top_weight - 137 / 60) <= 1e-9
          and abs(rep.plugin_alpha_hat - 0.456667) <= 5e-7 and rep.sele_times_two == pytest.approx(0.4)
          and rep.plugin_alpha_hat > rep.sele_times_two)
    assert verdict("3 counterexample", ok,
                   f"top={rep.top_weight:.9f} plugin={rep.plugin_alpha_hat:.6f} 2xSELE={rep.sele_times_two:.6f}")


def test_4_closed_forms_vs_monte_carlo(verdict):
    t0 = time.perf_counter()
    hits = total = 0
    misses = []
    for n in GRID_N:
        ranks = [rank_for_beta(n, b) for b in GRID_BETA]
        curves = [bias_curve(n, GRID_BETA, k, mc_reps=10**5, seed=4) for k in ("alpha_hat", "alpha_prime", "sele")]
        curves += [mse_curve(n, ranks, k, mc_reps=10**5, seed=4) for k in ("alpha_hat", "alpha_prime")]
        for c in curves:
            inside = c.within_sigma(4)
            hits += int(inside.sum())
            total += inside.size
            misses += [(n, c.quantity.value, float(x)) for x, ok in zip(c.grid, inside) if not ok]
    elapsed = time.perf_counter() - t0
    frac = hits / total
    ok = frac >= 0.99 and elapsed < 120
    assert verdict("4 closed-form vs MC", ok,
                   f"within4se={hits}/{total} ({frac:.2%}) misses={misses[:3]} time={elapsed:.1f}s")


def test_5_mse_telescoped_identity(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(1, 2001):
        k = np.arange(n, 0, -1, dtype=float)
        oracle = np.cumsum(1.0 / k**2)  # entry r-1 holds sum_{k=n+1-r}^{n} 1/k^2
        worst = max(worst, float(np.max(np.abs(mse_alpha_hat(n, np.arange(1, n + 1)) - oracle))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 5
    assert verdict("5 MSE identity", ok, f"max|diff|={worst:.2e} time={elapsed:.2f}s")


def test_6_bound_envelopes(verdict):
    ratios = np.array([mse_alpha_hat(n, rank_for_beta(n, b)) / mse_bound(n, b) for n in GRID_N for b in GRID_BETA])
    ns = np.unique(np.geomspace(100, 10**6, 200).astype(int))
    scaled = np.array([n * avg_mse_closed_form(int(n)) / math.log(n) for n in ns])
    ok = bool(np.all((ratios >= 0.25) & (ratios <= 4)) and np.all((scaled >= 0.5) & (scaled <= 2)))
    assert verdict("6 bound envelopes", ok,
                   f"mse/bound in [{ratios.min():.3f}, {ratios.max():.3f}] "
                   f"n*avg/ln n in [{scaled.min():.3f}, {scaled.max():.3f}]")


def test_7_convergence_study(verdict):
    t0 = time.perf_counter()
    pop = generate_population(2**17, make_rng(42, 2**31), "bernoulli_decreasing", seed=42)
    table = population_convergence(pop, sizes=DEFAULT_SIZES, reps=5, seed=42, threads=1)
    elapsed = time.perf_counter() - t0
    mae = table.column(EstimatorKind.PLUGIN_ALPHA_HAT, "mae")
    inversions = int(np.sum(np.diff(mae) > 0))
    slope = table.rate_slopes[EstimatorKind.PLUGIN_ALPHA_HAT.value]
    sele_gap = table.column(EstimatorKind.SELE, "bias")
    sele2_gap = table.column(EstimatorKind.SELE_TIMES_TWO, "bias")
    # non-vanishing: the largest batch keeps half the smallest batch's gap and exceeds the plug-in error
    sele_persistent = abs(sele_gap[-1]) >= 0.5 * abs(sele_gap[0]) and abs(sele_gap[-1]) > mae[-1]
    sele2_positive = bool(np.all(sele2_gap > 0)) and sele2_gap[-1] >= 0.5 * sele2_gap[0]
    ok = inversions <= 1 and 0.6 <= slope <= 1.4 and sele_persistent and sele2_positive and elapsed < 120
    assert verdict("7 convergence study", ok,
                   f"ref={table.reference:.4f} inversions={inversions} slope={slope:.3f} "
                   f"sele_gap={sele_gap[0]:+.4f}->{sele_gap[-1]:+.4f} "
                   f"2xsele_gap={sele2_gap[0]:+.4f}->{sele2_gap[-1]:+.4f} time={elapsed:.1f}s")


def test_8_rank_vs_percentile_forms(verdict):
    rep = equivalence_check(generate_population(10**5, make_rng(42, 8), seed=42))
    ok = rep.rel_gap < 0.02
    assert verdict("8 rank-vs-percentile", ok,
                   f"empirical={rep.empirical:.6f} population={rep.population:.6f} rel_gap={rep.rel_gap:.2e}")


def test_9_bias_sign_pattern(verdict):
    lo, hi = bias_alpha_hat(8, 0.05), bias_alpha_hat(8, 0.95)
    mags = [abs(bias_alpha_hat(n, 0.5)) for n in (8, 16, 32, 64, 128, 256, 512, 1024)]
    shrinks = all(a > b for a, b in zip(mags, mags[1:]))
    ok = lo > 0 > hi and shrinks
    assert verdict("9 bias sign pattern", ok,
                   f"b(8,.05)={lo:+.4f} b(8,.95)={hi:+.4f} |b(n,.5)| {mags[0]:.2e}->{mags[-1]:.2e}")


@pytest.fixture(scope="module")
def million_csv(tmp_path_factory):
    rng = np.random.default_rng(10)
    n, k = 10**6, 10
    logits = np.round(rng.normal(size=(n, k)) * 3, 6)
    labels = rng.integers(0, k, n)
    path = tmp_path_factory.mktemp("perf") / "million.csv"
    write_dataset(path, logits, labels)
    return path


def test_10_performance(verdict, million_csv):
    t0 = time.perf_counter()
    ds = load_dataset(million_csv)
    losses = compute_losses(ds.logits, ds.labels, "zero_one")
    scores = confidence_score(ds.logits, "msp")
    hat = plugin_aurc(losses, scores, "alpha_hat").value
    sele = sele_score(losses, scores).value
    elapsed = time.perf_counter() - t0
    with pytest.raises(ValueError, match="capped"):
        naive_empirical_aurc(losses, scores)
    ok = len(ds) == 10**6 and ds.k == 10 and elapsed < 5 and sele <= hat
    assert verdict("10 performance 1e6 x 10", ok,
                   f"time={elapsed:.2f}s plugin={hat:.6f} sele={sele:.6f} naive capped at {NAIVE_MAX_N}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
