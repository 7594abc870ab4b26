"""Closed-form bias and MSE of the weight estimators, with Monte Carlo checks.

Two conditioning directions appear below and they are not interchangeable:

* bias is conditional on the population percentile beta of one sample; its
  rank among n draws is then r = 1 + Binomial(n - 1, beta).
* MSE is conditional on the observed rank r; the unknown percentile is then
  the r-th uniform order statistic, beta ~ Beta(r, n + 1 - r).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .ranking import WeightKind, weights_for_ranks
from .special import (
    harmonic_table,
    log_binomial_pmf,
    make_rng,
    sample_beta,
    trigamma,
)


class Quantity(str, Enum):
    BIAS_ALPHA_HAT = "bias_alpha_hat"
    BIAS_ALPHA_PRIME = "bias_alpha_prime"
    BIAS_SELE = "bias_sele"
    MSE_ALPHA_HAT = "mse_alpha_hat"
    MSE_ALPHA_PRIME = "mse_alpha_prime"
    MSE_BOUND = "mse_bound"
    AVG_MSE = "avg_mse"


BIAS_QUANTITY = {
    WeightKind.ALPHA_HAT: Quantity.BIAS_ALPHA_HAT,
    WeightKind.ALPHA_PRIME: Quantity.BIAS_ALPHA_PRIME,
    WeightKind.SELE: Quantity.BIAS_SELE,
}
MSE_QUANTITY = {
    WeightKind.ALPHA_HAT: Quantity.MSE_ALPHA_HAT,
    WeightKind.ALPHA_PRIME: Quantity.MSE_ALPHA_PRIME,
}


@dataclass
class BiasMseCurve:
    """One curve over a grid of percentiles (bias, bound) or ranks (MSE)."""

    n: int
    quantity: Quantity
    grid: np.ndarray
    closed_form: np.ndarray
    mc_estimate: Optional[np.ndarray] = None
    mc_stderr: Optional[np.ndarray] = None
    mc_reps: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def has_mc(self) -> bool:
        return self.mc_estimate is not None

    def within_sigma(self, k: float = 4.0) -> np.ndarray:
        if not self.has_mc:
            raise ValueError("curve has no Monte Carlo columns")
        gap = np.abs(self.closed_form - self.mc_estimate)
        # exact agreement counts even when the MC draw is degenerate
        return gap <= k * self.mc_stderr + 1e-12

    def rows(self) -> list[dict]:
        out = []
        for i, x in enumerate(self.grid):
            row = {"n": self.n, "quantity": self.quantity.value, "beta_or_rank": float(x),
                   "closed_form": float(self.closed_form[i])}
            if self.has_mc:
                row["mc_estimate"] = float(self.mc_estimate[i])
                row["mc_stderr"] = float(self.mc_stderr[i])
                row["mc_reps"] = self.mc_reps
            out.append(row)
        return out


def _check_n(n: int) -> None:
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    return beta


def _check_rank(n: int, rank):
    _check_n(n)
    r = np.asarray(rank)
    if np.any((r < 1) | (r > n)):
        raise ValueError(f"rank must lie in 1..{n}")
    return r


def rank_pmf(n: int, beta: float) -> np.ndarray:
    """P(rank = i), i = 1..n, for a sample at percentile beta among n draws."""
    _check_n(n)
    beta = _check_beta(beta)
    return np.exp(log_binomial_pmf(np.arange(n), n - 1, beta))


def _expected_weight(n: int, beta: float, kind: WeightKind) -> float:
    w = weights_for_ranks(kind, n, np.arange(1, n + 1)).weights
    p = rank_pmf(n, beta)
    return math.fsum(w * p)


def bias_alpha_hat(n: int, beta: float) -> float:
    """E[H_n - H_{n-r} | beta] + ln(1 - beta)."""
    return _expected_weight(n, beta, WeightKind.ALPHA_HAT) + math.log1p(-_check_beta(beta))


def bias_alpha_prime(n: int, beta: float) -> float:
    return _expected_weight(n, beta, WeightKind.ALPHA_PRIME) + math.log1p(-_check_beta(beta))


def bias_sele_sum(n: int, beta: float) -> float:
    """SELE weight bias as the literal sum over ranks."""
    return _expected_weight(n, beta, WeightKind.SELE) + math.log1p(-_check_beta(beta))


def bias_sele(n: int, beta: float) -> float:
    """SELE weight bias using E[r] = 1 + (n - 1) beta."""
    _check_n(n)
    beta = _check_beta(beta)
    return (1.0 + (n - 1) * beta) / n + math.log1p(-beta)


_BIAS_FNS = {
    WeightKind.ALPHA_HAT: bias_alpha_hat,
    WeightKind.ALPHA_PRIME: bias_alpha_prime,
    WeightKind.SELE: bias_sele,
}


def weight_bias(kind, n: int, beta: float) -> float:
    return _BIAS_FNS[WeightKind(kind)](n, beta)


def mse_alpha_hat(n: int, rank):
    """psi'(n + 1 - r) - psi'(n + 1); vectorised over ``rank``."""
    r = _check_rank(n, rank)
    return trigamma(n + 1.0 - r) - trigamma(n + 1.0)


def mse_alpha_hat_sum(n: int, rank: int) -> float:
    """Same quantity as the finite sum of 1/k^2 for k = n+1-r..n."""
    _check_rank(n, rank)
    return math.fsum(1.0 / (k * k) for k in range(n + 1 - int(rank), n + 1))


def mse_alpha_prime(n: int, rank):
    r = _check_rank(n, rank)
    h = harmonic_table(n).values
    q = np.log1p(-r / (n + 1.0)) + h[n] - h[n - r]
    return mse_alpha_hat(n, r) + q * q


def weight_mse(kind, n: int, rank):
    kind = WeightKind(kind)
    if kind is WeightKind.ALPHA_HAT:
        return mse_alpha_hat(n, rank)
    if kind is WeightKind.ALPHA_PRIME:
        return mse_alpha_prime(n, rank)
    raise ValueError("closed-form MSE is available for alpha_hat and alpha_prime only")


def mse_bound(n: int, beta):
    """beta / (n (1 - beta) + 1), the two-sided order of both MSEs."""
    _check_n(n)
    b = np.asarray(beta, dtype=float)
    if np.any((b < 0) | (b >= 1)):
        raise ValueError("beta must lie in [0, 1)")
    out = b / (n * (1.0 - b) + 1.0)
    return out if out.ndim else float(out)


def avg_mse_closed_form(n: int) -> float:
    """(n + 1) ln(n + 1) / n^2 - 1/n, the integrated bound averaged over ranks."""
    _check_n(n)
    return (n + 1) * math.log(n + 1) / (n * n) - 1.0 / n


def avg_mse_direct(n: int, kind=WeightKind.ALPHA_HAT) -> float:
    """(1/n) sum_r MSE(n, r) from the exact per-rank formula."""
    return float(np.mean(weight_mse(kind, n, np.arange(1, n + 1))))


def rank_for_beta(n: int, beta: float) -> int:
    """Rank whose expected percentile r/(n+1) is closest to beta."""
    return int(min(n, max(1, round(beta * (n + 1)))))


def _summary(values: np.ndarray) -> tuple[float, float]:
    if values.size > 1:
        return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))
    return float(values.mean()), 0.0


def mc_weight_stats(n: int, beta: float, weight_kind, reps: int, rng: np.random.Generator) -> dict:
    """Monte Carlo bias/MSE of a weight for a sample at percentile ``beta``.

    Each repetition places the sample among n - 1 fresh population draws,
    so its rank is 1 + Binomial(n - 1, beta).
    """
    _check_n(n)
    beta = _check_beta(beta)
    if reps < 1:
        raise ValueError("reps must be at least 1")
    kind = WeightKind(weight_kind)
    ranks = 1 + rng.binomial(n - 1, beta, size=reps)
    err = weights_for_ranks(kind, n, ranks).weights + math.log1p(-beta)
    bias, se_bias = _summary(err)
    mse, se_mse = _summary(err * err)
    return {"bias_est": bias, "mse_est": mse, "stderr_bias": se_bias, "stderr_mse": se_mse}


def mc_mse_given_rank(n: int, rank: int, weight_kind, reps: int, rng: np.random.Generator) -> dict:
    """Monte Carlo MSE of a weight given its observed rank.

    The sample's percentile is redrawn as Beta(rank, n + 1 - rank), the law of
    the rank-th of n uniform order statistics.
    """
    _check_rank(n, rank)
    if reps < 1:
        raise ValueError("reps must be at least 1")
    w = float(weights_for_ranks(weight_kind, n, np.array([rank])).weights[0])
    beta = sample_beta(rank, n + 1 - rank, rng, size=reps)
    err = w + np.log1p(-beta)
    mse, se = _summary(err * err)
    return {"mse_est": mse, "stderr_mse": se}


def bias_curve(n: int, betas, weight_kind, mc_reps: int = 0, seed: int = 0) -> BiasMseCurve:
    kind = WeightKind(weight_kind)
    betas = np.asarray(betas, dtype=float)
    closed = np.array([weight_bias(kind, n, b) for b in betas])
    curve = BiasMseCurve(n, BIAS_QUANTITY[kind], betas, closed, meta={"seed": seed})
    if mc_reps:
        kind_id = list(WeightKind).index(kind)
        stats = [mc_weight_stats(n, b, kind, mc_reps, make_rng(seed, 0, n, kind_id, i))
                 for i, b in enumerate(betas)]
        curve.mc_estimate = np.array([s["bias_est"] for s in stats])
        curve.mc_stderr = np.array([s["stderr_bias"] for s in stats])
        curve.mc_reps = mc_reps
    return curve


def mse_curve(n: int, ranks, weight_kind, mc_reps: int = 0, seed: int = 0) -> BiasMseCurve:
    kind = WeightKind(weight_kind)
    ranks = np.asarray(ranks, dtype=np.int64)
    closed = np.asarray(weight_mse(kind, n, ranks), dtype=float)
    curve = BiasMseCurve(n, MSE_QUANTITY[kind], ranks, closed, meta={"seed": seed})
    if mc_reps:
        kind_id = list(WeightKind).index(kind)
        stats = [mc_mse_given_rank(n, int(r), kind, mc_reps, make_rng(seed, 1, n, kind_id, i))
                 for i, r in enumerate(ranks)]
        curve.mc_estimate = np.array([s["mse_est"] for s in stats])
        curve.mc_stderr = np.array([s["stderr_mse"] for s in stats])
        curve.mc_reps = mc_reps
    return curve


def bound_curve(n: int, betas) -> BiasMseCurve:
    betas = np.asarray(betas, dtype=float)
    return BiasMseCurve(n, Quantity.MSE_BOUND, betas, np.asarray(mse_bound(n, betas), dtype=float))
