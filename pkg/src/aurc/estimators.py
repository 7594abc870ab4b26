"""AURC estimators on a batch of (loss, confidence score) pairs."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .ranking import TiePolicy, WeightKind, batched_weights, compute_weights

# Above this size the quadratic reference implementation is refused.
NAIVE_MAX_N = 20_000


class EstimatorKind(str, Enum):
    NAIVE_EMPIRICAL = "naive_empirical"
    PLUGIN_ALPHA_HAT = "plugin_alpha_hat"
    PLUGIN_ALPHA_PRIME = "plugin_alpha_prime"
    SELE = "sele"
    SELE_TIMES_TWO = "sele_times_two"


@dataclass(frozen=True)
class EstimatorReport:
    estimator: EstimatorKind
    value: float
    n: int
    loss_kind: Optional[str] = None
    csf_kind: Optional[str] = None
    tie_policy: TiePolicy = TiePolicy.STABLE
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimator"] = self.estimator.value
        d["tie_policy"] = TiePolicy(self.tie_policy).value
        return d


@dataclass(frozen=True)
class PopulationSpec:
    """Samples with known population percentiles G(x) and their losses."""

    percentiles: np.ndarray
    losses: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.percentiles, dtype=float)
        losses = np.asarray(self.losses, dtype=float)
        if beta.shape != losses.shape or beta.ndim != 1 or beta.size == 0:
            raise ValueError("percentiles and losses must be equal-length non-empty 1-d arrays")
        if np.any(beta >= 1.0):
            raise ValueError("percentile >= 1 makes the weight -ln(1 - beta) diverge")
        if np.any(~(beta > 0.0)):
            raise ValueError("percentiles must lie in (0, 1)")
        if np.unique(beta).size != beta.size:
            raise ValueError("percentiles must be distinct")
        object.__setattr__(self, "percentiles", beta)
        object.__setattr__(self, "losses", losses)


def _validate(losses, scores) -> tuple[np.ndarray, np.ndarray]:
    losses = np.asarray(losses, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if losses.ndim != 1 or losses.shape != scores.shape:
        raise ValueError("losses and scores must be 1-d arrays of equal length")
    if losses.size == 0:
        raise ValueError("cannot evaluate an empty batch")
    if np.any(losses < 0) or not np.all(np.isfinite(losses)):
        raise ValueError("losses must be finite and non-negative")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return losses, scores


def naive_empirical_aurc(losses, scores, chunk: int = 2048) -> float:
    """Empirical AURC straight from its double-sum definition, O(n^2).

    For every sample j, accept all i with score_i >= score_j, take the mean
    loss of the accepted set, then average over j. Reference only.
    """
    losses, scores = _validate(losses, scores)
    n = losses.size
    if n > NAIVE_MAX_N:
        raise ValueError(f"naive AURC is capped at n <= {NAIVE_MAX_N} (got {n})")
    total = 0.0
    for start in range(0, n, chunk):
        thresholds = scores[start : start + chunk]
        accepted = scores[None, :] >= thresholds[:, None]
        numer = (accepted * losses[None, :]).sum(axis=1) / n
        denom = accepted.sum(axis=1) / n
        total += float((numer / denom).sum())
    return total / n


def plugin_value(losses, scores, weight_kind, tie_policy=TiePolicy.STABLE) -> float:
    losses, scores = _validate(losses, scores)
    w = compute_weights(scores, weight_kind, tie_policy).weights
    return float(np.dot(w, losses) / losses.size)


def plugin_aurc(
    losses, scores, weight_kind=WeightKind.ALPHA_HAT, tie_policy=TiePolicy.STABLE, **meta
) -> EstimatorReport:
    """Rank-weighted mean loss (1/n) sum_i w_i loss_i; O(n log n)."""
    kind = WeightKind(weight_kind)
    estimator = {
        WeightKind.ALPHA_HAT: EstimatorKind.PLUGIN_ALPHA_HAT,
        WeightKind.ALPHA_PRIME: EstimatorKind.PLUGIN_ALPHA_PRIME,
        WeightKind.SELE: EstimatorKind.SELE,
    }[kind]
    value = plugin_value(losses, scores, kind, tie_policy)
    return EstimatorReport(estimator, value, len(losses), tie_policy=TiePolicy(tie_policy), **meta)


def sele_score(losses, scores, tie_policy=TiePolicy.STABLE, times_two: bool = False, **meta) -> EstimatorReport:
    """SELE score sum_i r_i loss_i / n^2 (doubled when ``times_two``)."""
    value = plugin_value(losses, scores, WeightKind.SELE, tie_policy)
    kind = EstimatorKind.SELE
    if times_two:
        value *= 2.0
        kind = EstimatorKind.SELE_TIMES_TWO
    return EstimatorReport(kind, value, len(losses), tie_policy=TiePolicy(tie_policy), **meta)


def evaluate(losses, scores, estimator, tie_policy=TiePolicy.STABLE, **meta) -> EstimatorReport:
    estimator = EstimatorKind(estimator)
    if estimator is EstimatorKind.NAIVE_EMPIRICAL:
        value = naive_empirical_aurc(losses, scores)
        return EstimatorReport(estimator, value, len(losses), tie_policy=TiePolicy(tie_policy), **meta)
    if estimator is EstimatorKind.PLUGIN_ALPHA_HAT:
        return plugin_aurc(losses, scores, WeightKind.ALPHA_HAT, tie_policy, **meta)
    if estimator is EstimatorKind.PLUGIN_ALPHA_PRIME:
        return plugin_aurc(losses, scores, WeightKind.ALPHA_PRIME, tie_policy, **meta)
    return sele_score(losses, scores, tie_policy, estimator is EstimatorKind.SELE_TIMES_TWO, **meta)


def batched_estimates(losses: np.ndarray, scores: np.ndarray, estimator) -> np.ndarray:
    """One estimate per row of (batches, n) loss/score matrices, stable ties."""
    estimator = EstimatorKind(estimator)
    losses = np.asarray(losses, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if estimator is EstimatorKind.NAIVE_EMPIRICAL:
        return np.array([naive_empirical_aurc(l, s) for l, s in zip(losses, scores)])
    kind, scale = {
        EstimatorKind.PLUGIN_ALPHA_HAT: (WeightKind.ALPHA_HAT, 1.0),
        EstimatorKind.PLUGIN_ALPHA_PRIME: (WeightKind.ALPHA_PRIME, 1.0),
        EstimatorKind.SELE: (WeightKind.SELE, 1.0),
        EstimatorKind.SELE_TIMES_TWO: (WeightKind.SELE, 2.0),
    }[estimator]
    w = batched_weights(scores, kind)
    return scale * np.einsum("ij,ij->i", w, losses) / losses.shape[1]


def population_aurc(spec: PopulationSpec) -> float:
    """Mean of -ln(1 - G(x)) * loss over samples with known percentiles."""
    return float(np.mean(-np.log1p(-spec.percentiles) * spec.losses))


def risk_coverage_curve(losses, scores) -> np.ndarray:
    """(coverage, selective risk) at each sample's score used as threshold.

    Rows follow decreasing coverage. Samples are accepted when their score is
    >= the threshold, so tied samples share a point; the plain mean of the
    risk column equals :func:`naive_empirical_aurc`.
    """
    losses, scores = _validate(losses, scores)
    n = losses.size
    order = np.argsort(-scores, kind="stable")
    s_desc = scores[order]
    cum = np.cumsum(losses[order])
    # last index of each tie run in the descending order
    group_end = np.r_[np.flatnonzero(s_desc[1:] != s_desc[:-1]), n - 1]
    run_lengths = np.diff(np.r_[-1, group_end])
    end_for_pos = np.repeat(group_end, run_lengths)
    accepted = end_for_pos + 1
    risk = cum[end_for_pos] / accepted
    coverage = accepted / n
    return np.column_stack([coverage, risk])[::-1]
