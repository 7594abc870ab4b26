"""Ranks by confidence and the per-sample AURC weight vectors.

Ranks are 1-based and ascending: the least confident sample has rank 1 and
the most confident has rank n. Three weight kinds are supported:

``alpha_hat``    H_n - H_{n-r}, which reproduces the empirical AURC exactly
``alpha_prime``  -ln(1 - r/(n+1))
``sele``         r/n, the weight implied by the SELE score
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np


class TiePolicy(str, Enum):
    STABLE = "stable"
    AVERAGE = "average"


class WeightKind(str, Enum):
    ALPHA_HAT = "alpha_hat"
    ALPHA_PRIME = "alpha_prime"
    SELE = "sele"


@dataclass(frozen=True)
class WeightVector:
    kind: WeightKind
    n: int
    weights: np.ndarray


@dataclass(frozen=True)
class RankedBatch:
    scores: np.ndarray
    ranks: np.ndarray
    losses: np.ndarray
    tie_policy: TiePolicy

    @classmethod
    def from_scores(cls, scores, losses, tie_policy=TiePolicy.STABLE) -> "RankedBatch":
        scores = np.asarray(scores, dtype=float)
        losses = np.asarray(losses, dtype=float)
        if scores.shape != losses.shape:
            raise ValueError("scores and losses must have equal length")
        if np.any(losses < 0):
            raise ValueError("losses must be non-negative")
        tie_policy = TiePolicy(tie_policy)
        return cls(scores, rank_ascending(scores, tie_policy), losses, tie_policy)

    def weights(self, kind) -> WeightVector:
        return compute_weights(self.scores, kind, self.tie_policy)


def _validate_scores(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores must be a non-empty 1-d array")
    if np.isnan(scores).any():
        raise ValueError("scores contain NaN")
    if np.isinf(scores).any():
        raise ValueError("scores must be finite")
    return scores


def _tie_groups(sorted_scores: np.ndarray) -> np.ndarray:
    """Start index of each run of equal values in an ascending array."""
    return np.flatnonzero(np.r_[True, sorted_scores[1:] != sorted_scores[:-1]])


def _average_within_ties(sorted_values: np.ndarray, sorted_scores: np.ndarray) -> np.ndarray:
    starts = _tie_groups(sorted_scores)
    counts = np.diff(np.r_[starts, len(sorted_scores)])
    means = np.add.reduceat(sorted_values, starts) / counts
    return np.repeat(means, counts)


def rank_ascending(scores, tie_policy=TiePolicy.STABLE) -> np.ndarray:
    """1-based ascending ranks.

    ``stable`` breaks ties by input position and returns an integer
    permutation of 1..n. ``average`` returns the mean rank of each tie group
    as a float; weights for that policy are group-averaged in
    :func:`compute_weights` rather than derived from these fractional ranks.
    """
    scores = _validate_scores(scores)
    tie_policy = TiePolicy(tie_policy)
    n = scores.size
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(1, n + 1)
    if tie_policy is TiePolicy.STABLE:
        return ranks
    averaged = np.empty(n)
    averaged[order] = _average_within_ties(np.arange(1, n + 1, dtype=float), scores[order])
    return averaged


def _check_ranks(n: int, ranks) -> np.ndarray:
    ranks = np.asarray(ranks)
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if ranks.size and (ranks.min() < 1 or ranks.max() > n):
        raise ValueError(f"ranks must lie in 1..{n}")
    if not np.issubdtype(ranks.dtype, np.integer):
        if np.any(ranks != np.round(ranks)):
            raise ValueError("ranks must be integers")
        ranks = ranks.astype(np.int64)
    return ranks


@lru_cache(maxsize=64)
def _harmonic_tails(n: int) -> np.ndarray:
    # entry r-1 is 1/n + 1/(n-1) + ... + 1/(n-r+1) = H_n - H_{n-r}, summed smallest term
    # first; subtracting prefix sums instead loses up to ~1e-13 relative to cancellation
    tails = np.cumsum(1.0 / np.arange(n, 0, -1, dtype=float))
    tails.flags.writeable = False
    return tails


def alpha_hat_weights(n: int, ranks) -> WeightVector:
    ranks = _check_ranks(n, ranks)
    return WeightVector(WeightKind.ALPHA_HAT, n, _harmonic_tails(n)[ranks - 1])


def alpha_prime_weights(n: int, ranks) -> WeightVector:
    ranks = _check_ranks(n, ranks)
    return WeightVector(WeightKind.ALPHA_PRIME, n, -np.log1p(-ranks / (n + 1.0)))


def sele_weights(n: int, ranks) -> WeightVector:
    ranks = _check_ranks(n, ranks)
    return WeightVector(WeightKind.SELE, n, ranks / float(n))


_WEIGHT_FNS = {
    WeightKind.ALPHA_HAT: alpha_hat_weights,
    WeightKind.ALPHA_PRIME: alpha_prime_weights,
    WeightKind.SELE: sele_weights,
}


def weights_for_ranks(kind, n: int, ranks) -> WeightVector:
    return _WEIGHT_FNS[WeightKind(kind)](n, ranks)


def compute_weights(scores, kind, tie_policy=TiePolicy.STABLE) -> WeightVector:
    """Weights aligned with ``scores`` under the requested tie policy."""
    scores = _validate_scores(scores)
    kind = WeightKind(kind)
    tie_policy = TiePolicy(tie_policy)
    n = scores.size
    order = np.argsort(scores, kind="stable")
    sorted_w = weights_for_ranks(kind, n, np.arange(1, n + 1)).weights
    if tie_policy is TiePolicy.AVERAGE:
        sorted_w = _average_within_ties(sorted_w, scores[order])
    w = np.empty(n)
    w[order] = sorted_w
    return WeightVector(kind, n, w)


def batched_weights(scores: np.ndarray, kind) -> np.ndarray:
    """Stable-tie weights for each row of a (batches, n) score matrix."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2:
        raise ValueError("expected a 2-d (batches, n) array")
    n = scores.shape[1]
    sorted_w = weights_for_ranks(kind, n, np.arange(1, n + 1)).weights
    order = np.argsort(scores, axis=1, kind="stable")
    w = np.empty_like(scores)
    np.put_along_axis(w, order, np.broadcast_to(sorted_w, scores.shape), axis=1)
    return w
