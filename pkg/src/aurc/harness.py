"""Batch experiments: synthetic populations, random batch splits and estimator sweeps."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .estimators import (
    EstimatorKind,
    PopulationSpec,
    batched_estimates,
    plugin_value,
    population_aurc,
    sele_score,
)
from .ranking import WeightKind
from .special import harmonic_prefix, make_rng

DEFAULT_SIZES = (8, 16, 32, 64, 128, 256, 512, 1024)
DEFAULT_ESTIMATORS = (
    EstimatorKind.PLUGIN_ALPHA_HAT,
    EstimatorKind.PLUGIN_ALPHA_PRIME,
    EstimatorKind.SELE,
    EstimatorKind.SELE_TIMES_TWO,
)


class LossModel(str, Enum):
    BERNOULLI_DECREASING = "bernoulli_decreasing"
    DETERMINISTIC_THRESHOLD = "deterministic_threshold"
    USER_TABLE = "user_table"


@dataclass
class SyntheticPopulation:
    """Samples with known percentiles; scores are the percentiles themselves."""

    percentiles: np.ndarray
    losses: np.ndarray
    model: LossModel
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def size(self) -> int:
        return self.percentiles.size

    @property
    def scores(self) -> np.ndarray:
        return self.percentiles

    def spec(self) -> PopulationSpec:
        return PopulationSpec(self.percentiles, self.losses)

    def reference(self) -> float:
        return population_aurc(self.spec())


def stratified_percentiles(N: int, rng: np.random.Generator) -> np.ndarray:
    """One jittered point per cell ((i, i+1)/N), so values are sorted and distinct."""
    u = rng.random(N)
    u = np.where(u == 0.0, 0.5, u)
    return (np.arange(N) + u) / N


def generate_population(
    N: int,
    rng: np.random.Generator,
    model=LossModel.BERNOULLI_DECREASING,
    gamma: float = 1.0,
    threshold: float = 0.5,
    table: Optional[Sequence[float]] = None,
    seed: Optional[int] = None,
) -> SyntheticPopulation:
    """Draw N samples under one of the loss models.

    ``bernoulli_decreasing``: loss ~ Bernoulli(1 - beta**gamma).
    ``deterministic_threshold``: loss = 1 when beta < threshold, else 0.
    ``user_table``: losses taken from ``table`` (length N, ordered by percentile).
    """
    if N < 2:
        raise ValueError("a population needs at least two samples")
    model = LossModel(model)
    beta = stratified_percentiles(N, rng)
    if model is LossModel.BERNOULLI_DECREASING:
        if not gamma > 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        losses = (rng.random(N) < 1.0 - beta**gamma).astype(float)
        params = {"gamma": gamma}
    elif model is LossModel.DETERMINISTIC_THRESHOLD:
        if not 0.0 <= threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
        losses = (beta < threshold).astype(float)
        params = {"threshold": threshold}
    else:
        if table is None:
            raise ValueError("user_table model requires a loss table")
        losses = np.asarray(table, dtype=float)
        if losses.shape != (N,) or np.any(losses < 0) or not np.all(np.isfinite(losses)):
            raise ValueError(f"loss table must hold N={N} finite non-negative values")
        params = {}
    return SyntheticPopulation(beta, losses, model, params, seed)


def batch_split(n_total: int, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """Index matrix (batches, batch_size) from a random permutation; remainder dropped."""
    if batch_size < 1:
        raise ValueError("batch size must be positive")
    if batch_size > n_total:
        raise ValueError(f"batch size {batch_size} exceeds population size {n_total}")
    n_batches = n_total // batch_size
    perm = rng.permutation(n_total)
    return perm[: n_batches * batch_size].reshape(n_batches, batch_size)


@dataclass
class ConvergenceRow:
    size: int
    estimator: EstimatorKind
    mean: float
    std: float
    bias: float
    mae: float
    mse: float
    n_batches: int
    mae_rep_std: float

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "estimator": self.estimator.value,
            "mean": self.mean,
            "std": self.std,
            "bias": self.bias,
            "mae": self.mae,
            "mse": self.mse,
            "n_batches": self.n_batches,
            "mae_rep_std": self.mae_rep_std,
        }


@dataclass
class ConvergenceTable:
    reference: float
    reference_kind: str
    rows: list[ConvergenceRow]
    reps: int
    seed: int
    rate_slopes: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def row(self, size: int, estimator) -> ConvergenceRow:
        estimator = EstimatorKind(estimator)
        for r in self.rows:
            if r.size == size and r.estimator is estimator:
                return r
        raise KeyError((size, estimator))

    def column(self, estimator, attr: str) -> np.ndarray:
        estimator = EstimatorKind(estimator)
        rows = sorted((r for r in self.rows if r.estimator is estimator), key=lambda r: r.size)
        return np.array([getattr(r, attr) for r in rows])

    def sizes(self) -> list[int]:
        return sorted({r.size for r in self.rows})


def rate_fit(sizes, mae) -> float:
    """Least-squares slope of ln MAE against ln sqrt(ln n / n)."""
    sizes = np.asarray(sizes, dtype=float)
    mae = np.asarray(mae, dtype=float)
    if sizes.size < 2 or np.any(mae <= 0) or np.any(sizes < 2):
        return float("nan")
    x = 0.5 * (np.log(np.log(sizes)) - np.log(sizes))
    return float(np.polyfit(x, np.log(mae), 1)[0])


def convergence_study(
    losses,
    scores,
    reference: float,
    sizes: Sequence[int] = DEFAULT_SIZES,
    estimators: Sequence = DEFAULT_ESTIMATORS,
    reps: int = 5,
    seed: int = 42,
    threads: int = 1,
    reference_kind: str = "population",
) -> ConvergenceTable:
    """Evaluate estimators on random disjoint batches and compare with ``reference``.

    Repetition ``k`` at batch size ``n`` uses the RNG stream (seed, k, n), so a
    run with fewer repetitions reproduces the leading repetitions of a longer
    one, and the output does not depend on ``threads``.
    """
    losses = np.asarray(losses, dtype=float)
    scores = np.asarray(scores, dtype=float)
    estimators = [EstimatorKind(e) for e in estimators]
    sizes = [int(s) for s in sizes]
    if reps < 1:
        raise ValueError("reps must be at least 1")

    def run(task):
        k, size = task
        idx = batch_split(losses.size, size, make_rng(seed, k, size))
        L, S = losses[idx], scores[idx]
        return {e: batched_estimates(L, S, e) for e in estimators}

    tasks = [(k, size) for size in sizes for k in range(reps)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = dict(zip(tasks, pool.map(run, tasks)))
    else:
        results = {t: run(t) for t in tasks}

    rows = []
    for size in sizes:
        for e in estimators:
            per_rep = [results[(k, size)][e] for k in range(reps)]
            vals = np.concatenate(per_rep)
            err = vals - reference
            rep_mae = np.array([np.mean(np.abs(v - reference)) for v in per_rep])
            rows.append(ConvergenceRow(
                size=size,
                estimator=e,
                mean=math.fsum(vals) / vals.size,
                std=float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                bias=math.fsum(err) / err.size,
                mae=math.fsum(np.abs(err)) / err.size,
                mse=math.fsum(err * err) / err.size,
                n_batches=int(vals.size),
                mae_rep_std=float(rep_mae.std(ddof=1)) if reps > 1 else 0.0,
            ))
    table = ConvergenceTable(reference, reference_kind, rows, reps, seed,
                             config={"sizes": sizes, "estimators": [e.value for e in estimators]})
    for e in estimators:
        if e is EstimatorKind.NAIVE_EMPIRICAL:
            continue
        table.rate_slopes[e.value] = rate_fit(sizes, table.column(e, "mae"))
    return table


def population_convergence(pop: SyntheticPopulation, **kwargs) -> ConvergenceTable:
    """Convergence sweep against the exact percentile-weighted population value."""
    return convergence_study(pop.losses, pop.scores, pop.reference(), reference_kind="population", **kwargs)


def dataset_convergence(losses, scores, **kwargs) -> ConvergenceTable:
    """Convergence sweep on real data; the reference is the empirical AURC of the whole file."""
    reference = plugin_value(losses, scores, WeightKind.ALPHA_HAT)
    return convergence_study(losses, scores, reference, reference_kind="empirical_full", **kwargs)


@dataclass(frozen=True)
class CounterexampleReport:
    loss: float
    top_weight: float
    plugin_alpha_hat: float
    sele_times_two: float
    holds: bool

    @property
    def ratio(self) -> float:
        return self.plugin_alpha_hat / self.sele_times_two if self.sele_times_two else float("nan")


def counterexample_demo(loss: float = 1.0) -> CounterexampleReport:
    """Five samples, only the most confident one incurs a loss.

    Its weight is H_5 - H_0 = 137/60, above twice its SELE weight (2), so the
    empirical AURC exceeds 2 x SELE whenever ``loss > 0``.
    """
    if loss < 0:
        raise ValueError("loss must be non-negative")
    losses = np.array([0.0, 0.0, 0.0, 0.0, loss])
    scores = np.arange(1.0, 6.0)
    h = harmonic_prefix(5).values
    plugin = plugin_value(losses, scores, WeightKind.ALPHA_HAT)
    sele2 = sele_score(losses, scores, times_two=True).value
    return CounterexampleReport(loss, float(h[5] - h[0]), plugin, sele2, plugin > sele2)


@dataclass(frozen=True)
class EquivalenceReport:
    N: int
    empirical: float
    population: float

    @property
    def abs_gap(self) -> float:
        return abs(self.empirical - self.population)

    @property
    def rel_gap(self) -> float:
        return self.abs_gap / abs(self.population) if self.population else float("nan")


def equivalence_check(pop: SyntheticPopulation) -> EquivalenceReport:
    """Empirical AURC from ranks versus the percentile-weighted form on the same sample."""
    empirical = plugin_value(pop.losses, pop.scores, WeightKind.ALPHA_HAT)
    return EquivalenceReport(pop.size, empirical, pop.reference())
