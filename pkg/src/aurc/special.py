"""Scalar special functions and samplers used by the weight estimators.

Harmonic numbers, digamma and trigamma are computed here rather than taken
from scipy so that the weight code has a single, documented numerical path.
The RNG is numpy's PCG64 seeded through ``SeedSequence``; child streams are
derived from ``(seed, *stream_ids)`` so parallel Monte Carlo stays
reproducible regardless of scheduling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

EULER_GAMMA = 0.57721566490153286060651209008240243

# Bernoulli-number coefficients B_2k / (2k), k = 1..7
_DIGAMMA_COEFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)
# B_2k, k = 1..7
_TRIGAMMA_COEFS = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)
_ASYMPTOTIC_THRESHOLD = 10.0


@dataclass(frozen=True)
class HarmonicTable:
    """Prefix table of harmonic numbers, ``values[i] == H_i`` with ``H_0 = 0``."""

    values: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, idx):
        return self.values[idx]


def harmonic_prefix(n_max: int) -> HarmonicTable:
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative, got {n_max}")
    values = np.zeros(n_max + 1)
    if n_max:
        values[1:] = np.cumsum(1.0 / np.arange(1, n_max + 1))
    values.setflags(write=False)
    return HarmonicTable(values)


_HARMONIC_CACHE: dict[int, HarmonicTable] = {}


def harmonic_table(n: int) -> HarmonicTable:
    """Cached table covering at least ``H_0..H_n``.

    Tables are built with headroom so that sweeps over growing n reuse one
    prefix sum instead of rebuilding it per batch size.
    """
    for size, table in _HARMONIC_CACHE.items():
        if size >= n:
            return table
    size = max(n, 1024)
    table = harmonic_prefix(size)
    _HARMONIC_CACHE.clear()
    _HARMONIC_CACHE[size] = table
    return table


def _check_positive(x: np.ndarray, name: str) -> None:
    if np.any(~(x > 0)):
        raise ValueError(f"{name} is defined here only for x > 0")


def digamma(x):
    """psi(x) for x > 0 (scalar or array).

    Shifts x up to at least 10 with psi(x) = psi(x + 1) - 1/x, then applies
    the asymptotic series in 1/x^2.
    """
    arr = np.asarray(x, dtype=float)
    _check_positive(arr, "digamma")
    z = arr.copy()
    shift = np.zeros_like(z)
    mask = z < _ASYMPTOTIC_THRESHOLD
    while np.any(mask):
        shift = np.where(mask, shift - 1.0 / np.where(mask, z, 1.0), shift)
        z = np.where(mask, z + 1.0, z)
        mask = z < _ASYMPTOTIC_THRESHOLD
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for coef in reversed(_DIGAMMA_COEFS):
        series = (series + coef) * inv2
    out = shift + np.log(z) - 0.5 / z - series
    return out if out.ndim else float(out)


def trigamma(x):
    """psi'(x) for x > 0 (scalar or array).

    Same lift as :func:`digamma` via psi'(x) = psi'(x + 1) + 1/x^2.
    """
    arr = np.asarray(x, dtype=float)
    _check_positive(arr, "trigamma")
    z = arr.copy()
    shift = np.zeros_like(z)
    mask = z < _ASYMPTOTIC_THRESHOLD
    while np.any(mask):
        zm = np.where(mask, z, 1.0)
        shift = np.where(mask, shift + 1.0 / (zm * zm), shift)
        z = np.where(mask, z + 1.0, z)
        mask = z < _ASYMPTOTIC_THRESHOLD
    inv = 1.0 / z
    inv2 = inv * inv
    series = np.zeros_like(z)
    for coef in reversed(_TRIGAMMA_COEFS):
        series = (series + coef) * inv2
    out = shift + inv + 0.5 * inv2 + series * inv
    return out if out.ndim else float(out)


def log_binomial_pmf(i, n_trials: int, p: float):
    """ln P(X = i) for X ~ Binomial(n_trials, p); ``i`` may be an array.

    The log binomial coefficient is -ln(n+1) - ln B(n-i+1, i+1), which avoids
    the cancellation of a log-gamma difference at large n. At p = 0
    or p = 1 the distribution is degenerate and the log-probability is 0 or
    -inf exactly.
    """
    i_arr = np.asarray(i)
    if n_trials < 0:
        raise ValueError(f"n_trials must be non-negative, got {n_trials}")
    if np.any((i_arr < 0) | (i_arr > n_trials)):
        raise ValueError(f"i must lie in 0..{n_trials}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    i_f = i_arr.astype(float)
    if p == 0.0:
        out = np.where(i_arr == 0, 0.0, -np.inf)
    elif p == 1.0:
        out = np.where(i_arr == n_trials, 0.0, -np.inf)
    else:
        log_comb = -math.log(n_trials + 1.0) - betaln(n_trials - i_f + 1.0, i_f + 1.0)
        out = log_comb + i_f * math.log(p) + (n_trials - i_f) * math.log1p(-p)
    return out if np.ndim(out) else float(out)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for ``seed``; extra ints select an independent child stream."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(stream))))


def sample_beta(a: float, b: float, rng: np.random.Generator, size=None):
    """Beta(a, b) draws as a ratio of two independent Gamma variates."""
    if not (a > 0 and b > 0):
        raise ValueError(f"Beta parameters must be positive, got a={a}, b={b}")
    ga = rng.standard_gamma(a, size=size)
    gb = rng.standard_gamma(b, size=size)
    return ga / (ga + gb)


def sample_uniform_order_stats(n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Sorted i.i.d. U(0, 1) draws; with ``size`` the last axis holds the n order statistics."""
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    shape = (n,) if size is None else (*np.atleast_1d(size), n)
    return np.sort(rng.random(shape), axis=-1)
