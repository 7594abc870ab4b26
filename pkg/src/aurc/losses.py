"""Per-sample losses and post-hoc confidence score functions from logits.

Every function accepts either one logit vector of shape (k,) or a batch of
shape (n, k); the class axis is always the last one.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class LossKind(str, Enum):
    ZERO_ONE = "zero_one"
    CROSS_ENTROPY = "cross_entropy"


class CSFKind(str, Enum):
    MSP = "msp"
    MAX_LOGIT = "max_logit"
    SOFTMAX_MARGIN = "softmax_margin"
    NEG_ENTROPY = "neg_entropy"
    MAX_LOGIT_P_NORM = "max_logit_p_norm"
    NEG_GINI = "neg_gini"


@dataclass(frozen=True)
class LogitsRecord:
    logits: np.ndarray
    label: int

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=float)
        if logits.ndim != 1 or logits.size < 2:
            raise ValueError("a record needs at least two logits")
        if not np.all(np.isfinite(logits)):
            raise ValueError("logits must be finite")
        if not 0 <= self.label < logits.size:
            raise ValueError(f"label {self.label} outside 0..{logits.size - 1}")
        object.__setattr__(self, "logits", logits)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _take_label(values: np.ndarray, labels) -> np.ndarray:
    labels = np.asarray(labels)
    return np.take_along_axis(values, labels[..., None], axis=-1)[..., 0]


def zero_one_loss(logits, labels) -> np.ndarray:
    """1.0 where argmax differs from the label; argmax ties go to the lowest index."""
    z = np.asarray(logits, dtype=float)
    return (z.argmax(axis=-1) != np.asarray(labels)).astype(float)


def cross_entropy_loss(logits, labels) -> np.ndarray:
    return -_take_label(log_softmax(logits), labels)


def compute_losses(logits, labels, kind) -> np.ndarray:
    kind = LossKind(kind)
    if kind is LossKind.ZERO_ONE:
        return zero_one_loss(logits, labels)
    return cross_entropy_loss(logits, labels)


def confidence_score(logits, kind=CSFKind.MSP, p: float = 2.0):
    """Confidence under one of the six supported CSFs; higher means more confident.

    ``neg_entropy`` is sum(p_i ln p_i) over softmax probabilities, and
    ``max_logit_p_norm`` is the raw p-norm of the logit vector.
    """
    kind = CSFKind(kind)
    z = np.asarray(logits, dtype=float)
    if kind is CSFKind.MAX_LOGIT:
        return z.max(axis=-1)
    if kind is CSFKind.MAX_LOGIT_P_NORM:
        if not p > 0:
            raise ValueError(f"p must be positive, got {p}")
        if np.isinf(p):
            return np.abs(z).max(axis=-1)
        return (np.abs(z) ** p).sum(axis=-1) ** (1.0 / p)
    if kind is CSFKind.NEG_ENTROPY:
        logp = log_softmax(z)
        return (np.exp(logp) * logp).sum(axis=-1)
    probs = softmax(z)
    if kind is CSFKind.MSP:
        return probs.max(axis=-1)
    if kind is CSFKind.SOFTMAX_MARGIN:
        top2 = np.partition(probs, -2, axis=-1)[..., -2:]
        return top2[..., 1] - top2[..., 0]
    return (probs**2).sum(axis=-1) - 1.0
