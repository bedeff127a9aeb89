"""Logistic hypothesis, squared classification loss and accuracy."""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DataError


@dataclass
class ClassifierHead:
    W: np.ndarray
    mu: float


def hypothesis(z):
    """Logistic function ``1 / (1 + exp(-z))``."""
    z = np.asarray(z, dtype=float)
    # split on sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    with np.errstate(under="ignore"):
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def hypothesis_prime(z):
    h = hypothesis(z)
    return h * (1.0 - h)


def check_labels(labels):
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ContractError("empty batch")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0 or 1")
    return labels.astype(float)


def scores(yN, head):
    """Weighted, biased terminal states ``W y + mu``."""
    # per-row reduction keeps each score independent of the batch
    return np.sum(np.asarray(yN, dtype=float) * head.W, axis=-1) + head.mu


def batch_loss(yN_batch, labels, head):
    """``1/2 sum_i (C(W y_i + mu) - c_i)^2``, no division by the batch size."""
    c = check_labels(labels)
    r = hypothesis(scores(np.atleast_2d(yN_batch), head)) - c
    return 0.5 * float(r @ r)


def predict(yN, head):
    """Class 1 iff ``C(W y + mu) > 1/2``, i.e. ``W y + mu > 0``; ties go to class 0."""
    return (scores(yN, head) > 0).astype(int)


def accuracy(yN_batch, labels, head):
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ContractError("empty batch")
    return float(np.mean(predict(np.atleast_2d(yN_batch), head) == labels))
