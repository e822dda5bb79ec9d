"""
Soft demodulation: nonbinary symbol LLR vectors and bit-wise LLRs.

Symbol LLRs use ``s_1`` (index 0) as reference::

    L_i(y) = ln q(y|s_i) - ln q(y|s_0) + ln(lambda_i / lambda_0),  i = 1..M-1

All LLR outputs are clamped to +-LLR_CLAMP unless ``clamp=False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfigError, DMCMatrix, hard_decide
from .constellation import Constellation

LLR_CLAMP = 50.0


@dataclass(frozen=True)
class GaussianMetric:
    """Circularly symmetric Gaussian decoding metric, variance ``K`` per real dimension."""

    K: float

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError(f"metric variance must be positive, got {self.K}")

    def log_q(self, y, c: Constellation) -> np.ndarray:
        y = np.asarray(y, dtype=complex)
        d2 = np.abs(y[..., None] - c.points) ** 2
        return -d2 / (2.0 * self.K) - math.log(2.0 * math.pi * self.K)


@dataclass(frozen=True)
class DMCMetric:
    """
    Hard-decision metric ``q(s_j | s_k) = W[j, k]``.

    Received values may be indices or (hard-decided) complex points.
    """

    dmc: DMCMatrix
    floor: float | None = 1e-12

    def log_w(self) -> np.ndarray:
        W = self.dmc.W
        if self.floor is None:
            if np.any(W <= 0):
                raise ChannelConfigError("W has zero entries and smoothing is disabled")
            return np.log(W)
        W = np.maximum(W, self.floor)
        return np.log(W / W.sum(axis=0, keepdims=True))

    def log_q(self, y, c: Constellation) -> np.ndarray:
        y = np.asarray(y)
        j = y if np.issubdtype(y.dtype, np.integer) else hard_decide(y, c)
        return self.log_w()[j]


def gaussian_metric(y, s, K: float):
    """ln of the 2-D Gaussian density with variance K per dimension."""
    if not K > 0:
        raise ValueError("K must be positive")
    d2 = np.abs(np.asarray(y, dtype=complex) - np.asarray(s, dtype=complex)) ** 2
    return -d2 / (2.0 * K) - math.log(2.0 * math.pi * K)


def _clamp(x, clamp):
    return np.clip(x, -LLR_CLAMP, LLR_CLAMP) if clamp else x


def llrs_from_log_q(log_q: np.ndarray, priors, clamp: bool = True) -> np.ndarray:
    """
    LLRs relative to symbol 0 from per-symbol log metrics.

    Clamping limits the dynamic range of the a-posteriori vector: each
    entry is floored at ``-LLR_CLAMP`` below the most likely symbol before
    referencing to symbol 0. All LLRs then lie in [-LLR_CLAMP, LLR_CLAMP]
    and the most likely symbol is never tied with a clamped one (clamping
    the differences to symbol 0 directly would merge every symbol that is
    much more likely than symbol 0).
    """
    t = np.asarray(log_q, dtype=float) + np.log(np.asarray(priors, dtype=float))
    if clamp:
        t = t - t.max(axis=-1, keepdims=True)
        np.maximum(t, -LLR_CLAMP, out=t)
    return t[..., 1:] - t[..., :1]


def symbol_llrs(y, c: Constellation, q, clamp: bool = True) -> np.ndarray:
    """
    Nonbinary LLR vectors.

    Returns an array of shape ``y.shape + (M-1,)``.
    """
    return llrs_from_log_q(q.log_q(y, c), c.priors, clamp)


def dmc_llrs(j, dmc: DMCMatrix, priors, floor: float | None = 1e-12,
             clamp: bool = True) -> np.ndarray:
    """LLR vectors ``ln(W[j, i] / W[j, 0]) + ln(lambda_i / lambda_0)`` for received indices j."""
    log_w = DMCMetric(dmc, floor).log_w()
    return llrs_from_log_q(log_w[np.asarray(j)], priors, clamp)


def _logsumexp(a, axis):
    mx = a.max(axis=axis, keepdims=True)
    return (mx + np.log(np.exp(a - mx).sum(axis=axis, keepdims=True))).squeeze(axis)


def bit_llrs(y, c: Constellation, q, clamp: bool = True) -> np.ndarray:
    """
    Bit-wise LLRs ``ln(sum_{S_0,i} q lambda / sum_{S_1,i} q lambda)``.

    Returns shape ``y.shape + (m,)``; positive values favor bit 0.
    """
    t = q.log_q(y, c) + np.log(c.priors)
    out = np.empty(t.shape[:-1] + (c.m,))
    for i in range(c.m):
        zero = c.bits[:, i] == 0
        out[..., i] = _logsumexp(t[..., zero], -1) - _logsumexp(t[..., ~zero], -1)
    return _clamp(out, clamp)


def full_llr_vectors(llrs: np.ndarray) -> np.ndarray:
    """Prepend the reference entry 0 to (N, M-1) LLRs, giving (N, M) log-APP vectors."""
    llrs = np.asarray(llrs, dtype=float)
    return np.concatenate([np.zeros(llrs.shape[:-1] + (1,)), llrs], axis=-1)
