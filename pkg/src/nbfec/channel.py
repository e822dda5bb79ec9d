"""
Discrete-time memoryless channels.

Noise is drawn from numpy ``Generator`` objects seeded through
``SeedSequence([seed, stream, *counters])``, so every trial has its own
reproducible stream no matter how trials are distributed over workers.

SNR convention: for a unit-energy constellation and noise variance
``sigma2`` per real dimension, ``Es/N0 = 1 / (2 sigma2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import Constellation

# Stream tags for derive_rng.
STREAM_NOISE = 1
STREAM_INFO = 2
STREAM_SCRAMBLE = 3
STREAM_INTERLEAVE = 4
STREAM_CODE = 5
STREAM_DMC = 6


class ChannelConfigError(ValueError):
    pass


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the counter tuple ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def esn0_db_to_sigma2(esn0_db):
    return 1.0 / (2.0 * 10.0 ** (np.asarray(esn0_db, dtype=float) / 10.0))


def sigma2_to_esn0_db(sigma2):
    return 10.0 * np.log10(1.0 / (2.0 * np.asarray(sigma2, dtype=float)))


def osnr_axis(esn0_db, offset_db: float):
    """Affine relabeling of an Es/N0 axis, e.g. OSNR = Es/N0 + 10 log10(Rs / Bref)."""
    return np.asarray(esn0_db, dtype=float) + offset_db


@dataclass(frozen=True)
class AwgnChannel:
    """Complex AWGN with variance ``sigma2`` per real dimension."""

    sigma2: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ChannelConfigError(f"sigma2 must be positive, got {self.sigma2}")

    @classmethod
    def from_esn0_db(cls, esn0_db: float, seed: int = 0) -> "AwgnChannel":
        return cls(float(esn0_db_to_sigma2(esn0_db)), seed)

    @property
    def esn0_db(self) -> float:
        return float(sigma2_to_esn0_db(self.sigma2))

    def transmit(self, x, *counters) -> np.ndarray:
        return awgn_transmit(x, self, *counters)


def awgn_transmit(x, ch: AwgnChannel, *counters) -> np.ndarray:
    """
    y = x + n with n ~ CN(0, 2 sigma2).

    ``counters`` (e.g. a trial index) select the noise stream; identical
    ``(ch.seed, counters)`` give bit-identical output.
    """
    x = np.asarray(x, dtype=complex)
    rng = derive_rng(ch.seed, STREAM_NOISE, *counters)
    noise = rng.standard_normal((2,) + x.shape)
    return x + math.sqrt(ch.sigma2) * (noise[0] + 1j * noise[1])


def hard_decide(y, c: Constellation) -> np.ndarray:
    """Minimum Euclidean distance decision; ties go to the lowest index."""
    y = np.asarray(y, dtype=complex)
    d = np.abs(y[..., None] - c.points) ** 2
    return d.argmin(axis=-1)


@dataclass(frozen=True, eq=False)
class DMCMatrix:
    """
    Transition matrix ``W[j, k] = P(receive s_j | sent s_k)``.

    Columns sum to one.
    """

    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ChannelConfigError("W must be square")
        if np.any(W < 0) or np.any(np.abs(W.sum(axis=0) - 1.0) > 1e-9):
            raise ChannelConfigError("W must be non-negative with columns summing to 1")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def M(self) -> int:
        return self.W.shape[0]

    def smoothed(self, floor: float = 1e-12) -> "DMCMatrix":
        W = np.maximum(self.W, floor)
        return DMCMatrix(W / W.sum(axis=0, keepdims=True))


def estimate_dmc(c: Constellation, ch: AwgnChannel, n_samples: int = 10**6,
                 floor: float = 1e-12, *counters) -> DMCMatrix:
    """
    Empirical hard-decision transition matrix over AWGN.

    Each column k is estimated from ``n_samples // M`` transmissions of
    ``s_k``. Entries are floored at ``floor`` and the columns renormalized
    so that downstream LLRs stay finite.
    """
    if n_samples < 10**4:
        raise ChannelConfigError("n_samples must be at least 1e4")
    M = c.M
    per = n_samples // M
    tx = np.repeat(np.arange(M), per)
    rng = derive_rng(ch.seed, STREAM_DMC, *counters)
    noise = rng.standard_normal((2, tx.size))
    y = c.points[tx] + math.sqrt(ch.sigma2) * (noise[0] + 1j * noise[1])
    rx = hard_decide(y, c)
    counts = np.zeros((M, M))
    np.add.at(counts, (rx, tx), 1.0)
    W = counts / per
    if floor:
        W = np.maximum(W, floor)
        W /= W.sum(axis=0, keepdims=True)
    return DMCMatrix(W)


@dataclass(frozen=True)
class HardDecisionChannel:
    """AWGN followed by a minimum-distance symbol decision; outputs points."""

    constellation: Constellation
    awgn: AwgnChannel

    def transmit(self, x, *counters) -> np.ndarray:
        y = awgn_transmit(x, self.awgn, *counters)
        return self.constellation.points[hard_decide(y, self.constellation)]


@dataclass(frozen=True)
class ChannelMix:
    """
    Route a fraction ``gamma`` of every codeword over ``ch1``, the rest over ``ch2``.

    ``round(gamma * n)`` symbols (round half to even) go to channel 1. Without
    ``interleave_seed`` these are the first positions of the word; otherwise
    the positions are a seeded random subset.
    """

    gamma: float
    ch1: object
    ch2: object
    interleave_seed: int | None = None
    _check: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ChannelConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        c1 = getattr(self.ch1, "constellation", None)
        c2 = getattr(self.ch2, "constellation", None)
        if c1 is not None and c2 is not None:
            if c1.M != c2.M or not np.allclose(c1.points, c2.points):
                raise ChannelConfigError("component channels use different alphabets")

    def route(self, n: int) -> np.ndarray:
        """Boolean mask, True where a symbol goes over channel 1."""
        k = int(round(self.gamma * n))
        mask = np.zeros(n, dtype=bool)
        if self.interleave_seed is None:
            mask[:k] = True
        else:
            pos = derive_rng(self.interleave_seed, STREAM_INTERLEAVE, n).permutation(n)[:k]
            mask[pos] = True
        return mask


def mix_transmit(x, mix: ChannelMix, *counters):
    """
    Transmit one codeword through a channel mix.

    Returns ``(y, route)``. Each component channel draws noise for the
    whole word from its own stream and the route mask selects per
    position, so gamma = 1 (or 0) reproduces channel 1 (or 2) exactly.
    """
    x = np.asarray(x, dtype=complex)
    route = mix.route(x.size)
    y1 = mix.ch1.transmit(x, *counters) if route.any() else None
    y2 = mix.ch2.transmit(x, *counters) if not route.all() else None
    if y1 is None:
        return y2, route
    if y2 is None:
        return y1, route
    return np.where(route, y1, y2), route
