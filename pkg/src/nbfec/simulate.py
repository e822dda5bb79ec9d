"""
Monte Carlo link simulation: encode -> map -> channel -> LLR -> decode.

Frame ``f`` of an operating point uses the generators
``(seed, STREAM_INFO, key, f)`` and ``(seed, STREAM_NOISE, key, f)`` where
``key`` is a CRC of the point description, so results do not depend on
the number of workers. Frames are run in fixed-size batches and the
stopping rule is only evaluated between batches.
"""

from __future__ import annotations

import logging
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import (STREAM_INFO, AwgnChannel, DMCMatrix, derive_rng, esn0_db_to_sigma2,
                      estimate_dmc, hard_decide)
from .constellation import Constellation, map_symbols
from .db import MeasurementDB
from .demod import GaussianMetric, DMCMetric, dmc_llrs, symbol_llrs
from .metrics import analyze, estimate_i_nb, mi_hd, pre_fec_rates
from .nbldpc import MAX_ITERS, decode

log = logging.getLogger(__name__)

CHANNELS = ("awgn", "hd")


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("NBFEC_WORKERS", "1")))
    except ValueError:
        return 1


def point_key(constellation: str, esn0_db: float, channel: str) -> int:
    return zlib.crc32(f"{constellation}|{esn0_db:.6f}|{channel}".encode())


@dataclass
class StopRule:
    """Stop once both error targets are met, or at ``max_frames``."""

    target_errors: int = 100
    min_frame_errors: int = 10
    min_frames: int = 1
    max_frames: int = 2000
    batch: int = 8

    def done(self, frames, symbol_errors, frame_errors) -> bool:
        if frames >= self.max_frames:
            return True
        return (frames >= self.min_frames and symbol_errors >= self.target_errors
                and frame_errors >= self.min_frame_errors)


@dataclass
class PointResult:
    """One simulated operating point. Rates in bits/symbol."""

    constellation: str
    esn0_db: float
    channel: str
    frames: int = 0
    symbols: int = 0
    symbol_errors: int = 0
    frame_errors: int = 0
    iterations: int = 0
    post_fec_ser: float = float("nan")
    i_nb: float = float("nan")
    i_nb_stderr: float = float("nan")
    nu_hat: float = float("nan")
    sigma2_hat: float = float("nan")
    aclb: float = float("nan")
    gmi: float = float("nan")
    pre_ber: float = float("nan")
    pre_ser: float = float("nan")
    mi_hd: float = float("nan")

    @property
    def mi(self) -> float:
        """The MI that predicts this point: I_hd for hard decisions, I_NB otherwise."""
        return self.mi_hd if self.channel == "hd" else self.i_nb

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Link:
    """Everything a worker needs to run frames of one operating point."""

    code: object
    constellation: Constellation
    sigma2: float
    seed: int
    key: int
    channel: str = "awgn"
    dmc: DMCMatrix | None = None
    max_iters: int = MAX_ITERS
    minsum: bool = False
    metric_k: float | None = None

    def frame(self, f: int):
        """Transmitted codeword and channel output of frame ``f``."""
        enc = self.code.encoder
        info = derive_rng(self.seed, STREAM_INFO, self.key, f).integers(0, self.code.M, enc.k)
        cw = enc.encode(info)
        ch = AwgnChannel(self.sigma2, self.seed)
        y = ch.transmit(map_symbols(cw, self.constellation), self.key, f)
        return cw, y

    def llrs(self, y):
        c = self.constellation
        if self.channel == "hd":
            return dmc_llrs(hard_decide(y, c), self.dmc, c.priors)
        return symbol_llrs(y, c, GaussianMetric(self.metric_k or self.sigma2))

    def run(self, f: int):
        cw, y = self.frame(f)
        res = decode(self.llrs(y), self.code, self.max_iters, self.minsum)
        err = int(np.count_nonzero(res.decided != cw))
        return err, res.iterations


_worker_link = None


def _init_worker(link):
    global _worker_link
    _worker_link = link


def _worker_run(f):
    return _worker_link.run(f)


def run_frames(link: Link, stop: StopRule, workers: int = 1):
    """Run frames until ``stop`` is satisfied; returns per-frame (errors, iterations)."""
    out = []
    sym_err = frame_err = 0
    pool = ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(link,)) \
        if workers > 1 else None
    try:
        f = 0
        while not stop.done(len(out), sym_err, frame_err):
            batch = range(f, min(f + stop.batch, stop.max_frames))
            res = list(pool.map(_worker_run, batch)) if pool else [link.run(i) for i in batch]
            out.extend(res)
            sym_err += sum(e for e, _ in res)
            frame_err += sum(e > 0 for e, _ in res)
            f += len(batch)
    finally:
        if pool:
            pool.shutdown()
    return out


def simulate_point(code, c: Constellation, esn0_db: float, seed: int, channel: str = "awgn",
                   stop: StopRule | None = None, workers: int = 1, metric_samples: int = 400_000,
                   dmc_samples: int = 10**6, max_iters: int = MAX_ITERS, minsum: bool = False,
                   metric_k: float | None = None) -> PointResult:
    """
    Simulate one (constellation, Es/N0) point of the coded link.

    ``channel="awgn"`` feeds Gaussian-metric LLRs (matched unless
    ``metric_k`` is set) to the decoder; ``channel="hd"`` makes a hard
    symbol decision first and uses LLRs from the estimated transition
    matrix. Metrics are computed from the first ``metric_samples``
    transmitted symbols of the same run.
    """
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}")
    stop = stop or StopRule()
    sigma2 = float(esn0_db_to_sigma2(esn0_db))
    key = point_key(c.name, esn0_db, channel)
    dmc = None
    if channel == "hd":
        dmc = estimate_dmc(c, AwgnChannel(sigma2, seed), dmc_samples, 1e-12, key)
    link = Link(code, c, sigma2, seed, key, channel, dmc, max_iters, minsum, metric_k)
    frames = run_frames(link, stop, workers)

    errs = np.array([e for e, _ in frames])
    res = PointResult(c.name, float(esn0_db), channel)
    res.frames = len(frames)
    res.symbols = res.frames * code.n
    res.symbol_errors = int(errs.sum())
    res.frame_errors = int(np.count_nonzero(errs))
    res.iterations = int(sum(it for _, it in frames))
    res.post_fec_ser = res.symbol_errors / res.symbols

    n_metric = max(1, min(res.frames, -(-metric_samples // code.n)))
    tx, rx = zip(*(link.frame(f) for f in range(n_metric)))
    tx, rx = np.concatenate(tx), np.concatenate(rx)
    if channel == "hd":
        rx = c.points[hard_decide(rx, c)]
        db = MeasurementDB(tx, rx, c.name, c.M)
        res.mi_hd = mi_hd(dmc, c.priors)
        rep = estimate_i_nb(db, c, DMCMetric(dmc))
        res.i_nb, res.i_nb_stderr, res.nu_hat = rep.i_nb, rep.i_nb_stderr, rep.nu_hat
        res.pre_ber, res.pre_ser = pre_fec_rates(db, c)
    else:
        db = MeasurementDB(tx, rx, c.name, c.M)
        rep = analyze(db, c, GaussianMetric(metric_k or sigma2))
        for k in ("i_nb", "i_nb_stderr", "nu_hat", "sigma2_hat", "aclb", "gmi"):
            setattr(res, k, getattr(rep, k))
        res.pre_ber, res.pre_ser = rep.ber, rep.ser
    log.info("%s %s Es/N0=%.2f dB: MI=%.4f SER=%.3g (%d frames, %d frame errors)",
             channel, c.name, esn0_db, res.mi, res.post_fec_ser, res.frames, res.frame_errors)
    return res
