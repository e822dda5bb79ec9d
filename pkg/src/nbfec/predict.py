"""
MI-threshold calibration and post-FEC SER prediction.

A :class:`CalibrationCurve` holds simulated (MI, post-FEC SER) points for
one code, possibly pooled over constellations. Thresholds and predictions
interpolate linearly in (MI, log10 SER).
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, isotonic_regression

from .channel import (STREAM_INFO, STREAM_INTERLEAVE, STREAM_SCRAMBLE, AwgnChannel, ChannelMix,
                      HardDecisionChannel, derive_rng, esn0_db_to_sigma2, estimate_dmc,
                      hard_decide, mix_transmit)
from .constellation import Constellation, map_symbols
from .demod import GaussianMetric, dmc_llrs, symbol_llrs
from .metrics import estimate_i_nb, mi_hd, mi_sd_numeric
from .nbldpc import MAX_ITERS, decode
from .simulate import PointResult, StopRule, simulate_point

log = logging.getLogger(__name__)


# Published MI thresholds (bits/symbol) at post-FEC SER 1e-4 for the
# dv = 3 codes of each rate; used to centre sweeps and as comparison values.
REFERENCE_THRESHOLD = {0.7: 2.31, 0.75: 2.43, 0.8: 2.55, 0.85: 2.67, 0.9: 2.79}


class CalibrationError(RuntimeError):
    pass


class ExtrapolationWarning(UserWarning):
    pass


def _log_ser(ser, symbols):
    """log10 SER; zero-error points use half an error (0.5 / symbols)."""
    ser = np.asarray(ser, dtype=float)
    floor = 0.5 / np.maximum(np.asarray(symbols, dtype=float), 1.0)
    return np.log10(np.where(ser > 0, ser, floor))


def crossing(x, ser, target: float, symbols=None, increasing: bool | None = None) -> float:
    """
    Value of ``x`` where log10(SER) crosses log10(target).

    Points are sorted by ``x`` and made monotone by isotonic regression of
    log10 SER (non-increasing in x unless ``increasing``; detected from the
    data when None). Raises CalibrationError when no bracketing pair exists.
    """
    x = np.asarray(x, dtype=float)
    symbols = np.full(x.size, np.inf) if symbols is None else np.asarray(symbols)
    order = np.argsort(x, kind="stable")
    x = x[order]
    ly = _log_ser(np.asarray(ser)[order], symbols[order])
    if x.size < 2:
        raise CalibrationError("need at least two points to locate a crossing")
    if increasing is None:
        increasing = bool(np.corrcoef(x, ly)[0, 1] > 0) if np.ptp(ly) > 0 else False
    ly = isotonic_regression(ly, increasing=increasing).x
    lt = math.log10(target)
    for i in range(x.size - 1):
        a, b = ly[i], ly[i + 1]
        if (a - lt) * (b - lt) <= 0 and a != b:
            return float(x[i] + (lt - a) * (x[i + 1] - x[i]) / (b - a))
    raise CalibrationError(
        f"no crossing of SER {target:g} in range: x={np.round(x, 4).tolist()}, "
        f"SER={np.round(10 ** ly, 8).tolist()}")


FIT_MAX_SER = 0.03


def loglinear_threshold(mi, ser, target: float, fit_max: float = FIT_MAX_SER) -> float:
    """
    Threshold from a straight-line fit of log10 SER against MI.

    Uses the nonzero points with SER <= ``fit_max``, i.e. the steep part
    of the waterfall below its shoulder; meant for extrapolating below the
    lowest simulated SER.
    """
    mi = np.asarray(mi, dtype=float)
    ser = np.asarray(ser, dtype=float)
    sel = (ser > 0) & (ser <= fit_max)
    if sel.sum() < 2:
        raise CalibrationError("fewer than two waterfall points for the log-linear fit")
    slope, icpt = np.polyfit(mi[sel], np.log10(ser[sel]), 1)
    if slope >= 0:
        raise CalibrationError("log-linear fit is not decreasing in MI")
    return float((math.log10(target) - icpt) / slope)


@dataclass
class CalibrationCurve:
    """(MI, post-FEC SER) points of one code and the threshold at ``target_ser``."""

    code_id: str
    target_ser: float
    seed: int = 0
    points: list = field(default_factory=list)

    def add(self, p: PointResult):
        self.points.append(p)

    def _arrays(self, constellation=None):
        pts = [p for p in self.points if constellation is None or p.constellation == constellation]
        pts.sort(key=lambda p: (p.mi, p.constellation))
        return (np.array([p.mi for p in pts]), np.array([p.post_fec_ser for p in pts]),
                np.array([p.symbols for p in pts], dtype=float), pts)

    @property
    def constellations(self) -> list:
        return sorted({p.constellation for p in self.points})

    def threshold(self, target: float | None = None, constellation=None) -> float:
        mi, ser, sym, _ = self._arrays(constellation)
        return crossing(mi, ser, target or self.target_ser, sym, increasing=False)

    def per_constellation(self, target: float | None = None) -> dict:
        return {c: self.threshold(target, c) for c in self.constellations}

    def extrapolated_threshold(self, target: float, fit_max: float = FIT_MAX_SER,
                               constellation=None):
        mi, ser, _, _ = self._arrays(constellation)
        return loglinear_threshold(mi, ser, target, fit_max)

    def monotonicity_violations(self, nsigma: float = 3.0) -> list:
        """
        Consecutive points (per constellation) whose SER rises with MI by
        more than ``nsigma`` Monte Carlo standard deviations. The deviation
        of a point is taken as ``SER / sqrt(frame_errors)``.
        """
        bad = []
        for c in self.constellations:
            _, _, _, pts = self._arrays(c)
            for a, b in zip(pts, pts[1:]):
                sa = a.post_fec_ser / math.sqrt(max(a.frame_errors, 1))
                sb = b.post_fec_ser / math.sqrt(max(b.frame_errors, 1))
                if b.post_fec_ser - a.post_fec_ser > nsigma * math.hypot(sa, sb):
                    bad.append((a, b))
        return bad

    def validate(self):
        bad = self.monotonicity_violations()
        if bad:
            desc = "; ".join(f"{a.constellation}: MI {a.mi:.4f}->{b.mi:.4f} SER "
                             f"{a.post_fec_ser:.3g}->{b.post_fec_ser:.3g}" for a, b in bad)
            raise CalibrationError(f"post-FEC SER increases with MI: {desc}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# code={self.code_id} target_ser={float(self.target_ser)!r} seed={self.seed}\n")
        buf.write("# units: mi_bits in bits/symbol, esn0_db in dB, rates are fractions\n")
        try:
            buf.write(f"# threshold_mi_bits={float(self.threshold())!r}\n")
        except CalibrationError:
            buf.write("# threshold_mi_bits=nan\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mi_bits", "post_fec_ser", "constellation", "esn0_db", "channel", "symbols",
                    "symbol_errors", "frame_errors", "frames", "gmi_bits", "pre_fec_ber",
                    "pre_fec_ser"])
        for p in sorted(self.points, key=lambda p: (p.constellation, p.esn0_db)):
            w.writerow([repr(float(p.mi)), repr(float(p.post_fec_ser)), p.constellation,
                        repr(float(p.esn0_db)), p.channel, p.symbols, p.symbol_errors,
                        p.frame_errors, p.frames, repr(float(p.gmi)), repr(float(p.pre_ber)),
                        repr(float(p.pre_ser))])
        return buf.getvalue()

    def save(self, path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, text: str) -> "CalibrationCurve":
        meta, rows = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
            elif line.strip():
                rows.append(line)
        reader = csv.DictReader(rows)
        curve = cls(meta.get("code", ""), float(meta.get("target_ser", "nan")),
                    int(meta.get("seed", 0)))
        for r in reader:
            mi, ser = float(r["mi_bits"]), float(r["post_fec_ser"])
            p = PointResult(r.get("constellation", ""), float(r.get("esn0_db", "nan")),
                            r.get("channel", "awgn"))
            p.post_fec_ser = ser
            p.symbols = int(r.get("symbols", 0) or 0)
            p.symbol_errors = int(r.get("symbol_errors", 0) or 0)
            p.frame_errors = int(r.get("frame_errors", 0) or 0)
            p.frames = int(r.get("frames", 0) or 0)
            p.gmi = float(r.get("gmi_bits", "nan"))
            p.pre_ber = float(r.get("pre_fec_ber", "nan"))
            p.pre_ser = float(r.get("pre_fec_ser", "nan"))
            if p.channel == "hd":
                p.mi_hd = mi
            else:
                p.i_nb = mi
            curve.points.append(p)
        return curve

    @classmethod
    def load(cls, path) -> "CalibrationCurve":
        return cls.from_csv(Path(path).read_text("utf-8"))


@dataclass
class Prediction:
    ser: float
    lower: tuple | None
    upper: tuple | None
    extrapolated: bool = False


def predict_post_fec(mi: float, curve: CalibrationCurve) -> Prediction:
    """
    Post-FEC SER at ``mi`` by log-linear interpolation of the curve.

    ``lower``/``upper`` are the bracketing (MI, SER) calibration points.
    Outside the calibrated range the end segment is extended and the
    result is flagged (and an ExtrapolationWarning issued).
    """
    x, ser, sym, _ = curve._arrays()
    if x.size == 0:
        raise ValueError("empty calibration curve")
    ly = isotonic_regression(_log_ser(ser, sym), increasing=False).x
    if x.size == 1:
        return Prediction(float(10 ** ly[0]), (x[0], 10 ** ly[0]), (x[0], 10 ** ly[0]),
                          bool(mi != x[0]))
    i = int(np.searchsorted(x, mi, side="right")) - 1
    extrap = mi < x[0] or mi > x[-1]
    if extrap:
        warnings.warn(f"MI {mi:.4f} outside calibrated range [{x[0]:.4f}, {x[-1]:.4f}]",
                      ExtrapolationWarning)
    i = min(max(i, 0), x.size - 2)
    if x[i] == mi:
        return Prediction(float(10 ** ly[i]), (x[i], 10 ** ly[i]), (x[i], 10 ** ly[i]), False)
    j = i + 1
    while j < x.size - 1 and x[j] == x[i]:
        j += 1
    t = (mi - x[i]) / (x[j] - x[i])
    val = ly[i] + t * (ly[j] - ly[i])
    return Prediction(float(10 ** val), (float(x[i]), float(10 ** ly[i])),
                      (float(x[j]), float(10 ** ly[j])), bool(extrap))


def esn0_for_mi(c: Constellation, mi: float, lo: float = -10.0, hi: float = 40.0,
                channel: str = "awgn", dmc_samples: int = 4 * 10**5, seed: int = 0) -> float:
    """Es/N0 (dB) at which the matched soft MI (or I_hd) of ``c`` equals ``mi``."""
    if not 0.0 < mi < c.m:
        raise ValueError(f"MI {mi:g} is not reachable with {c.M} points (0 < MI < {c.m})")
    if channel == "awgn":
        f = lambda s: mi_sd_numeric(c, float(esn0_db_to_sigma2(s))) - mi  # noqa: E731
        return float(brentq(f, lo, hi, xtol=1e-4))
    def f(s):
        ch = AwgnChannel(float(esn0_db_to_sigma2(s)), seed)
        return mi_hd(estimate_dmc(c, ch, dmc_samples), c.priors) - mi
    return float(brentq(f, lo, hi, xtol=1e-3))


SWEEP_HEADROOM = 0.02


def mi_sweep(constellations, centre: float, offsets, channel: str = "awgn",
             seed: int = 0) -> dict:
    """
    Per-constellation Es/N0 grids (dB, 3 decimals) hitting ``centre + offsets`` in MI.

    Targets within ``SWEEP_HEADROOM`` bits of log2(M) are dropped: the SNR
    needed to approach capacity grows without bound.
    """
    out = {}
    for c in constellations:
        mis = [centre + d for d in offsets if 0.0 < centre + d < c.m - SWEEP_HEADROOM]
        out[c.name] = [round(esn0_for_mi(c, v, channel=channel, seed=seed), 3) for v in mis]
    return out


def calibrate(code, constellations, target_ser: float, sweep, seed: int = 0,
              channel: str = "awgn", stop: StopRule | None = None, workers: int = 1,
              adaptive: bool = True, validate: bool = True, **kw) -> CalibrationCurve:
    """
    Simulate every constellation over the Es/N0 sweep and pool the points.

    ``sweep`` is a list of Es/N0 values in dB, or a dict mapping constellation
    name to its own list. With ``adaptive`` a constellation's sweep stops
    after the first point whose SER is below ``target_ser / 10`` (higher
    SNRs carry no information about the crossing).
    """
    if stop is None:
        stop = StopRule(min_frames=max(1, math.ceil(10 / target_ser / code.n)))
    curve = CalibrationCurve(getattr(code, "name", ""), target_ser, seed)
    for c in constellations:
        grid = sweep[c.name] if isinstance(sweep, dict) else sweep
        for esn0 in sorted(grid):
            p = simulate_point(code, c, esn0, seed, channel, stop, workers, **kw)
            curve.add(p)
            if adaptive and p.post_fec_ser < target_ser / 10:
                break
    if validate:
        curve.validate()
    try:
        curve.threshold()
    except CalibrationError as exc:
        raise CalibrationError(f"target SER {target_ser:g} not bracketed by the sweep: {exc}")
    return curve


def decode_db(db, code, seed: int, c: Constellation, max_iters: int = MAX_ITERS,
              return_details: bool = False):
    """
    Post-FEC SER obtained by decoding a recorded measurement database.

    Records are interleaved by a seeded permutation and cut into blocks of
    ``code.n``. For each block a random codeword ``w`` is drawn and the
    additive scrambler ``s = t xor w`` (t = recorded symbols) turns the
    recording into a coset of ``w``. LLRs are computed from the recorded
    samples with the Gaussian metric at the variance estimated by the nu
    optimization and descrambled before decoding.
    """
    if db.N < code.n:
        raise ValueError(f"database has {db.N} records, fewer than one codeword ({code.n})")
    rep = estimate_i_nb(db, c, GaussianMetric(0.5))
    q = GaussianMetric(rep.sigma2_hat)
    perm = derive_rng(seed, STREAM_INTERLEAVE, db.N).permutation(db.N)
    n_blocks = db.N // code.n
    enc = code.encoder
    M = code.M
    errors = 0
    details = []
    for b in range(n_blocks):
        idx = perm[b * code.n:(b + 1) * code.n]
        t = db.tx[idx]
        w = enc.encode(derive_rng(seed, STREAM_SCRAMBLE, b).integers(0, M, enc.k))
        s = t ^ w
        lq = np.concatenate([np.zeros((code.n, 1)), symbol_llrs(db.rx[idx], c, q)], axis=1)
        # hypothesis a for the code symbol corresponds to recorded symbol a xor s
        full = lq[np.arange(code.n)[:, None], np.arange(M)[None, :] ^ s[:, None]]
        llrs = full[:, 1:] - full[:, :1]
        res = decode(llrs, code, max_iters)
        e = int(np.count_nonzero(res.decided != w))
        errors += e
        details.append((e, res.iterations, res.syndrome_ok))
    ser = errors / (n_blocks * code.n)
    return (ser, details) if return_details else ser


@dataclass
class UniversalityRow:
    gamma: float
    post_fec_ser: float
    frames: int
    symbol_errors: int
    frame_errors: int


def _channel_mi(kind, c, sigma2, seed, dmc_samples):
    if kind == "awgn":
        return mi_sd_numeric(c, sigma2), None
    dmc = estimate_dmc(c, AwgnChannel(sigma2, seed), dmc_samples)
    return mi_hd(dmc, c.priors), dmc


def universality_sweep(code, c: Constellation, ch1: tuple, ch2: tuple, gammas, seed: int = 0,
                       frames: int = 50, mi_tol: float = 0.02, dmc_samples: int = 10**6,
                       interleave_seed: int | None = None, max_iters: int = MAX_ITERS):
    """
    Post-FEC SER versus the mixing fraction gamma.

    ``ch1``/``ch2`` are ``(kind, esn0_db)`` with kind ``"awgn"`` (soft) or
    ``"hd"`` (hard decision + DMC LLRs). Their MIs must agree within
    ``mi_tol``. Returns ``(rows, max_deviation)`` where the deviation is
    the largest |log10 SER - mean log10 SER| over gammas with errors.
    """
    chans, mis = [], []
    for kind, esn0 in (ch1, ch2):
        sigma2 = float(esn0_db_to_sigma2(esn0))
        mi, dmc = _channel_mi(kind, c, sigma2, seed, dmc_samples)
        awgn = AwgnChannel(sigma2, seed)
        chans.append((kind, awgn, dmc))
        mis.append(mi)
    if abs(mis[0] - mis[1]) > mi_tol:
        raise ValueError(f"channel MIs differ: {mis[0]:.4f} vs {mis[1]:.4f} bits")

    def component(kind, awgn):
        return HardDecisionChannel(c, awgn) if kind == "hd" else awgn

    enc = code.encoder
    rows = []
    for g in gammas:
        mix = ChannelMix(float(g), component(chans[0][0], chans[0][1]),
                         component(chans[1][0], chans[1][1]), interleave_seed)
        sym_err = frame_err = 0
        for f in range(frames):
            info = derive_rng(seed, STREAM_INFO, 0, f).integers(0, code.M, enc.k)
            cw = enc.encode(info)
            y, route = mix_transmit(map_symbols(cw, c), mix, 0, f)
            llrs = np.empty((code.n, code.M - 1))
            for mask, (kind, awgn, dmc) in ((route, chans[0]), (~route, chans[1])):
                if not mask.any():
                    continue
                if kind == "hd":
                    llrs[mask] = dmc_llrs(hard_decide(y[mask], c), dmc, c.priors)
                else:
                    llrs[mask] = symbol_llrs(y[mask], c, GaussianMetric(awgn.sigma2))
            res = decode(llrs, code, max_iters)
            e = int(np.count_nonzero(res.decided != cw))
            sym_err += e
            frame_err += e > 0
        rows.append(UniversalityRow(float(g), sym_err / (frames * code.n), frames, sym_err,
                                    frame_err))
    lsers = np.array([math.log10(r.post_fec_ser) for r in rows if r.post_fec_ser > 0])
    dev = float(np.max(np.abs(lsers - lsers.mean()))) if lsers.size else 0.0
    return rows, dev


COLLAPSE_METRICS = {
    "mi": ("mi", False),
    "gmi": ("gmi", False),
    "pre_ber": ("pre_ber", True),
    "pre_ser": ("pre_ser", True),
}


def _extrap(x, xs, ys):
    """Piecewise-linear interpolation in x, extended linearly beyond the ends."""
    if x <= xs[0]:
        i = 0
    elif x >= xs[-1]:
        i = xs.size - 2
    else:
        i = int(np.searchsorted(xs, x)) - 1
    return float(ys[i] + (x - xs[i]) * (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))


def collapse_report(curve: CalibrationCurve, target: float | None = None,
                    metrics=("mi", "gmi", "pre_ber", "pre_ser")) -> dict:
    """
    How well each metric collapses the per-constellation curves.

    For every constellation the Es/N0 at which post-FEC SER crosses
    ``target`` is found, and each metric is read off at that Es/N0 (rates
    as log10). For a metric the report gives

    ``values``
        metric at the crossing per constellation;
    ``spread``
        max - min of those values (bits, or decades for rates);
    ``threshold``
        their mean, i.e. a pooled threshold;
    ``db_errors`` / ``db_spread``
        for each constellation, the Es/N0 at which the metric reaches the
        pooled threshold minus the true crossing Es/N0, and the max - min
        of these. This puts all metrics on one scale (dB of mispredicted
        operating point) so they can be compared with each other.
    """
    target = target or curve.target_ser
    out = {}
    cons = curve.constellations
    per = {}
    for c in cons:
        pts = sorted((p for p in curve.points if p.constellation == c), key=lambda p: p.esn0_db)
        snr = np.array([p.esn0_db for p in pts])
        per[c] = (pts, snr, crossing(snr, [p.post_fec_ser for p in pts], target,
                                     [p.symbols for p in pts], increasing=False))
    for name in metrics:
        attr, log = COLLAPSE_METRICS[name]
        vals, series = {}, {}
        for c, (pts, snr, s_cross) in per.items():
            v = np.array([getattr(p, attr) for p in pts], dtype=float)
            if log:
                v = np.log10(np.maximum(v, 1e-300))
            if not np.all(np.isfinite(v)):
                break
            vals[c] = _extrap(s_cross, snr, v)
            series[c] = (snr, v, s_cross)
        else:
            thr = float(np.mean(list(vals.values())))
            errs = {}
            for c, (snr, v, s_cross) in series.items():
                order = np.argsort(v, kind="stable")
                errs[c] = _extrap(thr, v[order], snr[order]) - s_cross
            out[name] = {"values": vals, "spread": float(max(vals.values()) - min(vals.values())),
                         "threshold": thr, "db_errors": errs,
                         "db_spread": float(max(errs.values()) - min(errs.values())),
                         "log10": log}
    out["crossing_esn0_db"] = {c: per[c][2] for c in cons}
    return out
