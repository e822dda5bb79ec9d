"""
Information-theoretic and error-rate metrics.

* :func:`estimate_i_nb` - empirical mismatched-decoding MI bound, maximized
  over the exponent nu, with the nu-based noise-variance estimate.
* :func:`aclb` - the same average at nu = 1 (auxiliary-channel lower bound).
* :func:`gmi`, :func:`pre_fec_rates` - bit-wise and uncoded baselines.
* :func:`mi_sd_numeric` - symbol-wise MI of the AWGN channel by 2-D
  Gauss-Hermite quadrature.
* :func:`mi_hd` - MI of a discrete memoryless channel.

All rates are in bits per symbol.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np

from .channel import ChannelConfigError, DMCMatrix, hard_decide
from .constellation import Constellation
from .demod import GaussianMetric, bit_llrs

LN2 = math.log(2.0)
NU_BRACKET = (1e-3, 1e3)
NU_RTOL = 1e-7
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_PARTITION = 1 << 16


class MetricWarning(UserWarning):
    pass


def stable_mean(x: np.ndarray) -> float:
    """Mean via per-partition sums combined with math.fsum (fixed order, bit-stable)."""
    x = np.asarray(x, dtype=float).ravel()
    parts = [float(x[i:i + _PARTITION].sum()) for i in range(0, x.size, _PARTITION)]
    return math.fsum(parts) / x.size


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-6):
    """
    Maximize a unimodal scalar function on [lo, hi].

    Returns ``(x, f(x))`` with ``x`` within ``tol`` of the maximizer.
    """
    if not lo < hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if not tol > 0:
        raise ValueError("tol must be positive")
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _log_terms(db, c: Constellation, q):
    """Per-record ``ln q(y|s_j) - ln q(y|x)`` (shape N x M) and ``ln lambda``."""
    lq = q.log_q(db.rx, c)
    own = np.take_along_axis(lq, db.tx[:, None], axis=1)
    return lq - own, np.log(c.priors)


def _nu_terms(delta, log_prior, nu):
    """Per-record nats: -ln sum_j lambda_j exp(nu * delta_j)."""
    t = log_prior + nu * delta
    mx = t.max(axis=1)
    return -(mx + np.log(np.exp(t - mx[:, None]).sum(axis=1)))


def _maximize_nu(delta, log_prior, bracket=NU_BRACKET, rtol=NU_RTOL, grid=25):
    def f(log_nu):
        return stable_mean(_nu_terms(delta, log_prior, math.exp(log_nu)))

    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    for _ in range(4):
        xs = np.linspace(lo, hi, grid)
        vals = [f(x) for x in xs]
        k = int(np.argmax(vals))
        if 0 < k < grid - 1 or not np.isfinite(vals[k]):
            break
        # peak at an edge: widen the search by three decades on that side
        width = 3 * math.log(10.0)
        if k == 0:
            lo, hi = lo - width, xs[1]
        else:
            lo, hi = xs[-2], hi + width
    else:
        warnings.warn("nu maximum not bracketed; returning edge value", MetricWarning)
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, grid - 1)]
    x, fx = golden_section_max(f, a, b, tol=rtol)
    # nu = 1 is always a candidate so the result never falls below the ACLB
    f1 = f(0.0)
    if f1 > fx:
        return 1.0, f1
    return math.exp(x), fx


@dataclass
class MetricReport:
    """Summary of one measurement database. Rates in bits/symbol."""

    i_nb: float = float("nan")
    nu_hat: float = float("nan")
    sigma2_hat: float = float("nan")
    aclb: float = float("nan")
    gmi: float = float("nan")
    ber: float = float("nan")
    ser: float = float("nan")
    n: int = 0
    i_nb_stderr: float = float("nan")
    aclb_stderr: float = float("nan")
    gmi_stderr: float = float("nan")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]


def estimate_i_nb(db, c: Constellation, q, bracket=NU_BRACKET, rtol=NU_RTOL) -> MetricReport:
    """
    Empirical MI estimate, sup over nu of the mismatched-decoding average.

    For a Gaussian metric with variance K the maximizing nu also gives the
    noise-variance estimate ``sigma2_hat = K / nu_hat`` (``1 / (2 nu_hat)``
    for K = 1/2).
    """
    if db.N < 1000:
        warnings.warn(f"only {db.N} records; MI estimate will be noisy", MetricWarning)
    delta, log_prior = _log_terms(db, c, q)
    if np.all(db.rx == db.rx[0]):
        warnings.warn("degenerate database: all received samples identical", MetricWarning)
    nu, val = _maximize_nu(delta, log_prior, bracket, rtol)
    terms = _nu_terms(delta, log_prior, nu) / LN2
    i_nb = min(max(val / LN2, 0.0), float(c.m)) if np.isfinite(val) else 0.0
    rep = MetricReport(i_nb=i_nb, nu_hat=nu, n=db.N,
                       i_nb_stderr=float(terms.std(ddof=1) / math.sqrt(db.N)) if db.N > 1 else 0.0)
    if isinstance(q, GaussianMetric):
        rep.sigma2_hat = q.K / nu
    return rep


def aclb(db, c: Constellation, q, return_stderr: bool = False):
    """Auxiliary-channel lower bound: the nu = 1 average, in bits."""
    delta, log_prior = _log_terms(db, c, q)
    terms = _nu_terms(delta, log_prior, 1.0) / LN2
    val = stable_mean(terms)
    if return_stderr:
        return val, float(terms.std(ddof=1) / math.sqrt(db.N)) if db.N > 1 else 0.0
    return val


def gmi(db, c: Constellation, q, return_stderr: bool = False):
    """
    Bit-wise GMI from the bit LLRs of the decoding metric.

    Uses ``-E[log2 lambda_x] - sum_i E[log2(1 + exp(-(-1)^c_i L_i))]`` with
    LLRs positive for bit 0; equals ``m - ...`` for equiprobable symbols.
    """
    L = bit_llrs(db.rx, c, q, clamp=False)
    sign = 1.0 - 2.0 * c.bits[db.tx]
    pen = np.logaddexp(0.0, -sign * L).sum(axis=1) / LN2
    terms = -np.log2(c.priors[db.tx]) - pen
    val = stable_mean(terms)
    if return_stderr:
        return val, float(terms.std(ddof=1) / math.sqrt(db.N)) if db.N > 1 else 0.0
    return val


def pre_fec_rates(db, c: Constellation):
    """Hard-decision (BER, SER) before decoding."""
    dec = hard_decide(db.rx, c)
    ser = float(np.mean(dec != db.tx))
    ber = float(np.mean(c.bits[dec] != c.bits[db.tx]))
    return ber, ser


def analyze(db, c: Constellation, q=None, bracket=NU_BRACKET) -> MetricReport:
    """
    Full report for a database.

    With ``q=None`` the metric is Gaussian with K = 1/2, so the variance
    estimate comes out of the nu optimization; GMI is then evaluated with
    the estimated variance.
    """
    q = GaussianMetric(0.5) if q is None else q
    rep = estimate_i_nb(db, c, q, bracket)
    rep.aclb, rep.aclb_stderr = aclb(db, c, q, return_stderr=True)
    q_gmi = GaussianMetric(rep.sigma2_hat) if isinstance(q, GaussianMetric) else q
    rep.gmi, rep.gmi_stderr = gmi(db, c, q_gmi, return_stderr=True)
    rep.ber, rep.ser = pre_fec_rates(db, c)
    return rep


def mi_sd_numeric(c: Constellation, sigma2: float, order: int = 32,
                  tol: float = 1e-4, max_order: int = 256) -> float:
    """
    Symbol-wise MI of the AWGN channel with matched decoding.

    2-D Gauss-Hermite quadrature with ``order`` nodes per real dimension;
    the order is doubled until two successive results differ by less than
    ``tol`` (a MetricWarning is issued if ``max_order`` is reached first).
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")

    def at(order):
        u, w = np.polynomial.hermite.hermgauss(order)
        n = math.sqrt(2.0 * sigma2) * (u[:, None] + 1j * u[None, :])
        ww = (w[:, None] * w[None, :]).ravel() / math.pi
        n = n.ravel()
        lp = np.log(c.priors)
        total = 0.0
        for i in range(c.M):
            y = c.points[i] + n
            # exponent of p(y|s_j)/p(y|s_i)
            e = -(np.abs(y[:, None] - c.points) ** 2 - (np.abs(n) ** 2)[:, None]) / (2.0 * sigma2)
            t = lp + e
            mx = t.max(axis=1)
            lse = mx + np.log(np.exp(t - mx[:, None]).sum(axis=1))
            total += c.priors[i] * float(np.dot(ww, -lse))
        return total / LN2

    prev = at(order)
    while True:
        nxt_order = order * 2
        if nxt_order > max_order:
            warnings.warn(f"quadrature not converged to {tol} at order {order}", MetricWarning)
            return prev
        cur = at(nxt_order)
        if abs(cur - prev) < tol:
            return cur
        prev, order = cur, nxt_order


def mi_hd(dmc, priors=None) -> float:
    """
    MI of the hard-decision channel in bits.

    ``I = sum_i sum_j W[j,i] lambda_i log2(W[j,i] / sum_k W[j,k] lambda_k)``.
    """
    W = dmc.W if isinstance(dmc, DMCMatrix) else np.asarray(dmc, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ChannelConfigError("W must be square")
    if np.any(W < 0) or np.any(np.abs(W.sum(axis=0) - 1.0) > 1e-9):
        raise ChannelConfigError("W is not column-stochastic")
    M = W.shape[0]
    lam = np.full(M, 1.0 / M) if priors is None else np.asarray(priors, dtype=float)
    py = W @ lam
    joint = W * lam[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, W / py[:, None], 1.0)
    return float(np.sum(joint * np.log2(ratio)))
