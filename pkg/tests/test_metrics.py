import math
import warnings

import numpy as np
import pytest

from nbfec.channel import AwgnChannel, ChannelConfigError, DMCMatrix, esn0_db_to_sigma2
from nbfec.constellation import Constellation, load_constellation
from nbfec.db import MeasurementDB
from nbfec.demod import GaussianMetric
from nbfec.metrics import (MetricWarning, aclb, analyze, estimate_i_nb, gmi,
                           golden_section_max, mi_hd, mi_sd_numeric, pre_fec_rates, stable_mean)

# Independent Monte Carlo estimate (1e7 samples, plain numpy with its own
# seed and no package code) of the matched MI of 8-PSK at Es/N0 = 10 dB.
ORACLE_8PSK_10DB = 2.677336
ORACLE_8PSK_10DB_SE = 0.000262


def make_db(name, esn0_db, n, seed=0):
    c = load_constellation(name)
    tx = np.random.default_rng(seed).integers(0, c.M, n)
    ch = AwgnChannel.from_esn0_db(esn0_db, seed + 1000)
    return MeasurementDB(tx, ch.transmit(c.points[tx]), name, c.M), c, ch.sigma2


def h2(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


# golden section ----------------------------------------------------------

def test_golden_quadratic():
    x, fx = golden_section_max(lambda v: -(v - 2.0) ** 2, 0.0, 10.0, 1e-6)
    assert abs(x - 2.0) <= 1e-6 and fx == pytest.approx(0.0, abs=1e-11)


def test_golden_boundary_max():
    x, _ = golden_section_max(lambda v: v, 0.0, 1.0, 1e-6)
    assert abs(x - 1.0) <= 1e-6


@pytest.mark.parametrize("peak", [0.013, 0.5, 3.7])
def test_golden_analytic_peaks(peak):
    x, _ = golden_section_max(lambda v: -abs(v - peak) ** 1.5, -1.0, 5.0, 1e-7)
    assert abs(x - peak) <= 1e-7


def test_golden_bad_interval():
    with pytest.raises(ValueError):
        golden_section_max(lambda v: v, 1.0, 1.0)


# quadrature MI -----------------------------------------------------------

def test_mi_sd_limits():
    c = load_constellation("C2")
    assert mi_sd_numeric(c, 1e4) == pytest.approx(0.0, abs=1e-3)
    assert mi_sd_numeric(c, 1e-6) == pytest.approx(3.0, abs=1e-3)


def test_mi_sd_against_independent_monte_carlo():
    val = mi_sd_numeric(load_constellation("8psk"), esn0_db_to_sigma2(10.0))
    assert abs(val - ORACLE_8PSK_10DB) <= 0.005
    assert abs(val - ORACLE_8PSK_10DB) <= 3 * ORACLE_8PSK_10DB_SE


def test_mi_sd_bpsk_closed_form():
    # BPSK MI = 1 - E[log2(1 + exp(-2 y / sigma2))] with y ~ N(1, sigma2)
    sigma2 = 0.5
    u, w = np.polynomial.hermite.hermgauss(200)
    y = 1 + math.sqrt(2 * sigma2) * u
    ref = 1 - np.dot(w, np.logaddexp(0, -2 * y / sigma2) / math.log(2)) / math.sqrt(math.pi)
    assert mi_sd_numeric(load_constellation("bpsk"), sigma2) == pytest.approx(ref, abs=1e-6)


def test_mi_sd_rejects_bad_variance():
    with pytest.raises(ValueError):
        mi_sd_numeric(load_constellation("C1"), 0.0)


# I_NB ------------------------------------------------------------------

def test_near_noiseless_i_nb():
    db, c, _ = make_db("8psk", 40.0, 10**5)
    rep = estimate_i_nb(db, c, GaussianMetric(0.5))
    assert rep.i_nb == pytest.approx(3.0, abs=0.01)


def test_matched_metric_nu_is_one():
    db, c, s2 = make_db("C3", 8.0, 10**5)
    rep = estimate_i_nb(db, c, GaussianMetric(s2))
    assert rep.nu_hat == pytest.approx(1.0, abs=0.05)
    assert aclb(db, c, GaussianMetric(s2)) == pytest.approx(rep.i_nb, abs=1e-5)


@pytest.mark.parametrize("name,esn0", [("C1", 6.0), ("C4", 10.0), ("8psk", 8.0)])
def test_mismatched_variance_recovered(name, esn0):
    db, c, s2 = make_db(name, esn0, 10**5, seed=3)
    matched = estimate_i_nb(db, c, GaussianMetric(s2))
    rep = estimate_i_nb(db, c, GaussianMetric(2 * s2))
    assert rep.sigma2_hat == pytest.approx(s2, rel=0.05)
    assert rep.i_nb == pytest.approx(matched.i_nb, abs=0.005)


def test_half_variance_metric_estimates_noise():
    db, c, s2 = make_db("C2", 12.0, 10**5, seed=5)
    rep = estimate_i_nb(db, c, GaussianMetric(0.5))
    assert rep.sigma2_hat == pytest.approx(1 / (2 * rep.nu_hat))
    assert rep.sigma2_hat == pytest.approx(s2, rel=0.05)


def test_k_scaling_invariance():
    db, c, _ = make_db("C1", 9.0, 5 * 10**4, seed=7)
    a = estimate_i_nb(db, c, GaussianMetric(0.1))
    b = estimate_i_nb(db, c, GaussianMetric(0.4))
    assert abs(a.i_nb - b.i_nb) < 1e-6
    assert b.nu_hat == pytest.approx(4 * a.nu_hat, rel=1e-4)


def test_aclb_gap_under_mismatch():
    db, c, s2 = make_db("8psk", 8.0, 10**5, seed=11)
    q = GaussianMetric(4 * s2)
    gap = estimate_i_nb(db, c, q).i_nb - aclb(db, c, q)
    assert gap > 0.01


def test_aclb_garbage_metric_goes_to_zero():
    db, c, _ = make_db("C3", 10.0, 2 * 10**4, seed=2)
    assert aclb(db, c, GaussianMetric(1e8)) == pytest.approx(0.0, abs=1e-3)


def test_ordering_chain():
    for name, s in (("C1", 7.0), ("C2", 9.0), ("C4", 11.0)):
        db, c, s2 = make_db(name, s, 5 * 10**4, seed=13)
        q = GaussianMetric(0.5)
        rep = estimate_i_nb(db, c, q)
        assert aclb(db, c, q) <= rep.i_nb
        assert rep.i_nb <= mi_sd_numeric(c, s2) + 3 * rep.i_nb_stderr
        g, gse = gmi(db, c, GaussianMetric(s2), return_stderr=True)
        assert g <= rep.i_nb + 2 * math.hypot(gse, rep.i_nb_stderr)


def test_few_records_warn_and_clamp():
    db, c, _ = make_db("C1", 10.0, 50)
    with pytest.warns(MetricWarning):
        rep = estimate_i_nb(db, c, GaussianMetric(0.5))
    assert 0.0 <= rep.i_nb <= 3.0


def test_degenerate_db_warns():
    c = load_constellation("C3")
    db = MeasurementDB(np.arange(2000) % 8, np.zeros(2000), "C3", 8)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        rep = estimate_i_nb(db, c, GaussianMetric(0.5))
    assert any(issubclass(x.category, MetricWarning) for x in w)
    assert 0.0 <= rep.i_nb <= 3.0


# GMI and pre-FEC rates ---------------------------------------------------

def test_gmi_noiseless():
    db, c, s2 = make_db("C2", 40.0, 10**4)
    assert gmi(db, c, GaussianMetric(s2)) == pytest.approx(3.0, abs=0.01)


def test_gmi_equals_mi_for_gray_qpsk():
    db, c, s2 = make_db("qpsk", 6.0, 2 * 10**5, seed=17)
    assert gmi(db, c, GaussianMetric(s2)) == pytest.approx(
        estimate_i_nb(db, c, GaussianMetric(s2)).i_nb, abs=0.01)


def test_pre_fec_rates():
    db, c, _ = make_db("C1", 60.0, 1000)
    assert pre_fec_rates(db, c) == (0.0, 0.0)
    # every decision differs from the sent label in exactly one of three bits
    c = Constellation(np.exp(2j * np.pi * np.arange(8) / 8), np.arange(8), np.full(8, 1 / 8))
    tx = np.arange(8).repeat(4)
    rx = c.points[tx ^ 0b010]
    ber, ser = pre_fec_rates(MeasurementDB(tx, rx, "", 8), c)
    assert ber == pytest.approx(1 / 3) and ser == 1.0
    db, c, _ = make_db("C4", 5.0, 10**4)
    ber, ser = pre_fec_rates(db, c)
    assert ber <= ser


def test_analyze_report_fields():
    db, c, s2 = make_db("C3", 9.0, 2 * 10**4)
    rep = analyze(db, c)
    d = rep.as_dict()
    for k in ("i_nb", "nu_hat", "sigma2_hat", "aclb", "gmi", "ber", "ser", "n"):
        assert k in d
    assert rep.n == db.N
    assert rep.aclb <= rep.i_nb and 0 <= rep.ber <= 0.5 and 0 <= rep.ser <= 1


def test_bit_stable_reduction():
    db, c, _ = make_db("C2", 8.0, 3 * 10**4, seed=21)
    a = estimate_i_nb(db, c, GaussianMetric(0.5)).i_nb
    b = estimate_i_nb(db, c, GaussianMetric(0.5)).i_nb
    assert a == b
    x = np.random.default_rng(0).normal(size=100_001)
    assert stable_mean(x) == pytest.approx(float(np.mean(x)), abs=1e-14)


# hard-decision MI --------------------------------------------------------

def test_mi_hd_closed_forms():
    assert mi_hd(DMCMatrix(np.eye(8))) == pytest.approx(3.0)
    assert mi_hd(DMCMatrix(np.full((8, 8), 1 / 8))) == pytest.approx(0.0, abs=1e-12)
    p = 0.11
    bsc = DMCMatrix(np.array([[1 - p, p], [p, 1 - p]]))
    assert mi_hd(bsc, [0.5, 0.5]) == pytest.approx(1 - h2(p), abs=1e-6)
    # the quoted 0.5002 is rounded; the exact value is 0.50008
    assert 1 - h2(p) == pytest.approx(0.5002, abs=2e-4)


def test_mi_hd_embedded_binary_channel():
    # two isolated BSCs inside a 4-ary channel: I = 1 + (1 - h2(p))
    p = 0.2
    b = np.array([[1 - p, p], [p, 1 - p]])
    W = np.zeros((4, 4))
    W[:2, :2] = b
    W[2:, 2:] = b
    assert mi_hd(W) == pytest.approx(1 + 1 - h2(p), abs=1e-12)


def test_mi_hd_rejects_non_stochastic():
    with pytest.raises(ChannelConfigError):
        mi_hd(np.array([[0.9, 0.1], [0.2, 0.9]]))


def test_data_processing():
    from nbfec.channel import estimate_dmc
    c = load_constellation("C4")
    s2 = esn0_db_to_sigma2(9.0)
    W = estimate_dmc(c, AwgnChannel(s2, 3), 4 * 10**5)
    assert mi_hd(W, c.priors) <= mi_sd_numeric(c, s2) + 0.01
