import itertools
import math

import numpy as np
import pytest
from scipy.stats import norm

from nbfec.channel import (AwgnChannel, ChannelConfigError, ChannelMix, DMCMatrix,
                           HardDecisionChannel, awgn_transmit, esn0_db_to_sigma2,
                           estimate_dmc, hard_decide, mix_transmit, osnr_axis,
                           sigma2_to_esn0_db)
from nbfec.constellation import Constellation, load_constellation


def bpsk():
    return Constellation(np.array([1.0, -1.0]), np.array([0, 1]), np.array([0.5, 0.5]), "bpsk")


def test_esn0_convention():
    assert esn0_db_to_sigma2(0.0) == pytest.approx(0.5)
    assert esn0_db_to_sigma2(10.0) == pytest.approx(0.05)
    assert sigma2_to_esn0_db(esn0_db_to_sigma2(7.3)) == pytest.approx(7.3)
    assert np.allclose(osnr_axis(np.array([1.0, 2.0]), 3.5), [4.5, 5.5])


def test_sigma2_must_be_positive():
    with pytest.raises(ChannelConfigError):
        AwgnChannel(0.0)


def test_noise_variance_and_isotropy():
    ch = AwgnChannel(0.1, seed=4)
    x = np.zeros(10**6, dtype=complex)
    n = awgn_transmit(x, ch) - x
    assert np.mean(np.abs(n) ** 2) == pytest.approx(0.2, rel=0.01)
    cov = np.cov(np.vstack([n.real, n.imag]))
    # off-diagonal within 3 sigma of zero (sigma of a sample covariance ~ s^2/sqrt(N))
    assert abs(cov[0, 1]) < 3 * 0.1 / math.sqrt(n.size)
    assert cov[0, 0] == pytest.approx(cov[1, 1], rel=0.01)


def test_noise_deterministic_and_counter_separated():
    ch = AwgnChannel(0.3, seed=9)
    x = np.ones(1000, dtype=complex)
    a, b = ch.transmit(x, 5), ch.transmit(x, 5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, ch.transmit(x, 6))
    assert not np.array_equal(a, AwgnChannel(0.3, seed=10).transmit(x, 5))


def test_near_noiseless_hard_decision():
    c = load_constellation("C2")
    u = np.random.default_rng(0).integers(0, 8, 5000)
    y = AwgnChannel(1e-12, 1).transmit(c.points[u])
    assert np.array_equal(hard_decide(y, c), u)


def test_hard_decide_ties_go_to_lower_index():
    c = load_constellation("C3")
    assert hard_decide(c.points[3], c) == 3
    mid = (c.points[1] + c.points[2]) / 2
    assert hard_decide(mid, c) == 1


def test_ser_matches_union_bound_at_high_snr():
    c = load_constellation("C1")
    sigma2 = esn0_db_to_sigma2(16.0)
    ch = AwgnChannel(sigma2, 3)
    u = np.tile(np.arange(8), 250_000)
    ser = np.mean(hard_decide(ch.transmit(c.points[u]), c) != u)
    d = np.abs(c.points[:, None] - c.points[None, :])
    ub = np.mean([sum(norm.sf(d[i, j] / (2 * math.sqrt(sigma2))) for j in range(8) if j != i)
                  for i in range(8)])
    nn = np.mean([norm.sf(np.min(d[i][d[i] > 0]) / (2 * math.sqrt(sigma2))) for i in range(8)])
    se = math.sqrt(ub / u.size)
    # nearest-neighbour lower estimate <= SER <= union bound, up to MC error
    assert nn - 3 * se <= ser <= ub + 3 * se
    assert ser == pytest.approx(ub, rel=0.15)


def test_dmc_bpsk_q2():
    W = estimate_dmc(bpsk(), AwgnChannel(0.25, 1), 10**6)
    p = norm.sf(2.0)  # Q(1 / 0.5)
    assert p == pytest.approx(0.02275, abs=1e-5)
    se = math.sqrt(p * (1 - p) / 5e5)
    assert abs(W.W[1, 0] - p) < 4 * se
    assert abs(W.W[0, 1] - p) < 4 * se


def test_dmc_limits():
    c = load_constellation("C3")
    W0 = estimate_dmc(c, AwgnChannel(1e-8, 2), 10**4)
    assert np.allclose(W0.W, np.eye(8), atol=1e-9)
    Winf = estimate_dmc(c, AwgnChannel(1e6, 2), 4 * 10**5)
    assert np.allclose(Winf.W, 1 / 8, atol=4 * math.sqrt(1 / 8 * 7 / 8 / 5e4))
    assert np.allclose(Winf.W.sum(axis=0), 1.0)


def test_dmc_converges_like_inverse_sqrt_n():
    c = load_constellation("C1")
    ch = AwgnChannel(esn0_db_to_sigma2(8.0), 5)
    ref = estimate_dmc(c, ch, 4 * 10**6, 1e-12, 99).W
    errs = []
    for n in (2 * 10**4, 8 * 10**4, 32 * 10**4):
        e = [np.linalg.norm(estimate_dmc(c, ch, n, 1e-12, r).W - ref) for r in range(4)]
        errs.append(np.mean(e))
    assert errs[0] > errs[1] > errs[2]
    assert errs[0] / errs[2] == pytest.approx(4.0, rel=0.5)


def test_dmc_validation():
    with pytest.raises(ChannelConfigError):
        DMCMatrix(np.array([[0.5, 0.5], [0.4, 0.5]]))
    with pytest.raises(ChannelConfigError):
        estimate_dmc(bpsk(), AwgnChannel(0.2), 100)
    W = DMCMatrix(np.eye(3)).smoothed(1e-6)
    assert np.all(W.W > 0) and np.allclose(W.W.sum(axis=0), 1)


@pytest.fixture
def pair():
    c = load_constellation("C2")
    return c, AwgnChannel(0.05, 1), AwgnChannel(0.2, 2)


def test_mix_extremes_reproduce_single_channel(pair):
    c, a, b = pair
    x = c.points[np.random.default_rng(1).integers(0, 8, 1000)]
    y1, r1 = mix_transmit(x, ChannelMix(1.0, a, b), 7)
    y0, r0 = mix_transmit(x, ChannelMix(0.0, a, b), 7)
    assert r1.all() and not r0.any()
    assert np.array_equal(y1, a.transmit(x, 7))
    assert np.array_equal(y0, b.transmit(x, 7))


def test_mix_routes_first_positions(pair):
    c, a, b = pair
    mix = ChannelMix(0.3, a, b)
    r = mix.route(1000)
    assert r.sum() == 300 and r[:300].all()
    shuffled = ChannelMix(0.3, a, b, interleave_seed=4).route(1000)
    assert shuffled.sum() == 300 and not shuffled[:300].all()
    assert np.array_equal(shuffled, ChannelMix(0.3, a, b, interleave_seed=4).route(1000))


def test_mix_of_identical_channels(pair):
    c, a, _ = pair
    x = c.points[np.random.default_rng(1).integers(0, 8, 200_000)]
    y, _ = mix_transmit(x, ChannelMix(0.5, a, a), 3)
    assert np.mean(np.abs(y - x) ** 2) == pytest.approx(0.1, rel=0.02)


def test_mix_with_hard_decision_component(pair):
    c, a, b = pair
    hd = HardDecisionChannel(c, b)
    x = c.points[np.arange(8).repeat(10)]
    y, route = mix_transmit(x, ChannelMix(0.5, a, hd), 1)
    assert np.all(np.min(np.abs(y[~route, None] - c.points), axis=1) < 1e-12)


def test_mix_alphabet_mismatch():
    c1, c3 = load_constellation("C1"), load_constellation("C3")
    with pytest.raises(ChannelConfigError):
        ChannelMix(0.5, HardDecisionChannel(c1, AwgnChannel(0.1)),
                   HardDecisionChannel(c3, AwgnChannel(0.1)))
    with pytest.raises(ChannelConfigError):
        ChannelMix(1.5, AwgnChannel(0.1), AwgnChannel(0.1))
