import numpy as np
import pytest

from nbfec.constellation import load_constellation
from nbfec.channel import esn0_db_to_sigma2
from nbfec.predict import esn0_for_mi
from nbfec.simulate import Link, StopRule, point_key, run_frames, simulate_point


def test_stop_rule():
    s = StopRule(target_errors=100, min_frame_errors=10, max_frames=50)
    assert not s.done(10, 500, 5)
    assert s.done(10, 100, 10)
    assert s.done(50, 0, 0)


def test_point_key_stable():
    assert point_key("C1", 9.0, "awgn") == point_key("C1", 9.0, "awgn")
    assert point_key("C1", 9.0, "awgn") != point_key("C1", 9.0, "hd")


def test_simulate_point_fields_and_determinism(small_code):
    c = load_constellation("C4")
    stop = StopRule(max_frames=8)
    a = simulate_point(small_code, c, 6.0, 3, "awgn", stop, metric_samples=5000)
    b = simulate_point(small_code, c, 6.0, 3, "awgn", stop, metric_samples=5000)
    assert a.as_dict() == pytest.approx(b.as_dict(), nan_ok=True) or a.as_dict() == b.as_dict()
    assert a.frames == 8 and a.symbols == 8 * small_code.n
    assert a.aclb <= a.i_nb and a.mi == a.i_nb
    assert 0 <= a.post_fec_ser <= 1
    h = simulate_point(small_code, c, 6.0, 3, "hd", stop, metric_samples=5000,
                       dmc_samples=10**5)
    assert h.mi == h.mi_hd and 0 < h.mi_hd < 3
    with pytest.raises(ValueError):
        simulate_point(small_code, c, 6.0, 3, "bogus", stop)


def test_results_independent_of_workers(small_code):
    c = load_constellation("C2")
    link = Link(small_code, c, esn0_db_to_sigma2(5.0), 1, 77)
    stop = StopRule(max_frames=6, batch=3)
    assert run_frames(link, stop, 1) == run_frames(link, stop, 2)


def test_label_permutation_does_not_change_decoding(small_code):
    c = load_constellation("C1")
    perm = c.with_labels(np.array([7, 6, 5, 4, 3, 2, 1, 0]), name="C1")
    stop = StopRule(max_frames=6)
    a = simulate_point(small_code, c, 6.5, 4, "awgn", stop, metric_samples=4000)
    b = simulate_point(small_code, perm, 6.5, 4, "awgn", stop, metric_samples=4000)
    assert a.symbol_errors == b.symbol_errors and a.i_nb == b.i_nb
    assert a.pre_ber != b.pre_ber  # labels do matter for the bit-wise metrics


def test_codeword_independence(code08):
    """
    All-zero and random codewords give the same post-FEC SER within 3 sigma.

    The all-zero word is sent through the additive coset scrambler (as
    recorded data is): on a constellation without geometric symmetry the
    unscrambled all-zero word would only ever use one point.
    """
    from nbfec.channel import AwgnChannel, derive_rng
    from nbfec.demod import GaussianMetric, full_llr_vectors, symbol_llrs
    from nbfec.nbldpc import decode
    c = load_constellation("C2")
    s2 = esn0_db_to_sigma2(esn0_for_mi(c, 2.50))
    link = Link(code08, c, s2, 21, 5)
    frames = 24
    rnd = [link.run(f)[0] for f in range(frames)]
    ch = AwgnChannel(s2, 22)
    zero = []
    n = code08.n
    for f in range(frames):
        s = derive_rng(22, 99, f).integers(0, 8, n)
        y = ch.transmit(c.points[s], f)
        full = full_llr_vectors(symbol_llrs(y, c, GaussianMetric(s2)))
        full = full[np.arange(n)[:, None], np.arange(8)[None, :] ^ s[:, None]]
        res = decode(full[:, 1:] - full[:, :1], code08)
        zero.append(int(np.count_nonzero(res.decided)))
    r, z = np.array(rnd) / n, np.array(zero) / n
    se = np.hypot(r.std(ddof=1), z.std(ddof=1)) / np.sqrt(frames)
    assert abs(r.mean() - z.mean()) <= 3 * se
