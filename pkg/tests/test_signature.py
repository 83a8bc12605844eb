import hashlib
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from potp import signature as sg
from potp.errors import AlreadyConsumedError, InvalidArgument

P = 0.5 + 1 / (2 * math.sqrt(2))


def test_hash_empty_message():
    bits = sg.hash_message(b"", 224)
    digest = hashlib.sha3_224(b"").digest()
    assert "".join(map(str, bits)) == "".join(f"{b:08b}" for b in digest)
    assert digest.hex().startswith("6b4e03423667dbb7")


def test_hash_truncation_and_limits():
    assert "".join(map(str, sg.hash_message(b"abc", 8))) == f"{hashlib.sha3_224(b'abc').digest()[0]:08b}"
    with pytest.raises(InvalidArgument):
        sg.hash_message(b"", 225)
    assert not np.array_equal(sg.hash_message(b"message a"), sg.hash_message(b"message b"))


def test_ideal_signing_matches_everywhere(rng):
    b = sg.SignatureBundle.generate(rng, rows=16, T=40)
    rec = b.record()
    rows = sg.sign(b, b"hello", rng, ideal=True)
    rep = sg.verify(rec, b"hello", rows, 40)
    assert rep.passed and np.all(rep.matches == 40)


def test_reuse_is_rejected(rng):
    b = sg.SignatureBundle.generate(rng, rows=4, T=5)
    sg.sign(b, b"x", rng)
    with pytest.raises(AlreadyConsumedError):
        sg.sign(b, b"y", rng)


def test_threshold_boundary(rng):
    b = sg.SignatureBundle.generate(rng, rows=3, T=10)
    rec = b.record()
    rows = sg.sign(b, b"m", rng, ideal=True)
    bad = rows[1].outputs.copy()
    bad[:3] ^= 1  # seven matches
    rows[1] = sg.SignatureRow(rows[1].hash_bit, bad)
    assert sg.verify(rec, b"m", rows, 7).passed
    rep = sg.verify(rec, b"m", rows, 8)
    assert not rep.passed and rep.min_match == 7


def test_row_count_mismatch(rng):
    b = sg.SignatureBundle.generate(rng, rows=3, T=4)
    rows = sg.sign(b.record(), b"m", rng)
    with pytest.raises(InvalidArgument):
        sg.verify(b, b"m", rows[:2], 1)


def test_tampered_signature_rejected(rng):
    b = sg.SignatureBundle.generate(rng, rows=20, T=300)
    rec = b.record()
    rows = sg.sign(b, b"doc", rng)
    out = rows[5].outputs.copy()
    out[:80] ^= 1
    rows[5] = sg.SignatureRow(rows[5].hash_bit, out)
    assert not sg.verify(rec, b"doc", rows, 234).passed


def test_row_mean_within_three_sigma(rng):
    b = sg.SignatureBundle.generate(rng, rows=224, T=300)
    rec = b.record()
    m = sg.verify(rec, b"abc", sg.sign(b, b"abc", rng), 0).matches
    mean, sd = 300 * P, math.sqrt(300 * P * (1 - P) / m.size)
    assert 300 * P == pytest.approx(256.066, abs=1e-3)
    assert abs(m.mean() - mean) <= 3 * sd


def test_fidelity_lowers_match_rate(rng):
    b = sg.SignatureBundle.generate(rng, rows=224, T=300, fidelity=0.9)
    rec = b.record()
    m = sg.verify(rec, b"abc", sg.sign(b, b"abc", rng), 0).matches
    p = 0.5 + 0.5 * 0.9 / math.sqrt(2)
    assert abs(m.mean() - 300 * p) <= 3 * math.sqrt(300 * p * (1 - p) / m.size)


def test_honest_probability_trivial_cases():
    assert sg.honest_pass_probability(300, 0, P, 224) == 1
    assert sg.honest_pass_probability(10, 10, 0.5, 1) == pytest.approx(2**-10, rel=1e-12)
    with pytest.raises(InvalidArgument):
        sg.honest_pass_probability(10, 5, 1.5, 1)


def test_honest_probability_reference_value():
    # exact tail product at the experimental parameters
    assert sg.honest_pass_probability(300, 234, P, 224) == pytest.approx(0.9470062105587151, rel=1e-12)


@given(st.integers(1, 400), st.data(), st.floats(0.01, 0.99))
def test_tail_matches_scipy(T, data, p):
    tau = data.draw(st.integers(0, T))
    assert sg.binomial_upper_tail(T, tau, p) == pytest.approx(stats.binom.sf(tau - 1, T, p), rel=1e-9, abs=1e-300)


def test_dishonest_bound():
    assert sg.dishonest_bound(300, 234, 224) <= 0.022
    assert sg.single_row_forgery_bound(300, 300) == pytest.approx(2.0**-300, rel=1e-12)


@pytest.mark.parametrize("T", [40, 100, 300, 1000])
def test_three_quarter_edge(T):
    got = sg.single_row_forgery_bound(T, 3 * T // 4)
    assert got == pytest.approx(stats.binom.cdf(T // 2, T, 0.5), rel=1e-9)
    assert abs(got - 0.5) < 0.15


def test_sweep_monotone_and_argmax():
    curve = sg.threshold_sweep(300, 224, P)
    assert curve[0].tau == 150 and curve[-1].tau == 300
    h = [s.honest for s in curve]
    d = [s.dishonest for s in curve]
    assert all(x >= y - 1e-15 for x, y in zip(h, h[1:]))
    assert all(x >= y - 1e-15 for x, y in zip(d, d[1:]))
    best = sg.best_threshold(curve)
    assert 230 <= best.tau <= 240 and best.tau == 233


def test_single_row_sweep():
    curve = sg.threshold_sweep(300, 224, P, single_row=True)
    assert curve[-1].honest == pytest.approx(P**300, rel=1e-9)


def test_threshold_window():
    T = 40_000
    assert sg.honest_pass_probability(T, int(0.84 * T), P, 1) > 0.99
    assert sg.single_row_forgery_bound(T, int(0.76 * T)) < 1e-10


def test_histogram_bins():
    hist = sg.match_histogram([0, 1, 2, 3, 9], 10, 0.5, width=3)
    assert [h[0] for h in hist] == [0, 3, 6, 9]
    assert [h[1] for h in hist] == [3, 1, 0, 1]
    assert sum(h[2] for h in hist) == pytest.approx(5)


@pytest.mark.parametrize("T", [1, 2, 3])
def test_eigenvalue_lemma(T):
    rng = np.random.default_rng(T)
    for h in range(2 * T + 1):
        y = rng.integers(2, size=2 * T)
        assert sg.hamming_ball_top_eigenvalue(T, h, y) == pytest.approx(sg.binomial_cdf_count(T, h), abs=1e-9)


def test_codeword_pair_overlaps():
    # pairs equal -> 1, one differing bit -> 1/2, both differ -> 0
    a = sg.codeword([0, 0])
    assert abs(np.vdot(a, sg.codeword([0, 1]))) ** 2 == pytest.approx(0.5)
    assert abs(np.vdot(a, sg.codeword([1, 1]))) ** 2 == pytest.approx(0, abs=1e-15)
