import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sparc.channel import awgn, bec, bsc
from sparc.code import CodeParams, build_matrix, encode, random_message
from sparc.errors import DimensionError
from sparc.gamp import (denoise_gin, denoise_var, gamp_decode, hard_decision,
                        section_error_rate)
from sparc.channel import sample_output


def _bayes_posterior(r, tau):
    """Posterior over the B one-hot candidates, computed by brute force."""
    B = len(r)
    logp = np.empty(B)
    for i in range(B):
        s = np.zeros(B)
        s[i] = 1.0
        logp[i] = -np.sum((r - s) ** 2 / (2 * tau))
    p = np.exp(logp - logp.max())
    return p / p.sum()


def test_denoiser_examples():
    g = denoise_gin([0.8, 0.2], [0.25, 0.25])
    assert g == pytest.approx([1 / (1 + np.exp(-2.4)), 1 - 1 / (1 + np.exp(-2.4))], rel=1e-14)
    assert g == pytest.approx([0.91683, 0.08317], abs=5e-6)
    # the rounded posterior gives 0.076253; the unrounded one 0.076255
    assert denoise_var([0.91683, 0.08317]) == pytest.approx([0.076253, 0.076253], abs=5e-7)
    assert denoise_var(g) == pytest.approx(g[0] * g[1], rel=1e-14)
    assert np.allclose(denoise_gin(np.full(8, 0.3), np.full(8, 0.7)), 1 / 8)
    assert np.array_equal(denoise_gin([0.1, 0.6, 0.4], [1e-300] * 3), [0.0, 1.0, 0.0])
    assert np.all(denoise_var(np.eye(4)[2]) == 0)
    assert np.allclose(denoise_var(np.full(4, 0.25)), 0.25 * 0.75)


@given(st.integers(2, 16), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_denoiser_matches_bayes_oracle(B, seed):
    rng = np.random.default_rng(seed)
    r = rng.normal(0.3, 1.0, B)
    tau = rng.uniform(0.05, 3.0, B)
    assert denoise_gin(r, tau) == pytest.approx(_bayes_posterior(r, tau), rel=1e-9, abs=1e-300)


@given(arrays(float, (5, 8), elements=st.floats(-1e3, 1e3)),
       arrays(float, (5, 8), elements=st.floats(1e-12, 1e12)))
@settings(max_examples=200, deadline=None)
def test_denoiser_stays_in_simplex(r, tau):
    g = denoise_gin(r, tau)
    assert np.all(g >= 0) and np.all(g <= 1)
    assert np.allclose(g.sum(1), 1.0, atol=1e-12)
    v = denoise_var(g)
    assert np.all(v >= 0) and np.all(v <= 0.25)


@pytest.mark.parametrize("B", [2, 4, 16, 64])
def test_denoiser_equals_state_evolution_form(B):
    rng = np.random.default_rng(B)
    k = np.log2(B)
    for _ in range(50):
        sig = rng.uniform(0.1, 3.0)
        s = np.eye(B)[rng.integers(B)]
        z = rng.standard_normal(B)
        g = denoise_gin(s + z * sig / np.sqrt(k), np.full(B, sig ** 2 / k))
        expo = (s[None, :] - s[:, None]) * k / sig ** 2 + (z[None, :] - z[:, None]) * np.sqrt(k) / sig
        ref = 1.0 / np.exp(expo).sum(axis=1)      # the k == i term contributes the leading 1
        assert g == pytest.approx(ref, rel=1e-10)


def test_hard_decision():
    m = hard_decision(np.array([[0.25, 0.25, 0.25, 0.25], [0.917, 0.083, 0, 0]]))
    assert list(m.index) == [0, 0]
    rng = np.random.default_rng(0)
    g = rng.dirichlet(np.ones(8), size=500)
    assert np.array_equal(hard_decision(g).index, np.argmax(g, axis=1))


def test_section_error_rate():
    rng = np.random.default_rng(1)
    a = random_message(100, 4, rng)
    assert section_error_rate(a, a) == 0.0
    wrong = hard_decision(np.roll(a.s, 1, axis=1))
    assert section_error_rate(wrong, a) == 1.0
    s = a.s.copy()
    s[17] = np.roll(s[17], 1)
    one = hard_decision(s)
    assert section_error_rate(one, a) == pytest.approx(0.01)
    # seeded sections do not count
    a2 = random_message(120, 4, rng)
    a2.known = np.zeros(120, dtype=bool)
    a2.known[:20] = True
    s = a2.s.copy()
    s[:20] = np.roll(s[:20], 1, axis=1)
    s[50] = np.roll(s[50], 1)
    assert section_error_rate(hard_decision(s), a2) == pytest.approx(0.01)
    with pytest.raises(DimensionError):
        section_error_rate(random_message(10, 4, rng), random_message(10, 2, rng))


def _instance(spec, L, B, R, seed):
    rng = np.random.default_rng(seed)
    p = CodeParams(L, B, R)
    msg = random_message(L, B, rng)
    F = build_matrix(p, None, rng)
    y = sample_output(spec, encode(F, msg), rng)
    return y, F, msg


def test_zero_iterations_prior_init():
    y, F, msg = _instance(bsc(0.1), 64, 4, 0.3, 0)
    s_hat, tr = gamp_decode(y, F, bsc(0.1), 0, msg, init="prior")
    assert np.allclose(s_hat, 0.25) and tr.iterations_run == 0
    s_hat, tr = gamp_decode(y, F, bsc(0.1), 0, msg)
    assert np.all(s_hat == 0) and tr.mse == [1.0]


def test_awgn_smoke_fast_convergence():
    for seed in range(5):
        y, F, msg = _instance(awgn(1e6), 256, 2, 0.1, seed)
        s_hat, tr = gamp_decode(y, F, awgn(1e6), 5, msg, stop_tol=0.0)
        assert tr.ser[-1] == 0.0


def test_saturated_likelihood_does_not_reset_estimate():
    # once the sign observations carry no precision the estimate must stay put
    for seed in range(3):
        y, F, msg = _instance(bec(0.1), 512, 4, 0.2, seed)
        _, tr = gamp_decode(y, F, bec(0.1), 40, msg, stop_tol=0.0)
        k = int(np.argmax(np.asarray(tr.mse) < 1e-6))
        assert tr.mse[k] < 1e-6 and max(tr.mse[k:]) < 1e-6


@pytest.mark.parametrize("spec", [bsc(0.05), bec(0.1)], ids=["bsc", "bec"])
def test_simplex_preserved_each_iteration(spec):
    y, F, msg = _instance(spec, 128, 4, 0.3, 2)
    for n in (1, 3, 8):
        s_hat, _ = gamp_decode(y, F, spec, n, msg, stop_tol=0.0)
        assert np.all(s_hat >= 0) and np.allclose(s_hat.sum(1), 1.0, atol=1e-12)


def test_seeded_sections_held():
    y, F, msg = _instance(bsc(0.3), 64, 4, 0.8, 3)
    msg.known = np.zeros(64, dtype=bool)
    msg.known[:8] = True
    s_hat, _ = gamp_decode(y, F, bsc(0.3), 4, msg, stop_tol=0.0)
    assert np.array_equal(s_hat[:8], msg.s[:8])


def test_deterministic_replay():
    a = _instance(bec(0.1), 128, 4, 0.4, 7)
    b = _instance(bec(0.1), 128, 4, 0.4, 7)
    _, ta = gamp_decode(*a[:2], bec(0.1), 30, a[2])
    _, tb = gamp_decode(*b[:2], bec(0.1), 30, b[2])
    assert ta.mse == tb.mse and ta.ser == tb.ser


def test_no_truth_needs_B_and_stops():
    y, F, msg = _instance(awgn(1e4), 128, 4, 0.3, 4)
    with pytest.raises(ValueError):
        gamp_decode(y, F, awgn(1e4), 10)
    s_hat, tr = gamp_decode(y, F, awgn(1e4), 200, B=4, stop_tol=1e-10)
    assert tr.converged and tr.mse == []
    assert np.array_equal(hard_decision(s_hat).index, msg.index)


def test_dimension_errors():
    y, F, msg = _instance(bsc(0.1), 32, 2, 0.5, 5)
    with pytest.raises(DimensionError):
        gamp_decode(y[:-1], F, bsc(0.1), 3, msg)
    with pytest.raises(DimensionError):
        gamp_decode(y, F, bsc(0.1), 3, random_message(16, 2, np.random.default_rng(0)))


def test_trace_rows():
    y, F, msg = _instance(bsc(0.05), 64, 2, 0.3, 6)
    _, tr = gamp_decode(y, F, bsc(0.05), 10, msg)
    rows = tr.rows()
    assert rows[0][0] == 0 and len(rows) == tr.iterations_run + 1
