import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparc.code import (CodeParams, DesignFunction, build_design_variances, build_matrix,
                        effective_rate, encode, pm_demodulate, pm_modulate, random_message,
                        seed_mask, uniform_design)
from sparc.errors import DimensionError, InvalidSpec


def test_pm_worked_example():
    u = [0, 0, 0, 1, 1, 1, 1, 0, 0, 1]
    msg = pm_modulate(u, 4, 5)
    assert list(msg.index) == [0, 1, 3, 2, 1]
    # displayed right-to-left the sections read 0001, 0010, 1000, 0100, 0010
    shown = ["".join(str(int(v)) for v in sec[::-1]) for sec in msg.s]
    assert shown == ["0001", "0010", "1000", "0100", "0010"]


def test_pm_all_zero():
    msg = pm_modulate(np.zeros(12, dtype=np.uint8), 8, 4)
    assert np.all(msg.index == 0)


@given(st.integers(1, 6), st.integers(1, 20), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_pm_round_trip(k, L, seed):
    B = 1 << k
    u = np.random.default_rng(seed).integers(0, 2, L * k, dtype=np.uint8)
    msg = pm_modulate(u, B, L)
    assert np.all(msg.s.sum(1) == 1)
    assert np.array_equal(pm_demodulate(msg.s), u)


def test_pm_length_mismatch():
    with pytest.raises(DimensionError):
        pm_modulate(np.zeros(7, dtype=np.uint8), 4, 4)


def test_code_params():
    p = CodeParams(L=100, B=4, R=0.3)
    assert p.M == int(np.ceil(200 / 0.3))
    assert p.realized_rate <= 0.3 and 0.3 - p.realized_rate < 0.3 / p.M * 1.01
    assert p.alpha == pytest.approx(p.M / p.N)
    assert CodeParams(64, 2, 0.5, gamma=16).M % 16 == 0
    with pytest.raises(InvalidSpec):
        CodeParams(10, 3, 0.5)


def test_uniform_design_hand_values():
    cs = build_design_variances(uniform_design(1), 16)
    J = cs.J
    assert np.allclose(J[5, 4:7], 1 / 3) and J[5].sum() == pytest.approx(1.0)
    assert cs.row_norm[0] == pytest.approx(1.5)
    assert J[0, 0] == pytest.approx(0.5) and J[0, 1] == pytest.approx(0.5)


def _random_design(w, rng):
    g = 1.0 + 0.3 * np.sin(np.linspace(0, 2, 2 * w + 1) + rng.uniform(0, 6))
    g /= g.mean()
    lip = np.max(np.abs(np.diff(g))) * w + 1e-9
    return DesignFunction(tuple(g), g.min(), g.max(), lip)


@pytest.mark.parametrize("w,gamma", [(1, 16), (2, 20), (3, 40), (4, 64)])
def test_design_invariants(w, gamma):
    rng = np.random.default_rng(w)
    for df in (uniform_design(w), _random_design(w, rng)):
        cs = build_design_variances(df, gamma)
        J = cs.J
        assert np.allclose(J.sum(1), 1.0, atol=1e-12)
        r, c = np.indices(J.shape)
        assert np.all(J[np.abs(r - c) > w] == 0)
        ratio = df.g_upper / df.g_lower
        full = np.arange(w, gamma - w)          # rows whose band is not truncated
        assert np.all(J[full] <= ratio / (2 * w + 1) + 1e-12)
        assert np.allclose(cs.row_norm[full], 1.0, atol=1e-12)
        # truncated rows keep at least w + 1 blocks
        assert np.all(J <= ratio / (w + 1) + 1e-12)
        assert np.all(cs.row_norm >= 1 - 1e-12)
        assert np.all(cs.row_norm <= (2 * w + 1) / ((w + 1) * df.g_lower) + 1e-12)
        bulk = np.arange(2 * w, gamma - 2 * w)
        assert np.allclose(J[:, bulk].sum(0), 1.0, atol=1e-12)


def test_boundary_rows_exceed_bulk_cap():
    # normalizing a row with w + 1 blocks forces an entry of at least 1/(w + 1),
    # so the 1/(2w + 1) cap can only hold away from the boundaries
    cs = build_design_variances(uniform_design(1), 16)
    assert cs.J[0].max() == pytest.approx(0.5) and cs.J[0].max() > 1 / 3


def test_asymmetric_design_allowed():
    g = np.array([0.8, 1.0, 1.2])
    cs = build_design_variances(DesignFunction(tuple(g), 0.8, 1.2, 0.4), 12)
    assert np.allclose(cs.J.sum(1), 1.0)


def test_invalid_design():
    with pytest.raises(InvalidSpec):
        build_design_variances(DesignFunction((1.0, 2.0, 1.0), 1.0, 2.0, 1.0), 16)
    with pytest.raises(InvalidSpec):
        build_design_variances(uniform_design(2), 17)


def test_pinned_set():
    cs = build_design_variances(uniform_design(2), 20)
    assert list(cs.pinned) == [0, 1, 2, 3, 4, 5, 14, 15, 16, 17, 18, 19]


def test_effective_rate():
    assert effective_rate(1.0, 2, 64) == pytest.approx(0.75)
    assert effective_rate(0.7, 0, 10) == 0.7
    vals = [effective_rate(1.0, 2, g) for g in (20, 40, 80, 160, 1000)]
    assert np.all(np.diff(vals) > 0) and vals[-1] < 1.0
    with pytest.raises(InvalidSpec):
        effective_rate(1.0, 2, 16)


def test_underlying_matrix_variance():
    p = CodeParams(256, 2, 0.5)
    F = build_matrix(p, None, np.random.default_rng(0))
    n = F.F.size
    assert abs(F.F.var() - 1 / 256) < 4 * np.sqrt(2 / n) / 256


def test_codeword_power():
    rng = np.random.default_rng(3)
    p = CodeParams(128, 4, 0.5)
    msg = random_message(128, 4, rng)
    powers = [np.mean(encode(build_matrix(p, None, rng), msg) ** 2) for _ in range(30)]
    assert np.mean(powers) == pytest.approx(1.0, abs=0.02)
    cs = build_design_variances(uniform_design(1), 16)
    pc = CodeParams(128, 4, 0.5, gamma=16)
    powers = [np.mean(encode(build_matrix(pc, cs, rng), msg) ** 2) for _ in range(30)]
    assert np.mean(powers) == pytest.approx(1.0, abs=0.03)


def test_coupled_support_and_encode():
    rng = np.random.default_rng(4)
    cs = build_design_variances(uniform_design(1), 16)
    p = CodeParams(64, 2, 0.5, gamma=16)
    F = build_matrix(p, cs, rng)
    mr, nc = p.M // 16, p.N // 16
    for r in range(16):
        for c in range(16):
            blk = F.F[r * mr:(r + 1) * mr, c * nc:(c + 1) * nc]
            assert np.all(blk == 0) == (abs(r - c) > 1)
    # a section living in block 10 only reaches rows of blocks 9..11
    s = np.zeros(p.N)
    s[10 * nc] = 1.0
    x = encode(F, s)
    rows = np.flatnonzero(x)
    assert rows.min() >= 9 * mr and rows.max() < 12 * mr


def test_encode_matches_dense_product():
    rng = np.random.default_rng(5)
    p = CodeParams(32, 4, 1.0)
    F = build_matrix(p, None, rng)
    msg = pm_modulate(np.zeros(64, dtype=np.uint8), 4, 32)
    expected = F.F[:, ::4].sum(axis=1)
    assert np.allclose(encode(F, msg), expected, rtol=0, atol=1e-12)
    assert np.all(encode(np.zeros((5, 8)), np.ones(8)) == 0)
    with pytest.raises(DimensionError):
        encode(F, np.ones(3))


def test_build_matrix_deterministic_and_divisibility():
    p = CodeParams(64, 2, 0.5)
    a = build_matrix(p, None, np.random.default_rng(9)).F
    b = build_matrix(p, None, np.random.default_rng(9)).F
    assert np.array_equal(a, b)
    cs = build_design_variances(uniform_design(1), 16)
    with pytest.raises(DimensionError):
        build_matrix(CodeParams(60, 2, 0.5, gamma=16), cs, np.random.default_rng(0))


def test_seed_mask():
    k = seed_mask(64, 16, 1)
    assert k.sum() == 8 * 4 and k[:16].all() and k[-16:].all() and not k[16:48].any()
