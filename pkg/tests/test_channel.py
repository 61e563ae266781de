import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from litesc.channel import (
    ChannelRealization,
    ConstellationSpec,
    SingularChannelError,
    calibrate_constellation,
    complex_to_real,
    constellation_quantize_dequantize,
    rician_params,
    sample_channel,
    transmit,
    vec_to_real,
    zero_forcing,
)
from litesc.nncore import Tensor, backward


def test_rician_k2_parameters():
    mu, sigma = rician_params(2.0)
    assert mu == pytest.approx(np.sqrt(2 / 3)) and mu == pytest.approx(0.8165, abs=1e-4)
    assert sigma == pytest.approx(np.sqrt(1 / 3)) and sigma == pytest.approx(0.5774, abs=1e-4)


def test_rician_k0_is_rayleigh():
    a = sample_channel("rician", 2, k=0.0, rng=np.random.default_rng(5), batch=4)
    b = sample_channel("rayleigh", 2, rng=np.random.default_rng(5), batch=4)
    np.testing.assert_allclose(a.H, b.H)


def test_rayleigh_statistics():
    h = sample_channel("rayleigh", 1, rng=np.random.default_rng(0), batch=100_000).H_complex.ravel()
    assert abs(h.mean()) < 0.01
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.02


def test_rician_statistics():
    h = sample_channel("rician", 1, k=2.0, rng=np.random.default_rng(1), batch=100_000).H_complex.ravel()
    assert abs(h.mean() - np.sqrt(2 / 3)) < 0.01
    assert abs(np.var(h) - 1 / 3) < 0.01


def test_awgn_is_identity():
    assert np.array_equal(sample_channel("awgn", 3).H, np.eye(6))


def test_block_structure():
    H = sample_channel("rayleigh", 3, rng=np.random.default_rng(2)).H
    n = 3
    np.testing.assert_array_equal(H[:n, :n], H[n:, n:])
    np.testing.assert_array_equal(H[:n, n:], -H[n:, :n])


@pytest.mark.parametrize("bad", [0, -1])
def test_nonpositive_dims(bad):
    with pytest.raises(ValueError):
        sample_channel("rayleigh", bad)


def test_complex_expansion_matches_complex_product():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(1, 5))
        Hc = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        Xc = rng.standard_normal((n, 7)) + 1j * rng.standard_normal((n, 7))
        np.testing.assert_allclose(complex_to_real(Hc) @ vec_to_real(Xc), vec_to_real(Hc @ Xc), atol=1e-12)


def test_noiseless_awgn_transmit_is_exact():
    X = np.random.default_rng(0).standard_normal((4, 9))
    Y = transmit(X, sample_channel("awgn", 2), None)
    np.testing.assert_array_equal(Y, X)


def test_noise_power_at_0db():
    rng = np.random.default_rng(4)
    X = np.zeros((2, 50_000))
    Y = transmit(X, sample_channel("awgn", 1), 0.0, rng)
    assert abs(np.mean(Y**2) - 1.0) < 0.03


def test_empirical_snr():
    rng = np.random.default_rng(5)
    X = rng.choice([-1.0, 1.0], size=(2, 50_000))
    ch = sample_channel("awgn", 1)
    for snr in (0.0, 6.0, 12.0):
        N = transmit(X, ch, snr, rng) - X
        measured = 10 * np.log10(np.mean(X**2) / np.mean(N**2))
        assert abs(measured - snr) < 0.2


def test_transmit_reproducible():
    ch = sample_channel("rayleigh", 2, rng=np.random.default_rng(1))
    X = np.ones((4, 3))
    a = transmit(X, ch, 5.0, np.random.default_rng(9))
    b = transmit(X, ch, 5.0, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_transmit_dimension_mismatch():
    with pytest.raises(ValueError):
        transmit(np.ones((3, 2)), sample_channel("awgn", 2), None)


def test_transmit_tensor_gradient_is_channel_transpose():
    ch = sample_channel("rayleigh", 1, rng=np.random.default_rng(2))
    X = Tensor(np.ones((2, 3)), requires_grad=True, dtype=np.float64)
    backward(transmit(X, ch, None).sum())
    np.testing.assert_allclose(X.grad, ch.H.T @ np.ones((2, 3)))


def test_zf_diagonal():
    H = np.diag([2.0, 4.0])
    Y = H @ np.array([[1.0], [1.0]])
    np.testing.assert_allclose(zero_forcing(Y, H), [[1.0], [1.0]])


def test_zf_identity():
    Y = np.random.default_rng(0).standard_normal((4, 5))
    np.testing.assert_array_equal(zero_forcing(Y, np.eye(4)), Y)


def test_zf_recovers_random_channels():
    rng = np.random.default_rng(6)
    for _ in range(200):
        ch = sample_channel("rayleigh", 2, rng=rng)
        if np.linalg.cond(ch.H) > 1e3:
            continue
        X = rng.standard_normal((4, 8))
        assert np.max(np.abs(zero_forcing(ch.H @ X, ch.H) - X)) < 1e-9


def test_zf_ill_conditioned():
    H = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-12]])
    with pytest.raises(SingularChannelError) as info:
        zero_forcing(np.ones((2, 1)), H)
    assert info.value.cond > 1e8


def test_ema_arithmetic():
    spec = calibrate_constellation([np.array([-1.0, 2.0]), np.array([-3.0, 2.0])], m_bits=4, c=0.5)
    assert spec.x_min == -2.0


def test_ema_no_memory_tracks_latest():
    spec = calibrate_constellation([np.array([-1.0, 1.0]), np.array([-5.0, 0.5])], m_bits=4, c=1.0)
    assert (spec.x_min, spec.x_max) == (-5.0, 0.5)


def test_ema_full_memory_freezes():
    spec = calibrate_constellation([np.array([-1.0, 1.0]), np.array([-5.0, 9.0])], m_bits=4, c=0.0)
    assert (spec.x_min, spec.x_max) == (-1.0, 1.0)


def test_degenerate_range():
    with pytest.raises(ValueError, match="degenerate"):
        calibrate_constellation([np.full(4, 2.0)], m_bits=4)


def test_scale_factor():
    spec = ConstellationSpec(4, -1.5, 1.5)
    assert spec.q_x == pytest.approx(15 / 3.0)


def test_endpoints():
    spec = ConstellationSpec(4, -1.3, 2.1)
    out = constellation_quantize_dequantize(np.array([spec.x_min, spec.x_max]), spec)
    assert out[0] == spec.x_min
    assert abs(out[1] - spec.x_max) <= 1 / (2 * spec.q_x)


def test_four_bits_give_at_most_16_levels():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((16, 5000)) * 2
    spec = calibrate_constellation([X], m_bits=4)
    out = constellation_quantize_dequantize(X, spec)
    for row in out:
        assert len(np.unique(row)) <= 16
    assert len(np.unique(out)) <= 16


@pytest.mark.parametrize("m", [1, 2, 4, 8])
def test_step_size_bound(m):
    rng = np.random.default_rng(m)
    spec = ConstellationSpec(m, -2.0, 3.0)
    X = rng.uniform(spec.x_min, spec.x_max, size=20_000)
    err = np.max(np.abs(X - constellation_quantize_dequantize(X, spec)))
    assert err <= (spec.x_max - spec.x_min) / (2 * (2**m - 1)) + 1e-12


def test_out_of_range_saturates():
    spec = ConstellationSpec(3, -1.0, 1.0)
    out = constellation_quantize_dequantize(np.array([-10.0, 10.0]), spec)
    np.testing.assert_allclose(out, [-1.0, 1.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_quantize_idempotent(m, seed):
    rng = np.random.default_rng(seed)
    lo = float(rng.uniform(-3, 0))
    spec = ConstellationSpec(m, lo, lo + float(rng.uniform(0.1, 5)))
    X = rng.normal(size=200) * 3
    once = constellation_quantize_dequantize(X, spec)
    np.testing.assert_array_equal(constellation_quantize_dequantize(once, spec), once)


def test_quantize_tensor_uses_straight_through_gradient():
    spec = ConstellationSpec(4, -1.0, 1.0)
    X = Tensor(np.array([0.1, 0.33, 5.0]), requires_grad=True, dtype=np.float64)
    out = constellation_quantize_dequantize(X, spec)
    np.testing.assert_allclose(out.data, constellation_quantize_dequantize(X.data, spec))
    backward(out.sum())
    np.testing.assert_array_equal(X.grad, [1.0, 1.0, 0.0])


def test_realization_fields():
    ch = sample_channel("rician", 2, k=2.0, rng=np.random.default_rng(0), batch=3)
    assert isinstance(ch, ChannelRealization)
    assert ch.H.shape == (3, 4, 4) and ch.n_ant == 2 and ch.k == 2.0
