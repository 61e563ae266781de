import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from litesc.nncore import (
    Adam,
    DimensionError,
    LayerSpec,
    ParamSet,
    StateError,
    Tensor,
    backward,
    ce_loss,
    forward,
    init_params,
    layer_norm,
    load_checkpoint,
    precision,
    save_checkpoint,
    softmax,
    ste_round,
    validate_specs,
)
from litesc.nncore.checkpoint import QuantizedArray, dumps, loads, pack_bits, unpack_bits
from litesc.nncore.tensor import matmul

from gradcases import KINDS, ce_fd_check, gradient_check
from oracles import central_difference, eq4_loss_scalar


def test_sigmoid_of_zero_is_half():
    out = forward(ParamSet(), [LayerSpec("sigmoid")], Tensor(np.zeros((2, 3))))
    assert np.all(out.data == 0.5)


def test_dense_identity():
    params = ParamSet()
    params.add("fc.W", np.eye(3), "t", dtype=np.float64)
    params.add("fc.b", np.zeros(3), "t", dtype=np.float64)
    x = np.array([[1.5, -2.0, 0.25]])
    out = forward(params, [LayerSpec("dense", "fc", units=3)], Tensor(x, dtype=np.float64))
    np.testing.assert_array_equal(out.data, x)


def test_two_layer_net_matches_straight_line_evaluation():
    rng = np.random.default_rng(7)
    with precision(np.float64):
        specs = [
            LayerSpec("dense", "l1", units=5),
            LayerSpec("relu"),
            LayerSpec("dense", "l2", units=2),
            LayerSpec("sigmoid"),
        ]
        params = init_params(specs, 4, rng, "t")
        x = rng.standard_normal((3, 4))
        out = forward(params, specs, Tensor(x, dtype=np.float64)).data
    W1, b1 = params["l1.W"].data, params["l1.b"].data
    W2, b2 = params["l2.W"].data, params["l2.b"].data
    expected = np.empty((3, 2))
    for r in range(3):
        h = [max(0.0, sum(x[r, i] * W1[i, j] for i in range(4)) + b1[j]) for j in range(5)]
        for k in range(2):
            z = sum(h[j] * W2[j, k] for j in range(5)) + b2[k]
            expected[r, k] = 1.0 / (1.0 + np.exp(-z))
    np.testing.assert_allclose(out, expected, rtol=0, atol=1e-12)


def test_shape_mismatch_names_layer():
    rng = np.random.default_rng(0)
    specs = [LayerSpec("dense", "first", units=3), LayerSpec("dense", "second", units=2)]
    params = init_params(specs, 4, rng, "t")
    with pytest.raises(DimensionError, match="first"):
        forward(params, specs, Tensor(np.ones((1, 5))))


def test_validate_specs_rejects_bad_heads():
    with pytest.raises(DimensionError, match="blk"):
        validate_specs([LayerSpec("dense", "a", units=6), LayerSpec("transformer_block", "blk", heads=4)], 3)


def test_linear_gradient_is_input():
    W = Tensor(np.array([[0.5, -1.0, 2.0]]), requires_grad=True, dtype=np.float64)
    x = np.array([3.0, -1.0, 0.5])
    backward(matmul(W, Tensor(x, dtype=np.float64)).sum())
    np.testing.assert_array_equal(W.grad, x[None, :])


def test_backward_before_forward_raises():
    with pytest.raises(StateError):
        backward(Tensor(np.array(1.0), requires_grad=False))


def test_backward_needs_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(DimensionError):
        backward(x * 2.0)


def test_perfect_prediction_has_zero_loss_and_finite_grads():
    p = Tensor(np.eye(4)[[1, 3]], requires_grad=True, dtype=np.float64)
    loss = ce_loss(p, np.array([1, 3]))
    assert loss.item() == 0.0
    backward(loss)
    assert np.all(np.isfinite(p.grad))


def test_ce_uniform_vocab4():
    # -ln 0.25 + 3 * (-ln 0.75)
    p = Tensor(np.full((1, 4), 0.25), dtype=np.float64)
    assert ce_loss(p, np.array([2])).item() == pytest.approx(2.2493, abs=5e-5)
    assert ce_loss(p, np.array([2])).item() == pytest.approx(eq4_loss_scalar(p.data, [2]), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_ce_matches_scalar_script(seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(6), size=7)
    t = rng.integers(0, 6, size=7)
    assert ce_loss(Tensor(p, dtype=np.float64), t).item() == pytest.approx(eq4_loss_scalar(p, t), rel=1e-12)


def test_ce_saturated_probabilities_are_not_nan():
    p = Tensor(np.array([[0.0, 1.0, 0.0]]), requires_grad=True, dtype=np.float64)
    loss = ce_loss(p, np.array([0]))
    backward(loss)
    assert np.isfinite(loss.item()) and np.all(np.isfinite(p.grad))
    assert loss.item() == pytest.approx(-2 * np.log(1e-12))


def test_ce_mask_excludes_padding():
    p = np.array([[[0.7, 0.3], [0.5, 0.5]]])
    full = ce_loss(Tensor(p[:, :1], dtype=np.float64), np.array([[0]])).item()
    masked = ce_loss(Tensor(p, dtype=np.float64), np.array([[0, 1]]), mask=np.array([[True, False]])).item()
    assert masked == pytest.approx(full)


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_soundness(kind):
    worst = max(gradient_check(kind, seed) for seed in range(10))
    assert worst < 1e-4


def test_ce_gradient_wrt_probabilities():
    assert max(ce_fd_check(s) for s in range(10)) < 1e-4


def _quadratic_params(w0):
    params = ParamSet()
    params.add("w", np.asarray(w0, dtype=np.float64), "t", dtype=np.float64)
    return params


def test_adam_descends_on_square():
    params = _quadratic_params([1.0])
    opt = Adam(params, lr=0.1)
    w = params["w"]
    backward((w * w).sum())
    opt.step()
    assert abs(w.data[0]) < 1.0
    assert w.grad is None


def test_adam_zero_gradient_leaves_params():
    params = _quadratic_params([0.3, -0.7])
    opt = Adam(params, lr=0.1)
    params["w"].grad = np.zeros(2)
    opt.step()
    np.testing.assert_array_equal(params["w"].data, [0.3, -0.7])


def test_adam_converges_on_bowl():
    params = _quadratic_params([1.0, -2.0, 0.5])
    opt = Adam(params, lr=0.1)
    w = params["w"]
    scales = Tensor(np.array([1.0, 3.0, 0.5]), dtype=np.float64)
    for _ in range(200):
        backward((w * w * scales).sum())
        opt.step()
    assert np.linalg.norm(w.data) < 1e-2


def test_adam_without_gradients_raises():
    params = _quadratic_params([1.0])
    with pytest.raises(StateError):
        Adam(params).step()


def test_adam_respects_mask():
    params = _quadratic_params([1.0, 2.0, 3.0])
    mask = np.array([1.0, 0.0, 1.0])
    params["w"].data *= mask
    opt = Adam(params, lr=0.1, masks={"w": mask})
    for _ in range(5):
        backward((params["w"] * params["w"]).sum() + params["w"].sum())
        opt.step()
        assert params["w"].data[1] == 0.0


def test_ste_round_forward_and_backward():
    x = Tensor(np.array([1.4, 2.5, -0.6]), requires_grad=True, dtype=np.float64)
    y = ste_round(x)
    np.testing.assert_array_equal(y.data, [1.0, 2.0, -1.0])
    g = np.array([0.125, -3.0, 7.5])
    backward((y * Tensor(g, dtype=np.float64)).sum())
    assert np.array_equal(x.grad, g)


def test_ste_gradient_differs_from_finite_difference():
    # rounding is piecewise constant: finite differences see 0, STE reports identity
    x = np.array([1.3, -0.2, 4.1])
    numeric = central_difference(lambda: float(np.round(x).sum()), x)
    leaf = Tensor(x.copy(), requires_grad=True, dtype=np.float64)
    backward(ste_round(leaf).sum())
    np.testing.assert_array_equal(numeric, 0.0)
    np.testing.assert_array_equal(leaf.grad, np.ones(3))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_softmax_rows_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    out = softmax(Tensor(rng.standard_normal((4, 9)) * 10))
    np.testing.assert_allclose(out.data.sum(-1), 1.0, atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_layer_norm_statistics(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((5, 16)) * 3 + 2
    out = layer_norm(Tensor(x, dtype=np.float64)).data
    assert np.all(np.abs(out.mean(-1)) < 1e-6)
    assert np.all(np.abs(out.var(-1) - 1.0) < 1e-4)


def _train_steps(seed, steps=3):
    rng = np.random.default_rng(seed)
    specs = [LayerSpec("dense", "a", units=8), LayerSpec("relu"), LayerSpec("prediction", "p", units=4)]
    params = init_params(specs, 5, rng, "t")
    opt = Adam(params, lr=1e-2)
    data_rng = np.random.default_rng(seed + 100)
    for _ in range(steps):
        x = data_rng.standard_normal((6, 5))
        t = data_rng.integers(0, 4, size=6)
        backward(ce_loss(forward(params, specs, Tensor(x)), t))
        opt.step()
    return params


def test_training_is_deterministic():
    a, b = _train_steps(3), _train_steps(3)
    for name in a:
        assert np.array_equal(a[name].data, b[name].data)


def test_checkpoint_round_trip(tmp_path):
    params = _train_steps(1)
    params.add("extra", np.arange(6, dtype=np.float64).reshape(2, 3), "beta", dtype=np.float64)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, params, {"note": "x"})
    loaded, meta, quant = load_checkpoint(path)
    assert meta == {"note": "x"} and quant == {}
    assert loaded.names() == params.names()
    for name in params:
        assert loaded.partition_of(name) == params.partition_of(name)
        assert loaded[name].dtype == params[name].dtype
        assert np.array_equal(loaded[name].data, params[name].data)


def test_checkpoint_header_layout():
    params = ParamSet()
    params.add("w", np.array([1.0, -2.0]), "alpha", dtype=np.float32)
    blob = dumps(params)
    assert blob[:4] == b"LDSC"
    assert int.from_bytes(blob[4:6], "little") == 1
    # payload ends with two little-endian float32 values
    np.testing.assert_array_equal(np.frombuffer(blob[-8:], "<f4"), [1.0, -2.0])


@pytest.mark.parametrize("bits", [1, 2, 4, 7, 8, 12, 16, 20])
def test_bit_packing_round_trip(bits):
    rng = np.random.default_rng(bits)
    codes = rng.integers(0, 2**bits, size=37)
    buf = pack_bits(codes, bits)
    assert len(buf) == (37 * bits + 7) // 8
    np.testing.assert_array_equal(unpack_bits(buf, bits, 37), codes)


def test_quantized_record_round_trip():
    params = ParamSet()
    params.add("w", np.zeros((3, 4)), "alpha")
    mask = np.ones((3, 4), dtype=bool)
    mask[0, :2] = False
    codes = np.arange(12).reshape(3, 4) % 16
    codes[~mask] = 0
    q = QuantizedArray(codes=codes, bits=4, minimum=-1.0, scale=7.5, mask=mask)
    loaded, _, quant = loads(dumps(params, quantized={"w": q}))
    np.testing.assert_array_equal(quant["w"].codes, codes)
    np.testing.assert_array_equal(quant["w"].mask, mask)
    np.testing.assert_allclose(loaded["w"].data, q.dequantize(), atol=1e-6)
