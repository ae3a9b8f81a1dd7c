import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bevboost.neuralcore import (
    Adam, AdamState, CheckpointError, Conv2d, InstanceNorm, Linear, Module, NonFiniteError, Tensor,
    adam_step, checksum, load_checkpoint, no_grad, save_checkpoint, set_debug,
)
from bevboost.neuralcore import ops
from bevboost.neuralcore.gradcheck import check_chain, check_seed, rel_err, summarize

from oracles import adam_scalar


def test_conv_identity_kernel():
    x = np.random.default_rng(0).standard_normal((2, 3, 5, 4)).astype(np.float32)
    w = np.eye(3, dtype=np.float32)[:, :, None, None]
    out = ops.conv2d(Tensor(x), Tensor(w)).data
    np.testing.assert_array_equal(out, x)


def test_conv_ones_kernel_on_constant():
    out = ops.conv2d(Tensor(np.ones((1, 1, 5, 5))), Tensor(np.ones((1, 1, 3, 3))), pad=1).data[0, 0]
    np.testing.assert_allclose(out[1:-1, 1:-1], 9.0)
    assert out[0, 0] == 4.0 and out[0, 2] == 6.0


def test_conv_shape_errors():
    with pytest.raises(ValueError):
        ops.conv2d(Tensor(np.ones((1, 2, 5, 5))), Tensor(np.ones((1, 3, 3, 3))))
    with pytest.raises(ValueError):
        ops.conv2d(Tensor(np.ones((1, 1, 2, 2))), Tensor(np.ones((1, 1, 5, 5))))
    with pytest.raises(ValueError):
        ops.linear(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))


def test_instance_norm_statistics():
    x = np.random.default_rng(1).normal(3.0, 2.5, (2, 4, 9, 7)).astype(np.float32)
    y = ops.instance_norm(Tensor(x)).data.astype(np.float64)
    assert np.abs(y.mean(axis=(2, 3))).max() < 1e-5
    assert np.abs(y.var(axis=(2, 3)) - 1).max() < 1e-4


def test_avg_downsample_constant():
    y = ops.avg_downsample2x(Tensor(np.full((1, 2, 6, 8), 0.37, np.float32))).data
    assert y.shape == (1, 2, 3, 4)
    np.testing.assert_allclose(y, 0.37, rtol=1e-7)


def test_ops_keep_dtype():
    x = Tensor(np.ones((1, 2, 4, 4), np.float32))
    for y in (ops.leaky_relu(x), ops.tanh_out(x), ops.instance_norm(x), ops.avg_downsample2x(x),
              ops.nearest_upsample2x(x), ops.conv2d(x, Tensor(np.ones((1, 2, 3, 3), np.float32)), pad=1)):
        assert y.dtype == np.float32


@pytest.mark.parametrize("seed", range(20))
def test_gradcheck_all_ops(seed):
    results = check_seed(seed)
    bad = [(r.op, r.dtype, r.rel_err) for r in results if not r.passed]
    assert not bad


def test_gradcheck_covers_ops():
    names = {op for op, _ in summarize(check_seed(0))}
    for required in ("conv2d", "instance_norm", "leaky_relu", "tanh_out", "avg_downsample2x",
                     "nearest_upsample2x", "global_avg_pool", "linear", "grid_sample", "spatial_transformer"):
        assert required in names


@pytest.mark.parametrize("seed", range(5))
def test_composed_graph_backward(seed):
    r = check_chain(seed)
    assert r.passed, r.rel_err


def test_rel_err_definition():
    assert rel_err(np.zeros(3), np.zeros(3)) == 0.0
    assert rel_err(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(np.sqrt(2))


def test_gradient_accumulates_over_shared_parent():
    x = Tensor(np.array([1.5, -2.0]), requires_grad=True)
    y = ops.add(ops.scale(x, 3.0), ops.scale(x, 2.0))
    y.backward(np.ones(2))
    np.testing.assert_allclose(x.grad, [5.0, 5.0])


def test_no_grad_detaches():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = ops.scale(x, 2.0)
    assert not y.requires_grad


def test_debug_mode_raises_on_nan():
    x = Tensor(np.array([np.nan, 1.0]))
    set_debug(True)
    try:
        with pytest.raises(NonFiniteError):
            ops.scale(x, 1.0)
    finally:
        set_debug(False)
    ops.scale(x, 1.0)  # silent outside debug mode


# -- Adam -------------------------------------------------------------------

def test_adam_zero_gradient_keeps_params():
    p = [np.array([0.3, -1.2], np.float32), np.ones((2, 2), np.float32)]
    state = AdamState()
    cur = p
    for _ in range(5):
        cur = adam_step(cur, [np.zeros_like(a) for a in cur], state)
    for a, b in zip(p, cur):
        np.testing.assert_array_equal(a, b)
    assert state.step == 5


def test_adam_first_step_is_lr():
    (out,) = adam_step([np.array([1.0])], [np.array([1.0])], AdamState(lr=2e-4))
    assert out[0] == pytest.approx(1.0 - 2e-4, abs=1e-10)


def test_adam_quadratic_trajectory_matches_scalar_oracle():
    grad_fn = lambda x: 2.0 * (x - 3.0)
    expected = adam_scalar(grad_fn, 0.5, lr=0.05, steps=10)
    state = AdamState(lr=0.05)
    x = np.array([0.5])
    got = []
    for _ in range(10):
        (x,) = adam_step([x], [grad_fn(x)], state)
        got.append(float(x[0]))
    np.testing.assert_allclose(got, expected, atol=1e-7, rtol=0)


def test_adam_moment_shapes_follow_params():
    state = AdamState()
    adam_step([np.zeros((2, 3))], [np.ones((2, 3))], state)
    assert state.m[0].shape == (2, 3) and state.v[0].shape == (2, 3)
    with pytest.raises(ValueError):
        adam_step([np.zeros(2), np.zeros(2)], [None, None], state)


# -- modules, checkpoints, determinism ---------------------------------------

class _Tiny(Module):
    def __init__(self, seed):
        rng = np.random.default_rng(seed)
        self.conv = Conv2d(rng, 2, 3, 3)
        self.norm = InstanceNorm(3)
        self.head = Linear(rng, 3, 2)

    def __call__(self, x):
        h = ops.leaky_relu(self.norm(self.conv(x)))
        return self.head(ops.global_avg_pool(h))


def _train(seed, steps=4):
    net = _Tiny(seed)
    opt = Adam(net.parameters(), lr=1e-2)
    x = Tensor(np.random.default_rng(99).standard_normal((2, 2, 6, 6)).astype(np.float32))
    for _ in range(steps):
        opt.zero_grad()
        ops.mean_square_to(net(x), 1.0).backward()
        opt.step()
    return net, opt


def test_training_is_bit_deterministic():
    a, _ = _train(7)
    b, _ = _train(7)
    assert checksum(a) == checksum(b)
    c, _ = _train(8)
    assert checksum(a) != checksum(c)


def test_parameter_names_are_stable():
    names = [k for k, _ in _Tiny(0).named_parameters()]
    assert names == ["conv.weight", "conv.bias", "norm.gain", "norm.shift", "head.weight", "head.bias"]


def test_checkpoint_round_trip(tmp_path):
    net, opt = _train(3)
    arrays = dict(net.state_dict())
    arrays.update(opt.state_arrays("opt"))
    save_checkpoint(tmp_path / "m.ckpt", arrays, {"seed": 3, "step": 4})
    loaded, meta = load_checkpoint(tmp_path / "m.ckpt")
    assert meta == {"seed": 3, "step": 4}
    fresh = _Tiny(11)
    fresh.load_state_dict(loaded)
    assert checksum(fresh) == checksum(net)
    opt2 = Adam(fresh.parameters())
    opt2.load_state_arrays(loaded, "opt")
    assert opt2.state.step == 4
    np.testing.assert_array_equal(opt2.state.v[0], opt.state.v[0])


def test_checkpoint_magic_mismatch(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"BEVF0002" + b"\0" * 16)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_trailing_bytes(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, {"a": np.ones(3)})
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_load_state_dict_rejects_shape_mismatch():
    net = _Tiny(0)
    state = dict(net.state_dict())
    state["head.bias"] = np.zeros(5, np.float32)
    with pytest.raises(ValueError):
        net.load_state_dict(state)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(2, 9), st.integers(2, 9))
def test_upsample_then_downsample_is_identity(c, h, w):
    x = np.random.default_rng(c * 100 + h * 10 + w).standard_normal((1, c, h, w)).astype(np.float32)
    y = ops.avg_downsample2x(ops.nearest_upsample2x(Tensor(x))).data
    np.testing.assert_allclose(y, x, rtol=1e-6, atol=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.floats(-50, 50), st.floats(0.5, 10))
def test_instance_norm_affine_invariant(shift, factor):
    x = np.random.default_rng(0).standard_normal((1, 2, 5, 5))
    a = ops.instance_norm(Tensor(x)).data
    b = ops.instance_norm(Tensor(x * factor + shift)).data
    np.testing.assert_allclose(a, b, atol=1e-4)
