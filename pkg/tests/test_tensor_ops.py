"""Forward-value and shape-contract tests for the tensor ops."""

import numpy as np
import pytest

from latentpatch import tensor as T

from oracles import bilinear_point, central_difference, conv2d_loops


def test_matmul_hand_values():
    out = T.matmul(T.Tensor([[1.0, 2.0], [3.0, 4.0]]), T.Tensor([[1.0], [1.0]]))
    np.testing.assert_array_equal(out.data, [[3.0], [7.0]])


def test_matmul_shape_error_names_op_and_shapes():
    with pytest.raises(T.ShapeError, match=r"matmul.*\(2, 2\).*\(3, 1\)"):
        T.matmul(T.Tensor(np.ones((2, 2))), T.Tensor(np.ones((3, 1))))


def test_sigmoid_symmetry_point():
    assert T.sigmoid(T.Tensor([0.0])).data[0] == 0.5


def test_log_rejects_non_positive():
    with pytest.raises(ValueError, match="log of non-positive"):
        T.log(T.Tensor([1.0, 0.0]))


def test_conv2d_box_filter_center_pixel():
    img = T.Tensor(np.ones((3, 3, 1)))
    k = T.Tensor(np.full((3, 3, 1, 1), 1.0 / 9.0))
    out = T.conv2d(img, k, stride=1, pad=1)
    oracle = conv2d_loops(img.data, k.data, stride=1, pad=1)
    assert abs(out.data[1, 1, 0] - 1.0) < 1e-12
    np.testing.assert_allclose(out.data, oracle, atol=1e-12)


def test_conv2d_matches_loop_oracle_random():
    rng = np.random.default_rng(0)
    for stride, pad in [(1, 0), (1, 1), (2, 1)]:
        x = rng.standard_normal((6, 7, 3))
        k = rng.standard_normal((3, 3, 3, 4))
        out = T.conv2d(T.Tensor(x), T.Tensor(k), stride=stride, pad=pad)
        np.testing.assert_allclose(
            out.data, conv2d_loops(x, k, stride, pad), atol=1e-12
        )


def test_conv2d_channel_mismatch():
    with pytest.raises(T.ShapeError, match="channels"):
        T.conv2d(T.Tensor(np.ones((4, 4, 2))), T.Tensor(np.ones((3, 3, 3, 1))))


def test_add_broadcast_and_mismatch():
    out = T.add(T.Tensor(np.ones((2, 3))), T.Tensor([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(out.data, [[2, 3, 4], [2, 3, 4]])
    with pytest.raises(T.ShapeError, match="add"):
        T.add(T.Tensor(np.ones((2, 3))), T.Tensor(np.ones((4,))))


def test_clamp01_values():
    out = T.clamp01(T.Tensor([-0.5, 0.25, 1.5]))
    np.testing.assert_array_equal(out.data, [0.0, 0.25, 1.0])


def test_bilinear_resize_identity_is_bit_exact():
    rng = np.random.default_rng(1)
    img = rng.random((5, 4, 3))
    out = T.bilinear_resize(T.Tensor(img), 5, 4)
    np.testing.assert_array_equal(out.data, img)


def test_bilinear_resize_midpoints():
    img = np.zeros((1, 2, 1))
    img[0, 0, 0], img[0, 1, 0] = 0.0, 1.0
    out = T.bilinear_resize(T.Tensor(img), 1, 3)
    np.testing.assert_allclose(out.data[0, :, 0], [0.0, 0.5, 1.0])


def test_grid_sample_matches_pointwise_oracle():
    rng = np.random.default_rng(2)
    img = rng.random((6, 5, 2))
    ys = rng.uniform(-1.0, 6.0, size=(4, 4))
    xs = rng.uniform(-1.0, 5.0, size=(4, 4))
    out = T.grid_sample(T.Tensor(img), ys, xs)
    for i in range(4):
        for j in range(4):
            np.testing.assert_allclose(
                out.data[i, j], bilinear_point(img, ys[i, j], xs[i, j]),
                atol=1e-12,
            )


def test_grid_translate_integer_shift():
    img = np.arange(12, dtype=float).reshape(3, 4, 1)
    out = T.grid_translate(T.Tensor(img), 0.0, 1.0)
    np.testing.assert_array_equal(out.data[:, 1:, 0], img[:, :-1, 0])
    np.testing.assert_array_equal(out.data[:, 0, 0], 0.0)


def test_paste_bounds_check():
    bg = T.Tensor(np.zeros((4, 4, 1)))
    with pytest.raises(T.ShapeError, match="paste"):
        T.paste(bg, T.Tensor(np.ones((3, 3, 1))), 2, 2)


def test_dilate_and_pad_roundtrip_shapes():
    x = T.Tensor(np.arange(6, dtype=float).reshape(2, 3, 1))
    d = T.dilate2d(x, 2)
    assert d.shape == (3, 5, 1)
    np.testing.assert_array_equal(d.data[::2, ::2, 0], x.data[:, :, 0])
    p = T.pad2d(x, 1, 2, 0, 1)
    assert p.shape == (5, 4, 1)
    np.testing.assert_array_equal(p.data[1:3, 0:3, 0], x.data[:, :, 0])


def test_take_at_gather():
    a = T.Tensor(np.arange(12, dtype=float).reshape(3, 4))
    out = T.take_at(a, [0, 2, 2], [1, 3, 0])
    np.testing.assert_array_equal(out.data, [1.0, 11.0, 8.0])


@pytest.mark.parametrize("op_name", [
    "add", "sub", "mul", "div", "relu", "tanh", "sigmoid", "log", "exp",
    "sqrt", "sum", "mean", "matmul", "conv2d", "grid_sample",
])
def test_spot_gradients_against_independent_fd(op_name):
    """Cheap per-op FD spot check with the test-local oracle.

    The exhaustive 100-point sweep lives in the acceptance suite; this one
    guards against gross regressions during development.
    """
    rng = np.random.default_rng(hash(op_name) % (2 ** 32))

    def scalarize(build, x):
        w = rng.standard_normal(build(T.Tensor(x)).shape)

        def fn(arr):
            return float(np.sum(build(T.Tensor(arr)).data * w))

        def taped(arr):
            probe = T.Tensor(arr, requires_grad=True)
            with T.Tape() as tape:
                loss = T.tsum(T.mul(build(probe), T.Tensor(w)))
            tape.backward(loss)
            return probe.grad

        numeric = central_difference(fn, x)
        analytic = taped(x)
        denom = np.maximum(1.0, np.abs(analytic))
        assert np.max(np.abs(analytic - numeric) / denom) < 1e-6

    if op_name in ("add", "sub", "mul", "div"):
        other = T.Tensor(rng.standard_normal((3, 4)) + 2.0)
        build = getattr(T, op_name)
        scalarize(lambda t: build(t, other), rng.standard_normal((3, 4)))
    elif op_name in ("relu",):
        x = rng.uniform(0.1, 1.0, (3, 4)) * rng.choice([-1.0, 1.0], (3, 4))
        scalarize(T.relu, x)
    elif op_name in ("tanh", "sigmoid"):
        scalarize(getattr(T, op_name), rng.standard_normal((3, 4)))
    elif op_name in ("log", "sqrt"):
        scalarize(getattr(T, op_name), rng.uniform(0.2, 3.0, (3, 4)))
    elif op_name == "exp":
        scalarize(T.exp, rng.standard_normal((3, 4)))
    elif op_name == "sum":
        scalarize(lambda t: T.tsum(t, axis=1, keepdims=True),
                  rng.standard_normal((3, 4)))
    elif op_name == "mean":
        scalarize(T.tmean, rng.standard_normal((3, 4)))
    elif op_name == "matmul":
        other = T.Tensor(rng.standard_normal((4, 2)))
        scalarize(lambda t: T.matmul(t, other), rng.standard_normal((3, 4)))
    elif op_name == "conv2d":
        k = T.Tensor(rng.standard_normal((3, 3, 2, 2)))
        scalarize(lambda t: T.conv2d(t, k, stride=2, pad=1),
                  rng.standard_normal((5, 5, 2)))
    elif op_name == "grid_sample":
        ys = rng.uniform(-0.4, 4.4, (3, 3))
        xs = rng.uniform(-0.4, 4.4, (3, 3))
        scalarize(lambda t: T.grid_sample(t, ys, xs),
                  rng.standard_normal((5, 5, 2)))


def test_conv2d_kernel_gradient_against_fd():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((5, 5, 2))
    k0 = rng.standard_normal((3, 3, 2, 2))
    w = rng.standard_normal((3, 3, 2))

    def fn(karr):
        return float(np.sum(conv2d_loops(x, karr, 2, 1) * w))

    probe = T.Tensor(k0, requires_grad=True)
    with T.Tape() as tape:
        loss = T.tsum(T.mul(T.conv2d(T.Tensor(x), probe, 2, 1), T.Tensor(w)))
    tape.backward(loss)
    numeric = central_difference(fn, k0)
    denom = np.maximum(1.0, np.abs(probe.grad))
    assert np.max(np.abs(probe.grad - numeric) / denom) < 1e-6
