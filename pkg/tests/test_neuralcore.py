import io

import numpy as np
import numpy.testing as npt
import pytest

from phantomgen.neuralcore import (
    Adam,
    LayerSpec,
    Network,
    ParamsFormatError,
    SGD,
    ShapeError,
    grad_check,
    load_into_network,
    mse_loss,
    network_layer_params,
    read_params,
    write_params,
)
from phantomgen.neuralcore import kernels, kernels_py


def naive_conv1d(x, w, b):
    """Oracle: direct quintuple-loop cross-correlation with zero padding."""
    n, length, cin = x.shape
    k, _, cout = w.shape
    pad = (k - 1) // 2
    out = np.zeros((n, length, cout))
    for bi in range(n):
        for i in range(length):
            for o in range(cout):
                acc = b[o]
                for kk in range(k):
                    s = i + kk - pad
                    if 0 <= s < length:
                        for c in range(cin):
                            acc += x[bi, s, c] * w[kk, c, o]
                out[bi, i, o] = acc
    return out


def single_layer_net(spec, in_shape, seed=0):
    return Network([spec], in_shape, np.random.default_rng(seed))


class TestConv1d:
    def test_edge_detector_by_hand(self):
        x = np.array([[[1.0], [2.0], [3.0]]])
        w = np.array([[[1.0]], [[0.0]], [[-1.0]]])
        b = np.zeros(1)
        out = kernels.conv1d_forward(x, w, b)
        npt.assert_allclose(out[0, :, 0], [-2.0, -2.0, 2.0])

    def test_identity_kernel(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 7, 3))
        w = np.zeros((3, 3, 3))
        for c in range(3):
            w[1, c, c] = 1.0  # centered delta
        out = kernels.conv1d_forward(x, w, np.zeros(3))
        npt.assert_allclose(out, x, atol=1e-15)

    def test_zero_input_gives_bias(self):
        b = np.array([0.5, -1.5])
        out = kernels.conv1d_forward(np.zeros((1, 4, 3)), np.ones((3, 3, 2)), b)
        npt.assert_allclose(out, np.broadcast_to(b, (1, 4, 2)))

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            x = rng.standard_normal((3, 8, 4))
            w = rng.standard_normal((5, 4, 6))
            b = rng.standard_normal(6)
            npt.assert_allclose(kernels.conv1d_forward(x, w, b), naive_conv1d(x, w, b), atol=1e-12)

    def test_backward_bias_gradient_identity(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 5, 2))
        w = rng.standard_normal((3, 2, 4))
        go = rng.standard_normal((2, 5, 4))
        _, _, gb = kernels.conv1d_backward(x, w, go)
        npt.assert_allclose(gb, go.sum(axis=(0, 1)), atol=1e-12)

    def test_backward_zero_upstream(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((2, 5, 2))
        w = rng.standard_normal((3, 2, 4))
        gx, gw, gb = kernels.conv1d_backward(x, w, np.zeros((2, 5, 4)))
        assert not gx.any() and not gw.any() and not gb.any()

    def test_gradcheck_random_5x2(self):
        rng = np.random.default_rng(5)
        net = single_layer_net(LayerSpec("Conv1D", filters=3, kernel_size=3), (5, 2))
        x = rng.standard_normal((1, 5, 2))
        target = rng.standard_normal((1, 5, 3))
        assert grad_check(net, x, target) < 1e-6

    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError):
            LayerSpec("Conv1D", filters=2, kernel_size=4)


class TestMaxPool:
    def test_window_max(self):
        x = np.array([[[1.0], [5.0], [2.0], [0.0], [3.0], [4.0]]])
        out, idx = kernels.maxpool1d_forward(x, 3)
        npt.assert_allclose(out[0, :, 0], [5.0, 4.0])
        assert idx[0, :, 0].tolist() == [1, 5]

    def test_constant_ties_take_window_start(self):
        x = np.ones((1, 6, 2))
        out, idx = kernels.maxpool1d_forward(x, 3)
        npt.assert_allclose(out, np.ones((1, 2, 2)))
        assert idx[0, :, 0].tolist() == [0, 3]

    def test_length_18_pool_chain(self):
        x = np.random.default_rng(0).standard_normal((1, 18, 2))
        a, _ = kernels.maxpool1d_forward(x, 3)
        assert a.shape == (1, 6, 2)
        b, _ = kernels.maxpool1d_forward(np.ascontiguousarray(a), 2)
        assert b.shape == (1, 3, 2)

    def test_non_divisible_rejected(self):
        with pytest.raises(ShapeError, match="not divisible"):
            single_layer_net(LayerSpec("MaxPool1D", pool_size=4), (6, 1))

    def test_backward_routes_to_argmax(self):
        x = np.array([[[1.0], [5.0], [2.0], [0.0], [3.0], [4.0]]])
        _, idx = kernels.maxpool1d_forward(x, 3)
        go = np.array([[[10.0], [20.0]]])
        gx = kernels.maxpool1d_backward(go, idx, 6)
        npt.assert_allclose(gx[0, :, 0], [0, 10, 0, 0, 0, 20])

    def test_gradcheck(self):
        rng = np.random.default_rng(6)
        net = single_layer_net(LayerSpec("MaxPool1D", pool_size=3), (6, 2))
        x = rng.standard_normal((2, 6, 2))
        target = rng.standard_normal((2, 2, 2))
        assert grad_check(net, x, target) < 1e-6


class TestUpsample:
    def test_repeat_rows(self):
        x = np.array([[[1.0], [2.0]]])
        out = kernels.upsample1d_forward(x, 3)
        npt.assert_allclose(out[0, :, 0], [1, 1, 1, 2, 2, 2])

    def test_size_one_identity(self):
        x = np.random.default_rng(1).standard_normal((2, 4, 3))
        npt.assert_allclose(kernels.upsample1d_forward(x, 1), x)

    def test_pool_inverts_upsample(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, 5, 3))
        for s in (2, 3):
            up = kernels.upsample1d_forward(x, s)
            down, _ = kernels.maxpool1d_forward(up, s)
            npt.assert_allclose(down, x)

    def test_backward_sums_groups(self):
        go = np.arange(6.0).reshape(1, 6, 1)
        gx = kernels.upsample1d_backward(go, 3)
        npt.assert_allclose(gx[0, :, 0], [0 + 1 + 2, 3 + 4 + 5])

    def test_gradcheck(self):
        rng = np.random.default_rng(7)
        net = single_layer_net(LayerSpec("Upsample1D", upsample_size=2), (4, 2))
        x = rng.standard_normal((1, 4, 2))
        target = rng.standard_normal((1, 8, 2))
        assert grad_check(net, x, target) < 1e-9


class TestDropout:
    def test_infer_mode_is_bitwise_identity(self):
        rng = np.random.default_rng(8)
        net = single_layer_net(LayerSpec("Dropout", rate=0.7), (10, 3))
        x = rng.standard_normal((2, 10, 3))
        out = net.forward(x, train=False)
        assert np.array_equal(out, x)

    def test_rate_zero_identity_in_train(self):
        rng = np.random.default_rng(9)
        net = single_layer_net(LayerSpec("Dropout", rate=0.0), (10, 3))
        x = rng.standard_normal((2, 10, 3))
        out = net.forward(x, train=True, rng=np.random.default_rng(0))
        assert np.array_equal(out, x)

    def test_seeded_monte_carlo_statistics(self):
        net = single_layer_net(LayerSpec("Dropout", rate=0.5), (100000,))
        x = np.ones((1, 100000))
        out = net.forward(x, train=True, rng=np.random.default_rng(1234))
        kept = np.count_nonzero(out) / out.size
        assert abs(kept - 0.5) <= 0.01
        assert abs(out.mean() - x.mean()) <= 0.02 * abs(x.mean())

    def test_mask_deterministic_given_seed(self):
        net = single_layer_net(LayerSpec("Dropout", rate=0.5), (50,))
        x = np.random.default_rng(0).standard_normal((2, 50))
        a = net.forward(x, train=True, rng=np.random.default_rng(7))
        b = net.forward(x, train=True, rng=np.random.default_rng(7))
        assert np.array_equal(a, b)

    def test_train_mode_gradcheck_with_fixed_mask(self):
        rng = np.random.default_rng(10)
        net = single_layer_net(LayerSpec("Dropout", rate=0.4), (12,))
        x = rng.standard_normal((2, 12))
        target = rng.standard_normal((2, 12))
        err = grad_check(net, x, target, train=True, rng_factory=lambda: np.random.default_rng(55))
        assert err < 1e-8

    def test_bad_rate_rejected(self):
        with pytest.raises(ShapeError):
            LayerSpec("Dropout", rate=1.0)


class TestDense:
    def test_identity_weights(self):
        net = single_layer_net(LayerSpec("Dense", units=4, activation="linear"), (4,))
        net.layers[0].params["w"][...] = np.eye(4)
        net.layers[0].params["b"][...] = 0.0
        x = np.random.default_rng(0).standard_normal((3, 4))
        npt.assert_allclose(net.forward(x), x)

    def test_relu_clamps_negatives(self):
        net = single_layer_net(LayerSpec("Dense", units=3, activation="relu"), (2,))
        net.layers[0].params["w"][...] = 0.0
        net.layers[0].params["b"][...] = -1.0
        out = net.forward(np.ones((2, 2)))
        npt.assert_allclose(out, 0.0)

    def test_gradcheck_4_to_3(self):
        rng = np.random.default_rng(11)
        net = single_layer_net(LayerSpec("Dense", units=3, activation="relu"), (4,))
        x = rng.standard_normal((5, 4))
        target = rng.standard_normal((5, 3))
        assert grad_check(net, x, target) < 1e-6

    def test_shape_mismatch_rejected(self):
        net = single_layer_net(LayerSpec("Dense", units=3), (4,))
        with pytest.raises(ShapeError):
            net.forward(np.zeros((2, 5)))


class TestMseLoss:
    def test_equal_is_zero(self):
        x = np.random.default_rng(0).standard_normal((3, 4))
        loss, grad = mse_loss(x, x.copy())
        assert loss == 0.0
        npt.assert_allclose(grad, 0.0)

    def test_unit_difference(self):
        pred = np.ones((2, 5))
        loss, _ = mse_loss(pred, np.zeros((2, 5)))
        assert loss == 1.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        pred = rng.standard_normal((3, 4))
        target = rng.standard_normal((3, 4))
        _, grad = mse_loss(pred, target)
        h = 1e-6
        for idx in np.ndindex(pred.shape):
            p = pred.copy()
            p[idx] += h
            lp, _ = mse_loss(p, target)
            p[idx] -= 2 * h
            lm, _ = mse_loss(p, target)
            npt.assert_allclose(grad[idx], (lp - lm) / (2 * h), atol=1e-8)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mse_loss(np.zeros((2, 3)), np.zeros((3, 2)))


class TestOptimizers:
    def test_sgd_zero_gradient_no_change(self):
        p = np.array([1.0, 2.0])
        SGD(lr=0.1).step([p], [np.zeros(2)])
        npt.assert_array_equal(p, [1.0, 2.0])

    def test_adam_converges_on_quadratic(self):
        p = np.array([0.0])
        opt = Adam(lr=0.1)
        for _ in range(500):
            grad = 2.0 * (p - 3.0)
            opt.step([p], [grad])
        assert abs(p[0] - 3.0) < 1e-3

    def test_step_counter(self):
        opt = Adam()
        p = np.array([1.0])
        for i in range(1, 4):
            opt.step([p], [np.array([0.1])])
            assert opt.step_count == i

    def test_one_step_decreases_convex_loss(self):
        rng = np.random.default_rng(13)
        p = rng.standard_normal(6)
        target = rng.standard_normal(6)
        for opt in (SGD(lr=0.05), Adam(lr=0.05)):
            q = p.copy()
            loss0 = float(np.sum((q - target) ** 2))
            opt.step([q], [2.0 * (q - target)])
            assert float(np.sum((q - target) ** 2)) < loss0

    def test_weight_decay_mask(self):
        w = np.array([1.0])
        b = np.array([1.0])
        opt = SGD(lr=1.0, weight_decay=0.5, decay_mask=[True, False])
        opt.step([w, b], [np.zeros(1), np.zeros(1)])
        npt.assert_allclose(w, [0.5])
        npt.assert_allclose(b, [1.0])


def autoencoder_stack(out_filters=3, hidden="linear"):
    """Deep conv stack with the 18->6->3->6->18 length chain."""
    return [
        LayerSpec("Conv1D", filters=32, kernel_size=3, activation=hidden),
        LayerSpec("MaxPool1D", pool_size=3),
        LayerSpec("Conv1D", filters=32, kernel_size=3, activation=hidden),
        LayerSpec("MaxPool1D", pool_size=2),
        LayerSpec("Conv1D", filters=32, kernel_size=3, activation=hidden),
        LayerSpec("Upsample1D", upsample_size=2),
        LayerSpec("Conv1D", filters=32, kernel_size=3, activation=hidden),
        LayerSpec("Upsample1D", upsample_size=3),
        LayerSpec("Conv1D", filters=out_filters, kernel_size=3, activation="linear"),
    ]


class TestNetwork:
    def test_shape_chain(self):
        net = Network(autoencoder_stack(), (18, 3), np.random.default_rng(0))
        shapes = []
        x = np.random.default_rng(1).standard_normal((1, 18, 3))
        for layer in net.layers:
            x = layer.forward(x, False, None)
            shapes.append(x.shape[1])
        assert shapes == [18, 6, 6, 3, 3, 6, 6, 18, 18]
        assert net.out_shape == (18, 3)

    def test_forward_deterministic(self):
        net = Network(autoencoder_stack(hidden="relu"), (18, 3), np.random.default_rng(0))
        x = np.random.default_rng(2).standard_normal((4, 18, 3))
        a = net.forward(x)
        b = net.forward(x)
        assert np.array_equal(a, b)

    def test_linear_single_dense_gradcheck_tight(self):
        rng = np.random.default_rng(14)
        net = single_layer_net(LayerSpec("Dense", units=5, activation="linear"), (4,))
        x = rng.standard_normal((3, 4))
        target = rng.standard_normal((3, 5))
        assert grad_check(net, x, target) < 1e-9

    def test_deep_autoencoder_gradcheck(self):
        rng = np.random.default_rng(15)
        net = Network(autoencoder_stack(hidden="relu"), (18, 3), np.random.default_rng(42))
        x = rng.standard_normal((1, 18, 3))
        target = rng.standard_normal((1, 18, 3))
        assert grad_check(net, x, target) < 1e-5

    def test_gradcheck_detects_corrupted_gradient(self):
        rng = np.random.default_rng(16)
        net = single_layer_net(LayerSpec("Dense", units=3, activation="linear"), (4,))
        x = rng.standard_normal((3, 4))
        target = rng.standard_normal((3, 3))

        orig_backward = net.layers[0].backward

        def corrupted(grad_out):
            res = orig_backward(grad_out)
            net.layers[0].grads["w"][0, 0] += 1e-3
            return res

        net.layers[0].backward = corrupted
        assert grad_check(net, x, target) > 1e-4

    def test_every_layer_type_gradcheck_ten_seeds(self):
        cases = [
            (LayerSpec("Conv1D", filters=4, kernel_size=3, activation="relu"), (6, 2), (6, 4)),
            (LayerSpec("MaxPool1D", pool_size=2), (6, 2), (3, 2)),
            (LayerSpec("Upsample1D", upsample_size=3), (4, 2), (12, 2)),
            (LayerSpec("Dense", units=5, activation="relu"), (7,), (5,)),
            (LayerSpec("Activation", activation="relu"), (6, 2), (6, 2)),
        ]
        for spec, in_shape, out_shape in cases:
            for seed in range(10):
                rng = np.random.default_rng(100 + seed)
                net = single_layer_net(spec, in_shape, seed=seed)
                x = rng.standard_normal((2,) + in_shape)
                target = rng.standard_normal((2,) + out_shape)
                assert grad_check(net, x, target) < 1e-5, (spec.kind, seed)

    def test_train_step_reduces_loss_on_linear_problem(self):
        rng = np.random.default_rng(17)
        net = single_layer_net(LayerSpec("Dense", units=2, activation="linear"), (3,))
        x = rng.standard_normal((16, 3))
        target = np.zeros((16, 2))
        opt = Adam(lr=1e-2)
        losses = [net.train_step(x, target, opt) for _ in range(200)]
        assert losses[-1] < 0.05 * losses[0]


class TestParamsIO:
    def test_roundtrip_bitwise(self):
        net = Network(autoencoder_stack(), (18, 3), np.random.default_rng(3))
        buf = io.BytesIO()
        write_params(buf, network_layer_params(net))
        buf.seek(0)
        loaded = read_params(buf)
        for orig, back in zip(network_layer_params(net), loaded):
            for a, b in zip(orig, back):
                assert np.array_equal(a, b)

    def test_load_into_network(self):
        net_a = Network(autoencoder_stack(), (18, 3), np.random.default_rng(4))
        net_b = Network(autoencoder_stack(), (18, 3), np.random.default_rng(5))
        buf = io.BytesIO()
        write_params(buf, network_layer_params(net_a))
        buf.seek(0)
        load_into_network(net_b, read_params(buf))
        x = np.random.default_rng(6).standard_normal((2, 18, 3))
        npt.assert_array_equal(net_a.forward(x), net_b.forward(x))

    def test_bad_magic_rejected(self):
        with pytest.raises(ParamsFormatError, match="magic"):
            read_params(io.BytesIO(b"XXXX" + b"\0" * 16))

    def test_truncated_rejected(self):
        net = single_layer_net(LayerSpec("Dense", units=2), (3,))
        buf = io.BytesIO()
        write_params(buf, network_layer_params(net))
        data = buf.getvalue()[:-5]
        with pytest.raises(ParamsFormatError, match="truncated"):
            read_params(io.BytesIO(data))


class TestBackendParity:
    """The compiled kernels and the numpy fallback must agree."""

    def test_all_kernels_match(self):
        rng = np.random.default_rng(18)
        x = rng.standard_normal((3, 12, 5))
        w = rng.standard_normal((3, 5, 7))
        b = rng.standard_normal(7)
        go = rng.standard_normal((3, 12, 7))

        npt.assert_allclose(
            kernels.conv1d_forward(x, w, b), kernels_py.conv1d_forward(x, w, b), atol=1e-12
        )
        for a, bb in zip(
            kernels.conv1d_backward(x, w, go), kernels_py.conv1d_backward(x, w, go)
        ):
            npt.assert_allclose(a, bb, atol=1e-12)

        oc, ic = kernels.maxpool1d_forward(x, 3)
        op, ip = kernels_py.maxpool1d_forward(x, 3)
        npt.assert_array_equal(oc, op)
        npt.assert_array_equal(ic, ip)
        go_pool = rng.standard_normal(oc.shape)
        gpc = kernels.maxpool1d_backward(go_pool, ic, 12)
        gpp = kernels_py.maxpool1d_backward(go_pool, ip, 12)
        npt.assert_array_equal(gpc, gpp)

        npt.assert_array_equal(
            kernels.upsample1d_forward(x, 2), kernels_py.upsample1d_forward(x, 2)
        )
        npt.assert_array_equal(
            kernels.upsample1d_backward(x, 3), kernels_py.upsample1d_backward(x, 3)
        )
