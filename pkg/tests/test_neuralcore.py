"""Layer-by-layer tests: forward values, shapes, error cases, and
finite-difference agreement for every layer kind."""

import math

import numpy as np
import pytest

from gradcheck import FD_STEP, REL_TOL, finite_difference, max_relative_error
from sectriage.neuralcore import (
    Adam,
    Conv,
    Dense,
    Dropout,
    Flatten,
    GlobalMaxPool,
    MaxPool,
    Network,
    NumericError,
    Parallel,
    ReLU,
    SGD,
    Sequential,
    ShapeError,
    Softmax,
    bce_loss,
    bce_prob_grad,
    loss_and_gradients,
    make_optimizer,
    softmax,
)

RNG = np.random.default_rng(20260810)


def projection_loss(layer, x, r, train=False, rng_seed=None):
    def f():
        rng = np.random.default_rng(rng_seed) if rng_seed is not None else None
        return float((layer.forward(x, train=train, rng=rng) * r).sum())
    return f


def check_layer(layer, x, train=False, rng_seed=None, check_input_grad=True):
    """FD-check parameter and input gradients under a random projection."""
    rng = np.random.default_rng(rng_seed) if rng_seed is not None else None
    out = layer.forward(x, train=train, rng=rng)
    r = np.random.default_rng(99).normal(size=out.shape)
    dx = layer.backward(r)
    analytic = [g.copy() for g in layer.grads()]
    f = projection_loss(layer, x, r, train=train, rng_seed=rng_seed)
    numeric = finite_difference(f, layer.params())
    err = max_relative_error(analytic, numeric) if analytic else 0.0
    if check_input_grad:
        numeric_dx = finite_difference(f, [x])[0]
        err = max(err, max_relative_error([dx], [numeric_dx]))
    return err


class TestConv:
    def test_output_shape(self):
        conv = Conv(3, 100, 128)
        x = RNG.normal(size=(2, 50, 100))
        assert conv.forward(x).shape == (2, 48, 128)

    def test_hand_computed_feature_map(self):
        conv = Conv(2, 2, 1)
        conv.kernels[...] = 1.0
        x = np.array([[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]])
        out = conv.forward(x)
        assert np.allclose(out[0, :, 0], [2.0, 3.0])

    def test_zero_input_gives_bias(self):
        conv = Conv(3, 4, 5)
        conv.bias[...] = 0.75
        out = conv.forward(np.zeros((2, 7, 4)))
        assert np.allclose(out, 0.75)

    def test_kernel_longer_than_input(self):
        conv = Conv(8, 4, 2)
        with pytest.raises(ShapeError):
            conv.forward(np.zeros((1, 5, 4)))

    def test_gradients(self):
        for trial in range(20):
            rng = np.random.default_rng(trial)
            conv = Conv(int(rng.integers(1, 4)), int(rng.integers(2, 5)),
                        int(rng.integers(1, 4)))
            conv.kernels[...] = rng.normal(size=conv.kernels.shape)
            conv.bias[...] = rng.normal(size=conv.bias.shape)
            x = rng.normal(size=(2, int(rng.integers(conv.kernel_len, 8)),
                                 conv.in_width))
            assert check_layer(conv, x) < REL_TOL


class TestPooling:
    def test_global_max(self):
        pool = GlobalMaxPool()
        x = np.array([[[0.1], [0.9], [-0.2]]])
        assert pool.forward(x)[0, 0] == pytest.approx(0.9)

    def test_all_negative(self):
        pool = GlobalMaxPool()
        x = np.array([[[-3.0], [-1.0], [-2.0]]])
        assert pool.forward(x)[0, 0] == pytest.approx(-1.0)

    def test_singleton(self):
        pool = GlobalMaxPool()
        assert pool.forward(np.array([[[5.0]]]))[0, 0] == pytest.approx(5.0)

    def test_gradient_goes_to_first_argmax(self):
        pool = GlobalMaxPool()
        x = np.array([[[1.0], [3.0], [3.0]]])
        pool.forward(x)
        dx = pool.backward(np.array([[2.0]]))
        assert np.allclose(dx[0, :, 0], [0.0, 2.0, 0.0])

    def test_append_smaller_is_invariant(self):
        pool = GlobalMaxPool()
        x = RNG.normal(size=(1, 6, 3))
        base = pool.forward(x)
        extended = np.concatenate([x, x.min() - 1.0 + np.zeros((1, 2, 3))], axis=1)
        assert np.array_equal(pool.forward(extended), base)

    def test_window_pool_shape_and_values(self):
        pool = MaxPool(2)
        x = np.array([[[1.0], [4.0], [2.0], [3.0], [9.0]]])
        out = pool.forward(x)
        assert out.shape == (1, 2, 1)
        assert np.allclose(out[0, :, 0], [4.0, 3.0])

    def test_pool_window_exceeds_length(self):
        with pytest.raises(ShapeError):
            MaxPool(4).forward(np.zeros((1, 3, 2)))

    def test_pool_gradients(self):
        for trial in range(20):
            rng = np.random.default_rng(1000 + trial)
            x = rng.normal(size=(2, int(rng.integers(4, 9)), 3))
            layer = MaxPool(2) if trial % 2 else GlobalMaxPool()
            assert check_layer(layer, x) < REL_TOL


class TestDense:
    def test_identity(self):
        dense = Dense(2, 2)
        dense.weights[...] = np.eye(2)
        out = dense.forward(np.array([[3.0, -1.0]]))
        assert np.allclose(out, [[3.0, -1.0]])

    def test_affine_values(self):
        dense = Dense(2, 2)
        dense.weights[...] = [[1.0, 2.0], [3.0, 4.0]]
        dense.bias[...] = [1.0, 1.0]
        out = dense.forward(np.array([[1.0, 1.0]]))
        assert np.allclose(out, [[4.0, 8.0]])

    def test_param_count(self):
        dense = Dense(10, 2)
        assert sum(p.size for p in dense.params()) == 22

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            Dense(3, 2).forward(np.zeros((1, 4)))

    def test_gradients(self):
        for trial in range(20):
            rng = np.random.default_rng(2000 + trial)
            dense = Dense(int(rng.integers(1, 6)), int(rng.integers(1, 6)))
            dense.weights[...] = rng.normal(size=dense.weights.shape)
            dense.bias[...] = rng.normal(size=dense.bias.shape)
            x = rng.normal(size=(3, dense.in_features))
            assert check_layer(dense, x) < REL_TOL


class TestSoftmax:
    def test_symmetry(self):
        assert np.allclose(softmax(np.array([0.0, 0.0])), [0.5, 0.5])

    def test_closed_form(self):
        probs = softmax(np.array([math.log(2.0), 0.0]))
        assert np.allclose(probs, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)

    def test_large_inputs_stable(self):
        assert np.allclose(softmax(np.array([1000.0, 1000.0])), [0.5, 0.5])

    def test_rows_sum_to_one(self):
        z = RNG.normal(size=(50, 2)) * 3
        p = softmax(z)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert ((p > 0) & (p < 1)).all()

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            softmax(np.array([np.nan, 0.0]))

    def test_gradients(self):
        for trial in range(20):
            rng = np.random.default_rng(3000 + trial)
            x = rng.normal(size=(3, int(rng.integers(2, 5))))
            assert check_layer(Softmax(), x) < REL_TOL


class TestDropout:
    def test_rate_zero_train_is_identity(self):
        x = RNG.normal(size=(4, 5))
        out = Dropout(0.0).forward(x, train=True, rng=np.random.default_rng(0))
        assert np.array_equal(out, x)

    def test_infer_is_identity(self):
        x = RNG.normal(size=(4, 5))
        assert np.array_equal(Dropout(0.9).forward(x, train=False), x)

    def test_statistics(self):
        x = np.ones(10**6)
        out = Dropout(0.2).forward(x, train=True, rng=np.random.default_rng(5))
        assert abs(out.mean() - 1.0) < 0.01
        assert abs((out == 0).mean() - 0.2) < 0.01

    def test_rate_one_rejected(self):
        with pytest.raises(ValueError):
            Dropout(1.0)

    def test_gradients_with_fixed_mask(self):
        for trial in range(20):
            rng = np.random.default_rng(4000 + trial)
            x = rng.normal(size=(3, 6))
            err = check_layer(Dropout(0.3), x, train=True, rng_seed=trial)
            assert err < REL_TOL


class TestFlattenRelu:
    def test_flatten_round_trip(self):
        x = RNG.normal(size=(2, 3, 4))
        flat = Flatten()
        out = flat.forward(x)
        assert out.shape == (2, 12)
        assert np.array_equal(flat.backward(out), x)

    def test_relu_values_and_gradients(self):
        x = np.array([[-1.0, 2.0, 0.5]])
        layer = ReLU()
        assert np.allclose(layer.forward(x), [[0.0, 2.0, 0.5]])
        for trial in range(20):
            rng = np.random.default_rng(5000 + trial)
            sample = rng.normal(size=(3, 5))
            sample[np.abs(sample) < 1e-3] += 0.1  # keep clear of the kink
            assert check_layer(ReLU(), sample) < REL_TOL


class TestBceLoss:
    def test_perfect_prediction(self):
        assert bce_loss(1.0, 1.0) == pytest.approx(0.0, abs=1e-11)

    def test_half(self):
        assert bce_loss(0.5, 1.0) == pytest.approx(math.log(2.0), abs=1e-12)
        assert bce_loss(0.5, 0.0) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_clamped_worst_case(self):
        loss = bce_loss(0.0, 1.0)
        assert loss == pytest.approx(-math.log(1e-12), rel=1e-9)
        assert math.isfinite(loss)

    def test_batch_mean(self):
        loss = bce_loss(np.array([0.5, 0.5]), np.array([1.0, 0.0]))
        assert loss == pytest.approx(math.log(2.0))


class TestBackwardComposite:
    def test_logit_gradient_is_probs_minus_one_hot(self):
        dense = Dense(3, 2)
        rng = np.random.default_rng(7)
        dense.weights[...] = rng.normal(size=(2, 3))
        dense.bias[...] = rng.normal(size=2)
        soft = Softmax()
        x = rng.normal(size=(1, 3))
        logits = dense.forward(x)
        probs = soft.forward(logits)
        y = np.array([1])
        dlogits = soft.backward(bce_prob_grad(probs, y))
        one_hot = np.zeros((1, 2))
        one_hot[0, 1] = 1.0
        assert np.allclose(dlogits, probs - one_hot, atol=1e-12)

    def test_zero_learning_signal(self):
        # Saturated softmax: p matches the label exactly, all gradients 0.
        dense = Dense(2, 2)
        dense.weights[...] = [[-400.0, 0.0], [400.0, 0.0]]
        net = Network(Sequential([dense, Softmax()]))
        x = np.array([[1.0, 0.0]])
        loss, grads = loss_and_gradients(net, x, np.array([1]))
        assert loss == pytest.approx(0.0, abs=1e-11)
        for g in grads:
            assert np.allclose(g, 0.0, atol=1e-15)

    def test_network_gradcheck_parallel_branches(self):
        from gradcheck import check_network_gradients, sample_safe_network_case

        def build(seed):
            rng = np.random.default_rng(seed)
            branches = []
            for n in (1, 2):
                conv = Conv(n, 4, 3)
                conv.kernels[...] = rng.normal(size=conv.kernels.shape)
                conv.bias[...] = rng.normal(size=conv.bias.shape)
                branches.append(Sequential([conv, ReLU(), GlobalMaxPool()]))
            head = Dense(6, 2)
            head.weights[...] = rng.normal(size=head.weights.shape)
            return Network(Sequential([Parallel(branches), head, Softmax()]))

        net, x, y, _ = sample_safe_network_case(build, (3, 6, 4), seed=11,
                                                use_dropout=False)
        assert check_network_gradients(net, x, y) < REL_TOL


class TestOptimizers:
    def test_sgd_step(self):
        w = np.array([1.0])
        SGD(lr=0.1).step([w], [np.array([0.5])])
        assert w[0] == pytest.approx(0.95)

    def test_adam_first_step_magnitude(self):
        w = np.zeros(5)
        adam = Adam(lr=1e-3)
        adam.step([w], [np.ones(5)])
        # Bias-corrected first step moves by ~lr for unit gradients.
        assert np.allclose(np.abs(w), 1e-3, atol=1e-6)

    def test_zero_learning_rate(self):
        w = np.array([2.0, -1.0])
        before = w.copy()
        SGD(lr=0.0).step([w], [np.array([5.0, 5.0])])
        assert np.array_equal(w, before)

    def test_non_finite_gradient_rejected(self):
        with pytest.raises(NumericError):
            SGD(0.1).step([np.zeros(2)], [np.array([np.nan, 1.0])])
        with pytest.raises(NumericError):
            Adam().step([np.zeros(2)], [np.array([np.inf, 1.0])])

    def test_make_optimizer(self):
        assert isinstance(make_optimizer("adam"), Adam)
        assert isinstance(make_optimizer("sgd", lr=0.5), SGD)
        with pytest.raises(ValueError):
            make_optimizer("rmsprop")


class TestFiniteForward:
    def test_all_layers_finite_on_random_input(self):
        rng = np.random.default_rng(31)
        conv = Conv(3, 8, 4)
        conv.kernels[...] = rng.normal(size=conv.kernels.shape)
        dense = Dense(4, 2)
        dense.weights[...] = rng.normal(size=dense.weights.shape)
        net = Network(Sequential([
            conv, ReLU(), MaxPool(2), GlobalMaxPool(), dense, Softmax(),
        ]))
        x = rng.normal(size=(4, 12, 8))
        out = x
        for layer in net.root.layers:
            out = layer.forward(out)
            assert np.isfinite(out).all()
