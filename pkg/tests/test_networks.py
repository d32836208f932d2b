import numpy as np
import pytest

from rpusim.device import DevicePopulationConfig
from rpusim.networks import (
    ANALOG_SGD,
    ANALOG_TIKI_TAKA,
    FP,
    CalibrationError,
    ConvAsMatrix,
    FullyConnected,
    NetworkSpec,
    NetworkState,
    TrainerConfig,
    cnn_mnist,
    col2im,
    fcn_mnist,
    fp_forward_backward,
    im2col,
    lstm_wp,
    toy,
    train_step,
)
from rpusim.networks.functional import cross_entropy, softmax
from rpusim.networks.im2col import maxpool2, maxpool2_backward
from rpusim.tiki_taka import cycle_count
from rpusim.tile import EXPECTED, PeripheryConfig


class TestIm2col:
    def test_cnn_weight_sharing(self):
        first = im2col(np.zeros((1, 28, 28)), 5)
        second = im2col(np.zeros((16, 12, 12)), 5)
        assert first.shape == (25, 576)
        assert second.shape == (400, 64)
        assert cnn_mnist().weight_sharing() == [576, 64, 1, 1]

    def test_matches_direct_convolution(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3, 7, 6))
        k = rng.normal(size=(4, 3, 3, 3))
        out = (k.reshape(4, -1) @ im2col(x, 3)).reshape(4, 5, 4)
        direct = np.zeros((4, 5, 4))
        for o in range(4):
            for i in range(5):
                for j in range(4):
                    direct[o, i, j] = np.sum(k[o] * x[:, i:i + 3, j:j + 3])
        np.testing.assert_allclose(out, direct, rtol=1e-12)

    def test_col2im_is_adjoint(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 6, 6))
        c = rng.normal(size=(2 * 9, 16))
        assert np.sum(im2col(x, 3) * c) == pytest.approx(np.sum(x * col2im(c, x.shape, 3)))

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            im2col(np.zeros((4, 4)), 3)
        with pytest.raises(ValueError):
            im2col(np.zeros((1, 2, 2)), 3)

    def test_maxpool_routes_gradient_to_winner(self):
        x = np.arange(16.0).reshape(1, 4, 4)
        pooled, mask = maxpool2(x)
        np.testing.assert_array_equal(pooled[0], [[5, 7], [13, 15]])
        g = maxpool2_backward(np.ones((1, 2, 2)), mask, x.shape)
        assert g.sum() == 4 and g[0, 1, 1] == 1 and g[0, 0, 0] == 0


class TestSpecs:
    def test_presets(self):
        assert cnn_mnist().matrix_shapes() == [(16, 26), (32, 401), (128, 513), (10, 129)]
        assert fcn_mnist((64, 32)).matrix_shapes() == [(64, 785), (32, 65), (10, 33)]
        assert lstm_wp(87, 64).matrix_shapes() == [(256, 152), (256, 129), (87, 65)]
        assert toy().matrix_shapes() == [(16, 9), (4, 17)]

    def test_mismatched_layers_rejected(self):
        with pytest.raises(ValueError):
            NetworkSpec([FullyConnected(4, 3, "sigmoid"), FullyConnected(5, 2, "softmax")])
        with pytest.raises(ValueError):
            NetworkSpec([FullyConnected(4, 3, "sigmoid")])


def test_softmax_and_cross_entropy():
    p = softmax(np.array([1000.0, 1000.0]))
    np.testing.assert_allclose(p, [0.5, 0.5])
    assert cross_entropy(np.array([0.25, 0.75]), 1) == pytest.approx(-np.log(0.75))


def _numeric_grad(loss_fn, weights, index, eps=1e-5):
    w = weights[index]
    g = np.zeros_like(w)
    it = np.nditer(w, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = w[i]
        w[i] = old + eps
        up = loss_fn()
        w[i] = old - eps
        down = loss_fn()
        w[i] = old
        g[i] = (up - down) / (2 * eps)
    return g


def _check(state, sample, min_abs=1e-7):
    net = state.net
    _, grads = fp_forward_backward(net, sample)
    params = [b.w for b in net.backends]
    assert sum(p.size for p in params) <= 1000 or isinstance(net.spec.layers[0], ConvAsMatrix)

    def loss():
        if hasattr(net, "reset_state"):
            net.reset_state()
        return fp_forward_backward(net, sample)[0]

    for li in range(len(params)):
        if hasattr(net, "reset_state"):
            net.reset_state()
        num = _numeric_grad(loss, params, li)
        mask = np.abs(num) > min_abs
        rel = np.abs(grads[li] - num)[mask] / np.maximum(np.abs(num[mask]), np.abs(grads[li][mask]))
        assert rel.max() < 1e-3, f"layer {li}: max relative error {rel.max():.2e}"


class TestGradients:
    def test_fcn(self):
        spec = NetworkSpec([FullyConnected(12, 10, "sigmoid"), FullyConnected(10, 8, "tanh"),
                            FullyConnected(8, 5, "softmax")])
        state = NetworkState(spec, TrainerConfig(mode=FP, seed=3))
        for b in state.backends:
            b.w *= 3.0  # larger weights exercise the nonlinearities
        x = np.random.default_rng(0).uniform(0, 1, 12)
        _check(state, (x, 2))

    def test_lstm_unroll_5(self):
        spec = lstm_wp(vocab=6, hidden=4)
        state = NetworkState(spec, TrainerConfig(mode=FP, seed=1, unroll_steps=5))
        for b in state.backends:
            b.w *= 2.0
        rng = np.random.default_rng(2)
        seq = rng.integers(0, 6, 6)
        net = state.net
        net.reset_state()
        _check(state, (seq[:-1], seq[1:]))

    def test_small_cnn(self):
        c1 = ConvAsMatrix(3, 1, 2, (8, 8))
        spec = NetworkSpec([c1, FullyConnected(c1.output_size, 4, "softmax")])
        state = NetworkState(spec, TrainerConfig(mode=FP, seed=0))
        for b in state.backends:
            b.w *= 2.0
        x = np.random.default_rng(4).uniform(0, 1, 64)
        _check(state, (x, 1))


class TestTraining:
    def test_fp_step_reduces_loss(self):
        state = NetworkState(toy(), TrainerConfig(mode=FP, eta=0.5, seed=0))
        x = np.linspace(0, 1, 8)
        before, _ = fp_forward_backward(state.net, (x, 1))
        for _ in range(5):
            train_step(state, (x, 1))
        after, _ = fp_forward_backward(state.net, (x, 1))
        assert after < before

    def test_ideal_analog_expected_equals_fp(self):
        rng = np.random.default_rng(0)
        fp = NetworkState(toy(), TrainerConfig(mode=FP, eta=0.1, seed=5))
        an = NetworkState(toy(), TrainerConfig(mode=ANALOG_SGD, eta=0.1, seed=5, update_mode=EXPECTED),
                          DevicePopulationConfig.ideal(), PeripheryConfig.ideal())
        for _ in range(50):
            sample = (rng.uniform(0, 1, 8), int(rng.integers(0, 4)))
            assert train_step(fp, sample) == pytest.approx(train_step(an, sample), abs=1e-10)

    def test_tiki_taka_requires_calibration(self):
        state = NetworkState(toy(), TrainerConfig(mode=ANALOG_TIKI_TAKA, seed=0, calibrate=False))
        with pytest.raises(CalibrationError):
            train_step(state, (np.zeros(8), 0))
        allowed = NetworkState(toy(), TrainerConfig(mode=ANALOG_TIKI_TAKA, seed=0, calibrate=False,
                                                    allow_uncalibrated=True))
        train_step(allowed, (np.zeros(8), 0))

    def test_tiki_taka_initial_weights_in_c(self):
        state = NetworkState(toy(), TrainerConfig(mode=ANALOG_TIKI_TAKA, seed=0))
        for w0, b in zip(state.initial, state.backends):
            np.testing.assert_array_equal(b.layer.A.read_weights(), 0.0)
            np.testing.assert_allclose(b.layer.C.read_weights(), w0, atol=1e-6)
        assert len(state.calibration_stats) == 2

    @pytest.mark.parametrize("ns", [1, 3])
    def test_live_cycle_counters_match_formula(self, ns):
        from rpusim.tiki_taka import TikiTakaConfig

        samples = 7
        c1 = ConvAsMatrix(3, 1, 2, (8, 8))
        spec = NetworkSpec([c1, FullyConnected(c1.output_size, 4, "softmax")])
        state = NetworkState(spec, TrainerConfig(mode=ANALOG_TIKI_TAKA, seed=0), tiki=TikiTakaConfig(ns=ns))
        rng = np.random.default_rng(0)
        for _ in range(samples):
            train_step(state, (rng.uniform(0, 1, 64), 0))
        for counter, ws in zip(state.cycle_counters(), state.weight_sharing):
            assert counter.total_cycles == cycle_count("tikitaka", ns, samples, ws)
            assert counter.sgd_cycles == cycle_count("sgd", ns, samples, ws)
        assert state.weight_sharing == [36, 1]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainerConfig(mode="adam")
        with pytest.raises(ValueError):
            TrainerConfig(minibatch=4)
        with pytest.raises(ValueError):
            TrainerConfig(eta=0)
