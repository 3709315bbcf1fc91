"""Layer tests: conv/transposed-conv hand values and adjointness, LSTM cell math,
transformer contracts, finite-difference checks for all of them."""

import numpy as np
import pytest

from robustkd import nn, rng as R
from robustkd.errors import ConfigError, ShapeError
from robustkd.nn import BiLSTM, LSTMDirection, TransformerLayer, conv1d, conv_transpose1d
from robustkd.tensor import Tensor, gradcheck


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class TestConv1d:
    def test_identity_kernel(self, rng):
        x = rng.normal(size=(1, 8))
        out = conv1d(Tensor(x), Tensor(np.ones((1, 1, 1))), None, stride=1)
        assert np.allclose(out.data, x)

    def test_hand_value(self):
        x = Tensor([[1.0, 2.0, 3.0, 4.0]])
        k = Tensor(np.ones((1, 1, 2)))
        out = conv1d(x, k, None, stride=2)
        assert np.allclose(out.data, [[3.0, 7.0]])

    def test_output_length_formula(self, rng):
        x = Tensor(rng.normal(size=(2, 3, 20)))
        k = Tensor(rng.normal(size=(5, 3, 4)))
        out = conv1d(x, k, None, stride=3, padding=2)
        assert out.shape == (2, 5, (20 + 4 - 4) // 3 + 1)

    def test_too_short_raises(self, rng):
        with pytest.raises(ShapeError):
            conv1d(Tensor(rng.normal(size=(1, 2))), Tensor(np.ones((1, 1, 5))), None, stride=1)

    def test_gradcheck(self, rng):
        x = rng.normal(size=(1, 2, 10))
        k = rng.normal(size=(3, 2, 3))
        b = rng.normal(size=3)
        err = gradcheck(
            lambda xx, kk, bb: conv1d(xx, kk, bb, stride=2, padding=1).square().sum(),
            [x, k, b],
            rtol=1e-6,
        )
        assert err < 1e-6


class TestConvTranspose1d:
    def test_identity_kernel(self, rng):
        x = rng.normal(size=(1, 6))
        out = conv_transpose1d(Tensor(x), Tensor(np.ones((1, 1, 1))), None, stride=1)
        assert np.allclose(out.data, x)

    def test_hand_value(self):
        x = Tensor([[1.0, 2.0]])
        k = Tensor(np.ones((1, 1, 2)))
        out = conv_transpose1d(x, k, None, stride=2)
        assert np.allclose(out.data, [[1.0, 1.0, 2.0, 2.0]])

    def test_empty_input_raises(self):
        with pytest.raises(ShapeError):
            conv_transpose1d(Tensor(np.zeros((1, 0))), Tensor(np.ones((1, 1, 2))), None, stride=1)

    def test_adjoint_of_conv1d(self, rng):
        # <conv1d(x), y> == <x, conv_transpose1d(y)> with the same kernel array
        c_in, c_out, width, stride, t = 3, 4, 5, 2, 17
        k = rng.normal(size=(c_out, c_in, width))
        x = rng.normal(size=(c_in, t))
        t_out = (t - width) // stride + 1
        y = rng.normal(size=(c_out, t_out))
        cx = conv1d(Tensor(x), Tensor(k), None, stride=stride).data
        # kernel reinterpreted as [c_in'=c_out, c_out'=c_in, width]
        cty = conv_transpose1d(Tensor(y), Tensor(k), None, stride=stride).data[:, :t]
        lhs = float((cx * y).sum())
        rhs = float((x * cty).sum())
        assert abs(lhs - rhs) / max(abs(lhs), 1e-30) < 1e-10

    def test_gradcheck(self, rng):
        x = rng.normal(size=(1, 2, 5))
        k = rng.normal(size=(2, 3, 4))
        b = rng.normal(size=3)
        err = gradcheck(
            lambda xx, kk, bb: conv_transpose1d(xx, kk, bb, stride=2).square().sum(),
            [x, k, b],
            rtol=1e-6,
        )
        assert err < 1e-6


class TestLSTM:
    def test_zero_weights_zero_output(self):
        cell = LSTMDirection(2, 3, np.random.default_rng(0), reverse=False)
        cell.w_ih.data[:] = 0.0
        cell.w_hh.data[:] = 0.0
        cell.bias.data[:] = 0.0
        out = cell(Tensor(np.ones((1, 4, 2))))
        assert np.allclose(out.data, 0.0)

    def test_hand_single_step(self):
        # 1-unit cell, x=1, all weights 1, biases 0:
        # h = sigmoid(1) * tanh(sigmoid(1) * tanh(1))
        cell = LSTMDirection(1, 1, np.random.default_rng(0), reverse=False)
        cell.w_ih.data[:] = 1.0
        cell.w_hh.data[:] = 1.0
        cell.bias.data[:] = 0.0
        out = cell(Tensor(np.ones((1, 1, 1))))
        expected = sigmoid(1.0) * np.tanh(sigmoid(1.0) * np.tanh(1.0))
        assert out.data[0, 0, 0] == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.3696, abs=5e-5)

    def test_forget_bias_initialized_to_one(self):
        cell = LSTMDirection(2, 4, np.random.default_rng(0), reverse=False)
        assert np.allclose(cell.bias.data[4:8], 1.0)
        assert np.allclose(cell.bias.data[:4], 0.0)

    def test_bilstm_shape_and_length(self, rng):
        net = BiLSTM(3, 2, layers=3, rng_for=lambda name: R.stream(0, "bilstm", name))
        out = net(Tensor(rng.normal(size=(2, 5, 3))))
        assert out.shape == (2, 5, 4)

    def test_bilstm_rejects_empty_time(self):
        net = BiLSTM(3, 2, layers=1, rng_for=lambda name: R.stream(0, "bilstm", name))
        with pytest.raises(ShapeError):
            net(Tensor(np.zeros((1, 0, 3))))

    def test_bilstm_reverse_direction_sees_future(self, rng):
        # perturbing the last frame must change the first output frame of the
        # backward direction but not of the forward direction
        net = BiLSTM(2, 2, layers=1, rng_for=lambda name: R.stream(3, "bilstm", name))
        x = rng.normal(size=(1, 6, 2))
        base = net(Tensor(x)).data
        x2 = x.copy()
        x2[0, -1, :] += 1.0
        pert = net(Tensor(x2)).data
        assert np.allclose(base[0, 0, :2], pert[0, 0, :2])  # forward half
        assert not np.allclose(base[0, 0, 2:], pert[0, 0, 2:])  # backward half

    def test_gradcheck(self, rng):
        net = BiLSTM(2, 2, layers=1, rng_for=lambda name: R.stream(1, "bilstm", name))
        x = rng.normal(size=(1, 3, 2))

        def f(xx, w_ih, w_hh, b):
            net.dirs[0].w_ih = w_ih
            net.dirs[0].w_hh = w_hh
            net.dirs[0].bias = b
            return net(xx).square().sum()

        err = gradcheck(
            f,
            [x, net.dirs[0].w_ih.data.copy(), net.dirs[0].w_hh.data.copy(), net.dirs[0].bias.data.copy()],
            rtol=1e-5,
        )
        assert err < 1e-5


class TestTransformerLayer:
    def make(self, dim=8, heads=2, ffn=16, seed=0):
        return TransformerLayer(dim, heads, ffn, rng_for=lambda name: R.stream(seed, "tl", name))

    def test_head_divisibility(self):
        with pytest.raises(ConfigError):
            self.make(dim=7, heads=2)

    def test_shape_preserving_and_row_stochastic(self, rng):
        layer = self.make()
        x = Tensor(rng.normal(size=(2, 5, 8)))
        out, attn = layer(x, return_attn=True)
        assert out.shape == (2, 5, 8)
        assert np.allclose(attn.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_zero_value_projection_leaves_ffn_path(self, rng):
        layer = self.make()
        layer.wv.weight.data[:] = 0.0
        layer.wv.bias.data[:] = 0.0
        layer.wo.weight.data[:] = 0.0
        layer.wo.bias.data[:] = 0.0
        x = Tensor(rng.normal(size=(1, 4, 8)))
        out = layer(x)
        normed = layer.ln1(x)
        expected = layer.ln2(normed + layer.ffn2(layer.ffn1(normed).gelu()))
        assert np.allclose(out.data, expected.data)

    def test_gradcheck(self, rng):
        # contract with random weights: sum-of-squares of layer-norm output is
        # near-constant, which starves finite differences of signal
        layer = self.make(dim=8, heads=2, ffn=8, seed=2)
        x = rng.normal(size=(1, 4, 8))
        w = rng.normal(size=(1, 4, 8))
        err = gradcheck(lambda xx: (layer(xx) * w).sum(), [x], rtol=1e-5)
        assert err < 1e-5

    def test_gradcheck_through_weights(self, rng):
        layer = self.make(dim=4, heads=2, ffn=4, seed=3)
        x = Tensor(rng.normal(size=(1, 3, 4)))
        w = rng.normal(size=(1, 3, 4))

        def f(wq):
            layer.wq.weight = wq
            return (layer(x) * w).sum()

        err = gradcheck(f, [layer.wq.weight.data.copy()], rtol=1e-5)
        assert err < 1e-5


class TestModule:
    def test_named_parameters_nested(self):
        layer = TransformerLayer(4, 2, 8, rng_for=lambda name: R.stream(0, "m", name))
        names = dict(layer.named_parameters())
        assert "wq.weight" in names and "ln2.beta" in names

    def test_freeze_and_count(self):
        lin = nn.Linear(4, 3, R.stream(0, "lin"))
        assert lin.num_trainable() == 4 * 3 + 3
        lin.freeze()
        assert lin.num_trainable() == 0

    def test_state_roundtrip(self):
        a = nn.Linear(4, 3, R.stream(0, "a"))
        b = nn.Linear(4, 3, R.stream(1, "b"))
        b.load_state(a.state_arrays())
        assert np.allclose(a.weight.data, b.weight.data)
        with pytest.raises(ShapeError):
            b.load_state({"weight": np.zeros((2, 2)), "bias": np.zeros(3)})
