"""Engine-level tests: op semantics, broadcasting, graph rules, gradient checks."""

import numpy as np
import pytest

from robustkd import tensor as T
from robustkd.errors import DomainError, GraphError, NumericError, ShapeError
from robustkd.tensor import Tensor, gradcheck


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class TestElementwise:
    def test_sigmoid_at_zero(self):
        assert Tensor([0.0]).sigmoid().data == pytest.approx([0.5])

    def test_gelu_at_zero(self):
        assert Tensor([0.0]).gelu().data == pytest.approx([0.0], abs=1e-15)

    def test_add_values_and_grads(self):
        a = Tensor([1.0, 2.0], requires_grad=True)
        b = Tensor([3.0, 4.0], requires_grad=True)
        out = (a + b).sum()
        assert np.allclose(out.data, 10.0)
        out.backward()
        assert np.allclose(a.grad, [1.0, 1.0])
        assert np.allclose(b.grad, [1.0, 1.0])

    def test_shape_mismatch_raises(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones(3)) + Tensor(np.ones(4))

    def test_log_domain(self):
        with pytest.raises(DomainError):
            Tensor([0.0]).log()
        with pytest.raises(DomainError):
            Tensor([-1.0]).log()

    def test_divide_by_zero(self):
        with pytest.raises(DomainError):
            Tensor([1.0]) / Tensor([0.0])

    def test_nan_rejected_at_construction(self):
        with pytest.raises(NumericError):
            Tensor([np.nan])

    def test_broadcast_grad_reduction(self, rng):
        # gradient of a broadcast operand must be summed over broadcast axes
        a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(3,)), requires_grad=True)
        (a * b).sum().backward()
        assert b.grad.shape == (3,)
        assert np.allclose(b.grad, a.data.sum(axis=0))

    @pytest.mark.parametrize("shape_a,shape_b", [((2, 3), (2, 3)), ((2, 3), (3,)), ((4, 1, 3), (2, 3))])
    def test_gradcheck_mul_div(self, rng, shape_a, shape_b):
        a = rng.normal(size=shape_a)
        b = rng.normal(size=shape_b) + 3.0
        gradcheck(lambda x, y: (x * y).sum() + (x / y).sum(), [a, b])

    @pytest.mark.parametrize(
        "op",
        ["abs", "exp", "sigmoid", "tanh", "gelu", "square"],
    )
    def test_gradcheck_unary(self, rng, op):
        x = rng.normal(size=(3, 4)) + 0.1
        gradcheck(lambda t: getattr(t, op)().sum(), [x])

    def test_gradcheck_log_sqrt(self, rng):
        x = rng.uniform(0.5, 2.0, size=(3, 4))
        gradcheck(lambda t: t.log().sum(), [x])
        gradcheck(lambda t: t.sqrt().sum(), [x])


class TestMatmul:
    def test_identity(self, rng):
        a = rng.normal(size=(3, 3))
        out = Tensor(a) @ Tensor(np.eye(3))
        assert np.allclose(out.data, a)

    def test_hand_product(self):
        out = Tensor([[1.0, 2.0], [3.0, 4.0]]) @ Tensor([[5.0, 6.0], [7.0, 8.0]])
        assert np.allclose(out.data, [[19.0, 22.0], [43.0, 50.0]])

    def test_inner_dim_mismatch(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones((2, 3))) @ Tensor(np.ones((4, 2)))

    def test_gradcheck_rect(self, rng):
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4, 2))
        err = gradcheck(lambda x, y: (x @ y).sum(), [a, b], rtol=1e-6)
        assert err < 1e-6

    def test_gradcheck_batched(self, rng):
        a = rng.normal(size=(2, 3, 4))
        b = rng.normal(size=(4, 5))
        gradcheck(lambda x, y: ((x @ y).tanh()).sum(), [a, b])


class TestGraphSemantics:
    def test_backward_in_reverse_creation_order(self):
        # diamond: both branches feed the output; grads must accumulate once each
        x = Tensor([2.0], requires_grad=True)
        y = x * 3.0
        z = x * 4.0
        out = (y + z).sum()
        out.backward()
        assert np.allclose(x.grad, [7.0])

    def test_double_backward_rejected(self):
        x = Tensor([2.0], requires_grad=True)
        out = (x * x).sum()
        out.backward()
        with pytest.raises(GraphError):
            out.backward()

    def test_shared_subgraph_double_backward_rejected(self):
        x = Tensor([2.0], requires_grad=True)
        mid = x * x
        a = mid.sum()
        b = (mid * 2.0).sum()
        a.backward()
        with pytest.raises(GraphError):
            b.backward()

    def test_fresh_forward_allows_new_backward(self):
        x = Tensor([2.0], requires_grad=True)
        (x * x).sum().backward()
        x.zero_grad()
        (x * x).sum().backward()
        assert np.allclose(x.grad, [4.0])

    def test_no_grad_builds_constants(self):
        x = Tensor([1.0], requires_grad=True)
        with T.no_grad():
            out = (x * 2.0).sum()
        assert out._backward is None

    def test_leaf_reusable_after_backward(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        (x * 2.0).sum().backward()
        x.zero_grad()
        (x * 3.0).sum().backward()
        assert np.allclose(x.grad, [3.0, 3.0])


class TestStructuralOps:
    def test_reshape_transpose_roundtrip(self, rng):
        x = rng.normal(size=(2, 3, 4))
        gradcheck(lambda t: t.reshape(6, 4).transpose(1, 0).sum(), [x])

    def test_slice_grad_scatter(self):
        x = Tensor(np.arange(6, dtype=float).reshape(2, 3), requires_grad=True)
        x[:, 1:].sum().backward()
        assert np.allclose(x.grad, [[0, 1, 1], [0, 1, 1]])

    def test_concat_and_stack(self, rng):
        a = rng.normal(size=(2, 3))
        b = rng.normal(size=(2, 3))
        gradcheck(lambda x, y: T.concat([x, y], axis=1).square().sum(), [a, b])
        out = T.stack([Tensor(a), Tensor(b)], axis=1)
        assert out.shape == (2, 2, 3)

    def test_frames_overlap_add_adjoint(self, rng):
        # <frames(x), y> == <x, overlap_add(y)> defines the adjoint pair
        x = rng.normal(size=12)
        y = rng.normal(size=(5, 4))  # win 4, hop 2 -> 5 frames
        fx = T.frames(Tensor(x), 4, 2)
        oy = T.overlap_add(Tensor(y), 2, 12)
        lhs = float((fx.data * y).sum())
        rhs = float((x * oy.data).sum())
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_frames_gradcheck(self, rng):
        x = rng.normal(size=10)
        gradcheck(lambda t: T.frames(t, 4, 3).square().sum(), [x])

    def test_overlap_add_gradcheck(self, rng):
        f = rng.normal(size=(3, 4))
        gradcheck(lambda t: T.overlap_add(t, 2, 10).square().sum(), [f])

    def test_pad_gradcheck(self, rng):
        x = rng.normal(size=(2, 5))
        gradcheck(lambda t: T.pad_last(t, 2, 3).square().sum(), [x])

    def test_sum_axis_keepdims(self, rng):
        x = rng.normal(size=(2, 3, 4))
        gradcheck(lambda t: (t.sum(axis=1, keepdims=True) * t).sum(), [x])
        gradcheck(lambda t: t.mean(axis=(1, 2)).square().sum(), [x])


class TestComposites:
    def test_softmax_rows_sum_to_one(self, rng):
        x = Tensor(rng.normal(size=(5, 7)) * 3.0)
        s = T.softmax(x, axis=-1)
        assert np.allclose(s.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_softmax_gradcheck(self, rng):
        x = rng.normal(size=(3, 5))
        w = rng.normal(size=(3, 5))
        gradcheck(lambda t: (T.softmax(t, axis=-1) * w).sum(), [x])

    def test_log_softmax_matches_log_of_softmax(self, rng):
        x = Tensor(rng.normal(size=(4, 6)))
        assert np.allclose(T.log_softmax(x).data, np.log(T.softmax(x).data))
