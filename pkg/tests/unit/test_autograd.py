"""
Unit tests for the tensor autodiff module
Pure numpy: no files, no training loops
"""
import numpy as np
import pytest

from funlora.autograd import (
    Tensor,
    active_record,
    add,
    backward,
    concat,
    cos,
    elementwise,
    getitem,
    grad_check,
    matmul,
    mul,
    no_grad,
    pow_by,
    recording,
    reduce,
    reshape,
    sign,
    silu,
    sin,
    softmax_cross_entropy,
    sub,
    transpose,
)
from funlora.autograd.optim import SGD, Adam, one_cycle_lr
from funlora.exceptions import AutodiffError, ShapeError


class TestForwardOps:
    """Forward values and shape checking"""

    def test_matmul_values(self):
        """matmul matches numpy"""
        a = np.arange(6.0).reshape(2, 3)
        b = np.arange(12.0).reshape(3, 4)
        np.testing.assert_array_equal(matmul(a, b).data, a @ b)

    def test_matmul_inner_dimension_mismatch(self):
        """Mismatched inner dimensions raise ShapeError"""
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_add_requires_equal_shapes_or_scalar(self):
        """Only scalar broadcasting is allowed"""
        with pytest.raises(ShapeError):
            Tensor(np.ones((2, 2))) + Tensor(np.ones(2))
        np.testing.assert_array_equal((Tensor(np.ones((2, 2))) + 1.0).data, np.full((2, 2), 2.0))

    def test_reshape_preserves_row_major_order(self):
        """Reshape keeps element order"""
        t = reshape(np.arange(6.0), (2, 3))
        np.testing.assert_array_equal(t.data, [[0, 1, 2], [3, 4, 5]])
        with pytest.raises(ShapeError):
            reshape(np.arange(6.0), (4, 2))

    def test_reduce_unknown_op(self):
        """Only sum and mean reductions exist"""
        with pytest.raises(ValueError):
            reduce("max", np.ones(3))

    def test_mean_over_axis_zero(self):
        """Column means of [[1, 3], [5, 7]]"""
        np.testing.assert_array_equal(reduce("mean", np.array([[1.0, 3.0], [5.0, 7.0]]), axis=0).data, [3.0, 5.0])

    def test_signed_square_root(self):
        """sign(-4) * |-4| ** 0.5 = -2"""
        x = np.array([-4.0])
        value = mul(sign(x), pow_by(elementwise("abs", x), 0.5))
        np.testing.assert_array_equal(value.data, [-2.0])

    def test_elementwise_dispatch(self):
        """elementwise routes by name"""
        x = np.array([0.5, 2.0])
        np.testing.assert_allclose(elementwise("cos", x).data, np.cos(x))
        np.testing.assert_allclose(elementwise("pow_by", x, e=3.0).data, x ** 3)
        np.testing.assert_allclose(elementwise("scale", x, c=-2.0).data, -2.0 * x)
        with pytest.raises(ValueError):
            elementwise("tanh", x)


class TestBackward:
    """Reverse-mode gradients"""

    def test_matmul_gradients(self):
        """d sum(AB) / dA = 1 B^T"""
        A = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        B = Tensor(np.arange(12.0).reshape(3, 4), requires_grad=True)
        with recording():
            grads = backward(reduce("sum", matmul(A, B)))
        np.testing.assert_allclose(grads[A], np.ones((2, 4)) @ B.data.T)
        np.testing.assert_allclose(grads[B], A.data.T @ np.ones((2, 4)))

    def test_getitem_scatter_adds_repeated_indices(self):
        """A repeated index receives the sum of its gradients"""
        x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
        with recording():
            grads = backward(reduce("sum", getitem(x, np.array([0, 0, 2]))))
        np.testing.assert_array_equal(grads[x], [2.0, 0.0, 1.0])

    def test_concat_splits_gradient(self):
        """concat hands each input its own slice"""
        a = Tensor(np.ones((2, 1)), requires_grad=True)
        b = Tensor(np.ones((2, 2)), requires_grad=True)
        weights = Tensor(np.arange(6.0).reshape(2, 3))
        with recording():
            grads = backward(reduce("sum", mul(concat([a, b], axis=1), weights)))
        np.testing.assert_array_equal(grads[a], [[0.0], [3.0]])
        np.testing.assert_array_equal(grads[b], [[1.0, 2.0], [4.0, 5.0]])

    def test_scalar_broadcast_gradient_is_summed(self):
        """A scalar operand gets the total gradient"""
        s = Tensor(2.0, requires_grad=True)
        x = Tensor(np.arange(4.0))
        with recording():
            grads = backward(reduce("sum", mul(s, x)))
        assert grads[s].shape == ()
        assert float(grads[s]) == pytest.approx(6.0)

    def test_squared_error_gradient(self):
        """mean((W x - y)^2) at W=2, x=1, y=0 has dL/dW = 4"""
        W = Tensor(np.array([2.0]), requires_grad=True)
        with recording():
            grads = backward(reduce("mean", pow_by(sub(mul(W, 1.0), 0.0), 2.0)))
        np.testing.assert_allclose(grads[W], [4.0])

    def test_backward_is_linear(self, rng):
        """The gradient of a sum of losses is the sum of their gradients"""
        x = Tensor(rng.standard_normal(5), requires_grad=True)
        with recording():
            first = backward(reduce("sum", cos(x)))
        with recording():
            second = backward(reduce("sum", mul(x, x)))
        with recording():
            joint = backward(add(reduce("sum", cos(x)), reduce("sum", mul(x, x))))
        np.testing.assert_array_equal(joint[x], second[x] + first[x])

    def test_seeded_forward_backward_is_bit_identical(self):
        """Same seed, same bytes for values and gradients"""

        def run():
            rng = np.random.default_rng(11)
            W = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
            x = Tensor(rng.standard_normal((6, 4)))
            with recording():
                loss = reduce("mean", silu(matmul(x, W)))
                grads = backward(loss)
            return loss.data.tobytes(), grads[W].tobytes()

        assert run() == run()

    def test_operations_outside_recording_leave_no_trace(self):
        """Without an active record nothing is appended anywhere"""
        x = Tensor(np.ones(3), requires_grad=True)
        assert active_record() is None
        for _ in range(3):
            y = cos(x)
        assert y.node is None
        assert backward(reduce("sum", y)) == {}

    def test_backward_needs_scalar(self):
        """Non-scalar loss is rejected"""
        x = Tensor(np.ones(3), requires_grad=True)
        with recording():
            with pytest.raises(AutodiffError):
                backward(cos(x))

    def test_cleared_record_detaches_loss(self):
        """backward on a loss whose record was cleared fails"""
        x = Tensor(np.ones(3), requires_grad=True)
        with recording():
            loss = reduce("sum", cos(x))
        with pytest.raises(AutodiffError):
            backward(loss)

    def test_no_grad_records_nothing(self):
        """Operations under no_grad produce untracked results"""
        x = Tensor(np.ones(3), requires_grad=True)
        with recording() as record:
            with no_grad():
                y = cos(x)
            assert len(record) == 0
        assert y.node is None

    def test_gradients_accumulate_in_leaf(self):
        """Two backward passes add into .grad"""
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        for _ in range(2):
            with recording():
                backward(reduce("sum", mul(x, x)))
        np.testing.assert_allclose(x.grad, 2 * 2 * x.data)

    def test_softmax_cross_entropy_gradient(self):
        """Gradient is (softmax - onehot) / m"""
        logits = Tensor(np.array([[1.0, 2.0, 0.5], [0.1, 0.2, 0.3]]), requires_grad=True)
        targets = [1, 2]
        with recording():
            grads = backward(softmax_cross_entropy(logits, targets))
        probs = np.exp(logits.data) / np.exp(logits.data).sum(axis=1, keepdims=True)
        probs[[0, 1], targets] -= 1.0
        np.testing.assert_allclose(grads[logits], probs / 2)


class TestGradCheck:
    """Central differences against the analytic gradients"""

    def test_composite_function(self, rng):
        """silu, cos, transpose, matmul and pow_by compose correctly"""
        W = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        x = Tensor(rng.standard_normal((5, 4)))

        def f():
            h = silu(matmul(x, transpose(W)))
            return reduce("mean", pow_by(cos(h), 2.0))

        assert grad_check(f, [W]) < 1e-6

    def test_trainable_exponent(self, rng):
        """pow_by with a tensor exponent differentiates in both arguments"""
        base = Tensor(rng.uniform(0.5, 2.0, (3, 3)), requires_grad=True)
        e = Tensor(np.array([1.7]), requires_grad=True)
        assert grad_check(lambda: reduce("sum", pow_by(base, e)), [base, e]) < 1e-6

    @pytest.mark.parametrize("op", ["sin", "abs", "sign", "cos"])
    def test_unary_ops_on_random_inputs(self, op, rng):
        """Element-wise ops on entries drawn from [-2, 2]"""
        x = Tensor(rng.uniform(-2.0, 2.0, (4, 3)), requires_grad=True)
        weights = Tensor(rng.standard_normal((4, 3)))
        assert grad_check(lambda: reduce("sum", mul(elementwise(op, x), weights)), [x]) < 1e-6

    @pytest.mark.parametrize("op", ["sum", "mean"])
    @pytest.mark.parametrize("axis", [0, 1, None])
    def test_reductions_on_random_inputs(self, op, axis, rng):
        """Axis reductions fan the gradient back out"""
        x = Tensor(rng.uniform(-2.0, 2.0, (4, 3)), requires_grad=True)
        reduced_shape = np.asarray(x.data.sum(axis=axis)).shape
        weights = Tensor(rng.standard_normal(reduced_shape))
        assert grad_check(lambda: reduce("sum", mul(reduce(op, x, axis), weights)), [x]) < 1e-6

    def test_non_positive_eps(self):
        """eps must be positive"""
        x = Tensor(np.ones(2), requires_grad=True)
        with pytest.raises(ValueError):
            grad_check(lambda: reduce("sum", x), [x], eps=0.0)

    def test_non_finite_loss(self):
        """Non-finite values abort the check"""
        x = Tensor(np.array([-1.0]), requires_grad=True)
        with pytest.raises(AutodiffError):
            grad_check(lambda: reduce("sum", pow_by(x, 0.5)), [x])


class TestOptimizers:
    """Adam warm-up, SGD and the one-cycle schedule"""

    def test_adam_linear_warmup(self):
        """Learning rate ramps linearly to its base value"""
        x = Tensor(np.zeros(1), requires_grad=True)
        opt = Adam([x], lr=1.0, warmup_steps=4)
        seen = []
        for _ in range(6):
            seen.append(opt.current_lr())
            x.grad = np.ones(1)
            opt.step()
        assert seen == pytest.approx([0.25, 0.5, 0.75, 1.0, 1.0, 1.0])

    def test_adam_minimizes_quadratic(self):
        """Adam drives (x - 3)^2 towards its minimum"""
        x = Tensor(np.zeros(1), requires_grad=True)
        opt = Adam([x], lr=0.1)
        for _ in range(500):
            opt.zero_grad()
            with recording():
                backward(reduce("sum", pow_by(x - 3.0, 2.0)))
            opt.step()
        assert x.data[0] == pytest.approx(3.0, abs=5e-2)

    def test_sgd_skips_parameters_without_gradient(self):
        """Parameters with no gradient are left alone"""
        x = Tensor(np.ones(2), requires_grad=True)
        SGD([x], lr=0.1, momentum=0.9).step()
        np.testing.assert_array_equal(x.data, np.ones(2))

    def test_sgd_weight_decay(self):
        """Weight decay adds lambda * x to the gradient"""
        x = Tensor(np.array([2.0]), requires_grad=True)
        x.grad = np.zeros(1)
        SGD([x], lr=0.5, weight_decay=0.1).step()
        assert x.data[0] == pytest.approx(2.0 - 0.5 * 0.2)

    def test_one_cycle_shape(self):
        """Starts at the initial rate, peaks at max_lr, ends near zero"""
        total = 100
        rates = [one_cycle_lr(s, total, max_lr=0.1, initial_lr=0.01) for s in range(total)]
        assert rates[0] == pytest.approx(0.01)
        assert max(rates) == pytest.approx(0.1)
        assert rates.index(max(rates)) == 30
        assert rates[-1] < 0.01


if __name__ == "__main__":
    pytest.main([__file__])
