import numpy as np
import pytest

from hbfkit import autodiff as ad
from hbfkit.autodiff import GradientNanError, Tensor, grad_check


def leafs(rng, *shapes):
    return [Tensor(rng.standard_normal(s)) for s in shapes]


class TestBasics:
    def test_add_mul_chain(self):
        x, y = Tensor(3.0), Tensor(4.0)
        z = (x * y) * (x * y)
        z.backward()
        assert x.grad == pytest.approx(2 * 3 * 16)
        assert y.grad == pytest.approx(2 * 4 * 9)

    def test_broadcast_add(self, rng):
        x, b = Tensor(rng.standard_normal((5, 3))), Tensor(rng.standard_normal(3))
        loss = ad.tsum(x + b)
        loss.backward()
        assert np.allclose(b.grad, 5.0)
        assert np.allclose(x.grad, 1.0)

    def test_matmul_grads(self, rng):
        a, b = leafs(rng, (4, 3), (3, 2))
        loss = ad.tsum(a @ b)
        err = grad_check(lambda: ad.tsum(a @ b), [a, b])
        assert err < 1e-6
        del loss

    def test_batched_matmul_broadcast(self, rng):
        a = Tensor(rng.standard_normal((1, 5, 2, 3)))
        b = Tensor(rng.standard_normal((4, 1, 3, 2)))
        err = grad_check(lambda: ad.tsum((a @ b) * (a @ b)), [a, b])
        assert err < 1e-6

    def test_div_sub(self, rng):
        a, b = leafs(rng, (3,), (3,))
        b.data = np.abs(b.data) + 1.0
        err = grad_check(lambda: ad.tsum((a - 2.0) / b), [a, b])
        assert err < 1e-6

    def test_leaky_relu_slopes(self):
        x = Tensor(np.array([-1.0, 0.0, 2.0]))
        y = ad.leaky_relu(x, 0.01)
        assert np.allclose(y.data, [-0.01, 0.0, 2.0])
        ad.tsum(y).backward()
        assert np.allclose(x.grad, [0.01, 0.01, 1.0])

    def test_log_exp_sqrt(self, rng):
        x = Tensor(np.abs(rng.standard_normal(6)) + 0.5)
        err = grad_check(lambda: ad.tsum(ad.log(x) + ad.exp(x) + ad.sqrt(x)), [x])
        assert err < 1e-6

    def test_log2_value(self):
        x = Tensor(np.array([8.0]))
        assert ad.log2(x).data[0] == pytest.approx(3.0)

    def test_take_and_concat(self, rng):
        x = Tensor(rng.standard_normal((4, 6)))
        def build():
            parts = [x[:, :2], x[:, 2:]]
            return ad.tsum(ad.concat(parts, axis=1) * ad.concat(parts, axis=1))
        assert grad_check(build, [x]) < 1e-6

    def test_swapaxes_reshape(self, rng):
        x = Tensor(rng.standard_normal((3, 4)))
        def build():
            y = ad.swapaxes(x, 0, 1)
            return ad.tsum(ad.reshape(y, (2, 6)) * 3.0)
        assert grad_check(build, [x]) < 1e-6

    def test_mean_keepdims(self, rng):
        x = Tensor(rng.standard_normal((5, 3)))
        def build():
            m = ad.tmean(x, axis=0, keepdims=True)
            c = x - m
            return ad.tsum(c * c)
        assert grad_check(build, [x]) < 1e-6


class TestSoftmax:
    def test_rows_sum_to_one_and_positive(self, rng):
        x = Tensor(rng.standard_normal((6, 5)) * 10)
        p = ad.softmax(x)
        assert np.allclose(p.data.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p.data > 0)

    def test_equal_logits_uniform(self):
        p = ad.softmax(Tensor(np.zeros((2, 8))))
        assert np.allclose(p.data, 1.0 / 8)

    def test_jacobian_rows_sum_to_zero(self):
        x = Tensor(np.array([[0.3, -1.2, 2.0]]))
        p = ad.softmax(x)
        ad.tsum(p * np.array([[1.0, 0.0, 0.0]])).backward()
        # gradient of p_0 wrt logits sums to zero (shift invariance)
        assert x.grad.sum() == pytest.approx(0.0, abs=1e-12)

    def test_gradcheck(self, rng):
        x = Tensor(rng.standard_normal((3, 4)))
        w = Tensor(rng.standard_normal((4,)))
        def build():
            return ad.tsum(ad.softmax(x) * ad.exp(w))
        assert grad_check(build, [x, w]) < 1e-6


class TestBackwardMechanics:
    def test_non_scalar_backward_rejected(self, rng):
        x = Tensor(rng.standard_normal((3,)))
        with pytest.raises(ValueError):
            (x * 2).backward()

    def test_nan_gradient_aborts_with_node(self):
        x = Tensor(np.array([0.0]))
        with np.errstate(divide="ignore", invalid="ignore"):
            y = ad.log(x)  # -inf value; gradient through log is 0/0
            z = ad.tsum(y * 0.0)
            with pytest.raises(GradientNanError) as err:
                z.backward()
        assert err.value.op == "log"

    def test_grad_reset_between_backwards(self):
        x = Tensor(np.array([2.0]))
        for _ in range(2):
            loss = ad.tsum(x * x)
            loss.backward()
        assert x.grad[0] == pytest.approx(4.0)

    def test_shared_subgraph_accumulates_once(self):
        x = Tensor(np.array([3.0]))
        shared = x * 2.0
        loss = ad.tsum(shared + shared)
        loss.backward()
        assert x.grad[0] == pytest.approx(4.0)
