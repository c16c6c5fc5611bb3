"""Finite-difference checks for every tape operation."""

import numpy as np

from gradcheck import max_rel_err, numeric_grad
from imvclust import tape
from imvclust.tape import Var


def check_unary(op, x, **kwargs):
    v = Var(np.asarray(x, dtype=np.float64), requires_grad=True)
    out = op(v, **kwargs)
    tape.backward(tape.vsum(out) if out.data.ndim else out)
    num = numeric_grad(lambda a: float(op(Var(a), **kwargs).data.sum()), x)
    assert max_rel_err(v.grad, num) < 1e-6


def test_elementwise_binary_ops():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(3, 4)) + 3.0
    for op in (tape.add, tape.sub, tape.mul, tape.div):
        va = Var(a.copy(), requires_grad=True)
        vb = Var(b.copy(), requires_grad=True)
        out = op(va, vb)
        tape.backward(tape.vsum(out))
        num_a = numeric_grad(lambda x: float(op(Var(x), Var(b)).data.sum()), a)
        num_b = numeric_grad(lambda x: float(op(Var(a), Var(x)).data.sum()), b)
        assert max_rel_err(va.grad, num_a) < 1e-6
        assert max_rel_err(vb.grad, num_b) < 1e-6


def test_broadcast_bias_add():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, 3))
    b = rng.normal(size=3)
    vx = Var(x, requires_grad=True)
    vb = Var(b, requires_grad=True)
    out = tape.mul(tape.add(vx, vb), tape.add(vx, vb))
    tape.backward(tape.vsum(out))
    num_b = numeric_grad(lambda bb: float(((x + bb) ** 2).sum()), b)
    assert vb.grad.shape == b.shape
    assert max_rel_err(vb.grad, num_b) < 1e-6


def test_matmul():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(3, 5))
    w = rng.normal(size=(5, 2))
    va = Var(a, requires_grad=True)
    vw = Var(w, requires_grad=True)
    out = tape.matmul(va, vw)
    tape.backward(tape.vsum(tape.mul(out, out)))
    num_a = numeric_grad(lambda x: float(((x @ w) ** 2).sum()), a)
    num_w = numeric_grad(lambda x: float(((a @ x) ** 2).sum()), w)
    assert max_rel_err(va.grad, num_a) < 1e-6
    assert max_rel_err(vw.grad, num_w) < 1e-6


def test_unary_ops():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(3, 4))
    check_unary(tape.relu, x)
    check_unary(tape.leaky_relu, x, slope=0.2)
    check_unary(tape.sigmoid, x)
    check_unary(tape.exp, x)
    check_unary(tape.neg, x)
    check_unary(tape.transpose, x)
    check_unary(tape.log, np.abs(x) + 0.5)
    check_unary(tape.sqrt, np.abs(x) + 0.5)


def test_softmax_rows_and_gradient():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(3, 5))
    v = Var(x, requires_grad=True)
    out = tape.softmax(v)
    assert np.allclose(out.data.sum(axis=1), 1.0, atol=1e-12)
    weights = rng.normal(size=(3, 5))
    tape.backward(tape.vsum(tape.mul(out, weights)))

    def f(a):
        e = np.exp(a - a.max(axis=1, keepdims=True))
        return float(((e / e.sum(axis=1, keepdims=True)) * weights).sum())

    assert max_rel_err(v.grad, numeric_grad(f, x)) < 1e-6


def test_reductions_and_axes():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(4, 3))
    for kwargs in ({}, {"axis": 0}, {"axis": 1}, {"axis": 0, "keepdims": True},
                   {"axis": 1, "keepdims": True}):
        v = Var(x.copy(), requires_grad=True)
        out = tape.vsum(tape.mul(tape.vmean(v, **kwargs), tape.vmean(v, **kwargs)))
        tape.backward(out)
        num = numeric_grad(
            lambda a: float((np.mean(a, **{k: v for k, v in kwargs.items()
                                           if k in ("axis", "keepdims")}) ** 2).sum()),
            x,
        )
        assert max_rel_err(v.grad, num) < 1e-6


def test_clamp_gradient_masks_clipped_entries():
    x = np.array([[-1.0, 0.5, 2.0]])
    v = Var(x, requires_grad=True)
    out = tape.clamp(v, lo=0.0, hi=1.0)
    tape.backward(tape.vsum(tape.mul(out, out)))
    assert np.allclose(v.grad, [[0.0, 1.0, 0.0]])


def test_take_rows_scatters_gradient():
    x = np.arange(12, dtype=np.float64).reshape(4, 3)
    v = Var(x, requires_grad=True)
    out = tape.take_rows(v, np.array([0, 2]))
    tape.backward(tape.vsum(out))
    expect = np.zeros_like(x)
    expect[[0, 2]] = 1.0
    assert np.array_equal(v.grad, expect)


def test_stopgrad_blocks_flow():
    v = Var(np.ones((2, 2)), requires_grad=True)
    out = tape.mul(tape.stopgrad(v), 3.0)
    tape.backward(tape.vsum(out))
    assert v.grad is None
    assert not out.requires_grad


def test_grad_accumulates_across_reuse():
    v = Var(np.array([2.0]), requires_grad=True)
    out = tape.add(tape.mul(v, v), tape.mul(v, 3.0))  # x^2 + 3x
    tape.backward(out)
    assert np.allclose(v.grad, [7.0])


def test_untracked_graph_is_free():
    v = Var(np.ones((2, 2)))  # requires_grad False
    out = tape.matmul(v, v)
    assert not out.requires_grad
    assert out._parents == ()


def test_reshape():
    x = np.arange(6, dtype=np.float64).reshape(2, 3)
    v = Var(x, requires_grad=True)
    out = tape.reshape(v, (6,))
    tape.backward(tape.vsum(tape.mul(out, out)))
    assert v.grad.shape == (2, 3)
    assert np.allclose(v.grad, 2 * x)
