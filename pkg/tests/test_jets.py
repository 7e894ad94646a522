import numpy as np
import pytest

from twophase_dnn import kernels
from twophase_dnn.jets import (Jet, JetDomainError, JetOverflowError, Tape, TapeError, Var, affine, cos,
                               exp, input_jets, jet_binary, jet_unary, jet_var, no_tape, sin,
                               tape_backward, tanh)


def fd_jet(f, p, h=1e-4):
    """Central-difference gradient and Hessian of scalar f at 3-vector p."""
    p = np.asarray(p, float)
    g = np.zeros(3)
    H = np.zeros((3, 3))
    f0 = f(p)
    for a in range(3):
        e = np.eye(3)[a] * h
        g[a] = (f(p + e) - f(p - e)) / (2 * h)
        H[a, a] = (f(p + e) - 2 * f0 + f(p - e)) / h ** 2
        for b in range(a + 1, 3):
            e2 = np.eye(3)[b] * h
            H[a, b] = H[b, a] = (f(p + e + e2) - f(p + e - e2) - f(p - e + e2) + f(p - e - e2)) / (4 * h * h)
    return g, H


@pytest.mark.parametrize("value,axis", [(3.0, 0), (0.0, 2), (1.5, 1)])
def test_jet_var_seeds_unit_gradient(value, axis):
    j = jet_var(value, axis)
    assert j.value == value
    assert np.array_equal(j.grad, np.eye(3)[axis])
    assert np.array_equal(j.hess, np.zeros((3, 3)))


def test_jet_var_rejects_bad_axis():
    with pytest.raises(ValueError):
        jet_var(1.0, 3)


def test_square_of_x():
    x = jet_var(3.0, 0)
    y = x * x
    assert y.value == 9
    assert np.array_equal(y.grad, [6, 0, 0])
    assert y.hess[0, 0] == 2
    assert np.array_equal(jet_unary("square", x).c, y.c)


def test_tanh_at_zero():
    y = tanh(jet_var(0.0, 0))
    assert y.value == 0
    assert np.allclose(y.grad, [1, 0, 0])
    assert np.allclose(y.hess, 0)


def test_tanh_matches_finite_differences_at_half():
    y = tanh(jet_var(0.5, 0))
    h = 1e-4
    d1 = (np.tanh(0.5 + h) - np.tanh(0.5 - h)) / (2 * h)
    d2 = (np.tanh(0.5 + h) - 2 * np.tanh(0.5) + np.tanh(0.5 - h)) / h ** 2
    assert abs(y.grad[0] - d1) / abs(d1) < 1e-6
    assert abs(y.hess[0, 0] - d2) / abs(d2) < 1e-6


COMPOSITES = {
    "mixed": (lambda X: sin(X[0] * X[1]) + exp(X[2]) * cos(X[0]) - X[1] / (2.0 + X[0] * X[0]),
              lambda p: np.sin(p[0] * p[1]) + np.exp(p[2]) * np.cos(p[0]) - p[1] / (2 + p[0] ** 2)),
    "tanh_chain": (lambda X: tanh(X[0] - 0.3 * X[1] + X[2] * X[2]) * (1.0 - X[1]),
                   lambda p: np.tanh(p[0] - 0.3 * p[1] + p[2] ** 2) * (1 - p[1])),
    "neg_square": (lambda X: -jet_unary("square", X[0] + X[1]) + 3.0 * X[2],
                   lambda p: -(p[0] + p[1]) ** 2 + 3 * p[2]),
}


@pytest.mark.parametrize("name", sorted(COMPOSITES))
def test_composition_matches_finite_differences(name):
    jf, nf = COMPOSITES[name]
    rng = np.random.default_rng(1)
    for p in rng.uniform(0.1, 1.5, size=(20, 3)):
        X = [jet_var(p[a], a) for a in range(3)]
        y = jf(X)
        g, H = fd_jet(nf, p)
        scale = max(1.0, np.abs(y.grad).max())
        assert np.abs(y.grad - g).max() / scale < 1e-5
        assert np.abs(y.hess - H).max() / max(1.0, np.abs(y.hess).max()) < 1e-5


def test_hessian_is_bit_symmetric():
    x = input_jets(np.random.default_rng(0).uniform(size=(50, 3)))
    y = tanh(x[:, 0] * x[:, 1] + sin(x[:, 2]) / (1.0 + x[:, 0]))
    H = y.hess
    assert np.array_equal(H, np.swapaxes(H, 0, 1))


def test_division_by_zero_is_domain_error():
    with pytest.raises(JetDomainError):
        jet_binary("div", jet_var(1.0, 0), Jet.constant(0.0))
    with pytest.raises(JetDomainError):
        Var(np.array([1.0])) / Var(np.array([0.0]))


def test_overflow_is_reported():
    with pytest.raises(JetOverflowError):
        exp(jet_var(800.0, 0))


def test_unknown_kinds_rejected():
    with pytest.raises(ValueError):
        jet_binary("pow", jet_var(1.0, 0), jet_var(1.0, 1))
    with pytest.raises(ValueError):
        jet_unary("log", jet_var(1.0, 0))


def test_backward_hand_chain_rule():
    # F = (theta * x - 1)^2 at x = 2, theta = 1  ->  dF/dtheta = 4
    with Tape() as tape:
        th = tape.watch(np.array(1.0))
        r = th * 2.0 - 1.0
        F = r.square()
    assert tape_backward(tape, F, [th])[0] == pytest.approx(4.0)


def test_backward_through_gradient_component():
    # F = (d/dx (theta * tanh x))^2 at x = 0, theta = 3  ->  dF/dtheta = 6
    with Tape() as tape:
        W = tape.watch(np.array([[3.0]]))
        b = tape.watch(np.zeros(1))
        x = input_jets(np.array([[0.0, 0.0, 0.0]]))[..., :1]
        out = affine(tanh(x), W, b)
        F = out[:, 0].d("x").square().sum()
    assert F.a == pytest.approx(9.0)
    gW, gb = tape.gradient(F, [W, b])
    assert gW[0, 0] == pytest.approx(6.0)
    assert gb[0] == 0.0


def test_backward_is_linear():
    rng = np.random.default_rng(3)
    W0, b0 = rng.normal(size=(4, 3)), rng.normal(size=4)
    P = rng.uniform(size=(7, 3))

    def grads(a, c):
        with Tape() as tape:
            W, b = tape.watch(W0), tape.watch(b0)
            h = tanh(affine(input_jets(P), W, b))
            F1 = h[:, 0].dd("x", "y").square().mean()
            F2 = h[:, 1].d("t").mean()
            F = a * F1 + c * F2 if (a and c) else (F1 if a else F2)
        return np.concatenate([g.ravel() for g in tape.gradient(F, [W, b])])

    g1, g2 = grads(1.0, 0.0), grads(0.0, 1.0)
    assert np.allclose(grads(2.5, -1.5), 2.5 * g1 - 1.5 * g2, rtol=1e-12, atol=1e-14)


def test_loss_not_on_tape_is_usage_error():
    with Tape() as t1:
        a = t1.watch(np.array(1.0))
    with Tape() as t2:
        b = t2.watch(np.array(2.0))
        loss = b * b
    with pytest.raises(TapeError):
        t1.gradient(loss, [a])


def test_no_tape_values_are_constants():
    with Tape() as tape:
        th = tape.watch(np.array(2.0))
        with no_tape():
            c = Var(np.array(5.0)) * 2.0
        F = th * c
    assert tape.gradient(F, [th])[0] == pytest.approx(10.0)


def test_partial_jet_has_no_hessian():
    d = input_jets(np.zeros((2, 3)))[:, 0].partial("x")
    with pytest.raises(JetDomainError):
        d.hess


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")
def test_compiled_and_numpy_kernels_agree():
    from twophase_dnn import _kernels_py as py
    rng = np.random.default_rng(0)
    c = rng.normal(size=(10, 64, 5))
    g = rng.normal(size=(10, 64, 5))
    out_c = kernels.tanh_forward(c)
    out_p = py.tanh_forward(c)
    assert np.allclose(out_c, out_p, rtol=1e-14, atol=1e-15)
    assert np.allclose(kernels.tanh_backward(c, out_c, g), py.tanh_backward(c, out_p, g), rtol=1e-13, atol=1e-14)


def test_backend_switch_round_trip():
    before = kernels.BACKEND
    kernels.use("numpy")
    try:
        y = tanh(jet_var(0.5, 0))
        assert y.grad[0] == pytest.approx(1 - np.tanh(0.5) ** 2)
    finally:
        kernels.use(before)
    assert kernels.BACKEND == before
