import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from molchef.numerics import (
    NonFiniteValue, NotSymmetric, ParameterStore, ShapeMismatch, Tape, Tensor, adam_step, finite_diff_grad,
    gaussian_reparam_sample, gru_cell, init_gru, jacobi_eigh, mmd_squared, ops as T, psd_matrix_sqrt,
)


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(1e-8, np.max(np.abs(a)), np.max(np.abs(b))))


def check_grad(build, shapes, seed=0, tol=1e-5):
    """Compare tape gradients of ``sum(w * build(*inputs))`` with central differences."""
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    for k, shape in enumerate(shapes):
        store.add(f"x{k}", rng.normal(size=shape))
    probe = None

    def loss(s):
        nonlocal probe
        out = build(*[s[f"x{k}"] for k in range(len(shapes))])
        if probe is None:
            probe = np.random.default_rng(seed + 1).normal(size=out.shape)
        return T.sum(T.mul(out, probe))

    with Tape() as tape:
        tape.backward(loss(store))
    analytic = {n: store.grad(n) for n in store.names()}
    numeric = finite_diff_grad(lambda s: loss(s).item(), store)
    for n in store.names():
        assert rel_err(analytic[n], numeric[n]) < tol, n


# -------------------------------------------------------------- primitives

def test_primitive_examples():
    assert T.softmax_cross_entropy(np.zeros(3), 1).item() == pytest.approx(math.log(3))
    assert T.relu(np.array(-2.0)).item() == 0.0
    a = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(T.matmul(np.eye(3), a).value, a)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        T.matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ShapeMismatch):
        T.add(np.ones(3), np.ones(4))


def test_non_finite_trips():
    with pytest.raises(NonFiniteValue):
        T.exp(np.array([1000.0]))


dims = st.integers(1, 8)


@settings(max_examples=15, deadline=None)
@given(n=dims, k=dims, m=dims, seed=st.integers(0, 10_000))
def test_matmul_grad(n, k, m, seed):
    check_grad(T.matmul, [(n, k), (k, m)], seed)


@settings(max_examples=15, deadline=None)
@given(n=dims, m=dims, seed=st.integers(0, 10_000))
def test_elementwise_grads(n, m, seed):
    for fn in (T.add, T.sub, T.mul):
        check_grad(fn, [(n, m), (n, m)], seed)
    check_grad(T.add, [(n, m), (m,)], seed)
    for fn in (T.sigmoid, T.tanh, T.exp, T.square):
        check_grad(fn, [(n, m)], seed)
    check_grad(lambda x: T.reciprocal(T.add_scalar(T.square(x), 1.0)), [(n, m)], seed)


@settings(max_examples=15, deadline=None)
@given(n=dims, m=dims, seed=st.integers(0, 10_000))
def test_reduction_and_shape_grads(n, m, seed):
    check_grad(lambda x: T.sum(x, axis=0), [(n, m)], seed)
    check_grad(lambda x: T.mean(x, axis=1), [(n, m)], seed)
    check_grad(lambda x: T.mean(x), [(n, m)], seed)
    check_grad(lambda x, y: T.concat([x, y], axis=1), [(n, m), (n, 2)], seed)
    check_grad(lambda x: T.slice_(x, (slice(0, n), slice(0, max(1, m // 2)))), [(n, m)], seed)
    check_grad(lambda x: T.transpose(T.reshape(x, (m, n))), [(n, m)], seed)
    check_grad(lambda x: T.take(x, [0, n - 1, 0]), [(n, m)], seed)
    check_grad(lambda x: T.segment_sum(x, np.arange(n) % 2, 2), [(n, m)], seed)
    check_grad(T.pairwise_sq_dists, [(n, m), (3, m)], seed)


def test_relu_grad_away_from_kink():
    check_grad(lambda x: T.relu(T.add_scalar(T.square(x), 0.1)), [(4, 3)])


@settings(max_examples=15, deadline=None)
@given(n=dims, k=st.integers(2, 8), seed=st.integers(0, 10_000))
def test_softmax_cross_entropy_grad(n, k, seed):
    target = np.random.default_rng(seed).integers(0, k, size=n)
    check_grad(lambda x: T.softmax_cross_entropy(x, target), [(n, k)], seed)


def test_tape_accumulates_and_fused_equals_staged():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 3))
    w = rng.normal(size=(3, 2))
    fused = ParameterStore()
    fused.add("w", w)
    with Tape() as tape:
        out = T.sum(T.tanh(T.matmul(a, fused["w"])))
        tape.backward(out)
    staged = ParameterStore()
    staged.add("w", w)
    with Tape() as tape:
        h = T.matmul(a, staged["w"])
        y = T.tanh(h)
        tape.backward(T.sum(y))
    assert np.array_equal(fused.grad("w"), staged.grad("w"))
    manual = a.T @ (1.0 - np.tanh(a @ w) ** 2)
    assert np.allclose(fused.grad("w"), manual, rtol=1e-12)
    twice = ParameterStore()
    twice.add("w", w)
    with Tape() as tape:
        y = T.sum(T.tanh(T.matmul(a, twice["w"])))
        tape.backward(T.add(y, y))
    assert np.allclose(twice.grad("w"), 2 * manual, rtol=1e-12)


# ------------------------------------------------------------------- GRU

def _gru_store(seed, n_in=3, hidden=4, layers=2, zero=False):
    store = ParameterStore()
    init_gru(store, "g", n_in, hidden, layers, np.random.default_rng(seed))
    if zero:
        for n in store.names():
            store.set_value(n, np.zeros(store[n].shape))
    return store


def test_gru_zero_weights_keep_zero_state():
    store = _gru_store(0, zero=True)
    out = gru_cell(np.ones((2, 3)), [Tensor(np.zeros((2, 4)))] * 2, store, "g")
    assert all(np.array_equal(h.value, np.zeros((2, 4))) for h in out)


def test_gru_gradients():
    store = _gru_store(1)
    rng = np.random.default_rng(2)
    x, h0, h1 = rng.normal(size=(2, 3)), rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
    probe = rng.normal(size=(2, 4))

    def loss(s):
        out = gru_cell(x, [Tensor(h0), Tensor(h1)], s, "g")
        return T.sum(T.mul(T.add(out[0], out[1]), probe))

    with Tape() as tape:
        tape.backward(loss(store))
    numeric = finite_diff_grad(lambda s: loss(s).item(), store)
    for n in store.names():
        assert rel_err(store.grad(n), numeric[n]) < 1e-5, n


def test_gru_deterministic():
    store = _gru_store(4)
    x = np.random.default_rng(0).normal(size=(2, 3))
    a = gru_cell(x, [Tensor(np.zeros((2, 4)))] * 2, store, "g")
    b = gru_cell(x, [Tensor(np.zeros((2, 4)))] * 2, store, "g")
    assert all(np.array_equal(p.value, q.value) for p, q in zip(a, b))


def test_gru_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        gru_cell(np.ones((1, 5)), [Tensor(np.zeros((1, 4)))] * 2, _gru_store(0), "g")


# ---------------------------------------------------------- reparameterize

def test_reparam_examples():
    mu = np.array([[1.0, -2.0]])
    assert np.array_equal(gaussian_reparam_sample(mu, np.ones_like(mu), np.zeros_like(mu)).value, mu)
    n = np.array([[0.5, 0.25]])
    assert np.array_equal(gaussian_reparam_sample(mu, np.zeros_like(mu), n).value, mu + n)
    with pytest.raises(ShapeMismatch):
        gaussian_reparam_sample(mu, np.zeros((1, 3)), n)


def test_reparam_grad():
    noise = np.random.default_rng(9).normal(size=(3, 2))
    check_grad(lambda mu, lv: gaussian_reparam_sample(mu, lv, noise), [(3, 2), (3, 2)], tol=1e-6)


# --------------------------------------------------------------------- MMD

def test_mmd_examples():
    a = np.random.default_rng(0).normal(size=(5, 3))
    assert mmd_squared(a, a).item() == 0.0
    assert mmd_squared([[0.0]], [[1.0]]).item() == pytest.approx(2.0 / 3.0, abs=1e-15)
    rng = np.random.default_rng(1)
    assert mmd_squared(rng.normal(size=(256, 2)), rng.normal(5.0, 1.0, size=(256, 2))).item() > 0.1
    assert mmd_squared([[0.0]], [[1.0]], kernel="rbf").item() == pytest.approx(2 - 2 * math.exp(-0.5))


@settings(max_examples=20, deadline=None)
@given(n=dims, m=dims, d=dims, seed=st.integers(0, 10_000))
def test_mmd_symmetric_and_nonnegative(n, m, d, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(n, d)), rng.normal(size=(m, d))
    ab, ba = mmd_squared(a, b).item(), mmd_squared(b, a).item()
    assert ab == pytest.approx(ba, abs=1e-14)
    assert ab >= -1e-14


def test_mmd_grad():
    b = np.random.default_rng(2).normal(size=(4, 3))
    check_grad(lambda a: mmd_squared(a, b), [(5, 3)])


def test_mmd_shape_errors():
    with pytest.raises(ShapeMismatch):
        mmd_squared(np.ones((2, 3)), np.ones((2, 4)))
    with pytest.raises(ShapeMismatch):
        mmd_squared(np.ones((0, 3)), np.ones((2, 3)))


# -------------------------------------------------------------------- Adam

def _scalar_store(value, grad):
    store = ParameterStore()
    store.add("w", np.array([value]))
    store["w"].grad = np.array([grad])
    return store


def test_adam_zero_grad_unchanged():
    store = _scalar_store(1.5, 0.0)
    adam_step(store, 0.01, 1)
    assert store["w"].value[0] == 1.5


@pytest.mark.parametrize("g", [3.0, -0.02, 1e3])
def test_adam_first_step_is_sign_step(g):
    store = _scalar_store(0.0, g)
    adam_step(store, 0.001, 1)
    assert store["w"].value[0] == pytest.approx(-0.001 * math.copysign(1.0, g), rel=1e-5)
    assert store["w"].grad is None


def test_adam_deterministic():
    a, b = _scalar_store(0.3, 0.7), _scalar_store(0.3, 0.7)
    for t in range(1, 4):
        adam_step(a, 0.01, t)
        adam_step(b, 0.01, t)
        a["w"].grad = np.array([0.7])
        b["w"].grad = np.array([0.7])
    assert a["w"].value.tobytes() == b["w"].value.tobytes()


# ------------------------------------------------------ finite differences

def test_finite_diff_examples():
    store = ParameterStore()
    store.add("w", np.array([3.0]))
    assert abs(finite_diff_grad(lambda s: s["w"].value[0] ** 2, store)["w"][0] - 6.0) < 1e-8
    assert finite_diff_grad(lambda s: 7.0, store)["w"][0] == 0.0


# -------------------------------------------------------------- matrix sqrt

def test_psd_sqrt_examples():
    assert np.allclose(psd_matrix_sqrt(np.eye(3)), np.eye(3), atol=1e-15)
    assert np.allclose(psd_matrix_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    with pytest.raises(NotSymmetric):
        psd_matrix_sqrt(np.array([[1.0, 0.5], [0.0, 1.0]]))


@settings(max_examples=25, deadline=None)
@given(d=st.integers(1, 10), seed=st.integers(0, 10_000))
def test_psd_sqrt_squares_back(d, seed):
    a = np.random.default_rng(seed).normal(size=(d + 2, d))
    m = a.T @ a
    s = psd_matrix_sqrt(m)
    assert np.linalg.norm(s @ s - m) <= 1e-8 * np.linalg.norm(m)
    assert np.allclose(s, s.T)


def test_psd_sqrt_clamps_negative_eigenvalues():
    s = psd_matrix_sqrt(np.diag([4.0, -1e-12]))
    assert np.allclose(s, np.diag([2.0, 0.0]))


def test_jacobi_matches_reference():
    a = np.random.default_rng(0).normal(size=(6, 6))
    m = a + a.T
    vals, vecs = jacobi_eigh(m)
    assert np.allclose(np.sort(vals), np.linalg.eigvalsh(m), atol=1e-10)
    assert np.allclose(vecs @ np.diag(vals) @ vecs.T, m, atol=1e-10)
