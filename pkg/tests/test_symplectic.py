import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from akmeasure import symplectic as sp
from akmeasure.ak_model import ak_hamiltonian

from oracles import ak_closed_form, beta, expm_mp, taylor_expm

floats = st.floats(-3, 3, allow_nan=False)


def test_metric_small_cases():
    np.testing.assert_array_equal(sp.metric(1), [[0, 1], [-1, 0]])
    b3 = sp.metric(3)
    assert b3.shape == (6, 6)
    for j in range(3):
        np.testing.assert_array_equal(b3[2 * j:2 * j + 2, 2 * j:2 * j + 2], [[0, 1], [-1, 0]])
    assert np.count_nonzero(b3) == 6
    np.testing.assert_array_equal(sp.metric(2) @ sp.metric(2), -np.eye(4))


@pytest.mark.parametrize("bad", [0, -1, 1.5])
def test_metric_rejects_bad_n(bad):
    with pytest.raises(sp.SymplecticError):
        sp.metric(bad)


def test_membership_examples():
    assert sp.is_symplectic(np.eye(4), tol=1e-12)
    assert sp.is_symplectic(np.diag([2.0, 0.5]))
    assert not sp.is_symplectic(np.diag([2.0, 2.0]))
    with pytest.raises(sp.SymplecticError):
        sp.is_symplectic(np.eye(2), tol=0)
    with pytest.raises(sp.SymplecticError):
        sp.is_symplectic(np.eye(3))


def test_check_symplectic_raises():
    with pytest.raises(sp.SymplecticError, match="residual"):
        sp.check_symplectic(np.diag([2.0, 2.0]))


def test_ak_generator_entries():
    J = sp.generator(ak_hamiltonian(1.0, 1.0))
    expect = np.zeros((6, 6))
    expect[0, 2] = -1  # J_13
    expect[1, 4] = -1  # J_25
    expect[3, 1] = 1  # J_42
    expect[5, 0] = -1  # J_61
    np.testing.assert_array_equal(J, expect)
    np.testing.assert_array_equal(J, ak_hamiltonian(1.0, 1.0).h @ beta(3))


def test_zero_hamiltonian_generator():
    np.testing.assert_array_equal(sp.generator(np.zeros((4, 4))), np.zeros((4, 4)))


def test_oscillator_generator_rotates_phase_space():
    k, m = 2.0, 0.5
    J = sp.generator(np.diag([k, 1 / m]))
    np.testing.assert_array_equal(J, [[0, k], [-1 / m, 0]])
    w = np.sqrt(k / m)
    period = 2 * np.pi / w
    S = sp.propagator(J, period)
    np.testing.assert_allclose(S, np.eye(2), atol=1e-12)
    S = sp.propagator(J, 0.3)
    assert sp.is_symplectic(S, 1e-12)
    # energy is conserved along the flow
    xi0 = np.array([0.7, -0.2])
    E = 0.5 * xi0 @ np.diag([k, 1 / m]) @ xi0
    xi = sp.evolve_mean(S, xi0)
    assert 0.5 * xi @ np.diag([k, 1 / m]) @ xi == pytest.approx(E, rel=1e-13)


def test_nilpotency_index_examples():
    assert sp.nilpotency_index(sp.generator(ak_hamiltonian(1, 1))) == 3
    assert sp.nilpotency_index(np.zeros((2, 2))) == 1
    assert sp.nilpotency_index(sp.generator(np.eye(2))) is None


def test_propagator_t0_identity():
    J = sp.generator(ak_hamiltonian(1.3, -0.4))
    np.testing.assert_array_equal(sp.propagator(J, 0.0), np.eye(6))


@given(floats, floats, st.floats(0, 3))
def test_ak_propagator_closed_form(K1, K2, t):
    S = sp.propagator(sp.generator(ak_hamiltonian(K1, K2)), t)
    np.testing.assert_allclose(S, ak_closed_form(K1, K2, t), rtol=0, atol=1e-14 * max(1, t * t * 9))


def test_dense_generator_vs_taylor_oracle(rng):
    for _ in range(20):
        A = rng.normal(size=(4, 4))
        h = A + A.T
        J = sp.generator(h)
        t = 0.1
        ref, bound = taylor_expm(-t * J)
        assert bound < 1e-15
        np.testing.assert_allclose(sp.propagator(J, t), ref, atol=1e-12)


def test_dense_generator_vs_multiprecision(rng):
    A = rng.normal(size=(6, 6))
    J = sp.generator(A + A.T)
    np.testing.assert_allclose(sp.propagator(J, 1.7), expm_mp(-1.7 * J), rtol=1e-11, atol=1e-11)


def test_propagator_methods():
    J = sp.generator(ak_hamiltonian(0.8, 1.1))
    a = sp.propagator(J, 1.5, method="polynomial")
    b = sp.propagator(J, 1.5, method="expm")
    np.testing.assert_allclose(a, b, atol=1e-14)
    with pytest.raises(sp.SymplecticError):
        sp.propagator(sp.generator(np.eye(2)), 1.0, method="polynomial")
    with pytest.raises(sp.SymplecticError):
        sp.propagator(J, 1.0, method="pade")
    with pytest.raises(sp.SymplecticError):
        sp.propagator(J, float("nan"))


def test_propagator_overflow_raises():
    J = sp.generator(np.diag([1.0, -1.0]))  # hyperbolic: exponential growth
    with pytest.raises(sp.SymplecticError, match="overflow"):
        sp.propagator(J, 1e4)


def test_compose_examples():
    rng = np.random.default_rng(1)
    A = sp.random_symplectic(2, rng)
    np.testing.assert_allclose(sp.compose(A, sp.symplectic_inverse(A)), np.eye(4), atol=1e-12)
    np.testing.assert_array_equal(sp.compose(A, np.eye(4)), A)
    J = sp.generator(ak_hamiltonian(0.7, -1.2))
    np.testing.assert_allclose(
        sp.compose(sp.propagator(J, 0.4), sp.propagator(J, 1.1)), sp.propagator(J, 1.5), atol=1e-14
    )
    with pytest.raises(sp.SymplecticError):
        sp.compose(np.eye(2), np.eye(4))
    with pytest.raises(sp.SymplecticError):
        sp.compose(np.diag([2.0, 2.0]), np.eye(2))


def test_inverse_examples():
    np.testing.assert_array_equal(sp.symplectic_inverse(np.eye(2)), np.eye(2))
    np.testing.assert_array_equal(sp.symplectic_inverse(np.diag([2.0, 0.5])), np.diag([0.5, 2.0]))
    J = sp.generator(ak_hamiltonian(1.3, 0.6))
    np.testing.assert_allclose(
        sp.symplectic_inverse(sp.propagator(J, 0.9)), sp.propagator(J, -0.9), atol=1e-15
    )


def test_evolve_mean_examples():
    xi0 = np.array([1.2, -0.7, 0, 0, 0, 0])
    np.testing.assert_array_equal(sp.evolve_mean(np.eye(6), xi0), xi0)
    K1, K2, t = 0.9, 1.4, 1.3
    S = ak_closed_form(K1, K2, t)
    xi = sp.evolve_mean(S, xi0)
    assert xi[2] == pytest.approx(t * K1 * 1.2)
    assert xi[4] == pytest.approx(t * K2 * -0.7)
    full = np.array([1.2, -0.7, 0.3, 0.1, -0.2, 0.5])
    xi = sp.evolve_mean(S, full)
    assert xi[2] == pytest.approx(0.3 + t * K1 * 1.2 + 0.5 * t * t * K1 * K2 * 0.5)
    with pytest.raises(sp.SymplecticError):
        sp.evolve_mean(S, np.zeros(4))


def test_evolve_variance_examples(rng):
    V0 = np.diag([0.5, 0.5, 0.25, 4.0, 0.25, 4.0])
    np.testing.assert_array_equal(sp.evolve_variance(np.eye(6), V0), V0)
    K1, K2, t, b1, b2 = 1.1, 0.7, 1.4, 0.8, 1.9
    V0 = np.diag([0.6, 0.5, b1 / 4, 1 / b1, b2 / 4, 1 / b2])
    Vt = sp.evolve_variance(ak_closed_form(K1, K2, t), V0)
    expect = (t * K1) ** 2 * 0.6 + (b1 * b2 + (t * t * K1 * K2) ** 2) / (4 * b2)
    assert Vt[2, 2] == pytest.approx(expect, rel=1e-14)
    from akmeasure.spectral import symplectic_eigenvalues

    S = sp.random_symplectic(3, rng)
    np.testing.assert_allclose(symplectic_eigenvalues(sp.evolve_variance(S, 0.5 * np.eye(6))), 0.5, atol=1e-12)
    Vt = sp.evolve_variance(S, 0.5 * np.eye(6), validate=True)
    np.testing.assert_array_equal(Vt, Vt.T)


# group properties ------------------------------------------------------------

@st.composite
def symplectic_pair(draw):
    n = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return sp.random_symplectic(n, rng), sp.random_symplectic(n, rng)


@given(symplectic_pair())
def test_group_closure(pair):
    A, B = pair
    AB = A @ B
    assert sp.is_symplectic(AB, sp.default_tolerance(AB))


@given(symplectic_pair())
def test_inverse_is_two_sided(pair):
    A, _ = pair
    Ai = sp.symplectic_inverse(A)
    tol = 1e-12 * max(1, np.abs(A).max()) ** 2
    np.testing.assert_allclose(Ai @ A, np.eye(len(A)), atol=tol)
    np.testing.assert_allclose(A @ Ai, np.eye(len(A)), atol=tol)


@given(symplectic_pair())
def test_determinant_one_and_transpose(pair):
    A, _ = pair
    assert np.linalg.det(A) == pytest.approx(1.0, abs=1e-9)
    assert sp.is_symplectic(A.T, sp.default_tolerance(A))


@given(st.integers(1, 4), st.integers(0, 2**32 - 1), st.floats(-2, 2), st.floats(-2, 2))
def test_one_parameter_group(n, seed, t1, t2):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2 * n, 2 * n))
    J = sp.generator(0.3 * (A + A.T))
    lhs = sp.propagator(J, t1) @ sp.propagator(J, t2)
    rhs = sp.propagator(J, t1 + t2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * max(1, np.abs(rhs).max()) ** 2)


@given(st.lists(st.floats(0.1, 10), min_size=1, max_size=4))
def test_pair_scaling_symplectic(scales):
    L = sp.pair_scaling(scales)
    assert sp.is_symplectic(L, sp.default_tolerance(L))


@given(st.lists(st.floats(-7, 7), min_size=1, max_size=4))
def test_pair_rotation_orthogonal_symplectic(angles):
    R = sp.pair_rotation(angles)
    np.testing.assert_allclose(R @ R.T, np.eye(len(R)), atol=1e-14)
    assert sp.is_symplectic(R, 1e-13)


def test_layout_and_hamiltonian():
    lay = sp.AK_LAYOUT
    assert lay.positions == ("q", "Q1", "Q2")
    assert lay.momenta == ("p", "P1", "P2")
    assert lay.index("P2") == 5
    with pytest.raises(sp.SymplecticError):
        sp.ModeLayout(2, ("a", "b"))
    H = sp.QuadraticHamiltonian([[1.0, 2.0], [0.0, 1.0]])
    np.testing.assert_array_equal(H.h, [[1, 1], [1, 1]])
    assert H.n == 1
    with pytest.raises(ValueError):
        H.h[0, 0] = 3
    with pytest.raises(sp.SymplecticError):
        sp.QuadraticHamiltonian(np.eye(3))
