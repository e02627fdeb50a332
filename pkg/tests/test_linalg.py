import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdcollapse.linalg import (
    DimensionError,
    NotHermitianError,
    density_matrix,
    hermitian_exp,
    partial_trace,
    permute_basis,
    projector,
    tensor_product,
    trace_distance,
    validate,
)
from sdcollapse.oracle import SingletParams, labels_to_product_basis, n4_averaged_solution, singlet_state

from conftest import random_density, random_hermitian

UP = np.array([1, 0])
DOWN = np.array([0, 1])
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def test_tensor_basis_vectors():
    np.testing.assert_array_equal(tensor_product(UP, DOWN), [0, 1, 0, 0])


def test_tensor_identities():
    np.testing.assert_array_equal(tensor_product(np.eye(2), np.eye(2)), np.eye(4))


def test_tensor_rejects_mixed_kinds():
    with pytest.raises(DimensionError):
        tensor_product(UP, np.eye(2))


def test_singlet_amplitudes_in_product_basis():
    q = 0.6
    expected = q * tensor_product(UP, DOWN) - np.sqrt(1 - q * q) * tensor_product(DOWN, UP)
    np.testing.assert_allclose(labels_to_product_basis(singlet_state(q)), expected, atol=0)


def test_tensor_associative_on_basis():
    for a in (UP, DOWN):
        for b in (UP, DOWN):
            for c in (np.array([1, 0, 0]), np.array([0, 0, 1])):
                np.testing.assert_array_equal(
                    tensor_product(tensor_product(a, b), c), tensor_product(a, tensor_product(b, c)))


def test_partial_trace_of_averaged_singlet():
    rho = labels_to_product_basis(n4_averaged_solution(SingletParams(0.5), 1.3))
    np.testing.assert_allclose(partial_trace(rho, [2, 2], 0), np.diag([0.25, 0.75]), atol=1e-15)
    np.testing.assert_allclose(partial_trace(rho, [2, 2], 1), np.diag([0.75, 0.25]), atol=1e-15)


def test_partial_trace_product_state(rng):
    ra, rb = random_density(rng, 2), random_density(rng, 3)
    np.testing.assert_allclose(partial_trace(np.kron(ra, rb), [2, 3], 0), ra, atol=1e-14)
    np.testing.assert_allclose(partial_trace(np.kron(ra, rb), [2, 3], 1), rb, atol=1e-14)


def test_partial_trace_maximally_mixed():
    np.testing.assert_allclose(partial_trace(np.eye(4) / 4, [2, 2], 1), np.eye(2) / 2)


def test_partial_trace_three_factors_against_loops(rng):
    dims = [2, 3, 2]
    rho = random_density(rng, 12)
    t = rho.reshape(dims + dims)
    expected = np.zeros((3, 3), complex)
    for a in range(2):
        for c in range(2):
            expected += t[a, :, c, a, :, c]
    np.testing.assert_allclose(partial_trace(rho, dims, 1), expected, atol=1e-14)
    keep02 = partial_trace(rho, dims, [0, 2])
    assert keep02.shape == (4, 4)
    assert validate(keep02).ok


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4) / 4, [2, 3], 0)


def test_hermitian_exp_zero():
    np.testing.assert_array_equal(hermitian_exp(np.zeros((3, 3)), 2.7), np.eye(3))


def test_hermitian_exp_diagonal():
    u = hermitian_exp(np.diag([0.3, -1.2]), 1.7)
    np.testing.assert_allclose(u, np.diag(np.exp(-1j * np.array([0.3, -1.2]) * 1.7)), atol=1e-14)


def test_hermitian_exp_pauli_x():
    theta = np.pi / 2
    closed_form = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * PAULI_X
    np.testing.assert_allclose(hermitian_exp(PAULI_X, theta), closed_form, atol=1e-10)
    np.testing.assert_allclose(hermitian_exp(PAULI_X, theta), -1j * PAULI_X, atol=1e-10)


def test_hermitian_exp_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        hermitian_exp(np.array([[0, 1], [0, 0]]), 1.0)


def test_trace_distance_examples():
    rho = np.diag([0.3, 0.7])
    assert trace_distance(rho, rho) == 0
    assert trace_distance(np.diag([1, 0]), np.diag([0, 1])) == pytest.approx(1.0)
    assert trace_distance(np.diag([1, 0]), np.diag([0.5, 0.5])) == pytest.approx(0.5)
    with pytest.raises(DimensionError):
        trace_distance(np.eye(2), np.eye(3))


def test_validate_reports_trace_defect():
    rep = validate(np.diag([0.75, 0.75]))
    assert rep.trace_defect == pytest.approx(0.5)
    assert not rep.trace_ok and rep.hermitian_ok and rep.positive_ok
    assert validate(np.diag([0.2, 0.8])).ok
    with pytest.raises(ValueError):
        density_matrix(np.diag([0.75, 0.75]))


def test_validate_flags_negative_and_non_hermitian():
    assert not validate(np.diag([1.1, -0.1])).positive_ok
    assert not validate(np.array([[0.5, 0.1], [0.0, 0.5]])).hermitian_ok


def test_permute_basis_roundtrip(rng):
    rho = random_density(rng, 4)
    order = [2, 0, 3, 1]
    inverse = list(np.argsort(order))
    np.testing.assert_allclose(permute_basis(permute_basis(rho, order), inverse), rho)


# -- properties ---------------------------------------------------------------

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=50, deadline=None)
@given(seeds, st.sampled_from([(2, 2), (2, 3), (3, 2), (2, 2, 2)]), st.data())
def test_partial_trace_preserves_trace(seed, dims, data):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, int(np.prod(dims)))
    keep = data.draw(st.integers(0, len(dims) - 1))
    assert abs(np.trace(partial_trace(rho, dims, keep)) - np.trace(rho)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(2, 6), st.floats(-5, 5))
def test_hermitian_exp_inverse_and_unitary(seed, n, t):
    h = random_hermitian(np.random.default_rng(seed), n)
    u = hermitian_exp(h, t)
    np.testing.assert_allclose(u @ hermitian_exp(h, -t), np.eye(n), atol=1e-10)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(n), atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(2, 5))
def test_trace_distance_metric(seed, n):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density(rng, n, rank=int(rng.integers(1, n + 1))) for _ in range(3))
    assert trace_distance(a, b) == pytest.approx(trace_distance(b, a), abs=1e-9)
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-9
    assert 0 <= trace_distance(a, b) <= 1 + 1e-9


def test_projector_is_valid(rng):
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    assert validate(projector(v / np.linalg.norm(v))).ok
