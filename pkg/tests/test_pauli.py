import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acham.errors import DimensionError, HermiticityError, SchemaError
from acham.linalg import operator_norm
from acham.model import LocalTerm, pairwise_commutator_norm
from acham.pauli import (
    PAULI,
    coefficients_to_matrix,
    component_gaps,
    decompose_about,
    is_gapped,
    matrix_to_coefficients,
    orthogonal_component_bound,
    pauli_basis,
    propagation_check,
    select_witness,
    spectral_gap,
)
from tests.conftest import I2, KET0, X, Y, Z, random_hermitian

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_pauli_basis():
    np.testing.assert_array_equal(pauli_basis(1), X)
    np.testing.assert_array_equal(pauli_basis(0), I2)
    for bad in (4, -1, True, 1.0):
        with pytest.raises(SchemaError):
            pauli_basis(bad)


def test_pauli_products():
    np.testing.assert_allclose(X @ Y, 1j * Z, atol=1e-15)
    np.testing.assert_allclose(Z @ X - X @ Z, 2j * Y, atol=1e-15)


def test_coefficients_round_trip(rng):
    M = random_hermitian(rng, 4)
    C = matrix_to_coefficients(M)
    assert C.shape == (4, 4)
    np.testing.assert_allclose(coefficients_to_matrix(C, 2), M, atol=1e-12)


def test_coefficients_to_matrix_rejects_three_qubits():
    with pytest.raises(DimensionError):
        coefficients_to_matrix(np.zeros(4), 3)


def test_decompose_triangle_edge_about_lower(tri):
    """X(x)|0><0| + Z(x)|1><1|/100 about qubit 0 gives (X +- Z/100)/2 on I and Z"""
    dec = decompose_about(tri.terms[0].matrix(), about=0, support=(0, 1))
    np.testing.assert_allclose(dec.components[0], (X + Z / 100) / 2, atol=1e-15)
    np.testing.assert_allclose(dec.components[3], (X - Z / 100) / 2, atol=1e-15)
    np.testing.assert_allclose(dec.components[1], 0, atol=1e-15)
    np.testing.assert_allclose(dec.components[2], 0, atol=1e-15)
    np.testing.assert_allclose(dec.reconstruct(), tri.terms[0].matrix(), atol=1e-15)


def test_decompose_about_upper_qubit_reconstructs(tri):
    term = tri.terms[0]
    dec = decompose_about(term, about=1)
    assert not dec.about_is_lower
    # the component multiplying X on qubit 0 is |0><0| on qubit 1
    np.testing.assert_allclose(dec.components[1], KET0, atol=1e-15)
    np.testing.assert_allclose(dec.reconstruct(), term.matrix(), atol=1e-15)


def test_decompose_about_rejects_foreign_qubit(tri):
    with pytest.raises(DimensionError):
        decompose_about(tri.terms[0], about=2)


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_decomposition_reconstructs(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    T = random_hermitian(rng, 4)
    for about in (0, 1):
        dec = decompose_about(T, about)
        np.testing.assert_allclose(dec.reconstruct(), T, atol=1e-12)
        for comp in dec.components:
            np.testing.assert_allclose(comp, comp.conj().T, atol=1e-15)


@pytest.mark.parametrize(
    "M, expected",
    [
        ((X + Z) / np.sqrt(2), 2.0),
        (Z, 2.0),
        (3 * I2, 0.0),
        (np.diag([0.25, -0.5]), 0.75),
    ],
)
def test_spectral_gap(M, expected):
    assert spectral_gap(M) == pytest.approx(expected)


def test_is_gapped_triangle_edge(tri):
    flag, witness = is_gapped(tri.terms[0].matrix(), about=0, eta=0.5)
    assert flag
    assert witness in (0, 3)
    flag, witness = is_gapped(tri.terms[0].matrix(), about=1, eta=0.5)
    assert (flag, witness) == (True, 1)
    assert is_gapped(np.kron(I2, X), about=0, eta=0.1) == (False, None)


def test_select_witness_tie_goes_to_first():
    assert select_witness(np.array([1.0, 0.0, 0.0, 1.0]), 0.5) == 0
    assert select_witness(np.array([0.1, 0.2, 0.0, 0.0]), 0.5) is None


@given(seeds)
@settings(max_examples=50, deadline=None)
def test_component_gaps_match_decomposition(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    C = matrix_to_coefficients(random_hermitian(rng, 4))
    for about, lower in ((0, True), (1, False)):
        dec = decompose_about(coefficients_to_matrix(C, 2), about)
        expected = [spectral_gap(c) for c in dec.components]
        np.testing.assert_allclose(component_gaps(C, lower), expected, atol=1e-12)


def test_propagation_on_triangle(tri):
    h01, h02 = tri.terms[0], tri.terms[1]
    value = propagation_check(h01, h02, shared=0)
    assert value <= pairwise_commutator_norm(h01, h02) + 1e-9
    assert pairwise_commutator_norm(h01, h02) == pytest.approx(0.02)


def test_propagation_requires_single_shared_qubit(tri):
    with pytest.raises(DimensionError):
        propagation_check(tri.terms[0], tri.terms[1], shared=1)


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_propagation_bounded_by_commutator(seed):
    """Component commutators never exceed the commutator of the full terms"""
    rng = np.random.Generator(np.random.PCG64(seed))
    h1 = LocalTerm((0, 1), matrix_to_coefficients(random_hermitian(rng, 4)))
    h2 = LocalTerm((1, 2), matrix_to_coefficients(random_hermitian(rng, 4)))
    assert propagation_check(h1, h2, shared=1) <= pairwise_commutator_norm(h1, h2) + 1e-9
    one = LocalTerm((1,), matrix_to_coefficients(random_hermitian(rng, 2)))
    assert propagation_check(h1, one, shared=1) <= pairwise_commutator_norm(h1, one) + 1e-9


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_orthogonal_component_lower_bound(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    comps = rng.standard_normal((4, 2, 2)) + 1j * rng.standard_normal((4, 2, 2))
    T = sum(np.kron(comps[i], PAULI[i]) for i in range(4))
    assert orthogonal_component_bound(comps) <= operator_norm(T) + 1e-9


@given(seeds)
@settings(max_examples=50, deadline=None)
def test_hermitian_components_give_hermitian_term(seed):
    """Hermitian components assemble a Hermitian term, and decomposing it returns them"""
    rng = np.random.Generator(np.random.PCG64(seed))
    comps = [random_hermitian(rng, 2, scale=0.25) for _ in range(4)]
    T = sum(np.kron(A, PAULI[a]) for a, A in enumerate(comps))
    np.testing.assert_allclose(T, T.conj().T, atol=1e-15)
    np.testing.assert_allclose(decompose_about(T, 0).components, comps, atol=1e-12)


def test_non_hermitian_component_gives_non_hermitian_term():
    raising = np.array([[0, 1], [0, 0]], dtype=complex)
    T = np.kron(raising, X)
    assert not np.allclose(T, T.conj().T)
    with pytest.raises(HermiticityError):
        decompose_about(T, 0)
