"""Pauli-basis machinery for one- and two-qubit operators.

Two-qubit coefficient tensors are indexed ``C[alpha, beta]`` with ``alpha`` on the lower
qubit (left tensor factor) and ``beta`` on the upper qubit.
"""
import logging
from dataclasses import dataclass
from typing import Protocol, Sequence, Tuple

import numpy as np

from .errors import DimensionError, SchemaError
from .linalg import HERMITICITY_TOL, check_hermitian, operator_norms, partial_trace

logger = logging.getLogger(__name__)

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
PAULI_LABELS = ("I", "X", "Y", "Z")

# PAULI_PRODUCTS[a, b] = sigma_a (x) sigma_b
PAULI_PRODUCTS = np.einsum("aij,bkl->abikjl", PAULI, PAULI).reshape(4, 4, 4, 4)


class TermLike(Protocol):
    support: Tuple[int, ...]

    def matrix(self) -> np.ndarray: ...


def pauli_basis(alpha):
    if isinstance(alpha, bool) or not isinstance(alpha, (int, np.integer)) or not 0 <= alpha <= 3:
        raise SchemaError(f"Pauli index must be an integer in 0..3, got {alpha!r}")
    return PAULI[int(alpha)].copy()


def coefficients_to_matrix(coeffs, k):
    """Materialize real Pauli coefficients on ``k`` qubits (k = 0, 1, 2); leading axes are batched."""
    C = np.asarray(coeffs, dtype=float)
    if k == 0:
        return C[..., None, None] * np.eye(1, dtype=complex)
    if k == 1:
        return np.einsum("...a,aij->...ij", C, PAULI)
    if k == 2:
        return np.einsum("...ab,abij->...ij", C, PAULI_PRODUCTS)
    raise DimensionError(f"Only 0-, 1- and 2-qubit operators are supported, got k={k}")


NORM_CHUNK = 65536


def coefficient_norms(coeffs, k):
    """Operator norms of a stack of coefficient arrays, materialized in chunks."""
    C = np.asarray(coeffs, dtype=float)
    if k == 0:
        return np.abs(C)
    out = np.zeros(len(C))
    for start in range(0, len(C), NORM_CHUNK):
        out[start:start + NORM_CHUNK] = operator_norms(coefficients_to_matrix(C[start:start + NORM_CHUNK], k))
    return out


def matrix_to_coefficients(M):
    """Real Pauli coefficients of a Hermitian 2x2 or 4x4 operator (batched over leading axes)."""
    A = np.asarray(M, dtype=complex)
    d = A.shape[-1]
    if d == 2:
        return np.real(np.einsum("aji,...ij->...a", PAULI, A)) / 2
    if d == 4:
        return np.real(np.einsum("abji,...ij->...ab", PAULI_PRODUCTS, A)) / 4
    raise DimensionError(f"Expected 2x2 or 4x4 operators, got dimension {d}")


@dataclass(frozen=True)
class LocalDecomposition:
    """``term = sum_alpha A^(alpha) (x) sigma^(alpha)`` with the factors in qubit order."""

    about_qubit: int
    partner_qubit: int
    components: np.ndarray

    @property
    def about_is_lower(self):
        return self.about_qubit < self.partner_qubit

    def reconstruct(self):
        if self.about_is_lower:
            return sum(np.kron(self.components[a], PAULI[a]) for a in range(4))
        return sum(np.kron(PAULI[a], self.components[a]) for a in range(4))


def _term_and_support(term, support):
    if hasattr(term, "matrix") and hasattr(term, "support"):
        return np.asarray(term.matrix(), dtype=complex), tuple(term.support)
    return np.asarray(term, dtype=complex), tuple(support)


def decompose_about(term, about, support=(0, 1)):
    """Local Pauli decomposition of a 2-local term about one of its two qubits.

    ``term`` is either a 4x4 Hermitian matrix on ``support`` or an object exposing
    ``support`` and ``matrix()``.
    """
    T, support = _term_and_support(term, support)
    if len(support) != 2:
        raise DimensionError(f"decompose_about needs a 2-qubit support, got {list(support)}")
    if about not in support:
        raise DimensionError(f"Qubit {about} is not in support {list(support)}")
    T = check_hermitian(T, HERMITICITY_TOL)
    if T.shape != (4, 4):
        raise DimensionError(f"Expected a 4x4 term, got shape {T.shape}")

    lower, upper = sorted(support)
    partner = upper if about == lower else lower
    eye = np.eye(2, dtype=complex)
    if about == lower:
        comps = [partial_trace(np.kron(eye, PAULI[a]) @ T, (2, 2), keep=0) / 2 for a in range(4)]
    else:
        comps = [partial_trace(np.kron(PAULI[a], eye) @ T, (2, 2), keep=1) / 2 for a in range(4)]
    comps = np.array([(c + c.conj().T) / 2 for c in comps])
    return LocalDecomposition(about_qubit=int(about), partner_qubit=int(partner), components=comps)


def spectral_gap(H):
    A = check_hermitian(H)
    if A.shape != (2, 2):
        raise DimensionError(f"Expected a 2x2 matrix, got shape {A.shape}")
    return float(np.sqrt((np.real(A[0, 0] - A[1, 1])) ** 2 + 4 * abs(A[0, 1]) ** 2))


def component_gaps(coeffs, about_lower):
    """Spectral gaps of the four components of 2-local coefficient tensors.

    The component multiplying ``sigma^(beta)`` on the partner has Bloch vector ``C[1:, beta]``
    when decomposing about the lower qubit and ``C[beta, 1:]`` about the upper one; its gap is
    twice that vector's length.
    """
    C = np.asarray(coeffs, dtype=float)
    if about_lower:
        return 2 * np.linalg.norm(C[..., 1:, :], axis=-2)
    return 2 * np.linalg.norm(C[..., :, 1:], axis=-1)


def select_witness(gaps, eta):
    """Largest gap wins, ties go to the smallest alpha; ``None`` when below ``eta``."""
    best = int(np.argmax(gaps))
    if gaps[best] >= eta:
        return best
    return None


def is_gapped(term, about, eta, support=(0, 1)):
    if eta < 0:
        raise SchemaError(f"eta must be non-negative, got {eta}")
    dec = decompose_about(term, about, support)
    gaps = np.array([spectral_gap(c) for c in dec.components])
    witness = select_witness(gaps, eta)
    return witness is not None, witness


def _shared_components(term, shared):
    T, support = _term_and_support(term, ())
    if len(support) == 1:
        comps = np.zeros((4, 2, 2), dtype=complex)
        comps[0] = check_hermitian(T)
        return comps
    return decompose_about(term, shared, support).components


def propagation_check(term1: TermLike, term2: TermLike, shared: int):
    """Max over (alpha, beta) of the commutator norms of the shared-qubit components."""
    s1, s2 = set(term1.support), set(term2.support)
    if s1 & s2 != {shared}:
        raise DimensionError(
            f"Supports {sorted(s1)} and {sorted(s2)} must overlap exactly in qubit {shared}"
        )
    A = _shared_components(term1, shared)
    B = _shared_components(term2, shared)
    AB = np.einsum("aij,bjk->abik", A, B)
    BA = np.einsum("bij,ajk->abik", B, A)
    return float(operator_norms(AB - BA).max())


def orthogonal_component_bound(components: Sequence[np.ndarray]):
    """Lower bound max_i ||M_i|| on ||sum_i M_i (x) sigma^(i)||."""
    if len(components) == 0:
        return 0.0
    return float(operator_norms(np.asarray(components, dtype=complex)).max())
