"""Dense complex linear algebra for operators on at most ``MAX_DENSE_QUBITS`` qubits.

Qubit 0 is always the leftmost (most significant) tensor factor.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, HermiticityError

logger = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-10
DEGENERATE_GAP = 1e-12
MAX_DENSE_QUBITS = 12
MAX_DENSE_DIM = 2 ** MAX_DENSE_QUBITS

_KET0 = np.array([[1, 0], [0, 0]], dtype=complex)
_KET1 = np.array([[0, 0], [0, 1]], dtype=complex)


def as_square(M):
    """Return ``M`` as a complex square ndarray or raise ``DimensionError``."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {A.shape}")
    return A


def _check_dense_cap(A):
    if A.shape[0] > MAX_DENSE_DIM:
        raise DimensionError(
            f"Dense dimension {A.shape[0]} exceeds the cap of {MAX_DENSE_DIM} ({MAX_DENSE_QUBITS} qubits)"
        )


def check_hermitian(M, tol=HERMITICITY_TOL):
    """Validate Hermiticity entrywise and return the symmetrized matrix (M + M†)/2."""
    A = as_square(M)
    drift = np.max(np.abs(A - A.conj().T)) if A.size else 0.0
    if drift > tol:
        raise HermiticityError(f"Matrix is not Hermitian: max |M - M^dagger| = {drift:.3e} > {tol:.0e}")
    return (A + A.conj().T) / 2


def operator_norm(M):
    A = as_square(M)
    if A.size == 0:
        return 0.0
    top = np.linalg.eigvalsh(A.conj().T @ A)[-1]
    return float(np.sqrt(max(top, 0.0)))


def operator_norms(stack):
    """Operator norms of a ``(..., d, d)`` stack, evaluated in one batched eigensolve."""
    S = np.asarray(stack, dtype=complex)
    if S.ndim < 2 or S.shape[-1] != S.shape[-2]:
        raise DimensionError(f"Expected a stack of square matrices, got shape {S.shape}")
    if S.shape[-1] == 0 or S.size == 0:
        return np.zeros(S.shape[:-2])
    gram = np.conj(np.swapaxes(S, -1, -2)) @ S
    top = np.linalg.eigvalsh(gram)[..., -1]
    return np.sqrt(np.clip(top, 0.0, None))


def trace_norm(M):
    A = as_square(M)
    return float(np.linalg.svd(A, compute_uv=False).sum())


def commutator(A, B):
    A = as_square(A)
    B = as_square(B)
    if A.shape != B.shape:
        raise DimensionError(f"Commutator of mismatched shapes {A.shape} and {B.shape}")
    return A @ B - B @ A


@dataclass(frozen=True)
class SpectralDecomposition2:
    lambda_min: float
    lambda_max: float
    projector_min: np.ndarray
    projector_max: np.ndarray

    @property
    def gap(self):
        return self.lambda_max - self.lambda_min

    def reconstruct(self):
        return self.lambda_min * self.projector_min + self.lambda_max * self.projector_max


def bloch_components(H):
    """Split a Hermitian 2x2 matrix into (a0, v) with H = a0 I + v . (X, Y, Z)."""
    a0 = float(np.real(H[0, 0] + H[1, 1]) / 2)
    v = np.array([np.real(H[0, 1]), -np.imag(H[0, 1]), np.real(H[0, 0] - H[1, 1]) / 2])
    return a0, v


def spectral_decompose_2x2(H):
    """Closed-form eigendecomposition of a Hermitian 2x2 matrix.

    Degenerate spectra (gap < ``DEGENERATE_GAP``) get the canonical projectors
    |0><0| for the lower and |1><1| for the upper eigenvalue.
    """
    A = check_hermitian(H)
    if A.shape != (2, 2):
        raise DimensionError(f"Expected a 2x2 matrix, got shape {A.shape}")
    a0, v = bloch_components(A)
    r = float(np.linalg.norm(v))
    if 2 * r < DEGENERATE_GAP:
        return SpectralDecomposition2(a0 - r, a0 + r, _KET0.copy(), _KET1.copy())
    nx, ny, nz = v / r
    upper = 0.5 * np.array([[1 + nz, nx - 1j * ny], [nx + 1j * ny, 1 - nz]])
    return SpectralDecomposition2(a0 - r, a0 + r, np.eye(2) - upper, upper)


def hermitian_eig(H):
    A = check_hermitian(H)
    _check_dense_cap(A)
    return scipy.linalg.eigh(A)


def matrix_exponential(M, scale=1.0):
    A = as_square(M)
    _check_dense_cap(A)
    return scipy.linalg.expm(scale * A)


def partial_trace(M, dims, keep):
    """Trace out one factor of a bipartite operator on ``dims = (d1, d2)``; ``keep`` is 0 or 1."""
    A = as_square(M)
    d1, d2 = (int(d) for d in dims)
    if d1 * d2 != A.shape[0]:
        raise DimensionError(f"Dimension {A.shape[0]} does not factor as {d1} x {d2}")
    T = A.reshape(d1, d2, d1, d2)
    if keep == 0:
        return np.einsum("ijkj->ik", T)
    if keep == 1:
        return np.einsum("ijil->jl", T)
    raise DimensionError(f"keep must be 0 or 1, got {keep!r}")


def embed_on_qubits(local, support, n):
    """Operator on ``n`` qubits acting as ``local`` on ``support`` and as identity elsewhere."""
    L = as_square(local)
    support = [int(q) for q in support]
    k = len(support)
    if len(set(support)) != k:
        raise DimensionError(f"Repeated qubit in support {support}")
    if any(q < 0 or q >= n for q in support):
        raise DimensionError(f"Support {support} out of range for {n} qubits")
    if n > MAX_DENSE_QUBITS:
        raise DimensionError(f"Dense embedding capped at {MAX_DENSE_QUBITS} qubits, got {n}")
    if L.shape[0] != 2 ** k:
        raise DimensionError(f"Local operator of dimension {L.shape[0]} does not act on {k} qubits")

    rest = [q for q in range(n) if q not in support]
    full = np.kron(L, np.eye(2 ** len(rest), dtype=complex))
    order = support + rest
    position = [order.index(q) for q in range(n)]
    full = full.reshape((2,) * (2 * n))
    full = full.transpose(position + [n + p for p in position])
    return full.reshape(2 ** n, 2 ** n)
