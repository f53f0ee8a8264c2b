from pathlib import Path
import sys

import numpy as np
import pytest

# Ensure src is in path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from acham.generators import triangle, triangle_reference_output  # noqa: E402
from acham.model import Hamiltonian, LocalTerm  # noqa: E402
from acham.pauli import PAULI, matrix_to_coefficients  # noqa: E402

X, Y, Z = PAULI[1], PAULI[2], PAULI[3]
I2 = PAULI[0]
KET0 = np.array([[1, 0], [0, 0]], dtype=complex)
KET1 = np.array([[0, 0], [0, 1]], dtype=complex)


def random_hermitian(rng, d, scale=1.0):
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    H = (G + G.conj().T) / 2
    return H * (scale / np.linalg.norm(H, 2))


def mixed_locality(seed):
    """Per-qubit fields of widely spread strength, weak 2-local couplings and an optional constant."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = int(rng.integers(2, 8))
    terms = []
    for q in range(n):
        if rng.random() < 0.8:
            v = rng.standard_normal(3)
            v *= 10 ** rng.uniform(-7, 0) / np.linalg.norm(v)
            a0 = rng.uniform(-1, 1) * (1 - np.linalg.norm(v))
            terms.append(LocalTerm((q,), np.concatenate([[a0], v])))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = int(rng.integers(1, min(len(pairs), 2 * n) + 1))
    for idx in rng.choice(len(pairs), size=m, replace=False):
        coupling = random_hermitian(rng, 4, scale=10 ** rng.uniform(-6, -1))
        terms.append(LocalTerm(pairs[idx], matrix_to_coefficients(coupling)))
    if rng.random() < 0.5:
        terms.append(LocalTerm((), rng.uniform(-1, 1)))
    return Hamiltonian.from_terms(n, terms)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def tri():
    """The three-qubit triangle at coupling 1/100."""
    return triangle()


@pytest.fixture
def tri_reference():
    return triangle_reference_output()
