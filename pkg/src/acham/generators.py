"""Deterministic instance generators.

Random families draw from ``numpy.random.Generator(numpy.random.PCG64(seed))``; the
PCG64 stream is platform independent, so a seed pins the instance bit for bit.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from .errors import RegimeError, SchemaError
from .linalg import operator_norm
from .model import Hamiltonian, LocalTerm, commutator_profile
from .pauli import matrix_to_coefficients

logger = logging.getLogger(__name__)

TRIANGLE_COUPLING = 1 / 100

# family -> (required params, optional params with defaults)
FAMILIES: Dict[str, Any] = {
    "tfim-chain": (("n",), {"h": 0.0, "periodic": False}),
    "tfim-grid": (("rows", "cols"), {"h": 0.0}),
    "triangle-paper": ((), {"c": TRIANGLE_COUPLING}),
    "triangle-figure": ((), {}),
    "random-near-commuting": (("n", "m", "eps_target"), {"seed": 0}),
}


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_params(cls, family, params=None):
        if family not in FAMILIES:
            raise SchemaError(f"Unknown family {family!r}; choose from {sorted(FAMILIES)}")
        required, optional = FAMILIES[family]
        params = dict(params or {})
        unknown = set(params) - set(required) - set(optional)
        if unknown:
            raise SchemaError(f"Unknown parameter(s) for {family}: {sorted(unknown)}")
        missing = [p for p in required if p not in params]
        if missing:
            raise SchemaError(f"Missing parameter(s) for {family}: {missing}")
        return cls(family, {**optional, **params})


def _count(params, key, minimum=1):
    value = params[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise SchemaError(f"'{key}' must be an integer >= {minimum}, got {value!r}")
    return value


def _field_strength(params):
    h = float(params["h"])
    if abs(h) > 1:
        raise RegimeError(f"Field term h*X has norm {abs(h):.6g} > 1")
    return h


def _zz():
    C = np.zeros((4, 4))
    C[3, 3] = -1.0
    return C


def _x_field(h):
    return np.array([0.0, -h, 0.0, 0.0])


def tfim_chain(n, h=0.0, periodic=False):
    """-sum Z_i Z_{i+1} - h sum X_i on an open (or periodic) chain."""
    edges = [(i, i + 1) for i in range(n - 1)]
    if periodic and n > 2:
        edges.append((0, n - 1))
    terms = [LocalTerm(e, _zz()) for e in edges]
    if h != 0:
        terms.extend(LocalTerm((i,), _x_field(h)) for i in range(n))
    return Hamiltonian.from_terms(n, terms)


def tfim_grid(rows, cols, h=0.0):
    edges = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c
            if c + 1 < cols:
                edges.append((q, q + 1))
            if r + 1 < rows:
                edges.append((q, q + cols))
    n = rows * cols
    terms = [LocalTerm(e, _zz()) for e in edges]
    if h != 0:
        terms.extend(LocalTerm((i,), _x_field(h)) for i in range(n))
    return Hamiltonian.from_terms(n, terms)


def triangle(c=TRIANGLE_COUPLING):
    """Three qubits on a triangle; the two outer-edge terms switch on the state of qubit 1.

    h(0,1) = X (x) |0><0| + c Z (x) |1><1|
    h(1,2) = |0><0| (x) X + c |1><1| (x) Z
    h(0,2) = X (x) X
    """
    if abs(c) > 1:
        raise RegimeError(f"Coupling c={c} gives a term of norm > 1")
    h01 = np.zeros((4, 4))
    h01[1, 0] = h01[1, 3] = 0.5
    h01[3, 0], h01[3, 3] = c / 2, -c / 2
    h12 = np.zeros((4, 4))
    h12[0, 1] = h12[3, 1] = 0.5
    h12[0, 3], h12[3, 3] = c / 2, -c / 2
    h02 = np.zeros((4, 4))
    h02[1, 1] = 1.0
    return Hamiltonian.from_terms(3, [LocalTerm((0, 1), h01), LocalTerm((1, 2), h12), LocalTerm((0, 2), h02)])


def triangle_reference_output():
    """Hand-rounded commuting triangle: X (x) |0><0|, X (x) X, |0><0| (x) X."""
    h01 = np.zeros((4, 4))
    h01[1, 0] = h01[1, 3] = 0.5
    h12 = np.zeros((4, 4))
    h12[0, 1] = h12[3, 1] = 0.5
    h02 = np.zeros((4, 4))
    h02[1, 1] = 1.0
    return Hamiltonian.from_terms(3, [LocalTerm((0, 1), h01), LocalTerm((1, 2), h12), LocalTerm((0, 2), h02)])


def _random_unitary(rng):
    Z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_near_commuting(n, m, eps_target, seed=0):
    """Commuting base terms diagonal in per-qubit random bases plus small Hermitian noise.

    Base terms have norm <= 1 - eps/4 and perturbations norm <= eps/4, which keeps every
    pairwise commutator below eps_target.
    """
    eps_target = float(eps_target)
    if not 0 <= eps_target <= 1:
        raise RegimeError(f"eps_target must lie in [0, 1], got {eps_target}")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if m > len(pairs):
        raise SchemaError(f"Cannot place {m} distinct 2-local terms on {n} qubits")

    rng = np.random.Generator(np.random.PCG64(seed))
    unitaries = [_random_unitary(rng) for _ in range(n)]
    chosen = sorted(pairs[i] for i in rng.choice(len(pairs), size=m, replace=False))
    base_norm = 1 - eps_target / 4

    terms = []
    for i, j in chosen:
        D = rng.uniform(-1, 1, size=4)
        D *= base_norm / np.max(np.abs(D))
        U = np.kron(unitaries[i], unitaries[j])
        base = (U * D) @ U.conj().T
        G = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        G = (G + G.conj().T) / 2
        noise = G * (eps_target / 4 / operator_norm(G))
        terms.append(LocalTerm((i, j), matrix_to_coefficients(base + noise)))
    H = Hamiltonian.from_terms(n, terms)
    logger.debug(f"random-near-commuting n={n} m={m} seed={seed}: realized eps {realized_epsilon(H):.3e}")
    return H


def generate(spec):
    p = spec.params
    if spec.family == "tfim-chain":
        return tfim_chain(_count(p, "n"), _field_strength(p), bool(p["periodic"]))
    if spec.family == "tfim-grid":
        return tfim_grid(_count(p, "rows"), _count(p, "cols"), _field_strength(p))
    if spec.family == "triangle-paper":
        return triangle(float(p["c"]))
    if spec.family == "triangle-figure":
        return triangle(TRIANGLE_COUPLING)
    if spec.family == "random-near-commuting":
        return random_near_commuting(_count(p, "n", 2), _count(p, "m", 0), p["eps_target"], _count(p, "seed", 0))
    raise SchemaError(f"Unknown family {spec.family!r}")


def realized_epsilon(H):
    return commutator_profile(H).epsilon
