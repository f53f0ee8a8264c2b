"""2-local Hamiltonian data model and the pairwise commutator profile."""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import DimensionError, NormViolationError, SchemaError
from .linalg import DEGENERATE_GAP, MAX_DENSE_QUBITS, commutator, embed_on_qubits, operator_norm, operator_norms
from .pauli import coefficient_norms, coefficients_to_matrix

logger = logging.getLogger(__name__)

FORMAT = "acham-v1"
NORM_TOL = 1e-9
PROFILE_CHUNK = 65536

_EYE2 = np.eye(2, dtype=complex)
_COEFF_SHAPES = {0: (), 1: (4,), 2: (4, 4)}


@dataclass(frozen=True, eq=False)
class LocalTerm:
    """A Hermitian term stored as real Pauli coefficients on a sorted support."""

    support: Tuple[int, ...]
    coeffs: np.ndarray

    def __post_init__(self):
        support = tuple(int(q) for q in self.support)
        if len(support) > 2:
            raise SchemaError(f"Only terms on at most two qubits are supported, got {list(support)}")
        if len(set(support)) != len(support):
            raise SchemaError(f"Repeated qubit in support {list(support)}")
        if any(q < 0 for q in support):
            raise SchemaError(f"Negative qubit index in support {list(support)}")
        coeffs = np.array(self.coeffs, dtype=float)
        expected = _COEFF_SHAPES[len(support)]
        if coeffs.shape != expected:
            raise SchemaError(
                f"Term on {list(support)} needs coefficients of shape {expected}, got {coeffs.shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise SchemaError(f"Non-finite coefficient in term on {list(support)}")
        if len(support) == 2 and support[0] > support[1]:
            # rows follow the lower qubit
            coeffs = coeffs.T.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "support", tuple(sorted(support)))
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def k(self):
        return len(self.support)

    def matrix(self):
        return coefficients_to_matrix(self.coeffs, self.k)

    def norm(self):
        return operator_norm(self.matrix())

    def acting_support(self, tol=DEGENERATE_GAP):
        """Qubits on which the term is not proportional to the identity."""
        C = self.coeffs
        if self.k == 0:
            return ()
        if self.k == 1:
            return self.support if np.max(np.abs(C[1:])) > tol else ()
        lower, upper = self.support
        acting = []
        if np.max(np.abs(C[1:, :])) > tol:
            acting.append(lower)
        if np.max(np.abs(C[:, 1:])) > tol:
            acting.append(upper)
        return tuple(acting)

    def reduced(self, tol=DEGENERATE_GAP):
        """The same operator on its acting support only."""
        acting = self.acting_support(tol)
        if acting == self.support:
            return self
        C = self.coeffs
        if self.k == 1 or not acting:
            return LocalTerm((), C.flat[0])
        if acting[0] == self.support[0]:
            return LocalTerm(acting, C[:, 0])
        return LocalTerm(acting, C[0, :])

    def oriented(self, first):
        """Coefficients as a 4x4 tensor whose left factor is ``first``.

        1-local terms are padded with the identity on the other side; ``first`` names the
        qubit of the term itself or ``None`` for the padded slot.
        """
        C = self.coeffs
        if self.k == 1:
            out = np.zeros((4, 4))
            if first == self.support[0]:
                out[:, 0] = C
            else:
                out[0, :] = C
            return out
        if self.k == 2:
            return C if first == self.support[0] else C.T
        raise DimensionError("0-local terms have no orientation")

    def __eq__(self, other):
        if not isinstance(other, LocalTerm):
            return NotImplemented
        return self.support == other.support and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash((self.support, self.coeffs.tobytes()))


def check_term_norms(terms):
    """Raise ``NormViolationError`` for the first term with ||h|| > 1 + NORM_TOL."""
    by_k = defaultdict(list)
    for idx, t in enumerate(terms):
        by_k[t.k].append(idx)
    for k, idxs in sorted(by_k.items()):
        norms = coefficient_norms(np.stack([terms[i].coeffs for i in idxs]), k)
        bad = np.nonzero(norms > 1 + NORM_TOL)[0]
        if bad.size:
            offender = terms[idxs[bad[0]]]
            raise NormViolationError(offender.support, norms[bad[0]])


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    n: int
    terms: Tuple[LocalTerm, ...] = ()

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise SchemaError(f"Qubit count must be a non-negative integer, got {self.n!r}")
        terms = tuple(sorted(self.terms, key=lambda t: t.support))
        seen = set()
        for t in terms:
            if any(q >= self.n for q in t.support):
                raise SchemaError(f"Term support {list(t.support)} out of range for n={self.n}")
            if t.support in seen:
                raise SchemaError(f"Duplicate term on support {list(t.support)}")
            seen.add(t.support)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_terms(cls, n, terms):
        """Merge duplicate supports by summation, sort, and enforce unit norms."""
        merged: Dict[Tuple[int, ...], np.ndarray] = {}
        for t in terms:
            if t.support in merged:
                logger.debug(f"Merging duplicate term on {list(t.support)}")
                merged[t.support] = merged[t.support] + t.coeffs
            else:
                merged[t.support] = np.array(t.coeffs, dtype=float)
        merged_terms = [LocalTerm(s, c) for s, c in merged.items()]
        check_term_norms(merged_terms)
        return cls(n, tuple(merged_terms))

    @property
    def m(self):
        return len(self.terms)

    def supports(self):
        return [t.support for t in self.terms]

    def incidence(self):
        """Map qubit -> indices of the terms whose support contains it."""
        table = defaultdict(list)
        for idx, t in enumerate(self.terms):
            for q in t.support:
                table[q].append(idx)
        return dict(table)

    def interaction_graph(self):
        return [t.support for t in self.terms if t.k == 2]

    def with_terms(self, terms):
        return Hamiltonian(self.n, tuple(terms))

    def matrix(self):
        if self.n > MAX_DENSE_QUBITS:
            raise DimensionError(f"Dense Hamiltonian capped at {MAX_DENSE_QUBITS} qubits, got n={self.n}")
        dim = 2 ** self.n
        H = np.zeros((dim, dim), dtype=complex)
        for t in self.terms:
            H += embed_on_qubits(t.matrix(), t.support, self.n)
        return H


def _real_number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a real number, got {value!r}")
    if not math.isfinite(value):
        raise SchemaError(f"{where}: non-finite number {value!r}")
    return float(value)


def _parse_coeffs(raw, k, where):
    if k == 0:
        return np.array(_real_number(raw, where))
    if not isinstance(raw, list) or len(raw) != 4:
        raise SchemaError(f"{where}: coefficients must be a list of 4 entries")
    if k == 1:
        return np.array([_real_number(v, where) for v in raw])
    rows = []
    for row in raw:
        if not isinstance(row, list) or len(row) != 4:
            raise SchemaError(f"{where}: 2-local coefficients must be a 4x4 nested list")
        rows.append([_real_number(v, where) for v in row])
    return np.array(rows)


def ingest(raw):
    """Validate an ``acham-v1`` document and build the Hamiltonian it describes."""
    if not isinstance(raw, dict):
        raise SchemaError("Instance document must be a JSON object")
    if raw.get("format") != FORMAT:
        raise SchemaError(f"Unsupported format {raw.get('format')!r}, expected {FORMAT!r}")
    n = raw.get("n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 0:
        raise SchemaError(f"'n' must be a non-negative integer, got {n!r}")
    raw_terms = raw.get("terms")
    if not isinstance(raw_terms, list):
        raise SchemaError("'terms' must be a list")

    terms = []
    for idx, entry in enumerate(raw_terms):
        where = f"terms[{idx}]"
        if not isinstance(entry, dict) or "qubits" not in entry or "coeffs" not in entry:
            raise SchemaError(f"{where}: expected an object with 'qubits' and 'coeffs'")
        qubits = entry["qubits"]
        if not isinstance(qubits, list) or len(qubits) > 2:
            raise SchemaError(f"{where}: 'qubits' must list at most two indices")
        for q in qubits:
            if isinstance(q, bool) or not isinstance(q, int):
                raise SchemaError(f"{where}: qubit indices must be integers, got {q!r}")
            if not 0 <= q < n:
                raise SchemaError(f"{where}: qubit index {q} out of range for n={n}")
        terms.append(LocalTerm(tuple(qubits), _parse_coeffs(entry["coeffs"], len(qubits), where)))

    H = Hamiltonian.from_terms(n, terms)
    logger.debug(f"Ingested Hamiltonian with n={H.n}, m={H.m}")
    return H


def serialize(H):
    terms = []
    for t in H.terms:
        coeffs = float(t.coeffs) if t.k == 0 else t.coeffs.tolist()
        terms.append({"qubits": list(t.support), "coeffs": coeffs})
    return {"format": FORMAT, "n": H.n, "terms": terms}


def term_matrix(t):
    return t.matrix()


def pairwise_commutator_norm(h1, h2):
    joint = sorted(set(h1.support) | set(h2.support))
    if h1.k == 0 or h2.k == 0 or not set(h1.support) & set(h2.support):
        return 0.0
    positions = {q: i for i, q in enumerate(joint)}
    A = embed_on_qubits(h1.matrix(), [positions[q] for q in h1.support], len(joint))
    B = embed_on_qubits(h2.matrix(), [positions[q] for q in h2.support], len(joint))
    return operator_norm(commutator(A, B))


@dataclass(frozen=True)
class CommutatorProfile:
    """Commutator norms of the overlapping term pairs; disjoint pairs are implicitly zero."""

    pairwise: Dict[Tuple[int, int], float] = field(default_factory=dict)
    epsilon: float = 0.0
    worst_pair: Optional[Tuple[int, int]] = None

    def value(self, i, j):
        if i == j:
            return 0.0
        return self.pairwise.get((min(i, j), max(i, j)), 0.0)


def overlapping_pairs(H):
    """Sorted (i, j, shared) for every pair of non-constant terms sharing a qubit."""
    pairs = {}
    for q, idxs in H.incidence().items():
        for a in range(len(idxs)):
            for b in range(a + 1, len(idxs)):
                pairs[(idxs[a], idxs[b])] = q
    return [(i, j, q) for (i, j), q in sorted(pairs.items())]


def _joint_operators(H, pairs):
    """8x8 operators on (other1, shared, other2) for a batch of pairs."""
    left = np.empty((len(pairs), 4, 4))
    right = np.empty((len(pairs), 4, 4))
    for row, (i, j, q) in enumerate(pairs):
        t1, t2 = H.terms[i], H.terms[j]
        # left factor: (other1, shared); right factor: (shared, other2)
        left[row] = t1.oriented(first=None if t1.k == 1 else _other(t1, q))
        right[row] = t2.oriented(first=q)
    P1 = coefficients_to_matrix(left, 2)
    P2 = coefficients_to_matrix(right, 2)
    A = np.einsum("bij,kl->bikjl", P1, _EYE2).reshape(len(pairs), 8, 8)
    B = np.einsum("kl,bij->bkilj", _EYE2, P2).reshape(len(pairs), 8, 8)
    return A, B


def _other(term, shared):
    return term.support[0] if term.support[1] == shared else term.support[1]


def pair_commutator_norms(H, pairs):
    """Batched commutator norms for ``pairs`` as produced by ``overlapping_pairs``."""
    out = np.empty(len(pairs))
    for start in range(0, len(pairs), PROFILE_CHUNK):
        chunk = pairs[start:start + PROFILE_CHUNK]
        A, B = _joint_operators(H, chunk)
        out[start:start + len(chunk)] = operator_norms(A @ B - B @ A)
    return out


def commutator_profile(H):
    pairs = overlapping_pairs(H)
    if not pairs:
        return CommutatorProfile()
    norms = pair_commutator_norms(H, pairs)
    pairwise = {(i, j): float(v) for (i, j, _), v in zip(pairs, norms)}
    worst = int(np.argmax(norms))
    eps = float(norms[worst])
    worst_pair = (pairs[worst][0], pairs[worst][1]) if eps > 0 else None
    logger.debug(f"Commutator profile over {len(pairs)} overlapping pairs: eps={eps:.6g}")
    return CommutatorProfile(pairwise=pairwise, epsilon=eps, worst_pair=worst_pair)
