"""Rounding of almost-commuting 2-local Hamiltonians to exactly commuting ones.

The pipeline runs in five stages over a padded coefficient table:

1. partition 2-local terms by two-sided ``eta2``-gappedness,
2. snap ungapped 2-local terms to 1-local terms about their weak qubit,
3. snap ``eta1``-ungapped 1-local terms to multiples of the identity,
4. choose one pivot per qubit,
5. pinch every term about the pivots on its support.

Every term of the output keeps the support of its input term; snapped qubits carry the
identity. Internally a 1-local term on ``q`` is stored as ``C[:, 0]`` of a 4x4 tensor whose
lower slot is ``q`` and a 0-local term as ``C[0, 0]``.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .errors import DegeneratePivotError, DimensionError, InvariantViolationError, RegimeError
from .linalg import DEGENERATE_GAP, as_square, operator_norms, spectral_decompose_2x2
from .model import Hamiltonian, LocalTerm, check_term_norms, commutator_profile
from .pauli import coefficient_norms, coefficients_to_matrix, component_gaps
from .verify import COMMUTE_TOL, ROUNDING_CONSTANT, global_distance

logger = logging.getLogger(__name__)

REPORT_FORMAT = "acham-report-v1"
BOUND_TOL = 1e-9
CHUNK = 65536


class Stage(str, Enum):
    KEPT_2LOCAL = "kept-2local"
    SNAPPED_TO_1LOCAL = "snapped-to-1local"
    SNAPPED_TO_0LOCAL = "snapped-to-0local"
    KEPT_1LOCAL = "kept-1local"
    KEPT_0LOCAL = "kept-0local"


_STAGES = list(Stage)
_CODE = {stage: code for code, stage in enumerate(_STAGES)}


@dataclass(frozen=True)
class StageParams:
    eps2: float
    eta2: float
    eps1: float
    eta1: float

    @classmethod
    def from_epsilon(cls, eps):
        eps = float(eps)
        if not 0.0 <= eps <= 1.0:
            raise RegimeError(f"Rounding needs 0 <= eps <= 1, got eps={eps:.6g}")
        eta2 = eps ** (1 / 3)
        eps1 = eps + 16 * eta2
        return cls(eps2=eps, eta2=eta2, eps1=eps1, eta1=math.sqrt(eps1))

    @property
    def per_term_bound(self):
        return ROUNDING_CONSTANT * self.eps2 ** (1 / 6)

    def global_bound(self, m):
        return m * self.per_term_bound

    @property
    def kappa_2local(self):
        return 24 * self.eps2 / self.eta2 if self.eta2 > 0 else 0.0

    def to_document(self):
        return {"eps2": self.eps2, "eta2": self.eta2, "eps1": self.eps1, "eta1": self.eta1}


@dataclass(frozen=True, eq=False)
class Pivot:
    """Per-qubit pivot; ``bloch`` holds (a0, vx, vy, vz) of R_i, ``None`` marks the identity."""

    qubit: int
    bloch: Optional[np.ndarray]
    gap_floor: float
    kappa: float
    provenance: str
    source_support: Optional[Tuple[int, ...]] = None
    source_alpha: Optional[int] = None
    realized_kappa: float = 0.0

    @property
    def is_identity(self):
        return self.bloch is None

    @property
    def operator(self):
        if self.bloch is None:
            return None
        return coefficients_to_matrix(self.bloch, 1)

    @property
    def gap(self):
        if self.bloch is None:
            return 0.0
        return float(2 * np.linalg.norm(self.bloch[1:]))

    @property
    def pinch_ratio(self):
        if self.bloch is None or self.kappa == 0:
            return 0.0
        return self.kappa / self.gap_floor

    def to_document(self):
        doc = {
            "qubit": self.qubit,
            "provenance": self.provenance,
            "operator": None if self.bloch is None else self.bloch.tolist(),
            "gap": self.gap,
            "gap_floor": self.gap_floor,
            "kappa": self.kappa,
            "realized_kappa": self.realized_kappa,
        }
        if self.source_support is not None:
            doc["source_support"] = list(self.source_support)
            doc["source_alpha"] = self.source_alpha
        return doc


@dataclass(frozen=True, eq=False)
class SnappedHamiltonian:
    hamiltonian: Hamiltonian
    stage_codes: np.ndarray
    snap_counts: np.ndarray
    snap_distances: np.ndarray

    @property
    def stages(self):
        return [_STAGES[c] for c in self.stage_codes]


@dataclass(eq=False)
class RoundingReport:
    eps: float
    eps_realized: float
    stage_params: StageParams
    pivots: List[Pivot]
    supports: List[Tuple[int, ...]]
    stage_codes: np.ndarray
    snap_distances: np.ndarray
    pinch_distances: np.ndarray
    pinch_bounds: np.ndarray
    distances: np.ndarray
    global_distance: float
    global_distance_exact: bool
    max_residual_commutator: float
    violations: List[str] = field(default_factory=list)

    @property
    def m(self):
        return len(self.supports)

    @property
    def global_distance_bound(self):
        return self.stage_params.global_bound(self.m)

    @property
    def bounds_satisfied(self):
        return not self.violations

    @property
    def per_term(self):
        bound = self.stage_params.per_term_bound
        return [
            {
                "support": list(s),
                "stage": _STAGES[c].value,
                "snap_distance": float(sd),
                "pinch_distance": float(pd),
                "pinch_bound": float(pb),
                "distance_to_input": float(d),
                "bound": bound,
            }
            for s, c, sd, pd, pb, d in zip(
                self.supports, self.stage_codes, self.snap_distances,
                self.pinch_distances, self.pinch_bounds, self.distances,
            )
        ]

    def to_document(self):
        return {
            "format": REPORT_FORMAT,
            "eps": self.eps,
            "eps_realized": self.eps_realized,
            "stage_params": self.stage_params.to_document(),
            "per_term_bound": self.stage_params.per_term_bound,
            "pivots": [p.to_document() for p in self.pivots],
            "per_term": self.per_term,
            "global_distance": self.global_distance,
            "global_distance_exact": self.global_distance_exact,
            "global_distance_bound": self.global_distance_bound,
            "max_residual_commutator": self.max_residual_commutator,
            "bounds_satisfied": self.bounds_satisfied,
            "violations": list(self.violations),
        }


# 2x2 primitives

def pinch(B, A):
    """Pinch ``B`` about the eigenprojectors of the gapped Hermitian 2x2 matrix ``A``."""
    B = as_square(B)
    if B.shape != (2, 2):
        raise DimensionError(f"pinch expects a 2x2 matrix, got shape {B.shape}")
    dec = spectral_decompose_2x2(A)
    if dec.gap <= DEGENERATE_GAP:
        raise DegeneratePivotError(f"Cannot pinch about a degenerate operator (gap {dec.gap:.3e})")
    P, Q = dec.projector_max, dec.projector_min
    return P @ B @ P + Q @ B @ Q


def snap(B):
    """Replace a Hermitian 2x2 matrix by lambda_max times the identity."""
    dec = spectral_decompose_2x2(B)
    return dec.lambda_max * np.eye(2, dtype=complex)


def snap_term_to_1local(term, weak_qubit, eta):
    """Snap every component of a 2-local term about ``weak_qubit`` to the identity.

    The result keeps the support of ``term`` and acts trivially on ``weak_qubit``;
    ``LocalTerm.reduced()`` gives the 1-local term on the partner qubit.
    """
    if term.k != 2:
        raise DimensionError(f"Only 2-local terms can be snapped to 1-local, got support {list(term.support)}")
    if weak_qubit not in term.support:
        raise DimensionError(f"Qubit {weak_qubit} is not in support {list(term.support)}")
    about_lower = weak_qubit == term.support[0]
    gaps = component_gaps(term.coeffs, about_lower)
    if gaps.max() >= eta:
        raise InvariantViolationError(
            f"Term on {list(term.support)} is {eta:.3g}-gapped on qubit {weak_qubit} (gap {gaps.max():.3g})"
        )
    C = term.coeffs
    out = np.zeros((4, 4))
    if about_lower:
        out[0, :] = C[0, :] + np.linalg.norm(C[1:, :], axis=0)
    else:
        out[:, 0] = C[:, 0] + np.linalg.norm(C[:, 1:], axis=1)
    return LocalTerm(term.support, out)


# padded table helpers

def _padded(H):
    m = H.m
    C = np.zeros((m, 4, 4))
    lo = np.full(m, -1, dtype=np.int64)
    hi = np.full(m, -1, dtype=np.int64)
    k = np.zeros(m, dtype=np.int64)
    for idx, t in enumerate(H.terms):
        k[idx] = t.k
        if t.k == 2:
            C[idx] = t.coeffs
            lo[idx], hi[idx] = t.support
        elif t.k == 1:
            C[idx, :, 0] = t.coeffs
            lo[idx] = t.support[0]
        else:
            C[idx, 0, 0] = float(t.coeffs)
    return C, lo, hi, k


def _unpadded(H, C):
    terms = []
    for t, c in zip(H.terms, C):
        if t.k == 2:
            terms.append(LocalTerm(t.support, c))
        elif t.k == 1:
            terms.append(LocalTerm(t.support, c[:, 0]))
        else:
            terms.append(LocalTerm((), c[0, 0]))
    return H.with_terms(terms)


def _changed_norms(before, after):
    out = np.zeros(len(before))
    diff = after - before
    rows = np.nonzero(np.abs(diff).reshape(len(diff), -1).max(axis=1) > 0)[0] if len(diff) else []
    if len(rows):
        out[rows] = coefficient_norms(diff[rows], 2)
    return out


def _acting_pairs(C, lo, hi):
    """(qubit, term, qubit-is-lower-slot) for every term acting nontrivially on a qubit."""
    idx = np.arange(len(C))
    act_lo = (lo >= 0) & (np.abs(C[:, 1:, :]).reshape(len(C), 12).max(axis=1, initial=0) > DEGENERATE_GAP)
    act_hi = (hi >= 0) & (np.abs(C[:, :, 1:]).reshape(len(C), 12).max(axis=1, initial=0) > DEGENERATE_GAP)
    q = np.concatenate([lo[act_lo], hi[act_hi]])
    t = np.concatenate([idx[act_lo], idx[act_hi]])
    lower = np.concatenate([np.ones(act_lo.sum(), bool), np.zeros(act_hi.sum(), bool)])
    return q, t, lower


def _components(C, lower):
    """Component tensors ``comp[p, alpha] = (a0, vx, vy, vz)`` about the given slot."""
    return np.where(lower[:, None, None], np.swapaxes(C, 1, 2), C)


# stages

def snap_stages(H, params):
    """Stages 1-3: snap ungapped 2-local terms, then snap ungapped 1-local terms."""
    C_in, lo, hi, k = _padded(H)
    C = C_in.copy()
    two = k == 2

    gapped_lo = component_gaps(C, True).max(axis=-1) >= params.eta2
    gapped_hi = component_gaps(C, False).max(axis=-1) >= params.eta2
    kept2 = two & gapped_lo & gapped_hi
    snap_lo = two & ~gapped_lo
    snap_hi = two & gapped_lo & ~gapped_hi

    if snap_lo.any():
        top = C[snap_lo, 0, :] + np.linalg.norm(C[snap_lo, 1:, :], axis=1)
        C[snap_lo] = 0.0
        C[snap_lo, 0, :] = top
    if snap_hi.any():
        top = C[snap_hi, :, 0] + np.linalg.norm(C[snap_hi, :, 1:], axis=2)
        C[snap_hi] = 0.0
        C[snap_hi, :, 0] = top
    logger.info(
        f"Snapping 2-local terms at eta2={params.eta2:.6g}: kept {int(kept2.sum())}, "
        f"snapped {int(snap_lo.sum() + snap_hi.sum())}"
    )

    one = (k == 1) | snap_lo | snap_hi
    side_lower = (k == 1) | snap_hi
    vec = np.where(side_lower[:, None], C[:, :, 0], C[:, 0, :])
    half_gap = np.linalg.norm(vec[:, 1:], axis=1)
    to_identity = one & (2 * half_gap < params.eta1)
    if to_identity.any():
        top = vec[to_identity, 0] + half_gap[to_identity]
        C[to_identity] = 0.0
        C[to_identity, 0, 0] = top
    logger.info(f"Snapping 1-local terms at eta1={params.eta1:.6g}: {int(to_identity.sum())} became constants")

    codes = np.full(len(C), _CODE[Stage.KEPT_0LOCAL], dtype=np.int64)
    codes[kept2] = _CODE[Stage.KEPT_2LOCAL]
    codes[(k == 1) & ~to_identity] = _CODE[Stage.KEPT_1LOCAL]
    codes[(snap_lo | snap_hi) & ~to_identity] = _CODE[Stage.SNAPPED_TO_1LOCAL]
    codes[to_identity] = _CODE[Stage.SNAPPED_TO_0LOCAL]
    counts = (snap_lo | snap_hi).astype(np.int64) + to_identity.astype(np.int64)

    return SnappedHamiltonian(
        hamiltonian=_unpadded(H, C),
        stage_codes=codes,
        snap_counts=counts,
        snap_distances=_changed_norms(C_in, C),
    )


def select_pivots(H_snap, params):
    """Stage 4: one pivot per qubit, from a 1-local term when possible, else a 2-local term."""
    H = H_snap.hamiltonian
    C, lo, hi, _ = _padded(H)
    codes = H_snap.stage_codes
    m = H.m
    q, t, lower = _acting_pairs(C, lo, hi)
    counts = np.bincount(q, minlength=H.n) if len(q) else np.zeros(H.n, dtype=np.int64)

    gaps = 2 * np.linalg.norm(_components(C[t], lower)[..., 1:], axis=-1) if len(t) else np.zeros((0, 4))
    one_stage = np.isin(codes[t], [_CODE[Stage.KEPT_1LOCAL], _CODE[Stage.SNAPPED_TO_1LOCAL]])
    floor_1 = max(params.eta1, DEGENERATE_GAP)
    floor_2 = max(params.eta2, DEGENERATE_GAP)

    best_b = np.full(H.n, m, dtype=np.int64)
    cand_b = one_stage & (gaps.max(axis=-1, initial=0) >= floor_1)
    np.minimum.at(best_b, q[cand_b], t[cand_b])
    best_c = np.full(H.n, m, dtype=np.int64)
    cand_c = codes[t] == _CODE[Stage.KEPT_2LOCAL]
    np.minimum.at(best_c, q[cand_c], t[cand_c])

    chosen = np.where(best_b < m, best_b, best_c)
    needs = counts >= 2
    missing = needs & (chosen >= m)
    if missing.any():
        bad = int(np.nonzero(missing)[0][0])
        raise InvariantViolationError(f"Qubit {bad} is shared by several terms but no gapped pivot exists")

    qubits = np.nonzero(needs)[0]
    src = chosen[qubits]
    src_lower = lo[src] == qubits
    comps = _components(C[src], src_lower)
    comp_gaps = 2 * np.linalg.norm(comps[..., 1:], axis=-1)
    witness = np.argmax(comp_gaps, axis=-1)
    bloch = comps[np.arange(len(src)), witness]
    from_b = best_b[qubits] < m
    floors = np.where(from_b, floor_1, floor_2)
    short = comp_gaps[np.arange(len(src)), witness] < floors
    if short.any():
        bad = int(qubits[np.nonzero(short)[0][0]])
        raise InvariantViolationError(f"Pivot candidate on qubit {bad} is not gapped")

    pivots = [Pivot(qubit=i, bloch=None, gap_floor=1.0, kappa=0.0, provenance="identity") for i in range(H.n)]
    for row, i in enumerate(qubits):
        term = H.terms[src[row]]
        if from_b[row]:
            pivots[i] = Pivot(
                qubit=int(i), bloch=bloch[row].copy(), gap_floor=floor_1, kappa=params.eps1,
                provenance="1-local term", source_support=term.support, source_alpha=int(witness[row]),
            )
        else:
            pivots[i] = Pivot(
                qubit=int(i), bloch=bloch[row].copy(), gap_floor=floor_2, kappa=params.kappa_2local,
                provenance="2-local term", source_support=term.support, source_alpha=int(witness[row]),
            )
    logger.info(
        f"Selected pivots: {int(H.n - needs.sum())} identity, {int(from_b.sum())} from 1-local terms, "
        f"{int((~from_b).sum())} from 2-local terms"
    )
    return _with_realized_kappa(H, C, lo, hi, pivots)


def _with_realized_kappa(H, C, lo, hi, pivots):
    q, t, lower = _acting_pairs(C, lo, hi)
    has_pivot = np.array([not p.is_identity for p in pivots], dtype=bool)
    if not len(q) or not has_pivot.any():
        return pivots
    keep = has_pivot[q]
    q, t, lower = q[keep], t[keep], lower[keep]
    R = np.array([p.bloch if p.bloch is not None else np.zeros(4) for p in pivots])
    realized = np.zeros(H.n)
    for start in range(0, len(q), CHUNK):
        qs, ts, ls = q[start:start + CHUNK], t[start:start + CHUNK], lower[start:start + CHUNK]
        Rc = np.zeros((len(qs), 4, 4))
        Rc[ls, :, 0] = R[qs[ls]]
        Rc[~ls, 0, :] = R[qs[~ls]]
        A = coefficients_to_matrix(Rc, 2)
        B = coefficients_to_matrix(C[ts], 2)
        np.maximum.at(realized, qs, operator_norms(A @ B - B @ A))
    return [
        p if p.is_identity else Pivot(
            qubit=p.qubit, bloch=p.bloch, gap_floor=p.gap_floor, kappa=p.kappa, provenance=p.provenance,
            source_support=p.source_support, source_alpha=p.source_alpha, realized_kappa=float(realized[p.qubit]),
        )
        for p in pivots
    ]


def _projectors(pivots, n):
    """Bloch-space pinching maps per qubit, plus a trailing identity for empty slots."""
    P = np.tile(np.eye(4), (n + 1, 1, 1))
    for p in pivots:
        if p.bloch is None:
            continue
        v = p.bloch[1:] / np.linalg.norm(p.bloch[1:])
        P[p.qubit, 1:, 1:] = np.outer(v, v)
    return P


def global_pinch(H_snap, pivots):
    """Stage 5: apply the pinching map of each qubit's pivot to every term on that qubit."""
    H = H_snap.hamiltonian if isinstance(H_snap, SnappedHamiltonian) else H_snap
    C, lo, hi, _ = _padded(H)
    P = _projectors(pivots, H.n)
    out = np.einsum("mab,mbc,mdc->mad", P[lo], C, P[hi])
    return _unpadded(H, out)


def _stage_bounds(params, codes, counts, k):
    bound = np.zeros(len(codes))
    from_two = (k == 2) & (counts >= 1)
    bound[from_two] = 4 * params.eta2
    bound[from_two & (counts == 2)] += 4 * params.eta1
    bound[(k == 1) & (counts == 1)] = 4 * params.eta1
    return bound


def round_hamiltonian(H, eps_override=None):
    """Round ``H`` to a commuting Hamiltonian on the same supports; returns ``(Hhat, report)``."""
    check_term_norms(list(H.terms))
    realized = commutator_profile(H).epsilon
    eps = realized if eps_override is None else float(eps_override)
    if eps_override is not None and eps < realized:
        logger.warning(
            f"Promised eps={eps:.6g} is below the realized eps={realized:.6g}; bounds may not hold"
        )
    params = StageParams.from_epsilon(eps)
    logger.info(f"Rounding n={H.n}, m={H.m} at eps={params.eps2:.6g} (realized {realized:.6g})")

    snapped = snap_stages(H, params)
    pivots = select_pivots(snapped, params)
    Hhat = global_pinch(snapped, pivots)

    C_in, lo, hi, k = _padded(H)
    C_snap, _, _, _ = _padded(snapped.hamiltonian)
    C_out, _, _, _ = _padded(Hhat)
    distances = _changed_norms(C_in, C_out)
    pinch_distances = _changed_norms(C_snap, C_out)
    ratio = np.append([p.pinch_ratio for p in pivots], 0.0)
    pinch_bounds = 4 * (ratio[lo] + ratio[hi])

    residual = commutator_profile(Hhat).epsilon
    dist, exact = global_distance(H, Hhat)

    report = RoundingReport(
        eps=params.eps2,
        eps_realized=realized,
        stage_params=params,
        pivots=pivots,
        supports=H.supports(),
        stage_codes=snapped.stage_codes,
        snap_distances=snapped.snap_distances,
        pinch_distances=pinch_distances,
        pinch_bounds=pinch_bounds,
        distances=distances,
        global_distance=dist,
        global_distance_exact=exact,
        max_residual_commutator=residual,
    )
    report.violations.extend(_violations(report, _stage_bounds(params, snapped.stage_codes, snapped.snap_counts, k)))
    if report.violations:
        for v in report.violations:
            logger.error(f"❌ {v}")
    else:
        logger.info(f"✅ Rounded {H.m} terms, max distance {distances.max(initial=0):.3e}, residual {residual:.1e}")
    return Hhat, report


def _violations(report, stage_bounds):
    params = report.stage_params
    out = []
    bound = params.per_term_bound
    for i in np.nonzero(report.distances > bound + BOUND_TOL)[0]:
        out.append(f"term {list(report.supports[i])} moved {report.distances[i]:.6g} > {bound:.6g}")
    for i in np.nonzero(report.snap_distances > stage_bounds + BOUND_TOL)[0]:
        out.append(
            f"term {list(report.supports[i])} snapped by {report.snap_distances[i]:.6g} > {stage_bounds[i]:.6g}"
        )
    for i in np.nonzero(report.pinch_distances > report.pinch_bounds + BOUND_TOL)[0]:
        out.append(
            f"term {list(report.supports[i])} pinched by {report.pinch_distances[i]:.6g} "
            f"> {report.pinch_bounds[i]:.6g}"
        )
    for p in report.pivots:
        if not p.is_identity and p.realized_kappa > p.kappa + BOUND_TOL:
            out.append(f"pivot on qubit {p.qubit} commutes to {p.realized_kappa:.6g} > kappa {p.kappa:.6g}")
    if report.max_residual_commutator > COMMUTE_TOL:
        out.append(f"residual commutator {report.max_residual_commutator:.3e} > {COMMUTE_TOL:.0e}")
    if report.global_distance > report.global_distance_bound + BOUND_TOL:
        out.append(f"global distance {report.global_distance:.6g} > {report.global_distance_bound:.6g}")
    return out

