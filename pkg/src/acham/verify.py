"""Independent oracles for rounded Hamiltonians.

Nothing here trusts numbers produced by the rounding pipeline: every audited quantity is
recomputed from the pair (H, Hhat) and only then compared with a report.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import AuditFailure, DimensionError, InvariantViolationError
from .linalg import MAX_DENSE_QUBITS
from .model import LocalTerm, commutator_profile
from .pauli import coefficient_norms

logger = logging.getLogger(__name__)

VERIFY_FORMAT = "acham-verify-v1"
COMMUTE_TOL = 1e-9
AUDIT_TOL = 1e-9
ENERGY_TOL = 1e-8
ITERATIVE_MIN_DIM = 16
ROUNDING_CONSTANT = 216


@dataclass(eq=False)
class VerificationReport:
    commuting: bool
    max_residual: float
    per_term_distances: np.ndarray
    global_distance: float
    global_distance_exact: bool
    ground_energy_input: Optional[float] = None
    ground_energy_output: Optional[float] = None
    violations: List[str] = field(default_factory=list)

    @property
    def energy_shift_bound(self):
        return self.global_distance

    @property
    def energy_shift(self):
        if self.ground_energy_input is None or self.ground_energy_output is None:
            return None
        return abs(self.ground_energy_input - self.ground_energy_output)

    @property
    def passed(self):
        return not self.violations

    def check(self):
        if self.violations:
            raise AuditFailure(self.violations)
        return self

    def to_document(self):
        return {
            "format": VERIFY_FORMAT,
            "commuting": self.commuting,
            "max_residual": self.max_residual,
            "per_term_distances": [float(d) for d in self.per_term_distances],
            "global_distance": self.global_distance,
            "global_distance_exact": self.global_distance_exact,
            "ground_energy_input": self.ground_energy_input,
            "ground_energy_output": self.ground_energy_output,
            "energy_shift": self.energy_shift,
            "energy_shift_bound": self.energy_shift_bound,
            "passed": self.passed,
            "violations": list(self.violations),
        }


def verify_commuting(H, tol=COMMUTE_TOL):
    residual = commutator_profile(H).epsilon
    return residual <= tol, residual


def _check_same_structure(H, Hhat):
    if H.n != Hhat.n:
        raise DimensionError(f"Qubit counts differ: {H.n} vs {Hhat.n}")
    if H.supports() != Hhat.supports():
        raise DimensionError("Hamiltonians do not share the same term supports")


def difference_terms(H, Hhat):
    """Term-wise differences ``Hhat_I - H_I`` as a Hamiltonian on the same supports."""
    _check_same_structure(H, Hhat)
    return H.with_terms(LocalTerm(a.support, b.coeffs - a.coeffs) for a, b in zip(H.terms, Hhat.terms))


def per_term_distances(H, Hhat):
    diff = difference_terms(H, Hhat)
    out = np.zeros(diff.m)
    for k in (0, 1, 2):
        idx = [i for i, t in enumerate(diff.terms) if t.k == k]
        if idx:
            out[idx] = coefficient_norms(np.stack([diff.terms[i].coeffs for i in idx]), k)
    return out


def global_distance(H, Hhat):
    """``(||H - Hhat||, exact)``: dense for n <= 12, else the sum of per-term distances."""
    diff = difference_terms(H, Hhat)
    if diff.n <= MAX_DENSE_QUBITS:
        spectrum = scipy.linalg.eigvalsh(diff.matrix())
        value = float(np.max(np.abs(spectrum))) if spectrum.size else 0.0
        return value, True
    return float(per_term_distances(H, Hhat).sum()), False


def _real_embedding(M):
    A, B = np.real(M), np.imag(M)
    return np.block([[A, -B], [B, A]])


def ground_energy(H):
    """Smallest eigenvalue of the dense Hamiltonian, cross-checked by a second eigensolver."""
    if H.n > MAX_DENSE_QUBITS:
        raise DimensionError(f"Ground energies are computed densely only up to {MAX_DENSE_QUBITS} qubits")
    M = H.matrix()
    dense = float(scipy.linalg.eigvalsh(M)[0])

    R = _real_embedding(M)
    if R.shape[0] >= ITERATIVE_MIN_DIM:
        v0 = np.random.Generator(np.random.PCG64(0)).standard_normal(R.shape[0])
        iterative = float(scipy.sparse.linalg.eigsh(R, k=1, which="SA", v0=v0, return_eigenvectors=False)[0])
    else:
        iterative = float(np.linalg.eigvalsh(R)[0])
    if abs(dense - iterative) > ENERGY_TOL:
        logger.error(f"Eigensolvers disagree on the ground energy: {dense!r} vs {iterative!r}")
        raise InvariantViolationError(f"Ground energy cross-check failed: {dense:.12g} vs {iterative:.12g}")
    return dense


def _report_numbers(report):
    if report is None:
        return None
    if isinstance(report, dict):
        return {
            "eps": float(report["eps"]),
            "distances": np.array([t["distance_to_input"] for t in report["per_term"]], dtype=float),
            "max_residual": float(report["max_residual_commutator"]),
            "global_distance": report.get("global_distance"),
        }
    return {
        "eps": report.eps,
        "distances": np.asarray(report.distances, dtype=float),
        "max_residual": report.max_residual_commutator,
        "global_distance": report.global_distance,
    }


def audit_bounds(H, Hhat, report=None, eps=None, tol=COMMUTE_TOL):
    """Re-derive every guarantee of the rounding from (H, Hhat) and compare with ``report``.

    ``report`` may be a ``RoundingReport`` or its document; without one the promised eps
    defaults to ``eps`` or the realized eps of ``H``.
    """
    claimed = _report_numbers(report)
    if eps is None:
        eps = claimed["eps"] if claimed else commutator_profile(H).epsilon
    per_term_bound = ROUNDING_CONSTANT * eps ** (1 / 6)

    commuting, residual = verify_commuting(Hhat, tol)
    distances = per_term_distances(H, Hhat)
    dist, exact = global_distance(H, Hhat)
    vr = VerificationReport(
        commuting=commuting,
        max_residual=residual,
        per_term_distances=distances,
        global_distance=dist,
        global_distance_exact=exact,
    )
    supports = H.supports()

    if not commuting:
        vr.violations.append(f"output does not commute: residual {residual:.3e} > {tol:.0e}")
    for i in np.nonzero(distances > per_term_bound + AUDIT_TOL)[0]:
        vr.violations.append(f"term {list(supports[i])} moved {distances[i]:.6g} > {per_term_bound:.6g}")
    if dist > H.m * per_term_bound + AUDIT_TOL:
        vr.violations.append(f"global distance {dist:.6g} > {H.m * per_term_bound:.6g}")
    if exact and dist > distances.sum() + AUDIT_TOL:
        vr.violations.append(f"dense distance {dist:.6g} exceeds the summed per-term distances")

    if H.n <= MAX_DENSE_QUBITS:
        vr.ground_energy_input = ground_energy(H)
        vr.ground_energy_output = ground_energy(Hhat)
        if vr.energy_shift > dist + AUDIT_TOL:
            vr.violations.append(f"ground energy moved {vr.energy_shift:.6g} > distance {dist:.6g}")

    if claimed is not None:
        if len(claimed["distances"]) != len(distances):
            vr.violations.append("report lists a different number of terms")
        else:
            for i in np.nonzero(np.abs(claimed["distances"] - distances) > AUDIT_TOL)[0]:
                vr.violations.append(
                    f"report distance for term {list(supports[i])} is {claimed['distances'][i]:.6g}, "
                    f"recomputed {distances[i]:.6g}"
                )
        if abs(claimed["max_residual"] - residual) > AUDIT_TOL:
            vr.violations.append(
                f"report residual {claimed['max_residual']:.3e} differs from recomputed {residual:.3e}"
            )
        if claimed["global_distance"] is not None and abs(claimed["global_distance"] - dist) > AUDIT_TOL:
            vr.violations.append(
                f"report global distance {claimed['global_distance']:.6g} differs from recomputed {dist:.6g}"
            )

    if vr.passed:
        logger.info(f"✅ Audit passed: residual {residual:.1e}, global distance {dist:.6g}")
    else:
        logger.warning(f"Audit found {len(vr.violations)} violation(s)")
    return vr
