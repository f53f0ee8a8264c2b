"""Applications of rounding: promise reduction, Gibbs continuity and commuting evolution."""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, DimensionError, GapCollapseError, InvariantViolationError, RegimeError, SchemaError
from .linalg import MAX_DENSE_QUBITS, embed_on_qubits, hermitian_eig, matrix_exponential, operator_norm, trace_norm
from .model import Hamiltonian, commutator_profile, ingest, serialize
from .rounding import ROUNDING_CONSTANT, round_hamiltonian
from .verify import COMMUTE_TOL, difference_terms, verify_commuting

logger = logging.getLogger(__name__)

GIBBS_FORMAT = "acham-gibbs-v1"
SPLIT_FORMAT = "acham-split-v1"
EVOLVE_FORMAT = "acham-evolve-v1"
GIBBS_MEASURED_QUBITS = 10
CONTINUITY_TOL = 1e-9


def _shift(m, eps):
    return ROUNDING_CONSTANT * m * eps ** (1 / 6)


def _promised_eps(H, eps):
    if eps is None:
        eps = commutator_profile(H).epsilon
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise RegimeError(f"eps must lie in [0, 1], got {eps:.6g}")
    return eps


@dataclass(frozen=True, eq=False)
class PromiseInstance:
    """Local Hamiltonian promise problem: YES if lambda_min <= a, NO if lambda_min >= b."""

    H: Hamiltonian
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise SchemaError(f"Promise thresholds need a < b, got a={self.a}, b={self.b}")

    @property
    def Gamma(self):
        return self.b - self.a

    @property
    def gamma(self):
        return self.Gamma / self.H.m if self.H.m else math.inf

    def classify(self, energy):
        if energy <= self.a:
            return "yes"
        if energy >= self.b:
            return "no"
        return "outside-promise"

    def to_document(self):
        doc = serialize(self.H)
        doc["a"] = self.a
        doc["b"] = self.b
        return doc

    @classmethod
    def from_document(cls, raw):
        H = ingest(raw)
        try:
            a, b = float(raw["a"]), float(raw["b"])
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"Promise instance needs numeric 'a' and 'b': {e}") from e
        return cls(H, a, b)


def epsilon_ceiling(m, Gamma):
    """Largest eps for which the reduced promise gap stays open."""
    if m == 0:
        return 1.0
    return min(1.0, (max(Gamma, 0.0) / (2 * ROUNDING_CONSTANT * m)) ** 6)


def reduce_promise(inst, eps=None):
    eps = _promised_eps(inst.H, eps)
    shift = _shift(inst.H.m, eps)
    a_new, b_new = inst.a + shift, inst.b - shift
    if a_new >= b_new:
        raise GapCollapseError(
            f"Reduced thresholds collapse: a'={a_new:.6g} >= b'={b_new:.6g} at eps={eps:.3g}, m={inst.H.m}",
            epsilon_ceiling(inst.H.m, inst.Gamma),
        )
    Hhat, _ = round_hamiltonian(inst.H, eps_override=eps)
    reduced = PromiseInstance(Hhat, a_new, b_new)
    logger.info(f"Reduced promise gap {inst.gamma:.6g} -> {reduced.gamma:.6g} (per term)")
    return reduced


def gibbs_state(H, beta):
    if beta < 0:
        raise RegimeError(f"beta must be non-negative, got {beta}")
    if H.n > MAX_DENSE_QUBITS:
        raise DimensionError(f"Gibbs states are dense only up to {MAX_DENSE_QUBITS} qubits")
    w, V = hermitian_eig(H.matrix())
    p = np.exp(-beta * (w - w[0]))
    p /= p.sum()
    return (V * p) @ V.conj().T


def trace_distance(rho, sigma):
    return trace_norm(np.asarray(rho) - np.asarray(sigma))


def max_rounding_distance(beta, delta):
    """Rounding distance under which the continuity bound stays below delta/2."""
    return math.log1p(delta / 2) / (2 * beta)


@dataclass(frozen=True)
class GibbsCertificate:
    beta: float
    delta_target: float
    eps: float
    m: int
    rounding_distance: float
    distance_exact: bool
    continuity_bound: float
    regime_ok: bool
    measured_trace_distance: Optional[float] = None

    def to_document(self):
        return {
            "format": GIBBS_FORMAT,
            "beta": self.beta,
            "delta": self.delta_target,
            "eps": self.eps,
            "m": self.m,
            "rounding_distance": self.rounding_distance,
            "distance_exact": self.distance_exact,
            "continuity_bound": self.continuity_bound,
            "regime_ok": self.regime_ok,
            "max_rounding_distance": max_rounding_distance(self.beta, self.delta_target),
            "measured_trace_distance": self.measured_trace_distance,
        }


def certify_gibbs_reduction(H, beta, delta, eps=None):
    if beta <= 0 or delta <= 0:
        raise RegimeError(f"Gibbs certification needs beta > 0 and delta > 0, got beta={beta}, delta={delta}")
    eps = _promised_eps(H, eps)
    Hhat, report = round_hamiltonian(H, eps_override=eps)
    if report.global_distance_exact:
        dist = report.global_distance
    else:
        dist = _shift(H.m, eps)
    bound = math.expm1(2 * beta * dist)
    regime_ok = _shift(H.m, eps) <= max_rounding_distance(beta, delta)

    measured = None
    if H.n <= GIBBS_MEASURED_QUBITS:
        measured = trace_distance(gibbs_state(H, beta), gibbs_state(Hhat, beta))
        if measured > bound + CONTINUITY_TOL:
            raise InvariantViolationError(
                f"Measured Gibbs trace distance {measured:.6g} exceeds the continuity bound {bound:.6g}"
            )
    if not regime_ok:
        logger.warning(f"⚠️ beta={beta} is outside the certified regime for delta={delta}")
    return GibbsCertificate(
        beta=float(beta), delta_target=float(delta), eps=eps, m=H.m,
        rounding_distance=dist, distance_exact=report.global_distance_exact,
        continuity_bound=bound, regime_ok=regime_ok, measured_trace_distance=measured,
    )


def commuting_evolution(Hc, t):
    """exp(i Hc t) as the ordered product of the term exponentials."""
    ok, residual = verify_commuting(Hc, COMMUTE_TOL)
    if not ok:
        raise ContractError(f"Terms do not commute (residual {residual:.3e}); the product formula is not exact")
    if Hc.n > MAX_DENSE_QUBITS:
        raise DimensionError(f"Dense evolution is capped at {MAX_DENSE_QUBITS} qubits")
    U = np.eye(2 ** Hc.n, dtype=complex)
    for term in Hc.terms:
        local = matrix_exponential(term.matrix(), 1j * t)
        U = U @ embed_on_qubits(local, term.support, Hc.n)
    return U


def evolution_check(Hc, t):
    """Compare the product of term exponentials with the dense exponential."""
    U = commuting_evolution(Hc, t)
    dense = matrix_exponential(Hc.matrix(), 1j * t)
    return {
        "format": EVOLVE_FORMAT,
        "t": float(t),
        "n": Hc.n,
        "m": Hc.m,
        "unitarity_residual": operator_norm(U.conj().T @ U - np.eye(U.shape[0])),
        "deviation": operator_norm(U - dense),
    }


@dataclass(frozen=True, eq=False)
class SimulationSplit:
    """H = H' + Delta with H' commuting; alpha_A and alpha_B normalize the two parts."""

    H_commuting: Hamiltonian
    Delta: Hamiltonian
    eps: float
    alpha_A: float
    alpha_B: float
    alpha_B_exact: bool

    @property
    def m(self):
        return self.H_commuting.m

    def cost_formula(self, t, t_block):
        """Simulation cost O~(m * (T_block + m) * eps^(1/6) * t) with the realized alpha_B.

        alpha_B is bounded by 216 * m * eps^(1/6), so the leading factor m * eps^(1/6) of the
        headline expression is replaced by alpha_B itself: O~(alpha_B * (T_block + m) * t).
        """
        value = self.alpha_B * (t_block + self.m) * t
        return (
            f"O~(alpha_B * (T_block + m) * t) = O~({self.alpha_B:.6g} * ({t_block:g} + {self.m}) * {t:g})"
            f" = O~({value:.6g}); worst case O~(m * (T_block + m) * eps^(1/6) * t)"
        )

    def to_document(self, t=1.0, t_block=1.0):
        return {
            "format": SPLIT_FORMAT,
            "eps": self.eps,
            "m": self.m,
            "alpha_A": self.alpha_A,
            "alpha_B": self.alpha_B,
            "alpha_B_exact": self.alpha_B_exact,
            "alpha_B_bound": _shift(self.m, self.eps),
            "t": t,
            "t_block": t_block,
            "cost": self.cost_formula(t, t_block),
            "commuting": serialize(self.H_commuting),
            "delta": serialize(self.Delta),
        }


def simulation_split(H, eps=None):
    eps = _promised_eps(H, eps)
    Hhat, report = round_hamiltonian(H, eps_override=eps)
    Delta = difference_terms(Hhat, H)
    alpha_A = float(sum(t.norm() for t in Hhat.terms))
    if report.global_distance_exact:
        alpha_B = report.global_distance
    else:
        alpha_B = _shift(H.m, eps)
    return SimulationSplit(
        H_commuting=Hhat, Delta=Delta, eps=eps,
        alpha_A=alpha_A, alpha_B=alpha_B, alpha_B_exact=report.global_distance_exact,
    )
