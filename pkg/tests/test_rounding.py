import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acham.documents import dumps
from acham.errors import DegeneratePivotError, DimensionError, InvariantViolationError, RegimeError
from acham.generators import random_near_commuting, tfim_chain
from acham.linalg import operator_norm, spectral_decompose_2x2
from acham.model import Hamiltonian, LocalTerm, commutator_profile
from acham.pauli import matrix_to_coefficients
from acham.rounding import (
    Stage,
    StageParams,
    global_pinch,
    pinch,
    round_hamiltonian,
    select_pivots,
    snap,
    snap_stages,
    snap_term_to_1local,
)
from acham.verify import audit_bounds, per_term_distances, verify_commuting
from tests.conftest import I2, KET0, X, Y, Z, mixed_locality, random_hermitian

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_pinch_examples():
    np.testing.assert_allclose(pinch(X, Z), np.zeros((2, 2)), atol=1e-15)
    np.testing.assert_allclose(pinch(Z, Z), Z, atol=1e-15)
    np.testing.assert_allclose(pinch(X + Z, X), X, atol=1e-15)


def test_pinch_about_degenerate_matrix():
    with pytest.raises(DegeneratePivotError):
        pinch(X, 2 * I2)


def test_pinch_rejects_wrong_shape():
    with pytest.raises(DimensionError):
        pinch(np.eye(4), Z)


@given(seeds)
@settings(max_examples=200, deadline=None)
def test_pinching_cost_equals_commutator_over_gap(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    A = random_hermitian(rng, 2)
    B = random_hermitian(rng, 2)
    gap = spectral_decompose_2x2(A).gap
    if gap < 0.1:
        return
    P = pinch(B, A)
    assert operator_norm(B - P) == pytest.approx(operator_norm(B @ A - A @ B) / gap, abs=1e-9)
    assert operator_norm(P @ A - A @ P) <= 1e-10


def test_snap_examples():
    np.testing.assert_allclose(snap((X + Z) / np.sqrt(2)), I2, atol=1e-12)
    np.testing.assert_allclose(snap(np.diag([0.3, -0.2])), 0.3 * I2, atol=1e-15)


@given(seeds)
@settings(max_examples=200, deadline=None)
def test_snapping_cost_equals_gap(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    B = random_hermitian(rng, 2, scale=rng.uniform(0.01, 1))
    assert operator_norm(B - snap(B)) == pytest.approx(spectral_decompose_2x2(B).gap, abs=1e-10)


def test_snap_term_to_1local():
    """(I + Z/100)(x)X is ungapped about qubit 0 and snaps to X on qubit 1"""
    M = np.kron(I2 + Z / 100, X) / 1.01
    term = LocalTerm((0, 1), matrix_to_coefficients(M))
    snapped = snap_term_to_1local(term, weak_qubit=0, eta=0.1)
    assert snapped.support == (0, 1)
    reduced = snapped.reduced()
    assert reduced.support == (1,)
    np.testing.assert_allclose(reduced.coeffs, [0, 1, 0, 0], atol=1e-12)
    distance = operator_norm(M - snapped.matrix())
    assert distance <= 0.4
    assert distance == pytest.approx(0.02 / 1.01)


def test_snap_term_about_upper_qubit():
    M = np.kron(Y, I2 + Z / 100) / 1.01
    snapped = snap_term_to_1local(LocalTerm((3, 5), matrix_to_coefficients(M)), weak_qubit=5, eta=0.1)
    np.testing.assert_allclose(snapped.reduced().coeffs, [0, 0, 1, 0], atol=1e-12)
    assert snapped.reduced().support == (3,)


def test_snap_term_rejects_gapped_or_local_terms():
    zz = LocalTerm((0, 1), np.diag([0, 0, 0, 1.0]))
    with pytest.raises(InvariantViolationError):
        snap_term_to_1local(zz, weak_qubit=0, eta=0.1)
    with pytest.raises(DimensionError):
        snap_term_to_1local(LocalTerm((0,), [0, 1, 0, 0]), weak_qubit=0, eta=0.1)
    with pytest.raises(DimensionError):
        snap_term_to_1local(zz, weak_qubit=2, eta=0.1)


def test_stage_params():
    params = StageParams.from_epsilon(0.02)
    assert params.eta2 == pytest.approx(0.02 ** (1 / 3))
    assert params.eps1 == pytest.approx(0.02 + 16 * 0.02 ** (1 / 3))
    assert params.eta1 == pytest.approx(math.sqrt(params.eps1))
    assert params.per_term_bound == pytest.approx(216 * 0.02 ** (1 / 6))
    assert params.global_bound(3) == pytest.approx(3 * params.per_term_bound)
    assert params.kappa_2local == pytest.approx(24 * 0.02 / params.eta2)
    assert StageParams.from_epsilon(0).kappa_2local == 0.0


@pytest.mark.parametrize("eps", [-0.1, 1.5, 2.0])
def test_stage_params_regime(eps):
    with pytest.raises(RegimeError):
        StageParams.from_epsilon(eps)


def test_snap_stages_tags_terms():
    H = tfim_chain(4, h=1e-6)
    snapped = snap_stages(H, StageParams.from_epsilon(2e-6))
    stages = dict(zip(H.supports(), snapped.stages))
    assert stages[(0, 1)] == Stage.KEPT_2LOCAL
    assert stages[(2,)] == Stage.SNAPPED_TO_0LOCAL
    np.testing.assert_allclose(snapped.snap_distances[[t.k == 1 for t in H.terms]], 2e-6, rtol=1e-9)


def test_snap_stages_snaps_weak_two_local_term():
    weak = LocalTerm((0, 1), matrix_to_coefficients(np.kron(I2 + Z / 100, X) / 1.01))
    field = LocalTerm((1,), [0, 0, 0, 1.0])
    H = Hamiltonian.from_terms(2, [weak, field])
    snapped = snap_stages(H, StageParams.from_epsilon(0.001))
    assert snapped.stages[0] == Stage.SNAPPED_TO_1LOCAL
    assert snapped.stages[1] == Stage.KEPT_1LOCAL
    assert snapped.hamiltonian.terms[0].acting_support() == (1,)


def test_pivots_on_triangle(tri):
    params = StageParams.from_epsilon(0.02)
    pivots = select_pivots(snap_stages(tri, params), params)
    assert [p.provenance for p in pivots] == ["2-local term"] * 3
    np.testing.assert_allclose(pivots[0].operator, (X + Z / 100) / 2, atol=1e-15)
    np.testing.assert_allclose(pivots[1].operator, KET0, atol=1e-15)
    np.testing.assert_allclose(pivots[2].operator, X, atol=1e-15)
    for p in pivots:
        assert p.gap >= params.eta2
        assert p.realized_kappa <= p.kappa


def test_pivot_on_zz_chain_middle_qubit():
    params = StageParams.from_epsilon(0.0)
    pivots = select_pivots(snap_stages(tfim_chain(3), params), params)
    assert pivots[0].is_identity and pivots[2].is_identity
    assert pivots[1].source_support == (0, 1)
    assert pivots[1].gap == pytest.approx(2.0)
    np.testing.assert_allclose(pivots[1].operator, -Z, atol=1e-15)


def test_global_pinch_makes_triangle_diagonal(tri):
    params = StageParams.from_epsilon(0.02)
    snapped = snap_stages(tri, params)
    Hhat = global_pinch(snapped, select_pivots(snapped, params))
    assert Hhat.supports() == tri.supports()
    assert verify_commuting(Hhat)[0]


def test_round_triangle(tri, tri_reference):
    Hhat, report = round_hamiltonian(tri)
    bound = 216 * 0.02 ** (1 / 6)
    assert report.eps == pytest.approx(0.02)
    assert Hhat.supports() == tri.supports()
    assert report.max_residual_commutator <= 1e-9
    assert report.bounds_satisfied, report.violations
    assert np.all(report.distances <= bound)
    np.testing.assert_allclose(report.distances, per_term_distances(tri, Hhat), atol=1e-12)
    # the hand-rounded output also satisfies the per-term bound
    assert np.all(per_term_distances(tri, tri_reference) <= bound)
    assert verify_commuting(tri_reference)[0]


def test_round_tfim_chain_snaps_weak_fields():
    H = tfim_chain(6, h=1e-6)
    Hhat, report = round_hamiltonian(H)
    assert report.eps == pytest.approx(2e-6)
    assert report.bounds_satisfied, report.violations
    assert np.all(report.distances <= 216 * (2e-6) ** (1 / 6))
    assert report.global_distance_exact
    assert report.global_distance <= H.m * 216 * (2e-6) ** (1 / 6)
    for t in Hhat.terms:
        if t.k == 1:
            assert t.acting_support() == ()


def test_round_fixed_point_on_commuting_input():
    H = tfim_chain(5)
    Hhat, report = round_hamiltonian(H)
    assert report.eps == 0.0
    for a, b in zip(H.terms, Hhat.terms):
        np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-10)


def test_round_with_promised_eps_above_one(tri):
    with pytest.raises(RegimeError):
        round_hamiltonian(tri, eps_override=2.0)


def test_round_with_small_promise_warns(tri, caplog):
    round_hamiltonian(tri, eps_override=0.01)
    assert any("below the realized eps" in r.message for r in caplog.records)


def test_report_document(tri):
    _, report = round_hamiltonian(tri)
    doc = report.to_document()
    assert doc["format"] == "acham-report-v1"
    assert len(doc["per_term"]) == 3
    assert doc["per_term"][0]["stage"] == "kept-2local"
    assert len(doc["pivots"]) == 3
    assert doc["bounds_satisfied"] is True
    assert doc["global_distance"] <= doc["global_distance_bound"]


@given(seeds, st.sampled_from([1e-3, 1e-6]))
@settings(max_examples=20, deadline=None)
def test_random_instances_round_to_commuting(seed, eps_target):
    H = random_near_commuting(6, 8, eps_target, seed=seed)
    Hhat, report = round_hamiltonian(H)
    assert commutator_profile(Hhat).epsilon <= 1e-9
    assert report.bounds_satisfied, report.violations


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_mixed_locality_instances_pass_audit(seed):
    """Fields, weak couplings and constants exercise every snapping stage and both pivot sources"""
    H = mixed_locality(seed)
    Hhat, report = round_hamiltonian(H)
    assert Hhat.supports() == H.supports()
    assert report.bounds_satisfied, report.violations
    vr = audit_bounds(H, Hhat, report)
    assert vr.passed, vr.violations


MIXED_COUPLINGS = {(0, 1): ((3, 1, 1e-6),), (0, 2): ((3, 3, 0.5),), (1, 2): ((0, 3, 0.5), (1, 3, 1e-6))}
MIXED_FIELDS = {0: [0, 0, 0, 0.9], 1: [0, 0, 0, 1e-3], 2: [0, 1e-7, 0, 0]}


def _mixed_instance():
    terms = [LocalTerm((q,), c) for q, c in MIXED_FIELDS.items()]
    for support, entries in MIXED_COUPLINGS.items():
        C = np.zeros((4, 4))
        for a, b, value in entries:
            C[a, b] = value
        terms.append(LocalTerm(support, C))
    terms.append(LocalTerm((), 0.3))
    return Hamiltonian.from_terms(3, terms)


def test_mixed_instance_reaches_every_stage():
    H = _mixed_instance()
    Hhat, report = round_hamiltonian(H)
    stages = {tuple(entry["support"]): entry["stage"] for entry in report.per_term}
    assert stages == {
        (): "kept-0local",
        (0,): "kept-1local",
        (0, 1): "snapped-to-0local",
        (0, 2): "kept-2local",
        (1,): "snapped-to-0local",
        (1, 2): "snapped-to-1local",
        (2,): "snapped-to-0local",
    }
    assert report.pivots[0].provenance == "1-local term"
    assert report.pivots[0].source_support == (0,)
    assert report.pivots[2].provenance == "1-local term"
    assert report.pivots[2].source_support == (1, 2)
    assert report.pivots[1].is_identity
    assert audit_bounds(H, Hhat, report).passed


def test_round_empty_hamiltonian():
    Hhat, report = round_hamiltonian(Hamiltonian.from_terms(3, []))
    assert Hhat.m == 0
    assert report.bounds_satisfied
    assert report.global_distance == 0.0
    assert all(p.is_identity for p in report.pivots)
    assert report.to_document()["per_term"] == []

    Hhat, report = round_hamiltonian(random_near_commuting(4, 0, 1e-3))
    assert Hhat.m == 0 and report.bounds_satisfied


def test_rounding_is_deterministic(tri):
    H = random_near_commuting(7, 12, 1e-4, seed=11)
    for instance in (tri, H, mixed_locality(5)):
        first = round_hamiltonian(instance)[1].to_document()
        second = round_hamiltonian(instance)[1].to_document()
        assert dumps(first) == dumps(second)
