"""Tests for cone certificates, splitting extraction, and rate reports."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nilcert.cone_certifier import (
    CENTER_AXES,
    CertificationError,
    CocycleProduct,
    DegenerateConeError,
    EXPANDING_AXES,
    LinearDynamics,
    QuadraticCone,
    STRONG_STABLE_AXES,
    bunching_report,
    cocycle_product,
    compactly_contained,
    cone_from_map,
    extract_partially_hyperbolic_frames,
    extract_splitting,
    find_domination_exponent,
    image_cone,
    principal_angle,
    robustness_radius,
    splitting_distance,
    subspace_intersection,
)
from nilcert.deformation import RotationPlane
from nilcert.nilmanifold import DIM


def test_quadratic_cone_requires_mixed_signature():
    good = QuadraticCone(np.diag([1.0, 1.0, -1.0]))
    assert good.positive_index == 2
    assert good.contains(np.array([1.0, 0.0, 0.1]))
    assert not good.contains(np.array([0.0, 0.0, 1.0]))
    with pytest.raises(DegenerateConeError):
        QuadraticCone(np.eye(3))
    with pytest.raises(DegenerateConeError):
        QuadraticCone(-np.eye(2))


def test_cone_from_map_threshold_semantics():
    m = np.diag([0.5, 3.0])
    cone = cone_from_map(m, tau=1.0)
    # v is in the cone iff |M v| >= |v|.
    assert cone.contains(np.array([0.0, 1.0]))
    assert not cone.contains(np.array([1.0, 0.0]))
    with pytest.raises(DegenerateConeError):
        cone_from_map(np.diag([2.0, 3.0]), tau=1.0)  # everything expands


def test_image_cone_containment_soundness():
    # For the diagonal map the expansion cone must map strictly inside
    # itself; the S-procedure margin certifies the pointwise implication.
    m = np.diag([0.5, 3.0])
    cone = cone_from_map(m, tau=1.0)
    img = image_cone(cone, m)
    cert = compactly_contained(img, cone)
    assert cert.contained and cert.margin > 0
    rng = np.random.default_rng(0)
    for _ in range(500):
        v = rng.normal(size=2)
        v /= np.linalg.norm(v)
        if img.contains(v):
            assert v @ cone.matrix @ v >= cert.margin - 1e-12


def test_compact_containment_failure_produces_witness():
    wide = QuadraticCone(np.diag([1.0, -0.1]))
    narrow = QuadraticCone(np.diag([0.1, -1.0]))
    cert = compactly_contained(wide, narrow)
    assert not cert.contained
    assert cert.witness is not None
    v = cert.witness
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-9)
    # The witness direction realizes the negative relaxed margin.
    relaxed = narrow.matrix - cert.multiplier * wide.matrix
    assert v @ relaxed @ v == pytest.approx(cert.margin, abs=1e-9)
    assert cert.margin < 0


def test_domination_exponent_for_default_construction(
    auto, annuli, collapse_angle
):
    plane = RotationPlane.from_basis_indices(3, 8)
    witness = find_domination_exponent(
        auto.diag, plane, collapse_angle, annuli, n_max=8, grid=256
    )
    assert witness.exponent == 2
    assert len(witness.thresholds) == 2
    assert all(m > 1e-6 for m in witness.worst_margins)
    # History records the failed n=1 attempt for the lower threshold.
    assert witness.history[0][0] == 1.0
    assert witness.history[0][1] < 0
    assert "n = 2" in witness.describe()


def test_domination_margins_match_reference_values(auto, annuli, collapse_angle):
    plane = RotationPlane.from_basis_indices(3, 8)
    witness = find_domination_exponent(
        auto.diag, plane, collapse_angle, annuli, n_max=4, grid=1024
    )
    # Reference margins computed by an independent dense-eigenvalue
    # sweep of the normalized two-sided cone condition.  The collapse
    # angle enters the worst-margin location, so agreement is limited by
    # its bisection tolerance amplified through the squared cocycle.
    assert witness.history[0][1] == pytest.approx(-0.086260141969, abs=1e-6)
    assert witness.history[0][2] == pytest.approx(2.771895682054, abs=1e-6)
    assert witness.worst_margins[0] == pytest.approx(0.480711566337, abs=1e-6)
    assert witness.worst_margins[1] == pytest.approx(14.663600029376, abs=1e-5)


def test_domination_exhaustion_raises_with_history(auto, annuli, collapse_angle):
    plane = RotationPlane.from_basis_indices(3, 8)
    with pytest.raises(CertificationError) as err:
        find_domination_exponent(
            auto.diag, plane, collapse_angle, annuli, n_max=1, grid=256
        )
    assert getattr(err.value, "history", None)
    assert "n_max=1" in str(err.value)


def test_robustness_radius_positive_with_zero_failures(
    auto, annuli, collapse_angle
):
    plane = RotationPlane.from_basis_indices(3, 8)
    report = robustness_radius(
        auto.diag, plane, collapse_angle, annuli, n=2, grid=128, trials=100
    )
    assert report.delta > 0
    assert report.failures == 0
    assert len(report.per_threshold) == 2
    assert report.delta <= min(report.per_threshold)


def test_cocycle_products_compose_exactly(deformed):
    x = np.full(DIM, 0.004)
    total = cocycle_product(deformed, x, 6)
    first = cocycle_product(deformed, x, 2)
    mid_point = deformed.orbit(x, 2)[-1]
    second = cocycle_product(deformed, mid_point, 4)
    composed = second @ first
    assert isinstance(composed, CocycleProduct)
    assert np.array_equal(composed.matrix, total.matrix)
    assert composed.steps == 6
    # Factors are byte-identical, not merely close.
    for a, b in zip(composed.factors, total.factors):
        assert np.array_equal(a, b)


def test_cocycle_composition_requires_matching_endpoints(deformed):
    x = np.full(DIM, 0.004)
    first = cocycle_product(deformed, x, 2)
    wrong = cocycle_product(deformed, x + 0.1, 2)
    with pytest.raises(ValueError):
        wrong @ first


def test_principal_angle_basic_properties():
    rng = np.random.default_rng(1)
    q1, _ = np.linalg.qr(rng.normal(size=(9, 4)))
    assert principal_angle(q1, q1) < 1e-12
    # Coordinate frames at right angles.
    e1 = np.eye(9)[:, :2]
    e2 = np.eye(9)[:, 2:4]
    assert principal_angle(e1, e2) == pytest.approx(np.pi / 2)
    # Symmetry.
    q2, _ = np.linalg.qr(rng.normal(size=(9, 4)))
    assert principal_angle(q1, q2) == pytest.approx(
        principal_angle(q2, q1), abs=1e-12
    )


@given(st.integers(0, 2**31 - 1))
def test_splitting_distance_metric_axioms(seed):
    rng = np.random.default_rng(seed)

    def frames():
        qs = []
        for d in (4, 2, 3):
            q, _ = np.linalg.qr(rng.normal(size=(9, d)))
            qs.append(q)
        return tuple(qs)

    a, b, c = frames(), frames(), frames()
    da_b = splitting_distance(a, b)
    assert splitting_distance(a, a) < 1e-12
    assert da_b == pytest.approx(splitting_distance(b, a), abs=1e-12)
    assert da_b <= splitting_distance(a, c) + splitting_distance(c, b) + 1e-10


def test_subspace_intersection_recovers_common_plane():
    e = np.eye(9)
    q1 = e[:, [3, 4, 6, 7, 8]]
    q2 = e[:, [0, 1, 2, 5, 3, 4]]
    inter = subspace_intersection(q1, q2, 2)
    assert inter.shape == (9, 2)
    assert principal_angle(inter, e[:, [3, 4]]) < 1e-12


def test_extracted_splitting_converges_and_is_invariant(deformed):
    x = np.full(DIM, 0.006)
    est = extract_splitting(
        deformed,
        x,
        slow_axes=STRONG_STABLE_AXES,
        fast_axes=tuple(CENTER_AXES) + tuple(EXPANDING_AXES),
    )
    assert est.converged
    assert est.dims == (4, 5)
    assert est.gap < 1e-10
    # Derivative invariance: Dg(x) E(x) = E(g x) as subspaces.
    nxt, jac = deformed.step_with_jacobian(x)
    est_next = extract_splitting(
        deformed,
        nxt,
        slow_axes=STRONG_STABLE_AXES,
        fast_axes=tuple(CENTER_AXES) + tuple(EXPANDING_AXES),
    )
    pushed, _ = np.linalg.qr(jac @ est.fast_frame)
    assert principal_angle(pushed, est_next.fast_frame) < 1e-8


def test_three_bundle_frames_have_expected_dimensions(deformed):
    x = np.full(DIM, 0.006)
    frames = extract_partially_hyperbolic_frames(deformed, x)
    assert frames.converged
    assert frames.stable.shape == (DIM, 4)
    assert frames.center.shape == (DIM, 2)
    assert frames.unstable.shape == (DIM, 3)


def test_frames_near_coordinate_bundles_away_from_support(deformed):
    # Away from the rotation support the bundles stay close to the
    # coordinate ones, but orbits through the support still tilt them;
    # the deviation is bounded by the profile's slope budget.
    x = np.zeros(DIM)
    x[0] = 0.2
    frames = extract_partially_hyperbolic_frames(deformed, x)
    e = np.eye(DIM)
    budget = deformed.rotation.profile.eps
    assert principal_angle(frames.center, e[:, list(CENTER_AXES)]) < budget
    assert principal_angle(frames.unstable, e[:, list(EXPANDING_AXES)]) < budget
    assert principal_angle(frames.stable, e[:, list(STRONG_STABLE_AXES)]) < budget


def test_linear_frames_match_coordinate_bundles_exactly(auto, lattice):
    # Without the deformation the coordinate bundles are invariant, so
    # extraction must return them to full precision.
    lin = LinearDynamics(auto, lattice)
    x = np.zeros(DIM)
    x[0] = 0.2
    frames = extract_partially_hyperbolic_frames(lin, x)
    e = np.eye(DIM)
    assert principal_angle(frames.center, e[:, list(CENTER_AXES)]) < 1e-12
    assert principal_angle(frames.unstable, e[:, list(EXPANDING_AXES)]) < 1e-12
    assert principal_angle(frames.stable, e[:, list(STRONG_STABLE_AXES)]) < 1e-12


def test_linear_dynamics_matches_automorphism(auto, lattice):
    lin = LinearDynamics(auto, lattice)
    x = np.full(DIM, 0.003)
    stepped = lin.step(x)
    assert np.allclose(stepped, lattice.reduce(auto.apply(x)), atol=0)
    nxt, jac = lin.step_with_jacobian(x)
    assert np.array_equal(jac, auto.matrix)
    orb = lin.orbit(x, 3)
    assert orb.shape == (4, DIM)


def test_bunching_report_small_sample(deformed, eigendata):
    report = bunching_report(
        deformed, eigendata.values, n=2, sample_count=96, seed=0
    )
    assert report.all_bullets_hold
    assert report.center_bunched
    assert report.bunching_margin > 0.3
    assert report.nu < 1.0 and report.nu_hat < 1.0


def test_undeformed_rates_reproduce_spectrum(auto, lattice, eigendata):
    l1, _, l3 = eigendata.values
    lin = LinearDynamics(auto, lattice)
    report = bunching_report(
        lin, eigendata.values, n=2, sample_count=96, seed=0
    )
    assert report.nu == pytest.approx(l1, abs=1e-9)
    assert report.nu_hat == pytest.approx(1.0 / l3, abs=1e-9)
