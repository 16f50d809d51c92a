"""Contact-state classification tests."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skillforge.cones import (
    ContactPoint,
    ContactSet,
    DegenerateContactWarning,
    DofProfile,
    DState,
    FeasibleCone,
    InputError,
    MotionKind,
    MotionSpec,
    PROFILE_TO_STATE,
    STATE_TO_PROFILE,
    StateClass,
    classify,
    dedup_normals,
    dof_profile,
    dstate_of_direction,
    feasible_cone,
    oracle_classify_sampled,
    rotation_effective_normals,
    screw_lhs,
)
from skillforge.geometry import normalize, quat_from_axis_angle, quat_rotate
from skillforge.simulation import DoorJoint, door_canonical_contacts

X, Y, Z = np.eye(3)


def contact(p, n):
    return ContactPoint(np.asarray(p, float), normalize(n))


def contacts_from_normals(normals):
    return ContactSet.of([((0.0, 0.0, 0.0), n) for n in normals])


# canonical constructions for every DOF table row
TABLE_CONSTRUCTIONS = {
    "NC": [],
    "PC1": [Z],
    "TR": [Z, -Z],
    "PC2": [Z, Y],
    "OT1": [Z, -Z, X],
    "PR": [X, -X, Y, -Y],
    "PCN": [X, Y, Z],
    "OT2": [X, -X, Y, Z],
    "OP": [X, -X, Y, -Y, Z],
    "FT": [X, -X, Y, -Y, Z, -Z],
}

TABLE_ROWS = {
    "NC": (3, 0, 0), "PC1": (2, 1, 0), "TR": (2, 0, 1), "PC2": (1, 2, 0),
    "OT1": (1, 1, 1), "PR": (1, 0, 2), "PCN": (0, 3, 0), "OT2": (0, 2, 1),
    "OP": (0, 1, 2), "FT": (0, 0, 3),
}

ROTATIONAL_TWIN = {
    "NC": "NR", "PC1": "RT1", "TR": "SP", "PC2": "RT2", "OT1": "OS1",
    "PR": "RV", "PCN": "RTN", "OT2": "OS2", "OP": "OR", "FT": "FR",
}


class TestScrewAdmissibility:
    def test_translation_along_normal_is_admissible(self):
        c = contact((0, 0, 0), Z)
        assert screw_lhs(c, MotionSpec(MotionKind.TRANSLATION, Z)) == pytest.approx(1.0)

    def test_translation_against_normal_is_blocked(self):
        c = contact((0, 0, 0), Z)
        assert screw_lhs(c, MotionSpec(MotionKind.TRANSLATION, -Z)) == pytest.approx(-1.0)

    def test_rotation_value_matches_hand_expansion(self):
        # ((1,0,0) x (0,0,1)) . (0,1,0) = (0,-1,0) . (0,1,0) = -1
        c = contact((1, 0, 0), Z)
        m = MotionSpec(MotionKind.ROTATION, Y, center=(0, 0, 0))
        assert screw_lhs(c, m) == pytest.approx(-1.0)

    def test_non_unit_axis_rejected(self):
        with pytest.raises(InputError):
            MotionSpec(MotionKind.TRANSLATION, (0, 0, 2))

    def test_non_unit_normal_rejected(self):
        with pytest.raises(InputError):
            ContactPoint((0, 0, 0), (0, 0, 2))

    def test_nonzero_pitch_rejected(self):
        with pytest.raises(InputError):
            MotionSpec(MotionKind.TRANSLATION, Z, pitch=1.0)

    def test_rotation_requires_center(self):
        with pytest.raises(InputError):
            MotionSpec(MotionKind.ROTATION, Z)

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_rotation_reduces_to_effective_normal_dot_axis(self, seed):
        rng = np.random.default_rng(seed)
        p = rng.normal(size=3)
        n = normalize(rng.normal(size=3))
        c = rng.normal(size=3)
        s = normalize(rng.normal(size=3))
        lhs = screw_lhs(ContactPoint(p, n), MotionSpec(MotionKind.ROTATION, s, center=c))
        m = np.cross(p - c, n)
        assert lhs == pytest.approx(float(np.dot(m, s)), abs=1e-10)


class TestEffectiveNormals:
    def test_lever_arm_cross_product(self):
        ms, dropped = rotation_effective_normals([contact((1, 0, 0), Z)], (0, 0, 0))
        assert dropped == 0
        np.testing.assert_allclose(ms[0], [0, -1, 0], atol=1e-12)

    def test_contact_at_center_dropped_and_reported(self):
        with pytest.warns(DegenerateContactWarning):
            ms, dropped = rotation_effective_normals(
                [contact((0.3, -0.2, 0.5), Y)], (0.3, -0.2, 0.5))
        assert dropped == 1
        assert ms == []

    def test_mirrored_contacts_same_normal_give_antiparallel_pair(self):
        # contacts at p and -p sharing a normal block opposite rotation senses
        ms, _ = rotation_effective_normals(
            [contact((1, 0, 0), Z), contact((-1, 0, 0), Z)], (0, 0, 0))
        np.testing.assert_allclose(ms[0], -ms[1], atol=1e-12)

    def test_mirrored_contacts_opposite_normals_give_equal_constraints(self):
        ms, _ = rotation_effective_normals(
            [contact((1, 0, 0), Z), contact((-1, 0, 0), -Z)], (0, 0, 0))
        np.testing.assert_allclose(ms[0], ms[1], atol=1e-12)

    def test_infinite_center_rejected(self):
        with pytest.raises(InputError):
            rotation_effective_normals([contact((1, 0, 0), Z)], (np.inf, 0, 0))


class TestFeasibleCone:
    def test_empty_is_whole_space(self):
        cone = feasible_cone([])
        assert (cone.lineality_dim, cone.span_dim) == (3, 3)

    def test_half_space(self):
        cone = feasible_cone([Z])
        assert (cone.lineality_dim, cone.span_dim) == (2, 3)

    def test_plane(self):
        cone = feasible_cone([Z, -Z])
        assert (cone.lineality_dim, cone.span_dim) == (2, 2)

    @pytest.mark.parametrize("name", sorted(TABLE_CONSTRUCTIONS))
    def test_feasibility_matches_direct_sampling(self, name):
        normals = TABLE_CONSTRUCTIONS[name]
        cone = feasible_cone(normals)
        rng = np.random.default_rng(7)
        for _ in range(200):
            d = normalize(rng.normal(size=3))
            direct = all(np.dot(m, d) >= -1e-9 for m in normals)
            assert cone.contains(d) == direct

    def test_invalid_dims_rejected(self):
        with pytest.raises(InputError):
            FeasibleCone((), lineality_dim=2, span_dim=1)

    def test_near_duplicate_normals_merge_with_warning(self):
        tilted = normalize([1e-8, 0.0, 1.0])
        with pytest.warns(DegenerateContactWarning):
            merged = dedup_normals([Z, tilted])
        assert len(merged) == 1


class TestDofProfile:
    def test_half_space_profile(self):
        assert dof_profile(feasible_cone([Z])).as_tuple() == (2, 1, 0)

    def test_two_wall_pairs_profile(self):
        assert dof_profile(feasible_cone([X, -X, Y, -Y])).as_tuple() == (1, 0, 2)

    def test_two_pairs_one_single_profile(self):
        assert dof_profile(feasible_cone([X, -X, Y, -Y, Z])).as_tuple() == (0, 1, 2)

    def test_profile_must_sum_to_three(self):
        with pytest.raises(InputError):
            DofProfile(2, 2, 0)


class TestClassify:
    @pytest.mark.parametrize("name", sorted(TABLE_CONSTRUCTIONS))
    def test_every_table_row(self, name):
        state, profile = classify(contacts_from_normals(TABLE_CONSTRUCTIONS[name]))
        assert state.value == name
        assert profile.as_tuple() == TABLE_ROWS[name]

    def test_empty_contacts_are_unconstrained(self):
        state, profile = classify(ContactSet(()))
        assert state is StateClass.NC
        assert profile.as_tuple() == (3, 0, 0)

    def test_single_contact_is_one_sided(self):
        state, profile = classify(contacts_from_normals([Z]))
        assert state is StateClass.PC1
        assert profile.as_tuple() == (2, 1, 0)

    def test_closed_hinge_contacts_classify_one_way_rotation(self):
        door = DoorJoint(hinge_point=(0, 0, 0), axis=Z, radius=0.5,
                         reference_dir=X, axial_offset=1.0, stop_angle=0.0)
        contacts = ContactSet(tuple(door_canonical_contacts(door, closed=True)))
        state, profile = classify(contacts, MotionKind.ROTATION, center=(0, 0, 0))
        assert state is StateClass.OR
        assert profile.as_tuple() == (0, 1, 2)

    def test_free_hinge_contacts_classify_two_way_rotation(self):
        door = DoorJoint(hinge_point=(0, 0, 0), axis=Z, radius=0.5,
                         reference_dir=X, axial_offset=1.0, stop_angle=None)
        contacts = ContactSet(tuple(door_canonical_contacts(door, closed=False)))
        state, _ = classify(contacts, MotionKind.ROTATION, center=(0, 0, 0))
        assert state is StateClass.RV

    def test_rotation_requires_center(self):
        with pytest.raises(InputError):
            classify(contacts_from_normals([Z]), MotionKind.ROTATION)

    def test_coarse_grouping_labels(self):
        assert StateClass.PC2.coarse == "PC"
        assert StateClass.OT1.coarse == "OT"
        assert StateClass.RT2.coarse == "RT"
        assert StateClass.NC.coarse == "NC"

    def test_state_profiles_match_table(self):
        for name, row in TABLE_ROWS.items():
            assert STATE_TO_PROFILE[StateClass(name)].as_tuple() == row
            twin = StateClass(ROTATIONAL_TWIN[name])
            assert STATE_TO_PROFILE[twin].as_tuple() == row


class TestDirectionalState:
    def test_in_plane_motion_is_maintenance(self):
        cone = feasible_cone([Z])
        assert dstate_of_direction(cone, X) is DState.MAINTENANCE

    def test_away_from_surface_is_detachment(self):
        cone = feasible_cone([Z])
        assert dstate_of_direction(cone, Z) is DState.DETACHMENT

    def test_against_walls_is_constraint(self):
        cone = feasible_cone([X, -X, Y, -Y])
        assert dstate_of_direction(cone, X) is DState.CONSTRAINT

    def test_non_unit_direction_rejected(self):
        with pytest.raises(InputError):
            dstate_of_direction(feasible_cone([Z]), (0, 0, 2))

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_maintenance_is_symmetric_in_direction_sign(self, seed):
        rng = np.random.default_rng(seed)
        normals = [normalize(rng.normal(size=3)) for _ in range(rng.integers(1, 5))]
        cone = feasible_cone(normals)
        d = normalize(rng.normal(size=3))
        forward = dstate_of_direction(cone, d)
        backward = dstate_of_direction(cone, -d)
        assert (forward is DState.MAINTENANCE) == (backward is DState.MAINTENANCE)


def _random_nondegenerate_normals(rng, min_angle_deg=8.0, allow_antiparallel=True):
    """1-6 unit normals pairwise >= min_angle apart (and away from each
    other's antipodes), optionally with one exact antiparallel pair."""
    min_cos = np.cos(np.deg2rad(min_angle_deg))
    count = int(rng.integers(1, 7))
    normals = []
    attempts = 0
    while len(normals) < count and attempts < 400:
        attempts += 1
        cand = normalize(rng.normal(size=3))
        if all(abs(np.dot(cand, m)) < min_cos for m in normals):
            normals.append(cand)
    if allow_antiparallel and len(normals) < 6 and rng.random() < 0.5:
        normals.append(-normals[0])
    return normals


class TestInvariantProperties:
    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_profile_always_sums_to_three(self, seed):
        rng = np.random.default_rng(seed)
        normals = _random_nondegenerate_normals(rng)
        profile = dof_profile(feasible_cone(normals))
        assert profile.maintenance + profile.detachment + profile.constraint == 3

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_duplicate_normal_never_changes_classification(self, seed):
        rng = np.random.default_rng(seed)
        normals = _random_nondegenerate_normals(rng)
        base = classify(contacts_from_normals(normals))
        with pytest.warns(DegenerateContactWarning):
            doubled = classify(contacts_from_normals(normals + [normals[0]]))
        assert doubled == base

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_rigid_rotation_preserves_classification(self, seed):
        rng = np.random.default_rng(seed)
        normals = _random_nondegenerate_normals(rng)
        q = quat_from_axis_angle(normalize(rng.normal(size=3)),
                                 rng.uniform(0, 2 * np.pi))
        rotated = [normalize(quat_rotate(q, m)) for m in normals]
        assert classify(contacts_from_normals(normals)) == \
            classify(contacts_from_normals(rotated))

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_rotation_classify_equals_translation_of_effective_normals(self, seed):
        rng = np.random.default_rng(seed)
        center = rng.normal(size=3)
        points = [center + rng.normal(size=3) for _ in range(int(rng.integers(1, 5)))]
        cs = ContactSet.of([(p, normalize(rng.normal(size=3))) for p in points])
        by_rotation = classify(cs, MotionKind.ROTATION, center)
        ms, _ = rotation_effective_normals(cs, center)
        by_reduction = classify(contacts_from_normals(ms))
        assert by_rotation[1] == by_reduction[1]
        assert ROTATIONAL_TWIN[by_reduction[0].value] == by_rotation[0].value


class TestSamplingOracle:
    @pytest.mark.parametrize("name", sorted(TABLE_CONSTRUCTIONS))
    def test_oracle_reproduces_every_table_row(self, name):
        contacts = contacts_from_normals(TABLE_CONSTRUCTIONS[name])
        state, profile = oracle_classify_sampled(contacts, 2562)
        assert state.value == name
        assert profile.as_tuple() == TABLE_ROWS[name]

    def test_grid_size_floor(self):
        with pytest.raises(InputError):
            oracle_classify_sampled(ContactSet(()), 100)

    def test_agrees_with_classifier_on_random_configurations(self):
        rng = np.random.default_rng(2024)
        for _ in range(40):
            normals = _random_nondegenerate_normals(rng)
            contacts = contacts_from_normals(normals)
            assert oracle_classify_sampled(contacts, 8000) == classify(contacts)
