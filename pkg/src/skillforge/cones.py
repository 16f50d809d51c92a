"""Contact-state classification from feasible-motion cones.

A grasped object touching the environment at points p_i with surface
normals n_i can move along direction d only where every contact admits
it.  For pure translation the admissibility test is n_i . d >= 0; for
pure rotation about an axis s through a center c it reduces to
((p_i - c) x n_i) . s >= 0.  The solution set of these inequalities is
a polyhedral cone on the space of motion directions, and its shape
determines one of 20 named contact states with a fixed split of the
three spatial DOF into maintenance / detachment / constraint counts.

All types here are immutable values and all operations are pure
functions; they are safe to call concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .geometry import fibonacci_sphere, is_unit, normalize, vec

# Angular tolerance for normal deduplication / antiparallel detection.
# Below sensor noise, above float error.
DEDUP_TOL = 1e-6

# Slack used when testing feasibility of a direction against a half-space;
# directions on a cone boundary count as feasible (non-strict).
BOUNDARY_TOL = 1e-9

# LP objective values below this are treated as zero (implicit equality).
IMPLICIT_TOL = 1e-7

_RANK_TOL = 1e-8


class DegenerateContactWarning(UserWarning):
    """Emitted when near-duplicate normals are merged or contacts dropped."""


class InputError(ValueError):
    """Raised on malformed classifier inputs (non-unit vectors etc.)."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContactPoint:
    """One environmental constraint: contact position and outward surface normal."""

    position: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", vec(self.position))
        object.__setattr__(self, "normal", vec(self.normal))
        if not is_unit(self.normal):
            raise InputError(f"contact normal must be unit length, got |n|={np.linalg.norm(self.normal)}")


@dataclass(frozen=True)
class ContactSet:
    """An ordered collection of contact points."""

    contacts: tuple[ContactPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "contacts", tuple(self.contacts))

    def __len__(self) -> int:
        return len(self.contacts)

    def __iter__(self):
        return iter(self.contacts)

    @staticmethod
    def of(pairs: Iterable[tuple]) -> "ContactSet":
        """Build from (position, normal) pairs."""
        return ContactSet(tuple(ContactPoint(p, n) for p, n in pairs))


class MotionKind(Enum):
    TRANSLATION = "translation"
    ROTATION = "rotation"


@dataclass(frozen=True)
class MotionSpec:
    """A pure translation along `axis`, or a pure rotation about `axis`
    through `center`.  Compound screws (nonzero pitch) are out of scope;
    pitch is fixed at zero."""

    kind: MotionKind
    axis: np.ndarray
    center: Optional[np.ndarray] = None
    pitch: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "axis", vec(self.axis))
        if not is_unit(self.axis):
            raise InputError("motion axis must be unit length")
        if self.pitch != 0.0:
            raise InputError("pitch is fixed at zero (pure motions only)")
        if self.kind is MotionKind.ROTATION:
            if self.center is None:
                raise InputError("rotation requires a center")
            object.__setattr__(self, "center", vec(self.center))
        elif self.center is not None:
            object.__setattr__(self, "center", vec(self.center))


@dataclass(frozen=True)
class FeasibleCone:
    """Polyhedral cone {d : m . d >= 0 for every half-space normal m}.

    lineality_dim is the dimension of the largest linear subspace inside
    the cone; span_dim is the dimension of the cone's linear span.
    """

    halfspace_normals: tuple = ()
    lineality_dim: int = 3
    span_dim: int = 3

    def __post_init__(self):
        normals = tuple(vec(m) for m in self.halfspace_normals)
        object.__setattr__(self, "halfspace_normals", normals)
        if not (0 <= self.lineality_dim <= self.span_dim <= 3):
            raise InputError(
                f"invalid cone dims: lineality={self.lineality_dim} span={self.span_dim}")

    def normal_matrix(self) -> np.ndarray:
        if not self.halfspace_normals:
            return np.zeros((0, 3))
        return np.vstack(self.halfspace_normals)

    def contains(self, d, tol: float = BOUNDARY_TOL) -> bool:
        """Non-strict feasibility of direction d."""
        m = self.normal_matrix()
        if m.shape[0] == 0:
            return True
        return bool(np.all(m @ np.asarray(d, dtype=float) >= -tol))


@dataclass(frozen=True)
class DofProfile:
    """Split of the three motion DOF into maintenance/detachment/constraint."""

    maintenance: int
    detachment: int
    constraint: int

    def __post_init__(self):
        counts = (self.maintenance, self.detachment, self.constraint)
        if any(c < 0 for c in counts) or sum(counts) != 3:
            raise InputError(f"DOF profile must be nonnegative and sum to 3, got {counts}")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.maintenance, self.detachment, self.constraint)


class StateClass(Enum):
    # translational states
    NC = "NC"
    PC1 = "PC1"
    PC2 = "PC2"
    PCN = "PCN"
    TR = "TR"
    OT1 = "OT1"
    OT2 = "OT2"
    PR = "PR"
    OP = "OP"
    FT = "FT"
    # rotational states
    NR = "NR"
    RT1 = "RT1"
    RT2 = "RT2"
    RTN = "RTN"
    SP = "SP"
    OS1 = "OS1"
    OS2 = "OS2"
    RV = "RV"
    OR = "OR"
    FR = "FR"

    @property
    def coarse(self) -> str:
        """Grouped display label (PC1/PC2/PCN -> PC, OT1/OT2 -> OT, etc.)."""
        return _COARSE[self]

    @property
    def kind(self) -> MotionKind:
        return (MotionKind.TRANSLATION if self in _TRANSLATIONAL
                else MotionKind.ROTATION)


_TRANSLATIONAL = {
    StateClass.NC, StateClass.PC1, StateClass.PC2, StateClass.PCN,
    StateClass.TR, StateClass.OT1, StateClass.OT2, StateClass.PR,
    StateClass.OP, StateClass.FT,
}

_COARSE = {
    StateClass.PC1: "PC", StateClass.PC2: "PC", StateClass.PCN: "PC",
    StateClass.OT1: "OT", StateClass.OT2: "OT",
    StateClass.RT1: "RT", StateClass.RT2: "RT", StateClass.RTN: "RT",
    StateClass.OS1: "OS", StateClass.OS2: "OS",
}
_COARSE.update({s: s.value for s in StateClass if s not in _COARSE})

# (maintenance, detachment, constraint) -> state label, per motion kind.
PROFILE_TO_STATE = {
    MotionKind.TRANSLATION: {
        (3, 0, 0): StateClass.NC,
        (2, 1, 0): StateClass.PC1,
        (2, 0, 1): StateClass.TR,
        (1, 2, 0): StateClass.PC2,
        (1, 1, 1): StateClass.OT1,
        (1, 0, 2): StateClass.PR,
        (0, 3, 0): StateClass.PCN,
        (0, 2, 1): StateClass.OT2,
        (0, 1, 2): StateClass.OP,
        (0, 0, 3): StateClass.FT,
    },
    MotionKind.ROTATION: {
        (3, 0, 0): StateClass.NR,
        (2, 1, 0): StateClass.RT1,
        (2, 0, 1): StateClass.SP,
        (1, 2, 0): StateClass.RT2,
        (1, 1, 1): StateClass.OS1,
        (1, 0, 2): StateClass.RV,
        (0, 3, 0): StateClass.RTN,
        (0, 2, 1): StateClass.OS2,
        (0, 1, 2): StateClass.OR,
        (0, 0, 3): StateClass.FR,
    },
}

STATE_TO_PROFILE = {
    state: DofProfile(*prof)
    for table in PROFILE_TO_STATE.values()
    for prof, state in table.items()
}


class DState(Enum):
    """Directional state of a single motion direction."""

    MAINTENANCE = "maintenance"
    DETACHMENT = "detachment"
    CONSTRAINT = "constraint"


# ---------------------------------------------------------------------------
# Screw admissibility
# ---------------------------------------------------------------------------

def screw_lhs(contact: ContactPoint, motion: MotionSpec) -> float:
    """Left-hand side of the contact admissibility inequality.

    Returns n.t + (p x n).s where (s, t) is the twist of the motion:
    pure translation along a has s = 0, t = a; pure rotation about a
    through c has s = a, t = c x a.  A nonnegative value means the
    infinitesimal motion is admissible for this contact.
    """
    p, n = contact.position, contact.normal
    if motion.kind is MotionKind.TRANSLATION:
        return float(np.dot(n, motion.axis))
    c, s = motion.center, motion.axis
    t = np.cross(c, s)
    return float(np.dot(n, t) + np.dot(np.cross(p, n), s))


def rotation_effective_normals(
    contacts: ContactSet | Sequence[ContactPoint],
    center,
) -> tuple[list[np.ndarray], int]:
    """Reduce contacts to half-space normals on the space of rotation axes.

    For rotation about an axis s through `center`, each contact's
    admissibility inequality collapses to m . s >= 0 with
    m = (p - center) x n.  Contacts whose lever arm is parallel to the
    normal (or zero) produce m = 0 and constrain nothing; they are
    dropped and counted.

    Returns (normalized effective normals, dropped contact count).
    """
    c = vec(center)
    if not np.all(np.isfinite(c)):
        raise InputError("rotation center must be finite")
    effective: list[np.ndarray] = []
    dropped = 0
    for contact in contacts:
        m = np.cross(contact.position - c, contact.normal)
        length = np.linalg.norm(m)
        if length < DEDUP_TOL:
            dropped += 1
            continue
        effective.append(m / length)
    if dropped:
        warnings.warn(
            f"dropped {dropped} contact(s) with degenerate lever arm",
            DegenerateContactWarning, stacklevel=2)
    return effective, dropped


# ---------------------------------------------------------------------------
# Cone construction and classification
# ---------------------------------------------------------------------------

def dedup_normals(normals: Sequence, tol: float = DEDUP_TOL) -> list[np.ndarray]:
    """Merge normals within angular tolerance of each other (warn on merge).

    Antiparallel pairs are kept: they encode a genuine equality constraint.
    """
    kept: list[np.ndarray] = []
    merged = 0
    for raw in normals:
        m = normalize(raw)
        if any(np.dot(m, k) > 1.0 - 0.5 * tol * tol for k in kept):
            merged += 1
            continue
        kept.append(m)
    if merged:
        warnings.warn(
            f"merged {merged} duplicate normal(s) within tolerance",
            DegenerateContactWarning, stacklevel=2)
    return kept


def _rank(matrix: np.ndarray) -> int:
    if matrix.size == 0:
        return 0
    s = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(s > _RANK_TOL * max(1.0, s[0])))


def _max_over_cone(objective: np.ndarray, normals: np.ndarray) -> float:
    """max objective . d subject to normals @ d >= 0 and d in the unit box.

    The box bound (the infinity-norm unit ball) only normalizes scale:
    whether the maximum is zero or positive is what implicit-equality
    detection needs, and that is invariant under the choice of ball.
    """
    res = linprog(
        -objective,
        A_ub=-normals,
        b_ub=np.zeros(len(normals)),
        bounds=[(-1.0, 1.0)] * 3,
        method="highs",
    )
    if not res.success:  # pragma: no cover - HiGHS handles these LPs reliably
        raise RuntimeError(f"implicit-equality LP failed: {res.message}")
    return float(-res.fun)


def feasible_cone(normals: Sequence) -> FeasibleCone:
    """Build the feasible cone {d : m_i . d >= 0} from unit normals.

    lineality_dim is the null-space dimension of the normal matrix;
    span_dim comes from implicit-equality detection: a constraint i is
    an implicit equality iff m_i . d vanishes over the whole cone, and
    the cone's span is the orthogonal complement of those normals.
    """
    for m in normals:
        if not is_unit(m):
            raise InputError("cone normals must be unit length")
    unique = dedup_normals(normals)
    if not unique:
        return FeasibleCone((), 3, 3)
    matrix = np.vstack(unique)
    lineality = 3 - _rank(matrix)
    implicit = [m for m in unique if _max_over_cone(m, matrix) <= IMPLICIT_TOL]
    span = 3 - _rank(np.vstack(implicit)) if implicit else 3
    return FeasibleCone(tuple(unique), lineality, span)


def dof_profile(cone: FeasibleCone) -> DofProfile:
    """DOF split of a cone: maintenance = lineality, constraint = 3 - span,
    detachment fills the remainder."""
    return DofProfile(
        maintenance=cone.lineality_dim,
        detachment=cone.span_dim - cone.lineality_dim,
        constraint=3 - cone.span_dim,
    )


def classify(
    contacts: ContactSet | Sequence[ContactPoint],
    kind: MotionKind = MotionKind.TRANSLATION,
    center=None,
) -> tuple[StateClass, DofProfile]:
    """Classify the contact state for pure translations or pure rotations.

    Rotation classification reduces contacts to effective normals about
    `center` first; the DOF profile then selects the unique state label
    of the requested motion kind.
    """
    kind = MotionKind(kind)
    if kind is MotionKind.ROTATION:
        if center is None:
            raise InputError("rotation classification requires a center")
        normals, _ = rotation_effective_normals(contacts, center)
    else:
        normals = [c.normal for c in contacts]
    cone = feasible_cone(normals)
    profile = dof_profile(cone)
    return PROFILE_TO_STATE[kind][profile.as_tuple()], profile


def dstate_of_direction(cone: FeasibleCone, d) -> DState:
    """Directional state of unit direction d against a cone.

    maintenance iff both +d and -d are feasible, detachment iff exactly
    one is, constraint iff neither.  Directions on a cone boundary are
    classified by non-strict feasibility.
    """
    d = vec(d)
    if not is_unit(d):
        raise InputError("direction must be unit length")
    forward = cone.contains(d)
    backward = cone.contains(-d)
    if forward and backward:
        return DState.MAINTENANCE
    if forward or backward:
        return DState.DETACHMENT
    return DState.CONSTRAINT


# ---------------------------------------------------------------------------
# Sampling oracle (independent check of classify)
# ---------------------------------------------------------------------------

class IndeterminateClassification(RuntimeError):
    """The sampled feasible set was too ambiguous to classify."""


@dataclass(frozen=True)
class _SampledSet:
    directions: np.ndarray  # (n, 3) grid
    dots: np.ndarray        # (n, k) grid . normals^T, or None when unconstrained

    def feasible_mask(self, tol: float) -> np.ndarray:
        if self.dots is None:
            return np.ones(len(self.directions), dtype=bool)
        return np.all(self.dots >= -tol, axis=1)


def _subspace_rank(points: np.ndarray, flat_tol: float) -> int:
    """Dimension of the smallest subspace containing `points` up to flat_tol.

    A dimension counts as real when some point sits farther than flat_tol
    from the best-fit subspace of lower dimension; pointwise max residual
    (not RMS) keeps short arcs distinguishable from tolerance slabs.
    """
    if len(points) == 0:
        return 0
    _, _, vt = np.linalg.svd(points, full_matrices=True)
    for r in range(1, 3):
        basis = vt[:r]
        residual = points - (points @ basis.T) @ basis
        if np.max(np.linalg.norm(residual, axis=1)) <= flat_tol:
            return r
    return 3


def _verified_lineality_dim(
    points: np.ndarray,
    feasible_two_way,
    flat_tol: float,
) -> int:
    """Rank of the sampled maintenance set, verified by probing.

    PCA principal directions of the two-way-feasible samples are accepted
    one by one only while the direction itself (and its pairwise mixtures
    with the accepted ones) stays two-way feasible at a tightened
    tolerance; this rejects spurious spread caused by nearly dependent
    constraints without consulting the analytic classifier.
    """
    if len(points) == 0:
        return 0
    _, s, vt = np.linalg.svd(points, full_matrices=False)
    probe_tol = flat_tol / 2.0
    accepted: list[np.ndarray] = []
    for i in range(len(s)):
        if s[i] <= _RANK_TOL * max(1.0, s[0]):
            break
        candidate = vt[i]
        probes = [candidate]
        probes.extend(normalize(candidate + a) for a in accepted)
        probes.extend(normalize(candidate - a) for a in accepted)
        if all(feasible_two_way(p, probe_tol) for p in probes):
            accepted.append(candidate)
        else:
            break
    return len(accepted)


def oracle_classify_sampled(
    contacts: ContactSet | Sequence[ContactPoint],
    grid_size: int = 2562,
    kind: MotionKind = MotionKind.TRANSLATION,
    center=None,
) -> tuple[StateClass, DofProfile]:
    """Brute-force classifier: test every direction on a sphere grid.

    Independent of `classify`: dimensions are estimated from the sampled
    feasible set alone.  Strictly feasible samples witness a
    full-dimensional cone; otherwise the tolerance-banded feasible set is
    rank-analyzed for the span, and the subset feasible in both
    directions for the maintenance count.

    Raises:
        IndeterminateClassification: when the samples are inconsistent
            (near-degenerate configurations below grid resolution).
    """
    if grid_size < 1000:
        raise InputError("oracle grid must have at least 1000 directions")
    kind = MotionKind(kind)
    if kind is MotionKind.ROTATION:
        if center is None:
            raise InputError("rotation classification requires a center")
        normals, _ = rotation_effective_normals(contacts, center)
    else:
        normals = [normalize(c.normal) for c in contacts]
    normals = dedup_normals(normals)

    grid = fibonacci_sphere(grid_size)
    if not normals:
        return PROFILE_TO_STATE[kind][(3, 0, 0)], DofProfile(3, 0, 0)
    matrix = np.vstack(normals)
    sampled = _SampledSet(grid, grid @ matrix.T)

    # capture tolerance: a bit above the grid covering radius
    tol = max(3.0 / np.sqrt(grid_size), 1e-6)

    strict = sampled.feasible_mask(1e-9)
    banded = sampled.feasible_mask(tol)

    if np.count_nonzero(strict) >= 3:
        span = 3
    elif not np.any(banded):
        span = 0
    else:
        span = _subspace_rank(grid[banded], flat_tol=2.0 * tol)
        if span == 3:
            # flat by strict test but full-rank by banded fit: below resolution
            raise IndeterminateClassification(
                "sampled span inconsistent with strict feasibility")

    def feasible_two_way(d: np.ndarray, t: float) -> bool:
        dots = matrix @ d
        return bool(np.all(dots >= -t) and np.all(-dots >= -t))

    both = banded & np.all(sampled.dots <= tol, axis=1)
    maintenance = _verified_lineality_dim(grid[both], feasible_two_way, tol)

    if maintenance > span:
        raise IndeterminateClassification(
            f"maintenance estimate {maintenance} exceeds span estimate {span}")
    profile = DofProfile(maintenance, span - maintenance, 3 - span)
    return PROFILE_TO_STATE[kind][profile.as_tuple()], profile
