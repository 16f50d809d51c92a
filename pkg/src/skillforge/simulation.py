"""Quasi-static, gravity-free, position-stepped rigid contact simulator.

The grasped object and hand are one rigid unit moved by small position
steps.  Contact is frictionless spring-damper: every (sample point,
surface) pair with positive penetration contributes k*depth along the
surface normal, plus damping against the approach velocity (compression
only, so contacts never pull).  Hinged fixtures (doors) are modelled by
a stiff bilateral circular joint on the grasp center, since fixed
planes cannot track an arc.

One environment instance is single-owner mutable state; independent
instances run fully in parallel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .cones import ContactPoint, ContactSet, MotionKind
from .geometry import (
    IDENTITY_QUAT,
    any_orthonormal,
    normalize,
    quat_from_axis_angle,
    quat_matrix,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    vec,
)


class SimulationBlowupError(RuntimeError):
    """Penetration exceeded the cap; the quasi-static model is no longer valid."""


@dataclass(frozen=True)
class Surface:
    """A rectangular (or unbounded) plane patch with spring-damper compliance."""

    point: np.ndarray
    normal: np.ndarray
    half_extents: Optional[tuple] = None  # (a, b) along in-plane axes; None = infinite
    axes: Optional[tuple] = None          # in-plane unit axes; derived when omitted
    stiffness: float = 5000.0             # N/m
    damping: float = 50.0                 # N*s/m

    def __post_init__(self):
        object.__setattr__(self, "point", vec(self.point))
        object.__setattr__(self, "normal", normalize(self.normal))
        if self.stiffness <= 0.0 or self.damping < 0.0:
            raise ValueError("surface needs stiffness > 0 and damping >= 0")
        if self.axes is None:
            a1 = any_orthonormal(self.normal)
            a2 = np.cross(self.normal, a1)
            object.__setattr__(self, "axes", (a1, a2))
        else:
            a1, a2 = (normalize(a) for a in self.axes)
            object.__setattr__(self, "axes", (a1, a2))
        if self.half_extents is not None:
            object.__setattr__(self, "half_extents",
                               (float(self.half_extents[0]), float(self.half_extents[1])))

    def depths(self, points: np.ndarray) -> np.ndarray:
        """Penetration depth of each world point (positive inside)."""
        rel = points - self.point
        depth = -(rel @ self.normal)
        if self.half_extents is not None:
            in_a = np.abs(rel @ self.axes[0]) <= self.half_extents[0]
            in_b = np.abs(rel @ self.axes[1]) <= self.half_extents[1]
            depth = np.where(in_a & in_b, depth, -np.inf)
        return depth


def box_sample_points(half_extents) -> np.ndarray:
    """Contact sample points of a box: 8 corners plus 6 face centers."""
    hx, hy, hz = (float(h) for h in half_extents)
    corners = np.array([[sx * hx, sy * hy, sz * hz]
                        for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    faces = np.array([
        [hx, 0, 0], [-hx, 0, 0],
        [0, hy, 0], [0, -hy, 0],
        [0, 0, hz], [0, 0, -hz],
    ], dtype=float)
    return np.vstack([corners, faces])


@dataclass
class HandObject:
    """The integrated hand+object unit: pose plus body-frame contact samples."""

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    sample_points: np.ndarray = field(default_factory=lambda: box_sample_points((0.04,) * 3))
    grasp_center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.position = vec(self.position)
        self.orientation = quat_normalize(self.orientation)
        self.sample_points = np.atleast_2d(np.asarray(self.sample_points, dtype=float))
        if self.sample_points.shape[0] < 1 or self.sample_points.shape[1] != 3:
            raise ValueError("need at least one 3-D sample point")
        self.grasp_center = vec(self.grasp_center)

    def world_samples(self) -> np.ndarray:
        return self.position + self.sample_points @ quat_matrix(self.orientation).T

    def world_grasp_center(self) -> np.ndarray:
        return self.position + quat_rotate(self.orientation, self.grasp_center)

    def copy(self) -> "HandObject":
        return HandObject(self.position.copy(), self.orientation.copy(),
                          self.sample_points.copy(), self.grasp_center.copy())


@dataclass(frozen=True)
class SimConfig:
    step_size: float = 0.005       # m per step
    dt: float = 0.05               # s per step (sets damping velocities)
    normal_noise: float = 0.0      # degrees, domain randomization std-dev
    f_step: float = 1.0            # N, force discretization quantum
    seed: int = 0
    penetration_cap: float = 0.05  # m, beyond this the model has blown up
    contact_proximity: float = 0.01  # m, range at which a surface counts as a constraint
    gravity: float = 0.0

    def __post_init__(self):
        if self.step_size <= 0.0:
            raise ValueError("step_size must be positive")
        if self.gravity != 0.0:
            raise ValueError("gravity is fixed at zero")
        if self.f_step <= 0.0:
            raise ValueError("f_step must be positive")


def sense(f, f0, f_step: float) -> tuple[np.ndarray, int]:
    """Force direction and coarse magnitude relative to a baseline.

    Returns (f_n, f_desc) with f_n the unit vector of f - f0 (zero vector
    at the baseline) and f_desc = floor(|f - f0| / f_step).
    """
    if f_step <= 0.0:
        raise ValueError("f_step must be positive")
    delta = vec(f) - vec(f0)
    magnitude = float(np.linalg.norm(delta))
    if magnitude > 0.0:
        f_n = delta / magnitude
    else:
        f_n = np.zeros(3)
    return f_n, int(np.floor(magnitude / f_step))


@dataclass(frozen=True)
class ForceReading:
    """World-frame contact force with its baseline-relative derived fields."""

    f: np.ndarray
    f0: np.ndarray
    f_n: np.ndarray
    f_desc: int
    contact_flags: tuple = ()

    @staticmethod
    def make(f, f0, f_step: float, contact_flags=()) -> "ForceReading":
        f_n, f_desc = sense(f, f0, f_step)
        return ForceReading(vec(f), vec(f0), f_n, f_desc, tuple(bool(c) for c in contact_flags))

    @property
    def delta(self) -> np.ndarray:
        """Baseline-relative force (what the reward conditions consume)."""
        return self.f - self.f0


@dataclass(frozen=True)
class DoorJoint:
    """Stiff bilateral circular constraint on the grasp center.

    Confines the grasp center to a circle of given radius about the
    hinge axis (radially and axially), with an optional one-sided
    angular stop that resists closing past it.
    """

    hinge_point: np.ndarray
    axis: np.ndarray
    radius: float
    reference_dir: np.ndarray          # unit, perpendicular to axis; angle 0 direction
    axial_offset: float = 0.0          # grasp height along the axis
    stop_angle: Optional[float] = None  # radians; None = free hinge (ajar)
    stiffness: float = 5000.0
    damping: float = 50.0

    def __post_init__(self):
        object.__setattr__(self, "hinge_point", vec(self.hinge_point))
        object.__setattr__(self, "axis", normalize(self.axis))
        ref = vec(self.reference_dir)
        ref = normalize(ref - np.dot(ref, self.axis) * self.axis)
        object.__setattr__(self, "reference_dir", ref)
        if self.radius <= 0.0:
            raise ValueError("door radius must be positive")

    def angle_of(self, point) -> float:
        """Signed door angle of a world point about the hinge."""
        rel = vec(point) - self.hinge_point
        planar = rel - np.dot(rel, self.axis) * self.axis
        second = np.cross(self.axis, self.reference_dir)
        return float(np.arctan2(np.dot(planar, second), np.dot(planar, self.reference_dir)))

    def force_on(self, point, velocity) -> np.ndarray:
        rel = vec(point) - self.hinge_point
        axial = float(np.dot(rel, self.axis))
        planar = rel - axial * self.axis
        r = float(np.linalg.norm(planar))
        if r < 1e-9:
            return np.zeros(3)
        radial_dir = planar / r
        v = vec(velocity)
        f = -self.stiffness * (r - self.radius) * radial_dir
        f += -self.damping * float(np.dot(v, radial_dir)) * radial_dir
        f += -self.stiffness * (axial - self.axial_offset) * self.axis
        f += -self.damping * float(np.dot(v, self.axis)) * self.axis
        if self.stop_angle is not None:
            angle = self.angle_of(point)
            if angle < self.stop_angle:
                tangent = np.cross(self.axis, radial_dir)
                f += self.stiffness * self.radius * (self.stop_angle - angle) * tangent
        return f


def contact_force(
    obj: HandObject,
    velocity,
    surfaces: Sequence[Surface],
    dt_damping: bool = True,
    penetration_cap: float = 0.05,
) -> tuple[np.ndarray, list]:
    """Total frictionless contact force on the object and per-surface flags.

    Each penetrating (sample point, surface) pair contributes
    (k*depth + d*max(0, approach_speed)) along the surface normal; the
    damper only acts in compression, so contacts never stick.
    """
    v = vec(velocity)
    points = obj.world_samples()
    total = np.zeros(3)
    flags = []
    for surface in surfaces:
        depth = surface.depths(points)
        touching = depth > 0.0
        flags.append(bool(np.any(touching)))
        if not np.any(touching):
            continue
        max_depth = float(np.max(depth[touching]))
        if max_depth > penetration_cap:
            raise SimulationBlowupError(
                f"penetration {max_depth:.4f} m exceeds cap {penetration_cap:.4f} m")
        approach = max(0.0, -float(np.dot(v, surface.normal))) if dt_damping else 0.0
        magnitude = surface.stiffness * np.sum(depth[touching]) \
            + surface.damping * approach * np.count_nonzero(touching)
        total = total + magnitude * surface.normal
    return total, flags


@dataclass
class Scene:
    """A preset world: surfaces, the grasped object's start state, config,
    the canonical contact set describing the constraint situation, and
    named world feature points for visual-alignment conditions."""

    name: str
    surfaces: list
    obj: HandObject
    config: SimConfig
    contacts: ContactSet
    kind: MotionKind = MotionKind.TRANSLATION
    center: Optional[np.ndarray] = None
    door: Optional[DoorJoint] = None
    features: dict = field(default_factory=dict)
    vertical: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def make_env(self) -> "ContactEnv":
        return ContactEnv(self)


def randomize_scene(scene: Scene, normal_noise: float, rng: np.random.Generator) -> Scene:
    """Perturb each surface normal by a random rotation of angle
    |N(0, normal_noise deg)| about a random in-plane axis.  Deterministic
    under the generator's seed; noise 0 returns an identical scene."""
    if normal_noise < 0.0:
        raise ValueError("noise must be nonnegative")
    if normal_noise == 0.0:
        return replace(scene, surfaces=list(scene.surfaces))
    sigma = np.deg2rad(normal_noise)
    new_surfaces = []
    for surface in scene.surfaces:
        angle = abs(rng.normal(0.0, sigma))
        tilt_about = any_orthonormal(surface.normal)
        spin = quat_from_axis_angle(surface.normal, rng.uniform(0.0, 2.0 * np.pi))
        axis = quat_rotate(spin, tilt_about)
        q = quat_from_axis_angle(axis, angle)
        n = normalize(quat_rotate(q, surface.normal))
        # carry the in-plane axes through the same rotation so the patch
        # extents keep their orientation
        new_axes = tuple(normalize(quat_rotate(q, a)) for a in surface.axes)
        new_surfaces.append(replace(surface, normal=n, axes=new_axes))
    return replace(scene, surfaces=new_surfaces)


class ContactEnv:
    """Mutable simulation state for one episode."""

    def __init__(self, scene: Scene):
        self.scene = scene
        self.obj = scene.obj.copy()
        self.config = scene.config
        self.f0 = np.zeros(3)
        self.time = 0.0
        self._attached = True  # pipeline grasp/release marker state

    # -- force pipeline ----------------------------------------------------

    def raw_force(self, velocity=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, list]:
        f, flags = contact_force(self.obj, velocity, self.scene.surfaces,
                                 penetration_cap=self.config.penetration_cap)
        if self.scene.door is not None:
            f = f + self.scene.door.force_on(self.obj.world_grasp_center(), velocity)
        return f, flags

    def reading(self, velocity=(0.0, 0.0, 0.0)) -> ForceReading:
        f, flags = self.raw_force(velocity)
        return ForceReading.make(f, self.f0, self.config.f_step, flags)

    def capture_baseline(self) -> np.ndarray:
        """Retain the current force as the skill-start baseline."""
        self.f0 = self.reading().f.copy()
        return self.f0

    def zero_baseline(self) -> np.ndarray:
        """Baseline as sensed at first contact (zero in a gravity-free world)."""
        self.f0 = np.zeros(3)
        return self.f0

    # -- stepping ----------------------------------------------------------

    def step(self, dposition, dorientation=None) -> ForceReading:
        """Advance the pose by a small translation and optional rotation
        about the grasp center, then re-sense the contact force."""
        dpos = vec(dposition)
        if np.linalg.norm(dpos) > 2.0 * self.config.step_size + 1e-12:
            raise ValueError(
                f"step displacement {np.linalg.norm(dpos):.4f} exceeds twice the step size")
        if dorientation is not None:
            dq = quat_normalize(dorientation)
            gc = self.obj.world_grasp_center()
            self.obj.position = gc + quat_rotate(dq, self.obj.position - gc)
            self.obj.orientation = quat_normalize(
                quat_multiply(dq, self.obj.orientation))
        self.obj.position = self.obj.position + dpos
        self.time += self.config.dt
        velocity = dpos / self.config.dt
        return self.reading(velocity)

    def set_pose(self, position, orientation) -> None:
        self.obj.position = vec(position)
        self.obj.orientation = quat_normalize(orientation)

    # -- constraint introspection -------------------------------------------

    def contact_set_at(self, proximity: Optional[float] = None) -> ContactSet:
        """Constraint contacts near the current pose.

        A surface within `proximity` of a sample point constrains motion
        even when the spring force is momentarily zero (clearance slots);
        the door joint contributes its canonical contact construction.
        """
        prox = self.config.contact_proximity if proximity is None else proximity
        contacts = []
        points = self.obj.world_samples()
        for surface in self.scene.surfaces:
            rel = points - surface.point
            dist = rel @ surface.normal  # signed distance, positive outside
            near = dist <= prox
            if surface.half_extents is not None:
                near &= np.abs(rel @ surface.axes[0]) <= surface.half_extents[0] + prox
                near &= np.abs(rel @ surface.axes[1]) <= surface.half_extents[1] + prox
            if np.any(near):
                idx = int(np.argmin(np.where(near, dist, np.inf)))
                p = points[idx] - float(dist[idx]) * surface.normal
                contacts.append(ContactPoint(p, surface.normal))
        if self.scene.door is not None:
            contacts.extend(door_canonical_contacts(
                self.scene.door, closed=self._door_is_closed()))
        return ContactSet(tuple(contacts))

    def _door_is_closed(self) -> bool:
        door = self.scene.door
        if door is None or door.stop_angle is None:
            return False
        angle = door.angle_of(self.obj.world_grasp_center())
        return angle <= door.stop_angle + 1e-6

    @property
    def attached(self) -> bool:
        return self._attached

    def set_attached(self, value: bool) -> None:
        self._attached = bool(value)


def door_canonical_contacts(door: DoorJoint, closed: bool) -> list:
    """Contact construction equivalent to a hinged door.

    Four pin contacts on the hinge axis lock every rotation axis except
    the hinge; when closed, a frame-stop contact at hinge height makes
    the hinge one-sided (opening only).
    """
    a = door.axis
    r = door.reference_dir
    t = np.cross(a, r)
    pin = door.hinge_point + door.axial_offset * a
    contacts = [
        ContactPoint(pin, r), ContactPoint(pin, -r),
        ContactPoint(pin, t), ContactPoint(pin, -t),
    ]
    if closed:
        stop_point = door.hinge_point + door.radius * r
        contacts.append(ContactPoint(stop_point, t))
    return contacts


# ---------------------------------------------------------------------------
# Scene JSON
# ---------------------------------------------------------------------------

def scene_to_dict(scene: Scene) -> dict:
    def v(x):
        return [float(c) for c in x]

    data = {
        "name": scene.name,
        "surfaces": [
            {
                "point": v(s.point), "normal": v(s.normal),
                "half_extents": list(s.half_extents) if s.half_extents else None,
                "axes": [v(s.axes[0]), v(s.axes[1])],
                "k": s.stiffness, "d": s.damping,
            }
            for s in scene.surfaces
        ],
        "object": {
            "position": v(scene.obj.position),
            "orientation": v(scene.obj.orientation),
            "sample_points": [v(p) for p in scene.obj.sample_points],
            "grasp_center": v(scene.obj.grasp_center),
        },
        "config": {
            "step_size": scene.config.step_size, "dt": scene.config.dt,
            "normal_noise": scene.config.normal_noise, "f_step": scene.config.f_step,
            "seed": scene.config.seed, "penetration_cap": scene.config.penetration_cap,
            "contact_proximity": scene.config.contact_proximity,
        },
        "contacts": [
            {"p": v(c.position), "n": v(c.normal)} for c in scene.contacts
        ],
        "kind": scene.kind.value,
        "center": v(scene.center) if scene.center is not None else None,
        "features": {k: v(p) for k, p in scene.features.items()},
        "vertical": v(scene.vertical),
    }
    if scene.door is not None:
        d = scene.door
        data["door"] = {
            "hinge_point": v(d.hinge_point), "axis": v(d.axis), "radius": d.radius,
            "reference_dir": v(d.reference_dir), "axial_offset": d.axial_offset,
            "stop_angle": d.stop_angle, "k": d.stiffness, "d": d.damping,
        }
    return data


def scene_from_dict(data: dict) -> Scene:
    surfaces = [
        Surface(
            point=s["point"], normal=s["normal"],
            half_extents=tuple(s["half_extents"]) if s.get("half_extents") else None,
            axes=tuple(s["axes"]) if s.get("axes") else None,
            stiffness=s.get("k", 5000.0), damping=s.get("d", 50.0),
        )
        for s in data["surfaces"]
    ]
    o = data["object"]
    obj = HandObject(o["position"], o["orientation"], o["sample_points"], o["grasp_center"])
    cfg = SimConfig(**data.get("config", {}))
    contacts = ContactSet.of([(c["p"], c["n"]) for c in data.get("contacts", [])])
    door = None
    if data.get("door"):
        d = data["door"]
        door = DoorJoint(
            hinge_point=d["hinge_point"], axis=d["axis"], radius=d["radius"],
            reference_dir=d["reference_dir"], axial_offset=d.get("axial_offset", 0.0),
            stop_angle=d.get("stop_angle"), stiffness=d.get("k", 5000.0),
            damping=d.get("d", 50.0),
        )
    return Scene(
        name=data.get("name", "scene"),
        surfaces=surfaces, obj=obj, config=cfg, contacts=contacts,
        kind=MotionKind(data.get("kind", "translation")),
        center=np.asarray(data["center"], dtype=float) if data.get("center") else None,
        door=door,
        features={k: np.asarray(p, dtype=float) for k, p in data.get("features", {}).items()},
        vertical=np.asarray(data.get("vertical", [0, 0, 1]), dtype=float),
    )


def save_scene(scene: Scene, path) -> None:
    with open(path, "w") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2, sort_keys=True)


def load_scene(path) -> Scene:
    with open(path) as fh:
        return scene_from_dict(json.load(fh))
