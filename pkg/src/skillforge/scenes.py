"""Scene presets for each skill family.

Every preset pairs a simulated world with the canonical contact set
describing its constraint situation, so the classifier can confirm the
intended contact state before a skill runs.
"""

from __future__ import annotations

import numpy as np

from .cones import ContactSet, MotionKind
from .simulation import (
    DoorJoint,
    HandObject,
    Scene,
    SimConfig,
    Surface,
    box_sample_points,
    door_canonical_contacts,
)

X = np.array([1.0, 0.0, 0.0])
Y = np.array([0.0, 1.0, 0.0])
Z = np.array([0.0, 0.0, 1.0])

PRESET_NAMES = ("tabletop", "drawer", "door", "whiteboard", "walls-gap")


def _config(**overrides) -> SimConfig:
    return SimConfig(**overrides)


def tabletop(pressed: bool = False, **config) -> Scene:
    """An infinite table at z=0 with a small raised plate; the object is a
    box resting at the origin (PC1 against the table).

    pressed=True starts the box pushed into the table hard enough for
    force-holding skills.
    """
    half = (0.04, 0.04, 0.04)
    table = Surface(point=(0, 0, 0), normal=Z)
    plate = Surface(point=(0.40, 0.0, 0.02), normal=Z, half_extents=(0.08, 0.08),
                    axes=(X, Y))
    # resting: bottom exactly on the table; pressed: 5 bottom samples carry ~10 N
    z0 = half[2] - (0.0004 if pressed else 0.0)
    obj = HandObject(position=(0.0, 0.0, z0), sample_points=box_sample_points(half))
    contacts = ContactSet.of([((0.0, 0.0, 0.0), Z)])
    return Scene(
        name="tabletop", surfaces=[table, plate], obj=obj, config=_config(**config),
        contacts=contacts,
        features={"plate_top": np.array([0.40, 0.0, 0.02]),
                  "table_top": np.array([0.0, 0.0, 0.0])},
    )


def whiteboard(pressed: bool = True, **config) -> Scene:
    """A vertical board at x=0.6 facing the robot (PC1 against the board);
    the wipe scene."""
    half = (0.02, 0.04, 0.04)
    board = Surface(point=(0.6, 0.0, 0.3), normal=-X, half_extents=(0.60, 0.35),
                    axes=(Y, Z))
    x0 = 0.6 - half[0] + (0.0004 if pressed else 0.0)
    obj = HandObject(position=(x0, 0.0, 0.3), sample_points=box_sample_points(half))
    contacts = ContactSet.of([((0.6, 0.0, 0.3), -X)])
    return Scene(
        name="whiteboard", surfaces=[board], obj=obj, config=_config(**config),
        contacts=contacts,
        features={"board_center": np.array([0.6, 0.0, 0.3])},
    )


def drawer(closed: bool = False, detent: bool = False, **config) -> Scene:
    """A sliding slot along +x bounded by four walls and a back stop.

    Mid-slot the runner classifies PR (free along x only); starting
    against the back wall adds the +x constraint and classifies OP.
    The optional detent adds a short resistive bump near the slot mouth
    (profile is a stand-in, not hardware-calibrated).
    """
    walls = [
        Surface(point=(0.2, 0.0, 0.0), normal=Z, half_extents=(0.2, 0.06), axes=(X, Y)),
        Surface(point=(0.2, 0.0, 0.1), normal=-Z, half_extents=(0.2, 0.06), axes=(X, Y)),
        Surface(point=(0.2, -0.06, 0.05), normal=Y, half_extents=(0.2, 0.05), axes=(X, Z)),
        Surface(point=(0.2, 0.06, 0.05), normal=-Y, half_extents=(0.2, 0.05), axes=(X, Z)),
        Surface(point=(0.0, 0.0, 0.05), normal=X, half_extents=(0.06, 0.05), axes=(Y, Z)),
    ]
    if detent:
        # narrow lip protruding from the bottom near the mouth
        walls.append(Surface(point=(0.33, 0.0, 0.0035), normal=Z,
                             half_extents=(0.002, 0.06), axes=(X, Y), stiffness=2000.0))
    half = (0.1, 0.055, 0.045)
    x0 = half[0] if closed else 0.2
    obj = HandObject(position=(x0, 0.0, 0.05), sample_points=box_sample_points(half))
    pairs = [
        ((0.2, -0.055, 0.05), Y), ((0.2, 0.055, 0.05), -Y),
        ((0.2, 0.0, 0.005), Z), ((0.2, 0.0, 0.095), -Z),
    ]
    if closed:
        pairs.append(((0.0, 0.0, 0.05), X))
    return Scene(
        name="drawer", surfaces=walls, obj=obj, config=_config(**config),
        contacts=ContactSet.of(pairs),
        features={"slot_center": np.array([0.2, 0.0, 0.05])},
    )


def door(ajar: bool = False, hinge_radius: float = 0.5, **config) -> Scene:
    """A hinged door grasped at its handle, hinge axis vertical.

    Closed (default) the hinge is one-sided: rotation about the hinge
    classifies OR.  Ajar removes the stop and classifies RV.
    """
    hinge = np.zeros(3)
    height = 1.0
    start_angle = 0.35 if ajar else 0.0
    joint = DoorJoint(
        hinge_point=hinge, axis=Z, radius=hinge_radius, reference_dir=X,
        axial_offset=height, stop_angle=None if ajar else 0.0,
    )
    handle = hinge + np.array([np.cos(start_angle), np.sin(start_angle), 0.0]) * hinge_radius \
        + height * Z
    obj = HandObject(position=handle, sample_points=box_sample_points((0.02,) * 3))
    contacts = ContactSet(tuple(door_canonical_contacts(joint, closed=not ajar)))
    return Scene(
        name="door", surfaces=[], obj=obj, config=_config(**config),
        contacts=contacts, kind=MotionKind.ROTATION, center=hinge,
        door=joint,
        features={"hinge": hinge.copy()},
    )


def walls_gap(**config) -> Scene:
    """Two parallel walls with the object sliding in the gap (TR)."""
    walls = [
        Surface(point=(0.0, -0.05, 0.0), normal=Y),
        Surface(point=(0.0, 0.05, 0.0), normal=-Y),
    ]
    obj = HandObject(position=(0.0, 0.0, 0.0),
                     sample_points=box_sample_points((0.04, 0.045, 0.04)))
    contacts = ContactSet.of([((0.0, -0.045, 0.0), Y), ((0.0, 0.045, 0.0), -Y)])
    return Scene(
        name="walls-gap", surfaces=walls, obj=obj, config=_config(**config),
        contacts=contacts,
        features={"gap_center": np.zeros(3)},
    )


_PRESETS = {
    "tabletop": tabletop,
    "drawer": drawer,
    "door": door,
    "whiteboard": whiteboard,
    "walls-gap": walls_gap,
}


def preset(name: str, **kwargs) -> Scene:
    """Build a preset scene by name."""
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}") from None
    return factory(**kwargs)


def scene_for_skill(preset_name: str, skill_name: str, **kwargs) -> Scene:
    """Preset variant whose start state matches the skill's from-state.

    Drawer-open starts closed (OP), door skills pick closed/ajar from
    the transition direction, wipe scenes start pressed.
    """
    if preset_name == "drawer":
        kwargs.setdefault("closed", skill_name == "OP-PR")
    elif preset_name == "door":
        kwargs.setdefault("ajar", skill_name in ("RV-OR", "RV-RV"))
    elif preset_name in ("tabletop", "whiteboard") and skill_name == "PC1-PC1":
        kwargs.setdefault("pressed", True)
    if preset_name == "tabletop" and skill_name.startswith("NC-"):
        scene = preset(preset_name, **kwargs)
        # aerial start for skills that begin unconstrained
        scene.obj.position = scene.obj.position + np.array([0.0, 0.0, 0.06])
        scene.contacts = ContactSet(())
        return scene
    return preset(preset_name, **kwargs)
