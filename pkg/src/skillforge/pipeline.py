"""Task-model ingestion and skill chaining.

A task sequence is a JSON list of task models: the skill name plus the
demonstration-derived slots (end hand configuration, detachment
direction, and an opaque end-pose notation that is stored untouched).
Grasp and release entries are markers, not skills: they toggle the
object-attached flag and are logged, since grasping itself is delegated
to a separate skill family.

Sequence execution is strictly serial; each skill starts from the
previous skill's achieved end pose.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .agents import (
    EpisodeTrace,
    IdentityCarrier,
    SkillParameters,
    analytic_controller,
    family_of,
    frame_from_motion,
    run_skill,
)
from .cones import MotionKind, classify
from .geometry import normalize, vec
from .rewards import (
    Axis,
    DEFAULT_ANGULAR_GOAL_TOLERANCE,
    DEFAULT_GOAL_TOLERANCE,
    DEFAULT_THRESHOLDS,
    lookup,
)
from .simulation import ContactEnv

GRASP_PREFIX = "grasp:"
RELEASE_MARKER = "release"


class TaskParseError(ValueError):
    """Malformed task sequence document; message carries the slot path."""


class SequencingError(RuntimeError):
    """A skill's start state does not match the environment."""


@dataclass(frozen=True)
class TaskModel:
    """One demonstration-derived unit operation."""

    task: str
    actor: str = ""
    object_name: str = ""
    edc_position: Optional[np.ndarray] = None   # end hand configuration
    edc_orientation: Optional[np.ndarray] = None
    dtd: Optional[np.ndarray] = None            # detachment direction, unit
    edl: str = ""                               # opaque end-pose notation, stored only

    def __post_init__(self):
        if self.edc_position is not None:
            object.__setattr__(self, "edc_position", vec(self.edc_position))
        if self.edc_orientation is not None:
            object.__setattr__(self, "edc_orientation",
                               np.asarray(self.edc_orientation, dtype=float))
        if self.dtd is not None:
            object.__setattr__(self, "dtd", normalize(self.dtd))

    @property
    def is_marker(self) -> bool:
        return self.task.startswith(GRASP_PREFIX) or self.task == RELEASE_MARKER


def parse_task_sequence(document) -> list:
    """Parse a task-sequence document (dict, JSON text, or file path).

    Unknown task names and malformed slots raise TaskParseError with the
    offending path.
    """
    if isinstance(document, (str, Path)) and Path(str(document)).exists():
        document = json.loads(Path(document).read_text())
    elif isinstance(document, str):
        document = json.loads(document)
    if not isinstance(document, dict) or "tasks" not in document:
        raise TaskParseError("document must be an object with a 'tasks' list")
    models = []
    for i, entry in enumerate(document["tasks"]):
        path = f"tasks[{i}]"
        if not isinstance(entry, dict) or "task" not in entry:
            raise TaskParseError(f"{path}: missing 'task'")
        name = entry["task"]
        if not (name.startswith(GRASP_PREFIX) or name == RELEASE_MARKER):
            try:
                lookup(name)
            except KeyError:
                raise TaskParseError(f"{path}.task: unknown task {name!r}") from None
        edc = entry.get("edc")
        edc_p = edc_q = None
        if edc is not None:
            try:
                edc_p = vec(edc["p"])
            except (KeyError, TypeError, ValueError) as exc:
                raise TaskParseError(f"{path}.edc.p: {exc}") from None
            if "q" in edc:
                edc_q = np.asarray(edc["q"], dtype=float)
                if edc_q.shape != (4,):
                    raise TaskParseError(f"{path}.edc.q: expected quaternion")
        dtd = None
        if entry.get("dtd") is not None:
            try:
                dtd = normalize(entry["dtd"])
            except ValueError as exc:
                raise TaskParseError(f"{path}.dtd: {exc}") from None
        models.append(TaskModel(
            task=name, actor=entry.get("actor", ""),
            object_name=entry.get("object", ""),
            edc_position=edc_p, edc_orientation=edc_q, dtd=dtd,
            edl=entry.get("edl", ""),
        ))
    return models


def bind_parameters(
    model: TaskModel,
    scene,
    start_position,
    feature_noise: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> SkillParameters:
    """Derive runtime skill parameters from a task model and the scene.

    The motion axis S follows the stored detachment direction (or the
    start-to-end direction when absent); T and U complete a right-handed
    frame with U leaning toward the scene vertical.  Goals are the end
    configuration expressed in this frame relative to the start; visual
    features come from the scene's geometry oracle, optionally noised.
    """
    spec = lookup(model.task)
    start = vec(start_position)
    if model.edc_position is None:
        raise TaskParseError(f"{model.task}: task model needs an EDC position")
    if model.dtd is not None:
        s_dir = model.dtd
    else:
        travel = model.edc_position - start
        if np.linalg.norm(travel) < 1e-9:
            raise TaskParseError(f"{model.task}: no DTD and EDC equals the start pose")
        s_dir = normalize(travel)

    pref = scene.vertical
    residual = pref - np.dot(pref, s_dir) * s_dir
    if np.linalg.norm(residual) < 1e-6:
        warnings.warn(f"{model.task}: DTD parallel to vertical; using fallback frame axis",
                      stacklevel=2)
    axes = frame_from_motion(s_dir, pref)
    s, t, u = axes

    goals = {}
    hinge_point = hinge_axis = None
    tolerance = DEFAULT_GOAL_TOLERANCE
    if spec.rotational:
        if scene.door is None:
            raise SequencingError(f"{model.task}: scene has no hinge")
        hinge_point = scene.door.hinge_point
        hinge_axis = scene.door.axis
        rel_start = start - hinge_point
        rel_goal = model.edc_position - hinge_point
        planar = lambda v: v - np.dot(v, hinge_axis) * hinge_axis
        a, b = planar(rel_start), planar(rel_goal)
        angle = float(np.arctan2(np.dot(np.cross(a, b), hinge_axis), np.dot(a, b)))
        goals[Axis.S] = angle
        goals[Axis.T] = 0.0
        goals[Axis.U] = 0.0
        tolerance = DEFAULT_ANGULAR_GOAL_TOLERANCE
    else:
        rel = model.edc_position - start
        goals[Axis.S] = float(np.dot(rel, s))
        goals[Axis.T] = float(np.dot(rel, t))
        goals[Axis.U] = float(np.dot(rel, u))

    features = {}
    if scene.features:
        key = sorted(scene.features)[0]
        point = vec(scene.features[key])
        if feature_noise > 0.0:
            rng = rng or np.random.default_rng(0)
            point = point + rng.normal(0.0, feature_noise, size=3)
        rel = point - start
        features[Axis.T] = float(np.dot(rel, t))
        features[Axis.U] = float(np.dot(rel, u))

    return SkillParameters(
        axes=axes, goals=goals, thresholds=dict(DEFAULT_THRESHOLDS),
        features=features, goal_tolerance=tolerance,
        initial_direction=s_dir, hinge_point=hinge_point, hinge_axis=hinge_axis,
    )


def execute_sequence(
    sequence,
    env: ContactEnv,
    carrier=None,
    controllers: Optional[dict] = None,
    horizon: int = 400,
    check_states: bool = True,
) -> list:
    """Run the manipulation skills of a sequence in order.

    Each skill starts from the previous achieved end pose; the sequence
    aborts on the first non-success trace.  Grasp/release markers toggle
    the environment's object-attached flag without moving anything.
    """
    models = sequence if isinstance(sequence, list) else parse_task_sequence(sequence)
    carrier = carrier or IdentityCarrier()
    controllers = controllers or {}
    traces = []
    for model in models:
        if model.is_marker:
            env.set_attached(model.task != RELEASE_MARKER)
            continue
        spec = lookup(model.task)
        if check_states:
            kind = MotionKind.ROTATION if spec.rotational else MotionKind.TRANSLATION
            center = scene_center(env) if spec.rotational else None
            state, _ = classify(env.contact_set_at(), kind, center)
            if state is not spec.from_state:
                raise SequencingError(
                    f"{spec.name} expects start state {spec.from_state.value}, "
                    f"environment classifies {state.value}")
        start = env.obj.world_grasp_center()
        params = bind_parameters(model, env.scene, start)
        controller = controllers.get(spec.name) or analytic_controller(family_of(spec))
        trace = run_skill(spec, controller, env, params, horizon=horizon,
                          carrier=carrier, check_state=False)
        traces.append(trace)
        if not trace.success:
            break
    return traces


def scene_center(env: ContactEnv):
    return env.scene.door.hinge_point if env.scene.door is not None else env.scene.center


def write_sequence_outputs(traces, out_dir) -> dict:
    """One trace CSV per executed skill plus a summary JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for i, trace in enumerate(traces):
        name = f"{i:02d}_{trace.skill}.csv"
        trace.write_csv(out / name)
        entry = trace.summary()
        entry["trace_file"] = name
        summary.append(entry)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return {"traces": len(traces), "dir": str(out)}
