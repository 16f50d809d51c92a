"""Skill controllers and the episode runner.

Four controller families cover the registry:

  reach       straight-line travel; the compiled program decides when to
              stop (free moves, pick, place, and their relatives)
  direction   feedback on an estimated feasible direction; lateral drag
              steers the estimate (drawer family and other double-wall
              slides)
  rotation    the direction family plus co-rotation of the hand about
              the grasp center as the estimate turns (door family)
  force-hold  regulation of the contact-normal force toward a target
              while sliding (wipe)

The runner owns its environment exclusively for the episode; policies
and parameters are immutable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .cones import MotionKind, classify
from .geometry import (
    normalize,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    rotation_between,
    vec,
)
from .rewards import (
    Axis,
    DEFAULT_THRESHOLDS,
    EvaluationContext,
    ForceSense,
    Observation,
    RewardProgram,
    SkillSpec,
    ThresholdRef,
    compose,
    evaluate,
)
from .simulation import ContactEnv, ForceReading, SimulationBlowupError
from .simulation import sense as force_sense

ACTION_CAP = 0.5  # max |direction correction| per step; unbounded updates chatter


class SkillStateError(RuntimeError):
    """The environment's contact state does not match the skill's start state."""


class DegenerateUpdateError(ValueError):
    """Direction update produced a zero vector."""


class SkillFamily(Enum):
    REACH = "reach"
    DIRECTION = "direction"
    ROTATION = "rotation"
    FORCE_HOLD = "force-hold"


def family_of(spec: SkillSpec) -> SkillFamily:
    if spec.rotational:
        return SkillFamily.ROTATION
    if spec.name == "PC1-PC1":
        return SkillFamily.FORCE_HOLD
    roles = spec.role_map
    if roles[Axis.T].value == "B3" and roles[Axis.U].value == "B3":
        return SkillFamily.DIRECTION
    return SkillFamily.REACH


# ---------------------------------------------------------------------------
# Core update rules
# ---------------------------------------------------------------------------

def direction_update(c_t, delta_c) -> np.ndarray:
    """Fold a correction into the unit direction estimate:
    (c + dc) / |c + dc|."""
    c_t = vec(c_t)
    delta_c = vec(delta_c)
    summed = c_t + delta_c
    if np.linalg.norm(summed) < 1e-9:
        raise DegenerateUpdateError("direction correction cancels the estimate")
    return summed / np.linalg.norm(summed)


def prpr_reward(f) -> float:
    """Step reward for direction-holding skills: minus the drag magnitude."""
    return -float(np.linalg.norm(vec(f)))


def rvrv_corotate(position, orientation, old_direction, new_direction, grasp_center):
    """Rotate the hand pose with a direction correction.

    The pose turns by the angle between the old and new motion
    directions, about the axis perpendicular to their plane, centered on
    the grasp center (which therefore does not move).
    """
    q = rotation_between(old_direction, new_direction)
    gc = vec(grasp_center)
    new_position = gc + quat_rotate(q, vec(position) - gc)
    new_orientation = quat_normalize(quat_multiply(q, orientation))
    return new_position, new_orientation, q


def pc1pc1_target_force(f0, n, f_c: float) -> np.ndarray:
    """Target sensor force for normal-force regulation: the baseline with
    its normal component replaced by f_c."""
    f0 = vec(f0)
    n = vec(n)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError("surface normal must be unit length")
    return f0 + (f_c - float(np.dot(f0, n))) * n


def pc1pc1_reward(f_desc: int, detached: bool, f_max: int) -> float:
    """Piecewise wipe reward over the discretized distance from the target
    force: a flat penalty beyond f_max quanta or on detachment, otherwise
    linearly decreasing from f_max/2."""
    if f_max <= 0:
        raise ValueError("f_max must be positive")
    if f_desc > f_max or detached:
        return -float(f_max)
    return f_max / 2.0 - float(f_desc)


# ---------------------------------------------------------------------------
# Agent state / action
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionState:
    """Direction-family observation: the current estimate and the unit
    force direction.  f_raw (Newtons, baseline-relative) is harness-side
    extra for analytic control; policies see only (c_t, f_n)."""

    c_t: np.ndarray
    f_n: np.ndarray
    f_raw: np.ndarray

    def encode(self) -> np.ndarray:
        return np.concatenate([self.c_t, self.f_n, [1.0]])


@dataclass(frozen=True)
class WipeState:
    """Force-hold observation: surface normal, target slide direction,
    unit force error, and its coarse magnitude."""

    normal: np.ndarray
    delta_d: np.ndarray
    f_n: np.ndarray
    f_desc: int
    f_raw: np.ndarray

    def encode(self) -> np.ndarray:
        return np.concatenate([self.normal, self.delta_d, self.f_n,
                               [float(self.f_desc)], [1.0]])


@dataclass(frozen=True)
class DirectionCorrection:
    delta_c: np.ndarray

    def __post_init__(self):
        d = vec(self.delta_c)
        n = np.linalg.norm(d)
        if n > ACTION_CAP:
            d = d * (ACTION_CAP / n)
        object.__setattr__(self, "delta_c", d)


@dataclass(frozen=True)
class NormalCorrection:
    d_n: float
    limit: float = 0.005

    def __post_init__(self):
        object.__setattr__(self, "d_n", float(np.clip(self.d_n, -self.limit, self.limit)))


def analytic_controller(family: SkillFamily, gains: Optional[dict] = None) -> Callable:
    """Non-learned baseline controller obeying each family's control rule.

    direction/rotation: steer the estimate along the lateral drag
    (the push-back felt on the object points out of the wall being
    grazed, which is exactly the way the estimate should lean).
    force-hold: displace along the surface normal in proportion to the
    normal-force error; positive error (pressing too hard) backs off.
    """
    gains = dict(gains or {})
    for g in gains.values():
        if not np.isfinite(g):
            raise ValueError("controller gains must be finite")

    if family in (SkillFamily.DIRECTION, SkillFamily.ROTATION):
        k_p = gains.get("k_p", 0.02)

        def control(state: DirectionState) -> DirectionCorrection:
            lateral = state.f_raw - np.dot(state.f_raw, state.c_t) * state.c_t
            return DirectionCorrection(k_p * lateral)

        return control

    if family is SkillFamily.FORCE_HOLD:
        k_p = gains.get("k_p", 6e-5)
        limit = gains.get("limit", 0.005)

        def control(state: WipeState) -> NormalCorrection:
            error = float(np.dot(state.f_raw, state.normal))  # current minus target, along n
            return NormalCorrection(k_p * error, limit=limit)

        return control

    def control_reach(state) -> None:  # reach family needs no feedback action
        return None

    return control_reach


# ---------------------------------------------------------------------------
# Skill parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SkillParameters:
    """Runtime goals and frame of one skill execution.

    axes = (S, T, U) world directions, orthonormal and right-handed
    (S x T = U).  Goals and features are coordinates along these axes
    relative to the start pose (radians along S for rotational skills).
    """

    axes: tuple
    goals: dict
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    features: dict = field(default_factory=dict)
    goal_tolerance: float = 1e-3
    initial_direction: Optional[np.ndarray] = None
    hinge_point: Optional[np.ndarray] = None
    hinge_axis: Optional[np.ndarray] = None
    surface_normal: Optional[np.ndarray] = None
    target_force: float = 10.0
    f_max: int = 10

    def __post_init__(self):
        s, t, u = (normalize(a) for a in self.axes)
        if not (abs(np.dot(s, t)) < 1e-6 and abs(np.dot(s, u)) < 1e-6
                and abs(np.dot(t, u)) < 1e-6):
            raise ValueError("skill frame must be orthonormal")
        if np.linalg.norm(np.cross(s, t) - u) > 1e-6:
            raise ValueError("skill frame must be right-handed (S x T = U)")
        object.__setattr__(self, "axes", (s, t, u))
        object.__setattr__(self, "goals", {Axis(k): float(v) for k, v in self.goals.items()})
        object.__setattr__(self, "features",
                           {Axis(k): float(v) for k, v in self.features.items()})
        object.__setattr__(self, "thresholds",
                           {ThresholdRef(k): float(v) for k, v in self.thresholds.items()})
        for name in ("initial_direction", "hinge_point", "hinge_axis", "surface_normal"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, vec(value))

    @property
    def axis_map(self) -> dict:
        s, t, u = self.axes
        return {Axis.S: s, Axis.T: t, Axis.U: u}


def frame_from_motion(s_dir, up_preference=(0.0, 0.0, 1.0)) -> tuple:
    """Complete a motion direction to a right-handed (S, T, U) frame with
    U leaning toward the preferred up direction.  Falls back to the world
    x axis when the motion is (anti)parallel to the preference."""
    s = normalize(s_dir)
    pref = vec(up_preference)
    residual = pref - np.dot(pref, s) * s
    if np.linalg.norm(residual) < 1e-6:
        pref = np.array([1.0, 0.0, 0.0])
        residual = pref - np.dot(pref, s) * s
        if np.linalg.norm(residual) < 1e-6:
            pref = np.array([0.0, 1.0, 0.0])
            residual = pref - np.dot(pref, s) * s
    u = normalize(residual)
    t = np.cross(u, s)
    return (s, t, u)


# ---------------------------------------------------------------------------
# Episode traces
# ---------------------------------------------------------------------------

TRACE_COLUMNS = ("step", "t", "px", "py", "pz", "qw", "qx", "qy", "qz",
                 "fx", "fy", "fz", "f_desc", "reward", "penalty", "after_transition")


@dataclass(frozen=True)
class TraceStep:
    step: int
    t: float
    position: np.ndarray       # world grasp center
    orientation: np.ndarray
    force: np.ndarray          # raw sensed force (world frame)
    f_desc: int
    reward: float
    penalty: bool
    after_transition: bool
    extra: dict = field(default_factory=dict)

    def row(self) -> list:
        return [
            self.step, f"{self.t:.6g}",
            *(f"{x:.10g}" for x in self.position),
            *(f"{x:.10g}" for x in self.orientation),
            *(f"{x:.10g}" for x in self.force),
            self.f_desc, f"{self.reward:.10g}",
            int(self.penalty), int(self.after_transition),
        ]


@dataclass
class EpisodeTrace:
    skill: str
    steps: list
    termination: str  # "success" | "penalty-failure" | "timeout"
    reason: str = ""

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a trace must contain at least one step")
        if self.termination not in ("success", "penalty-failure", "timeout"):
            raise ValueError(f"unknown termination {self.termination!r}")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def success(self) -> bool:
        return self.termination == "success"

    def max_force(self) -> float:
        return max(float(np.linalg.norm(s.force)) for s in self.steps)

    def total_reward(self) -> float:
        return sum(s.reward for s in self.steps)

    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.steps])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for s in self.steps:
                writer.writerow(s.row())

    def summary(self) -> dict:
        return {
            "skill": self.skill,
            "termination": self.termination,
            "steps": len(self.steps),
            "max_forces": {
                "total": self.max_force(),
                "per_axis": [float(np.max(np.abs([s.force[i] for s in self.steps])))
                             for i in range(3)],
            },
        }


# ---------------------------------------------------------------------------
# The runner
# ---------------------------------------------------------------------------

class IdentityCarrier:
    """Carrier that realizes every commanded hand pose exactly."""

    tolerance = 0.0

    def achieve(self, position, orientation):
        return vec(position), np.asarray(orientation, dtype=float)


class JitteryCarrier:
    """Carrier with bounded positioning noise (declared tolerance)."""

    def __init__(self, tolerance: float = 2e-4, seed: int = 0):
        self.tolerance = float(tolerance)
        self._rng = np.random.default_rng(seed)

    def achieve(self, position, orientation):
        offset = self._rng.uniform(-1.0, 1.0, size=3)
        offset *= self.tolerance / max(1.0, float(np.linalg.norm(offset)))
        return vec(position) + offset, np.asarray(orientation, dtype=float)


def _signed_angle_about(axis, reference, current) -> float:
    a = normalize(axis)
    ref = reference - np.dot(reference, a) * a
    cur = current - np.dot(current, a) * a
    if np.linalg.norm(ref) < 1e-9 or np.linalg.norm(cur) < 1e-9:
        return 0.0
    ref, cur = normalize(ref), normalize(cur)
    return float(np.arctan2(np.dot(np.cross(ref, cur), a), np.dot(ref, cur)))


class _PositionTracker:
    """Maps world poses to skill-frame coordinates (angle along S for
    rotational skills)."""

    def __init__(self, params: SkillParameters, rotational: bool, start_gc: np.ndarray):
        self.params = params
        self.rotational = rotational
        self.start = start_gc.copy()
        if rotational:
            if params.hinge_point is None or params.hinge_axis is None:
                raise ValueError("rotational skills need hinge_point and hinge_axis")
            rel = self.start - params.hinge_point
            axis = params.hinge_axis
            self.start_axial = float(np.dot(rel, axis))
            planar = rel - self.start_axial * axis
            self.start_radius = float(np.linalg.norm(planar))
            self.start_radial_dir = normalize(planar)

    def coordinates(self, gc: np.ndarray) -> dict:
        p = self.params
        if not self.rotational:
            rel = gc - self.start
            s, t, u = p.axes
            return {Axis.S: float(np.dot(rel, s)),
                    Axis.T: float(np.dot(rel, t)),
                    Axis.U: float(np.dot(rel, u))}
        axis = p.hinge_axis
        rel = gc - p.hinge_point
        axial = float(np.dot(rel, axis))
        planar = rel - axial * axis
        angle = _signed_angle_about(axis, self.start_radial_dir, planar)
        return {Axis.S: angle,
                Axis.T: float(np.linalg.norm(planar)) - self.start_radius,
                Axis.U: axial - self.start_axial}


def _force_split(g: np.ndarray, axes: dict) -> tuple[dict, dict]:
    """Split the baseline-relative force into per-axis drag magnitudes.

    The motion axis separates drag opposing the motion from drag pushing
    along it; the orthogonal axes report the unsigned lateral drag.
    """
    opposing, along = {}, {}
    for axis, direction in axes.items():
        component = float(np.dot(g, direction))
        if axis is Axis.S:
            opposing[axis] = max(0.0, -component)
            along[axis] = max(0.0, component)
        else:
            opposing[axis] = abs(component)
            along[axis] = abs(component)
    return opposing, along


def run_skill(
    spec: SkillSpec,
    controller: Callable,
    env: ContactEnv,
    params: SkillParameters,
    horizon: int = 200,
    carrier=None,
    check_state: bool = True,
    program: Optional[RewardProgram] = None,
) -> EpisodeTrace:
    """Execute one skill episode: observe, evaluate the reward program,
    terminate on success/penalty/timeout, otherwise steer and step.

    The wipe family measures forces against the target-force baseline
    (sensed at first contact, zero in this gravity-free world) and
    treats running out the clock as its success, with the bonus added to
    the final step's reward.
    """
    family = family_of(spec)
    program = program or compose(spec)
    carrier = carrier or IdentityCarrier()
    step_size = env.config.step_size

    if check_state:
        kind = MotionKind.ROTATION if spec.rotational else MotionKind.TRANSLATION
        center = params.hinge_point if spec.rotational else None
        state, _ = classify(env.contact_set_at(), kind, center)
        if state is not spec.from_state:
            raise SkillStateError(
                f"{spec.name} starts from {spec.from_state.value}, "
                f"environment classifies {state.value}")

    if family is SkillFamily.FORCE_HOLD:
        env.zero_baseline()
    else:
        env.capture_baseline()

    normal = params.surface_normal if params.surface_normal is not None else params.axes[2]
    f_target = pc1pc1_target_force(env.f0, normal, params.target_force) \
        if family is SkillFamily.FORCE_HOLD else None

    start_gc = env.obj.world_grasp_center()
    tracker = _PositionTracker(params, spec.rotational, start_gc)
    ctx = EvaluationContext(program)
    direction = normalize(params.initial_direction) \
        if params.initial_direction is not None else params.axes[0].copy()
    goal_world = start_gc + sum(params.goals.get(a, 0.0) * d
                                for a, d in params.axis_map.items()) \
        if not spec.rotational else None

    reading = env.reading()
    steps: list = []
    termination = "timeout"
    reason = ""

    for k in range(horizon):
        gc = env.obj.world_grasp_center()
        positions = tracker.coordinates(gc)
        g = reading.delta

        if spec.rotational:
            s_dir = direction
            u_dir = params.hinge_axis
            t_dir = normalize(np.cross(u_dir, s_dir))
            axes = {Axis.S: s_dir, Axis.T: t_dir, Axis.U: u_dir}
        else:
            axes = params.axis_map
        opposing, along = _force_split(g, axes)

        obs = Observation(
            positions=positions, opposing=opposing, along=along,
            goals=params.goals, thresholds=params.thresholds,
            features=params.features, after_transition=ctx.after_transition,
            goal_tolerance=params.goal_tolerance,
        )
        ctx.update(obs)
        if ctx.after_transition != obs.after_transition:
            obs = replace(obs, after_transition=True)
        result = evaluate(program, obs)

        if family is SkillFamily.FORCE_HOLD:
            f_n_err, f_desc_err = force_sense(reading.f, f_target, env.config.f_step)
            detached = not any(reading.contact_flags)
            step_reward = pc1pc1_reward(f_desc_err, detached, params.f_max)
        elif family in (SkillFamily.DIRECTION, SkillFamily.ROTATION):
            step_reward = prpr_reward(g)
        else:
            step_reward = 1.0 if result.reward else 0.0

        steps.append(TraceStep(
            step=k, t=env.time, position=gc.copy(),
            orientation=env.obj.orientation.copy(), force=reading.f.copy(),
            f_desc=reading.f_desc, reward=step_reward, penalty=result.penalty,
            after_transition=ctx.after_transition,
            extra={"direction": direction.copy()},
        ))

        if result.terminate == "success":
            termination = "success"
            break
        if result.terminate == "failure":
            termination = "penalty-failure"
            reason = "penalty condition"
            break

        try:
            if family is SkillFamily.REACH:
                to_goal = goal_world - gc
                dist = float(np.linalg.norm(to_goal))
                dpos = to_goal if dist <= step_size else to_goal * (step_size / dist)
                dq = None
            elif family is SkillFamily.DIRECTION:
                state = DirectionState(direction, reading.f_n, g)
                action = controller(state)
                direction = direction_update(direction, action.delta_c)
                dpos = step_size * direction
                dq = None
            elif family is SkillFamily.ROTATION:
                state = DirectionState(direction, reading.f_n, g)
                action = controller(state)
                new_direction = direction_update(direction, action.delta_c)
                dq = rotation_between(direction, new_direction)
                direction = new_direction
                dpos = step_size * direction
            else:  # FORCE_HOLD
                err_state = WipeState(
                    normal=normal,
                    delta_d=_slide_direction(goal_world, gc, normal, step_size),
                    f_n=f_n_err, f_desc=f_desc_err, f_raw=reading.f - f_target,
                )
                action = controller(err_state)
                slide = err_state.delta_d
                remaining = goal_world - gc
                tangential = remaining - np.dot(remaining, normal) * normal
                advance = min(step_size, float(np.linalg.norm(tangential)))
                dpos = advance * slide + action.d_n * normal
                dq = None

            target_pos = env.obj.position + dpos
            target_q = env.obj.orientation
            achieved_pos, achieved_q = carrier.achieve(target_pos, target_q)
            reading = env.step(achieved_pos - env.obj.position, dq)
        except (SimulationBlowupError, DegenerateUpdateError) as exc:
            termination = "penalty-failure"
            reason = f"{type(exc).__name__}: {exc}"
            break
    else:
        termination = "timeout"

    if family is SkillFamily.FORCE_HOLD and termination == "timeout":
        # running out the clock is the wipe's success; bonus lands on the last step
        last = steps[-1]
        steps[-1] = replace(last, reward=last.reward + params.f_max / 2.0)

    return EpisodeTrace(skill=spec.name, steps=steps, termination=termination,
                        reason=reason)


def _slide_direction(goal_world, gc, normal, step_size) -> np.ndarray:
    remaining = goal_world - gc
    tangential = remaining - np.dot(remaining, normal) * normal
    dist = float(np.linalg.norm(tangential))
    if dist < 1e-12:
        return np.zeros(3)
    return tangential / dist
