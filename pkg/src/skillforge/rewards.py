"""Reward-program compilation for contact-transition skills.

Skills are assembled from twelve condition primitives: three for the
motion axis S (goal reaching, drag onset, drag release) and nine for
each orthogonal axis (combinations of keeping/gaining/losing contact,
walls, and visually guided approaches).  Each skill in the registry
names one S-primitive and two orthogonal primitives; composing their
condition fragments yields the skill's executable reward program.

Programs have OR semantics over penalty conditions and AND semantics
over reward conditions.  Skills whose orthogonal contact situation
changes mid-motion carry a staged program: a latched AfterTransition
flag switches the active penalty set once the transition event is
observed.

Programs and specs are immutable; `evaluate` is pure.  The transition
latch lives in a per-episode `EvaluationContext` owned by one executor.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .cones import StateClass


class Axis(Enum):
    S = "S"
    T = "T"
    U = "U"


class ForceSense(Enum):
    OPPOSING = "-"   # drag opposing motion along the axis
    ALONG = "+"      # drag pushing along the axis


class ThresholdRef(Enum):
    ZERO = "delta-zero"            # contact onset / release threshold
    COLLISION = "delta-collision"  # excessive drag threshold
    GAP = "delta-gap"              # visual feature misalignment threshold


class AtomKind(Enum):
    FORCE_ABOVE = "force-above"
    FORCE_BELOW = "force-below"
    FEATURE_GAP_ABOVE = "feature-gap-above"
    AT_GOAL = "at-goal"


_AXIS_ORDER = {Axis.S: 0, Axis.T: 1, Axis.U: 2}
_KIND_ORDER = {
    AtomKind.FORCE_ABOVE: 0,
    AtomKind.FORCE_BELOW: 1,
    AtomKind.FEATURE_GAP_ABOVE: 2,
    AtomKind.AT_GOAL: 3,
}


class CompositionError(ValueError):
    """Raised on invalid role assignments or conflicting overrides."""


class EvaluationError(ValueError):
    """Raised when an observation lacks a symbol a program references."""


@dataclass(frozen=True)
class ConditionAtom:
    """A single testable condition over one axis.

    Force atoms compare a drag-force component against a named
    threshold; goal atoms test arrival at the demonstrated coordinate;
    feature atoms test visual alignment before a contact transition.
    """

    kind: AtomKind
    axis: Axis
    sense: Optional[ForceSense] = None
    threshold: Optional[ThresholdRef] = None

    def __post_init__(self):
        if self.kind is AtomKind.AT_GOAL:
            if self.sense is not None or self.threshold is not None:
                raise CompositionError("goal atoms carry no force sense or threshold")
        elif self.kind is AtomKind.FEATURE_GAP_ABOVE:
            if self.sense is not None or self.threshold is not ThresholdRef.GAP:
                raise CompositionError("feature atoms compare against delta-gap only")
        else:
            if self.sense is None or self.threshold is None:
                raise CompositionError("force atoms need a sense and a threshold")

    @property
    def sort_key(self):
        return (_AXIS_ORDER[self.axis], _KIND_ORDER[self.kind],
                self.sense.value if self.sense else "",
                self.threshold.value if self.threshold else "")

    def __str__(self) -> str:
        a = self.axis.value.lower()
        if self.kind is AtomKind.AT_GOAL:
            return f"{self.axis.value} = goal-{a}"
        if self.kind is AtomKind.FEATURE_GAP_ABOVE:
            return f"|{self.axis.value} - feature-{a}| > delta-gap"
        force = f"F{self.sense.value}{a}"
        op = ">" if self.kind is AtomKind.FORCE_ABOVE else "<"
        return f"{force} {op} {self.threshold.value}"


def force_above(axis: Axis, sense: ForceSense, ref: ThresholdRef) -> ConditionAtom:
    return ConditionAtom(AtomKind.FORCE_ABOVE, axis, sense, ref)


def force_below(axis: Axis, sense: ForceSense, ref: ThresholdRef) -> ConditionAtom:
    return ConditionAtom(AtomKind.FORCE_BELOW, axis, sense, ref)


def at_goal(axis: Axis) -> ConditionAtom:
    return ConditionAtom(AtomKind.AT_GOAL, axis)


def feature_gap_above(axis: Axis) -> ConditionAtom:
    return ConditionAtom(AtomKind.FEATURE_GAP_ABOVE, axis, threshold=ThresholdRef.GAP)


@dataclass(frozen=True)
class RewardProgram:
    """Compiled condition sets of one skill.

    pre_penalties / post_penalties apply with OR logic before / after
    the transition; unstaged programs keep the two sets equal.  The
    reward set applies with AND logic and doubles as the success
    termination condition; for staged programs it is only armed after
    the transition.
    """

    pre_penalties: frozenset
    post_penalties: frozenset
    reward: frozenset
    staged: bool

    def __post_init__(self):
        object.__setattr__(self, "pre_penalties", frozenset(self.pre_penalties))
        object.__setattr__(self, "post_penalties", frozenset(self.post_penalties))
        object.__setattr__(self, "reward", frozenset(self.reward))
        if not self.staged and self.pre_penalties != self.post_penalties:
            raise CompositionError("unstaged programs must have equal pre/post penalty sets")
        for atom in self.post_penalties | self.reward:
            if atom.kind is AtomKind.FEATURE_GAP_ABOVE and atom not in self.pre_penalties:
                raise CompositionError("feature atoms are only valid pre-transition")

    def canonical(self) -> tuple:
        """Order-independent structural identity."""
        return (
            tuple(sorted(self.pre_penalties, key=lambda a: a.sort_key)),
            tuple(sorted(self.post_penalties, key=lambda a: a.sort_key)),
            tuple(sorted(self.reward, key=lambda a: a.sort_key)),
            self.staged,
        )


@dataclass(frozen=True)
class ProgramFragment:
    """Per-primitive condition contribution before composition."""

    pre_penalties: frozenset = frozenset()
    post_penalties: frozenset = frozenset()
    reward: frozenset = frozenset()
    staged: bool = False


class Primitive(Enum):
    # motion-axis primitives
    A1 = "A1"  # free travel: position goal only
    A2 = "A2"  # contact onset terminates
    A3 = "A3"  # drag release plus position goal terminate
    # orthogonal-axis primitives
    B1 = "B1"  # free: position goal only
    B2 = "B2"  # hold sliding contact inside the drag band
    B3 = "B3"  # wall: cap the drag
    B4 = "B4"  # visually approach, then hold sliding contact
    B5 = "B5"  # hold sliding contact, then free position goal
    B6 = "B6"  # hold contact until it becomes a wall
    B7 = "B7"  # hold contact while the wall opens into sliding contact
    B8 = "B8"  # wall vanishes: cap drag, then release plus goal
    B9 = "B9"  # visually approach, then cap the drag

    @property
    def is_motion_primitive(self) -> bool:
        return self.value.startswith("A")


def primitive_conditions(prim: Primitive, axis: Axis) -> ProgramFragment:
    """Condition fragment of one primitive applied to one axis.

    A-primitives are only valid on the motion axis S, B-primitives only
    on the orthogonal axes T and U.
    """
    prim = Primitive(prim)
    axis = Axis(axis)
    if prim.is_motion_primitive != (axis is Axis.S):
        raise CompositionError(f"{prim.value} cannot be used on axis {axis.value}")

    fa = lambda ref: force_above(axis, ForceSense.OPPOSING, ref)
    fb = lambda ref: force_below(axis, ForceSense.OPPOSING, ref)
    band = frozenset({fa(ThresholdRef.COLLISION), fb(ThresholdRef.ZERO)})

    if prim is Primitive.A1:
        return ProgramFragment(reward=frozenset({at_goal(axis)}))
    if prim is Primitive.A2:
        return ProgramFragment(reward=frozenset({fa(ThresholdRef.ZERO)}))
    if prim is Primitive.A3:
        release = force_below(axis, ForceSense.ALONG, ThresholdRef.ZERO)
        return ProgramFragment(reward=frozenset({release, at_goal(axis)}))
    if prim is Primitive.B1:
        return ProgramFragment(reward=frozenset({at_goal(axis)}))
    if prim is Primitive.B2:
        return ProgramFragment(pre_penalties=band, post_penalties=band)
    if prim is Primitive.B3:
        wall = frozenset({fa(ThresholdRef.COLLISION)})
        return ProgramFragment(pre_penalties=wall, post_penalties=wall)
    if prim is Primitive.B4:
        return ProgramFragment(
            pre_penalties=frozenset({feature_gap_above(axis)}),
            post_penalties=band, staged=True)
    if prim is Primitive.B5:
        return ProgramFragment(
            pre_penalties=band,
            reward=frozenset({fb(ThresholdRef.ZERO), at_goal(axis)}),
            staged=True)
    if prim in (Primitive.B6, Primitive.B7):
        return ProgramFragment(pre_penalties=band, post_penalties=band)
    if prim is Primitive.B8:
        wall = frozenset({fa(ThresholdRef.COLLISION)})
        return ProgramFragment(
            pre_penalties=wall, post_penalties=wall,
            reward=frozenset({fb(ThresholdRef.ZERO), at_goal(axis)}))
    if prim is Primitive.B9:
        return ProgramFragment(
            pre_penalties=frozenset({feature_gap_above(axis)}),
            post_penalties=frozenset({fa(ThresholdRef.COLLISION)}),
            staged=True)
    raise CompositionError(f"unknown primitive {prim}")  # pragma: no cover


@dataclass(frozen=True)
class ProgramPatch:
    """Explicit edit applied after composition (for printed-program
    deviations or user experiments)."""

    add_pre: frozenset = frozenset()
    remove_pre: frozenset = frozenset()
    add_post: frozenset = frozenset()
    remove_post: frozenset = frozenset()
    add_reward: frozenset = frozenset()
    remove_reward: frozenset = frozenset()

    def apply(self, program: RewardProgram) -> RewardProgram:
        def edit(current, add, remove, label):
            if add & remove:
                raise CompositionError(f"conflicting override on {label}: {add & remove}")
            missing = remove - current
            if missing:
                raise CompositionError(f"override removes absent atoms from {label}: {missing}")
            return (current - remove) | add

        return RewardProgram(
            pre_penalties=edit(program.pre_penalties, self.add_pre, self.remove_pre, "pre"),
            post_penalties=edit(program.post_penalties, self.add_post, self.remove_post, "post"),
            reward=edit(program.reward, self.add_reward, self.remove_reward, "reward"),
            staged=program.staged,
        )


@dataclass(frozen=True)
class SkillSpec:
    """Registry entry: state pair plus the axis-role tuple that compiles
    into the skill's reward program."""

    name: str
    from_state: StateClass
    to_state: StateClass
    roles: tuple  # ((Axis.S, Primitive), (Axis.T, Primitive), (Axis.U, Primitive))
    task_label: Optional[str] = None
    task_name: Optional[str] = None
    rotational: bool = False
    overrides: Optional[ProgramPatch] = None

    def __post_init__(self):
        roles = tuple(sorted(((Axis(a), Primitive(p)) for a, p in dict(self.roles).items()),
                             key=lambda ap: _AXIS_ORDER[ap[0]]))
        if [a for a, _ in roles] != [Axis.S, Axis.T, Axis.U]:
            raise CompositionError(f"{self.name}: roles must cover exactly S, T, U")
        for axis, prim in roles:
            if prim.is_motion_primitive != (axis is Axis.S):
                raise CompositionError(
                    f"{self.name}: {prim.value} is not valid on axis {axis.value}")
        object.__setattr__(self, "roles", roles)

    @property
    def role_map(self) -> dict:
        return dict(self.roles)


def compose(spec: SkillSpec) -> RewardProgram:
    """Compile a skill's reward program from its axis-role tuple.

    Penalty fragments union with OR semantics, reward atoms with AND
    semantics; unstaged fragments contribute their penalties to both
    stages of a staged program.  Overrides, when present, are applied
    last.
    """
    fragments = [primitive_conditions(prim, axis) for axis, prim in spec.roles]
    staged = any(f.staged for f in fragments)
    pre, post, reward = set(), set(), set()
    for frag in fragments:
        pre |= frag.pre_penalties
        post |= frag.post_penalties
        reward |= frag.reward
    program = RewardProgram(frozenset(pre), frozenset(post), frozenset(reward), staged)
    if spec.overrides is not None:
        program = spec.overrides.apply(program)
    if not program.reward:
        raise CompositionError(f"{spec.name}: compiled program has an empty reward set")
    return program


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

def _entry(name, frm, to, s, t, u, label=None, task=None, rotational=False):
    return SkillSpec(
        name=name,
        from_state=StateClass[frm],
        to_state=StateClass[to],
        roles={Axis.S: Primitive[s], Axis.T: Primitive[t], Axis.U: Primitive[u]},
        task_label=label,
        task_name=task,
        rotational=rotational,
    )


_REGISTRY: tuple = (
    # interstate, translational
    _entry("PC-NC-a", "PC1", "NC", "A3", "B1", "B1", "PTG11", "Pick"),
    _entry("PC-NC-b", "PC1", "NC", "A1", "B1", "B5"),
    _entry("NC-PC-a", "NC", "PC1", "A2", "B1", "B1", "PTG13", "Place"),
    _entry("NC-PC-b", "NC", "PC1", "A1", "B1", "B4"),
    _entry("TR-NC", "TR", "NC", "A1", "B1", "B8"),
    _entry("NC-TR", "NC", "TR", "A1", "B1", "B9"),
    _entry("TR-PC", "TR", "PC1", "A1", "B1", "B7"),
    _entry("PC-TR", "PC1", "TR", "A1", "B1", "B6"),
    _entry("PR-NC", "PR", "NC", "A1", "B8", "B8"),
    _entry("NC-PR", "NC", "PR", "A1", "B9", "B9"),
    _entry("PR-PC", "PR", "PC1", "A1", "B8", "B7"),
    _entry("PC-PR", "PC1", "PR", "A1", "B6", "B9"),
    _entry("PR-TR", "PR", "TR", "A1", "B8", "B3"),
    _entry("TR-PR", "TR", "PR", "A1", "B9", "B3"),
    _entry("PR-OT", "PR", "OT1", "A1", "B3", "B7"),
    _entry("OT-PR", "OT1", "PR", "A1", "B3", "B6"),
    _entry("OP-PR", "OP", "PR", "A3", "B3", "B3", "PTG31", "Drawer-open"),
    _entry("PR-OP", "PR", "OP", "A2", "B3", "B3", "PTG33", "Drawer-close"),
    _entry("OT-NC", "OT1", "NC", "A1", "B5", "B8"),
    _entry("NC-OT", "NC", "OT1", "A1", "B4", "B9"),
    _entry("OT-PC-a", "OT1", "PC1", "A1", "B2", "B8"),
    _entry("OT-PC-b", "OT1", "PC1", "A1", "B5", "B7"),
    _entry("PC-OT-a", "PC1", "OT1", "A1", "B2", "B9"),
    _entry("PC-OT-b", "PC1", "OT1", "A1", "B4", "B6"),
    _entry("OT-TR-a", "OT1", "TR", "A3", "B1", "B3"),
    _entry("OT-TR-b", "OT1", "TR", "A1", "B3", "B5"),
    _entry("TR-OT-a", "TR", "OT1", "A2", "B1", "B3"),
    _entry("TR-OT-b", "TR", "OT1", "A1", "B3", "B4"),
    # intrastate, translational
    _entry("NC-NC", "NC", "NC", "A1", "B1", "B1", "PTG12", "Bring"),
    _entry("PC1-PC1", "PC1", "PC1", "A1", "B1", "B2", "STG2", "Wipe"),
    _entry("PC1-PC2", "PC1", "PC2", "A2", "B1", "B2"),
    _entry("PC2-PC1", "PC2", "PC1", "A3", "B1", "B2"),
    _entry("PC2-PC2", "PC2", "PC2", "A1", "B2", "B2"),
    _entry("PC2-PCN", "PC2", "PCN", "A2", "B2", "B2"),
    _entry("PCN-PC2", "PCN", "PC2", "A3", "B2", "B2"),
    _entry("TR-TR", "TR", "TR", "A1", "B1", "B3"),
    _entry("OT1-OT1", "OT1", "OT1", "A1", "B2", "B3"),
    _entry("OT1-OT2", "OT1", "OT2", "A2", "B2", "B3"),
    _entry("OT2-OT1", "OT2", "OT1", "A3", "B2", "B3"),
    _entry("PR-PR", "PR", "PR", "A1", "B3", "B3", "PTG32", "Drawer-adjust"),
    # rotational
    _entry("OR-RV", "OR", "RV", "A3", "B3", "B3", "PTG51", "Door-open", rotational=True),
    _entry("RV-OR", "RV", "OR", "A2", "B3", "B3", "PTG53", "Door-close", rotational=True),
    _entry("RV-RV", "RV", "RV", "A1", "B3", "B3", "PTG52", "Door-adjust", rotational=True),
)

_BY_NAME = {spec.name: spec for spec in _REGISTRY}


def registry() -> tuple:
    """All built-in skill specs, in canonical order."""
    return _REGISTRY


def lookup(name: str) -> SkillSpec:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise KeyError(f"unknown skill {name!r}; known: {', '.join(_BY_NAME)}") from None


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

# tolerance for "= goal" atoms; exact equality is unattainable numerically
DEFAULT_GOAL_TOLERANCE = 1e-3          # 1 mm for translational coordinates
DEFAULT_ANGULAR_GOAL_TOLERANCE = 0.5 * 3.141592653589793 / 180.0  # 0.5 deg

DEFAULT_THRESHOLDS = {
    ThresholdRef.ZERO: 3.0,        # N; contact onset
    ThresholdRef.COLLISION: 30.0,  # N; excessive drag
    ThresholdRef.GAP: 5e-3,        # m; visual misalignment
}


@dataclass(frozen=True)
class Observation:
    """One snapshot of the quantities a reward program may reference.

    Positions are coordinates along the skill frame axes (radians for
    the rotational motion axis); forces are nonnegative drag magnitudes
    split by sense.  All thresholds and goals a program references must
    be present before evaluation.
    """

    positions: Mapping
    opposing: Mapping
    along: Mapping
    goals: Mapping
    thresholds: Mapping
    features: Mapping = field(default_factory=dict)
    after_transition: bool = True
    goal_tolerance: float = DEFAULT_GOAL_TOLERANCE

    def force(self, axis: Axis, sense: ForceSense) -> float:
        table = self.opposing if sense is ForceSense.OPPOSING else self.along
        try:
            return float(table[axis])
        except KeyError:
            raise EvaluationError(f"observation lacks F{sense.value}{axis.value.lower()}")


def atom_holds(atom: ConditionAtom, obs: Observation) -> bool:
    """Truth value of one condition atom under an observation."""
    if atom.kind is AtomKind.AT_GOAL:
        try:
            pos = obs.positions[atom.axis]
            goal = obs.goals[atom.axis]
        except KeyError:
            raise EvaluationError(f"observation lacks goal or position for {atom.axis.value}")
        return abs(pos - goal) <= obs.goal_tolerance
    if atom.kind is AtomKind.FEATURE_GAP_ABOVE:
        if atom.axis not in obs.features or obs.features[atom.axis] is None:
            raise EvaluationError(f"observation lacks feature-{atom.axis.value.lower()}")
        gap = abs(obs.positions[atom.axis] - obs.features[atom.axis])
        return gap > obs.thresholds[ThresholdRef.GAP]
    value = obs.force(atom.axis, atom.sense)
    limit = obs.thresholds[atom.threshold]
    if atom.kind is AtomKind.FORCE_ABOVE:
        return value > limit
    return value < limit


@dataclass(frozen=True)
class EvalResult:
    penalty: bool
    reward: bool
    terminate: Optional[str]  # "success" | "failure" | None


def evaluate(program: RewardProgram, obs: Observation) -> EvalResult:
    """Evaluate a program against one observation.

    Penalty holds iff any active-stage penalty atom holds; reward holds
    iff every reward atom holds (staged programs arm the reward only
    after the transition).  Penalty terminates the episode as a failure
    (harness policy), reward as a success; penalty wins on a tie.
    """
    active = program.post_penalties if obs.after_transition else program.pre_penalties
    penalty = any(atom_holds(a, obs) for a in active)
    armed = obs.after_transition or not program.staged
    reward = armed and all(atom_holds(a, obs) for a in program.reward)
    terminate = "failure" if penalty else ("success" if reward else None)
    return EvalResult(penalty=penalty, reward=reward, terminate=terminate)


def staging_rule(program: RewardProgram) -> dict:
    """Which axes drive the transition latch, and in which direction.

    Axes with a visual-feature pre-condition stage on contact onset
    (opposing force rising above delta-zero); axes whose force penalties
    vanish after the transition stage on contact release (opposing force
    falling below delta-zero).
    """
    onset, release = [], []
    for axis in Axis:
        pre = {a for a in program.pre_penalties if a.axis is axis}
        post = {a for a in program.post_penalties if a.axis is axis}
        if any(a.kind is AtomKind.FEATURE_GAP_ABOVE for a in pre):
            onset.append(axis)
        elif pre and not post and all(a.kind in (AtomKind.FORCE_ABOVE, AtomKind.FORCE_BELOW)
                                      for a in pre):
            release.append(axis)
    return {"onset": tuple(onset), "release": tuple(release)}


class EvaluationContext:
    """Per-episode latch for the AfterTransition flag.

    The flag starts false for staged programs, flips once when the
    staged event is first observed, and never un-flips.  Unstaged
    programs always report the post stage.
    """

    def __init__(self, program: RewardProgram):
        self.program = program
        self.after_transition = not program.staged
        self._rule = staging_rule(program)

    def update(self, obs: Observation) -> bool:
        """Latch on the current forces; returns the (possibly new) flag."""
        if self.after_transition:
            return True
        zero = obs.thresholds[ThresholdRef.ZERO]
        fired = any(obs.force(axis, ForceSense.OPPOSING) > zero
                    for axis in self._rule["onset"])
        fired = fired or any(obs.force(axis, ForceSense.OPPOSING) < zero
                             for axis in self._rule["release"])
        if fired:
            self.after_transition = True
        return self.after_transition


def detect_transition(program: RewardProgram, obs_history: Iterable[Observation]) -> bool:
    """Replay a history through the transition latch; monotone in the
    history (once flipped, stays flipped)."""
    ctx = EvaluationContext(program)
    for obs in obs_history:
        ctx.update(obs)
    return ctx.after_transition


# ---------------------------------------------------------------------------
# Pseudocode printing and parsing
# ---------------------------------------------------------------------------

def _penalty_lines(atoms, indent: str) -> list:
    return [f"{indent}if {atom}, then penalty"
            for atom in sorted(atoms, key=lambda a: a.sort_key)]


def _reward_line(atoms, indent: str) -> str:
    conj = " AND ".join(str(a) for a in sorted(atoms, key=lambda a: a.sort_key))
    return f"{indent}if {conj}, then reward"


def format_program(program: RewardProgram, header: Optional[str] = None) -> str:
    """Render a program in the registry's pseudocode syntax."""
    lines = [header] if header else []
    shared = program.pre_penalties & program.post_penalties
    lines += _penalty_lines(shared, "")
    if program.staged:
        lines.append("if NOT(AfterTransition):")
        lines += _penalty_lines(program.pre_penalties - shared, "  ")
        lines.append("else:")
        lines += _penalty_lines(program.post_penalties - shared, "  ")
        lines.append(_reward_line(program.reward, "  "))
    else:
        lines.append(_reward_line(program.reward, ""))
    return "\n".join(lines) + "\n"


def format_skill(spec: SkillSpec) -> str:
    """Render a registry skill with its header line."""
    header = f"Reward {spec.name}"
    if spec.task_label:
        header += f" ({spec.task_label} ({spec.task_name}) task)"
    return format_program(compose(spec), header=header)


_ATOM_RES = [
    (re.compile(r"^F(?P<sense>[-+])(?P<axis>[stu]) (?P<op>[<>]) (?P<ref>delta-(?:zero|collision))$"),
     "force"),
    (re.compile(r"^(?P<axis>[STU]) = goal-(?P<goal>[stu])$"), "goal"),
    (re.compile(r"^\|(?P<axis>[STU]) - feature-(?P<feat>[stu])\| > delta-gap$"), "feature"),
]


class FixtureParseError(ValueError):
    pass


def parse_atom(text: str) -> ConditionAtom:
    text = " ".join(text.split())
    for regex, which in _ATOM_RES:
        m = regex.match(text)
        if not m:
            continue
        if which == "force":
            axis = Axis[m.group("axis").upper()]
            sense = ForceSense.OPPOSING if m.group("sense") == "-" else ForceSense.ALONG
            ref = ThresholdRef(m.group("ref"))
            kind = AtomKind.FORCE_ABOVE if m.group("op") == ">" else AtomKind.FORCE_BELOW
            return ConditionAtom(kind, axis, sense, ref)
        if which == "goal":
            axis = Axis[m.group("axis")]
            if m.group("goal").upper() != axis.value:
                raise FixtureParseError(f"mismatched goal axis in {text!r}")
            return at_goal(axis)
        axis = Axis[m.group("axis")]
        if m.group("feat").upper() != axis.value:
            raise FixtureParseError(f"mismatched feature axis in {text!r}")
        return feature_gap_above(axis)
    raise FixtureParseError(f"cannot parse condition {text!r}")


_STMT_RE = re.compile(r"^if (?P<cond>.+), then (?P<outcome>penalty|reward)$")


def parse_program(text: str) -> tuple[RewardProgram, Optional[str]]:
    """Parse pseudocode text back into a canonical RewardProgram.

    Accepts both the block style (`if NOT(AfterTransition):` / `else:`)
    and the inline-guard style (`if AfterTransition AND ...`).  Returns
    the program and the header name when a `Reward <name> ...` line is
    present.
    """
    name = None
    staged = False
    pre, post, shared, reward = set(), set(), set(), set()
    block = None  # None | "pre" | "post"

    for raw in text.splitlines():
        line = raw.rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("Reward "):
            name = stripped.split()[1]
            continue
        if stripped == "if NOT(AfterTransition):":
            staged = True
            block = "pre"
            continue
        if stripped == "else:":
            block = "post"
            continue
        indented = line[0].isspace()
        m = _STMT_RE.match(stripped)
        if not m:
            raise FixtureParseError(f"cannot parse line {raw!r}")
        cond, outcome = m.group("cond"), m.group("outcome")

        target_block = block if indented and block else None
        if cond.startswith("NOT(AfterTransition) AND "):
            staged = True
            target_block = "pre"
            cond = cond[len("NOT(AfterTransition) AND "):]
        elif cond.startswith("AfterTransition AND "):
            staged = True
            target_block = "post"
            cond = cond[len("AfterTransition AND "):]

        atoms = {parse_atom(part) for part in cond.split(" AND ")}
        if outcome == "reward":
            reward |= atoms
        elif target_block == "pre":
            pre |= atoms
        elif target_block == "post":
            post |= atoms
        else:
            shared |= atoms

    if not staged:
        return RewardProgram(frozenset(shared), frozenset(shared),
                             frozenset(reward), False), name
    return RewardProgram(frozenset(pre | shared), frozenset(post | shared),
                         frozenset(reward), True), name
