"""Hardware-agnostic manipulation skill toolkit: contact-state
classification via motion-feasibility cones, compiled reward programs
for contact-transition skills, and force-feedback skill agents running
in a quasi-static contact simulator."""

from .cones import (
    ContactPoint,
    ContactSet,
    DofProfile,
    DState,
    FeasibleCone,
    MotionKind,
    MotionSpec,
    StateClass,
    classify,
    dof_profile,
    dstate_of_direction,
    feasible_cone,
    oracle_classify_sampled,
    rotation_effective_normals,
    screw_lhs,
)
from .rewards import (
    Axis,
    ConditionAtom,
    Observation,
    RewardProgram,
    SkillSpec,
    ThresholdRef,
    compose,
    detect_transition,
    evaluate,
    lookup,
    primitive_conditions,
    registry,
)
from .simulation import (
    ContactEnv,
    ForceReading,
    HandObject,
    Scene,
    SimConfig,
    Surface,
    contact_force,
    randomize_scene,
    sense,
)
from .scenes import preset
from .agents import (
    EpisodeTrace,
    SkillParameters,
    analytic_controller,
    direction_update,
    pc1pc1_reward,
    pc1pc1_target_force,
    prpr_reward,
    run_skill,
    rvrv_corotate,
)
from .training import LearnerConfig, Policy, train
from .pipeline import TaskModel, bind_parameters, execute_sequence, parse_task_sequence

__version__ = "0.1.0"
