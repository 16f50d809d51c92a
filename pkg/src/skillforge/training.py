"""Desk-scale policy optimization for the feedback skill families.

The built-in learner is the cross-entropy method over linear policies:
sample parameter vectors around the current mean, roll each out on a
fresh randomized environment, refit mean and spread to the elites.  A
finite-difference gradient learner is available as an alternative.
Both are deterministic under their seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .agents import (
    DirectionCorrection,
    DirectionState,
    NormalCorrection,
    SkillFamily,
    WipeState,
    family_of,
    run_skill,
)
from .rewards import SkillSpec

CURVE_COLUMNS = ("iteration", "mean_reward", "best_reward")


class TrainingDiverged(RuntimeError):
    """Rollouts produced non-finite rewards; training aborted."""


@dataclass(frozen=True)
class Policy:
    """Deterministic parametric controller.

    architecture: {"type": "linear"|"mlp", "inputs": n, "outputs": m,
    "hidden": h?, "family": family value}.  Linear policies map the
    state encoding through a single matrix; mlp adds one tanh layer.
    """

    architecture: dict
    parameters: np.ndarray
    seed: int
    skill: str

    def __post_init__(self):
        object.__setattr__(self, "parameters",
                           np.asarray(self.parameters, dtype=float).ravel())
        expected = parameter_count(self.architecture)
        if self.parameters.size != expected:
            raise ValueError(
                f"architecture wants {expected} parameters, got {self.parameters.size}")

    def forward(self, encoding: np.ndarray) -> np.ndarray:
        arch = self.architecture
        n_in, n_out = arch["inputs"], arch["outputs"]
        if arch["type"] == "linear":
            w = self.parameters.reshape(n_out, n_in)
            return w @ encoding
        hidden = arch["hidden"]
        w1_size = hidden * n_in
        w1 = self.parameters[:w1_size].reshape(hidden, n_in)
        w2 = self.parameters[w1_size:].reshape(n_out, hidden)
        return w2 @ np.tanh(w1 @ encoding)

    def __call__(self, state):
        out = self.forward(state.encode())
        if isinstance(state, DirectionState):
            return DirectionCorrection(out[:3])
        if isinstance(state, WipeState):
            return NormalCorrection(float(out[0]))
        raise TypeError(f"policy cannot act on {type(state).__name__}")

    def save(self, path) -> None:
        data = {
            "architecture": self.architecture,
            "parameters": self.parameters.tolist(),
            "seed": self.seed,
            "skill": self.skill,
        }
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)

    @staticmethod
    def load(path) -> "Policy":
        with open(path) as fh:
            data = json.load(fh)
        return Policy(data["architecture"], np.asarray(data["parameters"]),
                      data["seed"], data["skill"])


def parameter_count(arch: dict) -> int:
    if arch["type"] == "linear":
        return arch["inputs"] * arch["outputs"]
    return arch["hidden"] * arch["inputs"] + arch["outputs"] * arch["hidden"]


def architecture_for(spec: SkillSpec, kind: str = "linear", hidden: int = 8) -> dict:
    family = family_of(spec)
    if family in (SkillFamily.DIRECTION, SkillFamily.ROTATION):
        arch = {"type": kind, "inputs": 7, "outputs": 3, "family": family.value}
    elif family is SkillFamily.FORCE_HOLD:
        arch = {"type": kind, "inputs": 11, "outputs": 1, "family": family.value}
    else:
        raise ValueError(f"{spec.name} ({family.value}) takes no trained policy")
    if kind == "mlp":
        arch["hidden"] = hidden
    return arch


@dataclass(frozen=True)
class LearnerConfig:
    method: str = "cross-entropy"   # or "finite-difference"
    total_steps: int = 50_000       # environment-step budget
    iterations: Optional[int] = None  # optional hard cap on iterations
    population: int = 25
    elite_frac: float = 0.2
    episodes_per_candidate: int = 1
    horizon: int = 50
    init_std: float = 0.5
    std_floor: float = 0.02
    learning_rate: float = 0.1      # finite-difference only
    fd_epsilon: float = 0.05        # finite-difference probe scale
    seed: int = 0


@dataclass
class RewardCurve:
    rows: list = field(default_factory=list)  # (iteration, mean, running best)

    def append(self, iteration: int, mean_reward: float) -> None:
        best = mean_reward if not self.rows else max(self.rows[-1][2], mean_reward)
        self.rows.append((iteration, mean_reward, best))

    def mean_rewards(self) -> list:
        return [r[1] for r in self.rows]

    def best_rewards(self) -> list:
        return [r[2] for r in self.rows]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CURVE_COLUMNS)
            for iteration, mean, best in self.rows:
                writer.writerow([iteration, f"{mean:.10g}", f"{best:.10g}"])


def _episode_seed(seed: int, iteration: int, candidate: int, episode: int) -> int:
    # arithmetic mix; avoids hash() whose string branch is per-process random
    return (seed * 1_000_003 + iteration * 10_007 + candidate * 101 + episode) % (2**31)


def _rollout(spec, policy, env_factory, episode_seed: int, horizon: int) -> tuple[float, int]:
    env, params = env_factory(episode_seed)
    trace = run_skill(spec, policy, env, params, horizon=horizon, check_state=False)
    total = trace.total_reward()
    if not np.isfinite(total):
        raise TrainingDiverged(f"non-finite episode return {total}")
    return float(total), len(trace)


def train(
    spec: SkillSpec,
    env_factory: Callable,
    config: LearnerConfig = LearnerConfig(),
    architecture: Optional[dict] = None,
) -> tuple[Policy, RewardCurve]:
    """Optimize a policy for one skill.

    env_factory(episode_seed) must return a fresh (env, SkillParameters)
    pair, deterministic in the seed; episodes then never share mutable
    state and batches could run concurrently.  Returns the best policy
    (by mean candidate return) and the per-iteration reward curve.
    """
    arch = architecture or architecture_for(spec)
    n_params = parameter_count(arch)
    rng = np.random.default_rng(config.seed)
    mean = np.zeros(n_params)
    std = np.full(n_params, config.init_std)

    curve = RewardCurve()
    best_policy = Policy(arch, mean.copy(), config.seed, spec.name)
    best_score = -np.inf
    steps_used = 0
    iteration = 0
    n_elite = max(1, int(round(config.population * config.elite_frac)))

    if config.method == "finite-difference":
        return _train_fd(spec, env_factory, config, arch)
    if config.method != "cross-entropy":
        raise ValueError(f"unknown learner method {config.method!r}")

    while True:
        if config.iterations is not None and iteration >= config.iterations:
            break
        if config.iterations is None and steps_used >= config.total_steps:
            break
        thetas = mean + std * rng.standard_normal((config.population, n_params))
        returns = np.zeros(config.population)
        for i in range(config.population):
            policy = Policy(arch, thetas[i], config.seed, spec.name)
            acc = 0.0
            for e in range(config.episodes_per_candidate):
                # fixed evaluation pool: the same scenario seeds every
                # iteration, so curves compare policies rather than luck
                episode_seed = _episode_seed(config.seed, 0, 0, e)
                total, length = _rollout(spec, policy, env_factory, episode_seed,
                                         config.horizon)
                acc += total
                steps_used += length
            returns[i] = acc / config.episodes_per_candidate

        order = np.argsort(returns)[::-1]
        elites = thetas[order[:n_elite]]
        mean = elites.mean(axis=0)
        # smoothed refit keeps one noisy elite set from collapsing the search
        std = np.maximum(0.7 * elites.std(axis=0) + 0.3 * std, config.std_floor)
        iteration_mean = float(returns.mean())
        curve.append(iteration, iteration_mean)
        top = float(returns[order[0]])
        if top > best_score:
            best_score = top
            best_policy = Policy(arch, thetas[order[0]].copy(), config.seed, spec.name)
        iteration += 1

    if not curve.rows:  # zero-iteration contract: initial policy unchanged
        return best_policy, curve
    return best_policy, curve


def standard_env_factory(
    skill_name: str,
    axis_error_deg: float = 10.0,
    noise_deg: float = 2.0,
) -> Callable:
    """Episode factory on the skill's canonical preset run.

    Every episode gets a fresh randomized scene and a start-direction
    error drawn from the episode seed, so independent workers never
    share state and the whole sweep is reproducible.
    """
    from .runs import compatible_pairs, setup_run

    preset_name = next((p for p, s in compatible_pairs() if s == skill_name), None)
    if preset_name is None:
        raise ValueError(f"no training preset for skill {skill_name}")

    def factory(episode_seed: int):
        rng = np.random.default_rng([episode_seed, 0x5EED])
        error = axis_error_deg * (0.5 + 0.5 * rng.uniform())
        return setup_run(preset_name, skill_name, seed=episode_seed,
                         axis_error_deg=error, noise_deg=noise_deg)

    return factory


def _train_fd(spec, env_factory, config: LearnerConfig, arch: dict):
    """Antithetic finite-difference gradient ascent on episode return."""
    n_params = parameter_count(arch)
    rng = np.random.default_rng(config.seed)
    theta = np.zeros(n_params)
    curve = RewardCurve()
    steps_used = 0
    iteration = 0
    pairs = max(2, config.population // 2)

    while True:
        if config.iterations is not None and iteration >= config.iterations:
            break
        if config.iterations is None and steps_used >= config.total_steps:
            break
        grad = np.zeros(n_params)
        scores = []
        for i in range(pairs):
            probe = rng.standard_normal(n_params)
            seed_plus = _episode_seed(config.seed, iteration, i, 0)
            seed_minus = _episode_seed(config.seed, iteration, i, 1)
            up, len_up = _rollout(spec, Policy(arch, theta + config.fd_epsilon * probe,
                                               config.seed, spec.name),
                                  env_factory, seed_plus, config.horizon)
            down, len_down = _rollout(spec, Policy(arch, theta - config.fd_epsilon * probe,
                                                   config.seed, spec.name),
                                      env_factory, seed_minus, config.horizon)
            grad += (up - down) / (2.0 * config.fd_epsilon) * probe
            scores.extend([up, down])
            steps_used += len_up + len_down
        theta = theta + config.learning_rate * grad / pairs
        curve.append(iteration, float(np.mean(scores)))
        iteration += 1

    return Policy(arch, theta, config.seed, spec.name), curve
