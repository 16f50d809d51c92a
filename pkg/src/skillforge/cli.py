"""Command-line surface: classification, reward inspection, simulation
runs, training, and sequence execution.

Exit codes: 0 success, 1 runtime failure, 2 usage or parse error.
Outputs are plain files (CSV traces, JSON policies and summaries) meant
for external plotting; nothing is rendered here.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import rewards
from .agents import analytic_controller, family_of, run_skill
from .cones import ContactSet, DegenerateContactWarning, MotionKind, classify
from .pipeline import execute_sequence, parse_task_sequence, write_sequence_outputs
from .rewards import FixtureParseError, compose, format_skill, lookup, registry
from .runs import IncompatibleRunError, compatible_pairs, setup_run
from .scenes import PRESET_NAMES, preset, scene_for_skill
from .training import LearnerConfig, Policy, standard_env_factory, train

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def fixture_dir():
    return importlib.resources.files("skillforge").joinpath("data/fixtures")


def _default_seed() -> int:
    try:
        return int(os.environ.get("SKILLFORGE_SEED", "0"))
    except ValueError:
        return 0


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=_default_seed(),
                        help="RNG seed (default from SKILLFORGE_SEED or 0)")
    parser.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory for generated files")
    parser.add_argument("--format", choices=("json", "csv"), default="json",
                        help="detail output format where applicable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skillforge",
        description="contact-state classification and manipulation skill toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify a contact-set file")
    p.add_argument("contacts_file", type=Path)
    p.add_argument("--kind", choices=("translation", "rotation"), default=None)
    p.add_argument("--center", type=float, nargs=3, default=None,
                   metavar=("X", "Y", "Z"))
    _common(p)

    p = sub.add_parser("reward", help="print or check compiled reward programs")
    p.add_argument("skill", nargs="?", default=None)
    p.add_argument("--all", action="store_true", help="print every registry program")
    p.add_argument("--check-fixtures", action="store_true",
                   help="compare every compiled program against its fixture")
    _common(p)

    p = sub.add_parser("run", help="run one skill on a preset scene")
    p.add_argument("preset", choices=PRESET_NAMES)
    p.add_argument("skill")
    p.add_argument("--steps", type=int, default=200, help="episode horizon")
    p.add_argument("--delta-zero", type=float, default=3.0)
    p.add_argument("--delta-collision", type=float, default=30.0)
    p.add_argument("--f-step", type=float, default=None)
    p.add_argument("--axis-error-deg", type=float, default=0.0)
    p.add_argument("--noise-deg", type=float, default=0.0)
    p.add_argument("--policy", type=Path, default=None,
                   help="policy JSON to use instead of the analytic controller")
    _common(p)

    p = sub.add_parser("train", help="train a policy for one skill")
    p.add_argument("skill")
    p.add_argument("--steps", type=int, default=50_000,
                   help="environment-step budget")
    p.add_argument("--method", choices=("cross-entropy", "finite-difference"),
                   default="cross-entropy")
    p.add_argument("--population", type=int, default=25)
    p.add_argument("--axis-error-deg", type=float, default=10.0)
    p.add_argument("--noise-deg", type=float, default=2.0)
    _common(p)

    p = sub.add_parser("exec", help="execute a task-sequence file")
    p.add_argument("sequence_file", type=Path)
    p.add_argument("--preset", default=None,
                   help="scene preset (default: the file's 'preset' field or tabletop)")
    _common(p)

    p = sub.add_parser("presets", help="list preset scenes and their contact states")
    _common(p)

    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_classify(args) -> int:
    try:
        data = json.loads(args.contacts_file.read_text())
        contacts = ContactSet.of([(c["p"], c["n"]) for c in data.get("contacts", [])])
    except FileNotFoundError:
        print(f"error: no such file {args.contacts_file}", file=sys.stderr)
        return EXIT_USAGE
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"error: cannot parse contacts file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    kind = MotionKind(args.kind or data.get("kind", "translation"))
    center = args.center if args.center is not None else data.get("center")
    if kind is MotionKind.ROTATION and center is None:
        print("error: rotation classification needs --center", file=sys.stderr)
        return EXIT_USAGE
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateContactWarning)
            state, profile = classify(contacts, kind, center)
        for w in caught:
            print(f"note: {w.message}", file=sys.stderr)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{state.value} {profile.maintenance} {profile.detachment} {profile.constraint}")
    detail = {
        "state": state.value, "coarse": state.coarse, "kind": kind.value,
        "profile": {"maintenance": profile.maintenance,
                    "detachment": profile.detachment,
                    "constraint": profile.constraint},
        "contacts": len(contacts),
    }
    print(json.dumps(detail, indent=2, sort_keys=True))
    return EXIT_OK


def check_fixtures() -> tuple[int, int, list]:
    """Compare every registry program against its transcribed fixture.

    Returns (matched, total, mismatch messages); the fixture directory's
    file count is the ground truth for the registry size.
    """
    specs = registry()
    mismatches = []
    matched = 0
    for spec in specs:
        path = fixture_dir().joinpath(f"{spec.name}.txt")
        try:
            text = path.read_text()
        except FileNotFoundError:
            mismatches.append(f"{spec.name}: missing fixture file")
            continue
        try:
            fixture_program, header_name = rewards.parse_program(text)
        except FixtureParseError as exc:
            mismatches.append(f"{spec.name}: fixture parse error: {exc}")
            continue
        if header_name and header_name != spec.name:
            mismatches.append(f"{spec.name}: fixture header names {header_name}")
        elif compose(spec).canonical() != fixture_program.canonical():
            mismatches.append(f"{spec.name}: compiled program differs from fixture")
        else:
            matched += 1
    fixture_files = [p.name for p in fixture_dir().iterdir() if p.name.endswith(".txt")]
    if len(fixture_files) != len(specs):
        mismatches.append(
            f"registry has {len(specs)} entries but {len(fixture_files)} fixture files")
    return matched, len(specs), mismatches


def cmd_reward(args) -> int:
    if args.check_fixtures:
        matched, total, mismatches = check_fixtures()
        for m in mismatches:
            print(f"mismatch: {m}", file=sys.stderr)
        print(f"{matched}/{total} match")
        return EXIT_OK if not mismatches else EXIT_RUNTIME
    if args.all:
        for spec in registry():
            print(format_skill(spec))
        return EXIT_OK
    if not args.skill:
        print("error: give a skill name or --all", file=sys.stderr)
        return EXIT_USAGE
    try:
        spec = lookup(args.skill)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    print(format_skill(spec), end="")
    return EXIT_OK


def cmd_run(args) -> int:
    thresholds = {"delta-zero": args.delta_zero, "delta-collision": args.delta_collision}
    try:
        env, params = setup_run(args.preset, args.skill, seed=args.seed,
                                axis_error_deg=args.axis_error_deg,
                                noise_deg=args.noise_deg, thresholds=thresholds)
    except (IncompatibleRunError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"compatible pairs: {', '.join(f'{p}/{s}' for p, s in compatible_pairs())}",
              file=sys.stderr)
        return EXIT_USAGE
    if args.f_step is not None:
        from dataclasses import replace as dc_replace
        env.config = dc_replace(env.config, f_step=args.f_step)
    spec = lookup(args.skill)
    if args.policy is not None:
        controller = Policy.load(args.policy)
    else:
        controller = analytic_controller(family_of(spec))
    trace = run_skill(spec, controller, env, params, horizon=args.steps)
    args.out.mkdir(parents=True, exist_ok=True)
    trace_path = args.out / f"run_{args.preset}_{args.skill}.csv"
    trace.write_csv(trace_path)
    print(f"{trace.termination} steps={len(trace)} max|f|={trace.max_force():.6g}")
    print(f"trace: {trace_path}")
    return EXIT_OK if trace.success or trace.termination == "timeout" else EXIT_RUNTIME


def cmd_train(args) -> int:
    try:
        spec = lookup(args.skill)
        factory = standard_env_factory(args.skill, axis_error_deg=args.axis_error_deg,
                                       noise_deg=args.noise_deg)
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    config = LearnerConfig(method=args.method, total_steps=args.steps,
                           population=args.population, seed=args.seed)
    try:
        policy, curve = train(spec, factory, config)
    except Exception as exc:
        print(f"error: training failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    args.out.mkdir(parents=True, exist_ok=True)
    policy_path = args.out / f"policy_{args.skill}.json"
    curve_path = args.out / f"curve_{args.skill}.csv"
    policy.save(policy_path)
    curve.write_csv(curve_path)
    means = curve.mean_rewards()
    first = means[0] if means else float("nan")
    last = means[-1] if means else float("nan")
    print(f"trained {args.skill} iterations={len(means)} "
          f"first_mean={first:.6g} final_mean={last:.6g}")
    print(f"policy: {policy_path}")
    print(f"curve: {curve_path}")
    return EXIT_OK


def cmd_exec(args) -> int:
    try:
        doc = json.loads(args.sequence_file.read_text())
        models = parse_task_sequence(doc)
    except FileNotFoundError:
        print(f"error: no such file {args.sequence_file}", file=sys.stderr)
        return EXIT_USAGE
    except (json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    preset_name = args.preset or doc.get("preset", "tabletop")
    first_skill = next((m.task for m in models if not m.is_marker), None)
    try:
        scene = scene_for_skill(preset_name, first_skill) if first_skill \
            else preset(preset_name)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    env = scene.make_env()
    try:
        traces = execute_sequence(models, env)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out_dir = args.out / args.sequence_file.stem
    write_sequence_outputs(traces, out_dir)
    for trace in traces:
        print(f"{trace.skill}: {trace.termination} steps={len(trace)} "
              f"max|f|={trace.max_force():.6g}")
    print(f"outputs: {out_dir}")
    all_ok = bool(traces) and all(t.success for t in traces)
    return EXIT_OK if all_ok else EXIT_RUNTIME


def cmd_presets(args) -> int:
    for name in PRESET_NAMES:
        scene = preset(name)
        state, profile = classify(scene.contacts, scene.kind, scene.center)
        print(f"{name}: {state.value} ({profile.maintenance} {profile.detachment} "
              f"{profile.constraint}) surfaces={len(scene.surfaces)}"
              + (" hinged" if scene.door else ""))
    return EXIT_OK


_COMMANDS = {
    "classify": cmd_classify,
    "reward": cmd_reward,
    "run": cmd_run,
    "train": cmd_train,
    "exec": cmd_exec,
    "presets": cmd_presets,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.random.seed(args.seed % (2**32))  # belt and braces; all paths use Generators
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
