"""Command-line front end: suite generation, planning, episodes, benchmarks.

Exit codes: 0 on success, 1 on usage errors (unknown flag, bad value,
missing required argument), 2 on runtime failures (I/O, infeasible scenes,
generation failures).
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

from . import bench as B
from .geometry import Vec2
from .grasp import GraspAction, GripperSpec
from .planner import (PlannerConfig, SearchRecord, greedy_episode,
                      mcts_search, uct, vft_episode)
from .push_sim import SimParams
from .scene import (ArrowAnnotation, GraspAnnotation, Scene, load_scenario,
                    render_svg)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems on exit code 1, not 2."""

    def error(self, message):
        raise UsageError(message)


_PLANNER_FLAGS = (
    ("n-max", int), ("gamma", float), ("d-star", int), ("r-g-star", float),
    ("r-gp-star", float), ("m", int), ("c", float), ("final-m", int),
    ("final-c", float), ("episode-action-budget", int),
    ("max-actions-per-state", int),
)
_SIM_FLAGS = (
    ("substep", float), ("rotation-gain", float), ("max-resolve-iters", int),
    ("eps-contact", float), ("gripper-width", float), ("gripper-depth", float),
)
_GRIP_FLAGS = (
    ("max-opening", float), ("finger-thickness", float),
    ("finger-width", float), ("clearance", float),
)


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    for name, typ in _PLANNER_FLAGS + _SIM_FLAGS + _GRIP_FLAGS:
        p.add_argument(f"--{name}", type=typ, default=None)
    p.add_argument("--merge-collinear", dest="merge_collinear",
                   action="store_true", default=None)
    p.add_argument("--no-merge-collinear", dest="merge_collinear",
                   action="store_false")
    p.add_argument("--early-stop", dest="early_stop",
                   action="store_true", default=None)
    p.add_argument("--no-early-stop", dest="early_stop",
                   action="store_false")
    p.add_argument("--config", default=None,
                   help="JSON file with planner_cfg / sim / gripper sections")


def _pick(args, flags, json_section) -> dict:
    out = dict(json_section or {})
    for name, _ in flags:
        v = getattr(args, name.replace("-", "_"))
        if v is not None:
            out[name.replace("-", "_")] = v
    return out


def _configs(args, seed: int) -> tuple[PlannerConfig, SimParams, GripperSpec]:
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
    psec = dict(file_cfg.get("planner_cfg", {}))
    psec.pop("seed", None)
    pkw = _pick(args, _PLANNER_FLAGS, psec)
    for flag in ("merge_collinear", "early_stop"):
        v = getattr(args, flag, None)
        if v is not None:
            pkw[flag] = v
    cfg = PlannerConfig(seed=seed, **pkw)

    ssec = SimParams.from_dict(file_cfg.get("sim", {})).to_dict()
    rename = {"substep": "substep_cm", "rotation_gain": "rotation_gain",
              "max_resolve_iters": "max_resolve_iters",
              "eps_contact": "eps_contact_cm",
              "gripper_width": "gripper_width_cm",
              "gripper_depth": "gripper_depth_cm"}
    for name, _ in _SIM_FLAGS:
        v = getattr(args, name.replace("-", "_"))
        if v is not None:
            ssec[rename[name.replace("-", "_")]] = v
    sim = SimParams.from_dict(ssec)

    gsec = GripperSpec.from_dict(file_cfg.get("gripper", {})).to_dict()
    grename = {"max_opening": "max_opening_cm",
               "finger_thickness": "finger_thickness_cm",
               "finger_width": "finger_width_cm",
               "clearance": "clearance_cm"}
    for name, _ in _GRIP_FLAGS:
        v = getattr(args, name.replace("-", "_"))
        if v is not None:
            gsec[grename[name.replace("-", "_")]] = v
    grip = GripperSpec.from_dict(gsec)
    return cfg, sim, grip


def _load_scene(path: str) -> Scene:
    with open(path) as fh:
        return load_scenario(fh.read())


def _load_suite(spec: str, seed: int, cfg, sim, grip):
    """A suite is either a directory of scenario JSON files or a kind name."""
    if os.path.isdir(spec):
        suite = []
        for path in sorted(glob.glob(os.path.join(spec, "*.json"))):
            name = os.path.splitext(os.path.basename(path))[0]
            suite.append((name, _load_scene(path)))
        if not suite:
            raise RuntimeError(f"no scenario files under {spec!r}")
        return suite
    if spec in B._GENERATORS:
        count = {"easy": 10, "packed": 10, "trap": 20}[spec]
        return B.generate_suite(spec, count, seed, cfg, sim, grip)
    raise UsageError(f"--suite: {spec!r} is neither a directory nor a kind")


def _annotation(action: dict):
    if action.get("kind") == "grasp":
        ga = GraspAction(cell=tuple(action["cell"]),
                         theta_index=action["theta_index"])
        x, y = ga.center(B.WORKSPACE_CM)
        return GraspAnnotation(Vec2(x, y), ga.theta)
    return ArrowAnnotation(Vec2(action["x0"], action["y0"]),
                           Vec2(action["x1"], action["y1"]))


def _render_episode(scene: Scene, log, render_dir: str, sim: SimParams) -> int:
    """One frame per counted action plus the initial state.

    Merged collinear pushes continue the previous action, so they extend the
    frame rather than adding one.
    """
    from .push_sim import PushAction, simulate_push

    os.makedirs(render_dir, exist_ok=True)
    frames = 0

    def emit(s: Scene, anns=()):
        nonlocal frames
        path = os.path.join(render_dir, f"frame_{frames:04d}.svg")
        with open(path, "w") as fh:
            fh.write(render_svg(s, anns))
        frames += 1

    emit(scene)
    cur = scene
    for i, st in enumerate(log.steps):
        act = st.action
        if act.get("kind") == "grasp":
            nxt = cur.without_object(cur.target_index) if log.success and \
                i == len(log.steps) - 1 else cur
        else:
            pa = PushAction(Vec2(act["x0"], act["y0"]),
                            Vec2(act["x1"], act["y1"]))
            nxt = simulate_push(cur, pa, sim).scene_after
        last = i == len(log.steps) - 1
        if last or not log.steps[i + 1].merged:
            emit(nxt, (_annotation(act),))
        cur = nxt
    return frames


def _cmd_gen_suite(args) -> int:
    cfg, sim, grip = _configs(args, args.seed)
    paths = B.gen_suite(args.kind, args.count, args.seed, args.out,
                        cfg=cfg, sim=sim, grip=grip)
    for p in paths:
        print(p)
    return 0


def _cmd_plan(args) -> int:
    cfg, sim, grip = _configs(args, args.seed)
    scene = _load_scene(args.scene)
    record = SearchRecord()
    action = mcts_search(scene, cfg, sim, grip, record=record)
    best = max(record.root.children,
               key=lambda ch: uct(ch, record.root, cfg.final_m, cfg.final_c))
    value = uct(best, record.root, cfg.final_m, cfg.final_c)
    print(json.dumps({"action": action.to_dict(), "value": value}))
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(record.to_jsonl() + "\n")
    if args.tree:
        with open(args.tree, "w") as fh:
            fh.write(record.to_dot() + "\n")
    return 0


def _cmd_run_episode(args) -> int:
    cfg, sim, grip = _configs(args, args.seed)
    scene = _load_scene(args.scene)
    run = vft_episode if args.planner == "vft" else greedy_episode
    name = os.path.splitext(os.path.basename(args.scene))[0]
    log = run(scene, cfg, sim, grip, scenario=name)
    print(json.dumps(log.to_dict()))
    if args.render_dir:
        _render_episode(scene, log, args.render_dir, sim)
    return 0


def _cmd_bench(args) -> int:
    cfg, sim, grip = _configs(args, args.seed)
    suite = _load_suite(args.suite, args.seed, cfg, sim, grip)
    result = B.run_bench(suite, args.planner, args.repeats, cfg, args.out,
                         sim=sim, grip=grip, make_figure=not args.no_figure)
    print(B.summarize(result))
    return 0


def _cmd_render(args) -> int:
    scene = _load_scene(args.scene)
    svg = render_svg(scene)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(svg)
    else:
        sys.stdout.write(svg)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="clutterpush",
                     description="Push-and-grasp retrieval planner")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-suite", help="generate a certified scenario suite")
    p.add_argument("--kind", required=True, choices=("easy", "packed", "trap"))
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_param_flags(p)
    p.set_defaults(fn=_cmd_gen_suite)

    p = sub.add_parser("plan", help="run one search, print action and value")
    p.add_argument("--scene", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trace", default=None, help="write a JSONL search trace")
    p.add_argument("--tree", default=None, help="write a DOT tree dump")
    _add_param_flags(p)
    p.set_defaults(fn=_cmd_plan)

    p = sub.add_parser("run-episode", help="run one full retrieval episode")
    p.add_argument("--scene", required=True)
    p.add_argument("--planner", default="vft", choices=("vft", "greedy"))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--render-dir", default=None,
                   help="write per-action SVG frames here")
    _add_param_flags(p)
    p.set_defaults(fn=_cmd_run_episode)

    p = sub.add_parser("bench", help="run a benchmark suite, write CSV")
    p.add_argument("--suite", required=True,
                   help="scenario directory or kind name (easy/packed/trap)")
    p.add_argument("--planner", required=True, choices=("vft", "greedy"))
    p.add_argument("--repeats", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figure", action="store_true")
    _add_param_flags(p)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("render", help="render a scenario to SVG")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
