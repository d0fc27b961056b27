"""Benchmark harness: suite generation, seeded episode batches, CSV output.

Scenario suites are generated procedurally and *certified* at generation
time: an easy instance must be solvable by the depth-one baseline in two
actions, a packed instance must have zero initial grasp reward, and a trap
instance must additionally admit no single push that makes the target
graspable (checked exhaustively) while still being solvable by both planners
with a clear gap between them.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import time
from dataclasses import dataclass, field

from .geometry import ConvexPolygon, Pose2D, Vec2
from .grasp import GripperSpec, max_grasp_reward
from .planner import (EpisodeLog, PlannerConfig, derive_seed, greedy_episode,
                      sample_action_space, vft_episode)
from .push_sim import SimParams, simulate_push
from .scene import WORKSPACE_CM, ObjectSpec, Scene, save_scenario

import random


class GenerationError(RuntimeError):
    """Suite generation failed to certify an instance within the retry budget."""


def episode_seed(seed: int, scenario: str, repeat: int) -> int:
    """Per-episode seed: seed XOR digest(scenario, repeat).

    Independent of episode execution order, so parallel and serial runs
    agree.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(scenario.encode())
    h.update(struct.pack("<q", repeat))
    return seed ^ int.from_bytes(h.digest(), "little")


def _jitter_center(rng: random.Random, ws: float, amount: float = 1.0):
    return (ws / 2 + rng.uniform(-amount, amount),
            ws / 2 + rng.uniform(-amount, amount))


def _build(entries) -> Scene:
    return Scene(tuple(
        (ObjectSpec(id=i, shape=shape, is_target=(i == "t")),
         Pose2D(Vec2(x, y), th))
        for (i, shape, x, y, th) in entries
    ))


def _gen_easy(rng: random.Random, cfg: PlannerConfig, sim: SimParams,
              grip: GripperSpec) -> Scene | None:
    """Target in a three-walled pocket with one open face.

    Every finger placement is blocked by the pocket walls; a single push on
    the back wall slides the target out through the opening, after which it
    is graspable. Certified: zero initial reward, greedy solves in exactly
    two actions.
    """
    ws = WORKSPACE_CM
    tw = rng.uniform(3.5, 4.5)   # target extent across the opening
    td = rng.uniform(3.5, 4.5)   # target extent along the opening
    bw = rng.uniform(3.5, 5.0)   # wall thickness
    gap = rng.uniform(0.1, 0.4)
    ahead = rng.uniform(1.8, 2.6)  # how far the side walls outreach the target
    phi = rng.uniform(0.0, 2 * math.pi)  # opening direction
    cx, cy = _jitter_center(rng, ws, 1.5)
    c, s = math.cos(phi), math.sin(phi)

    def place(dx, dy):
        # pocket frame: +x is the opening direction
        return (cx + c * dx - s * dy, cy + s * dx + c * dy)

    side_len = td + ahead + bw
    side_off = (tw + bw) / 2 + gap
    side_fwd = (ahead - bw) / 2  # rear ends bw behind the target's back face
    back_x = -(td / 2 + gap + bw / 2)
    back_len = tw + gap  # fits between the side walls with gap/2 to spare
    entries = [
        ("t", ConvexPolygon.box(td, tw), cx, cy, phi),
        ("n0", ConvexPolygon.box(bw, back_len), *place(back_x, 0.0), phi),
        ("n1", ConvexPolygon.box(side_len, bw), *place(side_fwd, side_off), phi),
        ("n2", ConvexPolygon.box(side_len, bw), *place(side_fwd, -side_off), phi),
    ]
    try:
        scene = _build(entries)
        scene.validate()
    except Exception:
        return None
    if max_grasp_reward(scene, grip)[0] > 0.0:
        return None
    log = greedy_episode(scene, cfg, sim, grip)
    if not (log.success and log.counted_actions == 2):
        return None
    return scene


def _ring_blocks(rng: random.Random, tw: float, th_: float, gap: float,
                 jitter: float = 0.0):
    """Eight blocks flush-ringing a tw x th_ target: four sides, four corners.

    Yields (x, y, w, h, heading). Gaps stay below the finger clearance, so
    every placement around the target is blocked, and the corner blocks pin
    the side slabs so a single push cannot spin one away. Optional heading
    jitter keeps consecutive pushes on a ring block from being exactly
    collinear (straight merged shoves would otherwise count as one action).
    """
    sw = rng.uniform(3.5, 5.0)  # side block thickness
    blocks = []
    for sx, sy, w, h in (
        (1, 0, sw, th_), (-1, 0, sw, th_), (0, 1, tw, sw), (0, -1, tw, sw),
        (1, 1, sw, sw), (1, -1, sw, sw), (-1, 1, sw, sw), (-1, -1, sw, sw),
    ):
        blocks.append((sx * (tw / 2 + gap + sw / 2) if sx else 0.0,
                       sy * (th_ / 2 + gap + sw / 2) if sy else 0.0,
                       w, h, rng.uniform(-jitter, jitter)))
    return blocks


def _gen_packed(rng: random.Random, cfg: PlannerConfig, sim: SimParams,
                grip: GripperSpec) -> Scene | None:
    ws = WORKSPACE_CM
    tw = rng.uniform(3.5, 4.5)
    th_ = rng.uniform(3.5, 4.5)
    gap = rng.uniform(0.05, 0.2)  # below the finger clearance everywhere
    cx, cy = _jitter_center(rng, ws, 1.0)
    entries = [("t", ConvexPolygon.box(tw, th_), cx, cy, 0.0)]
    for i, (bx, by, w, h, dth) in enumerate(_ring_blocks(rng, tw, th_, gap)):
        entries.append((f"r{i}", ConvexPolygon.box(w, h), cx + bx, cy + by, dth))
    try:
        scene = _build(entries)
        scene.validate()
    except Exception:
        return None
    if max_grasp_reward(scene, grip)[0] != 0.0:
        return None
    return scene


def _no_single_push_frees(scene: Scene, cfg: PlannerConfig, sim: SimParams,
                          grip: GripperSpec) -> bool:
    for a in sample_action_space(scene, sim):
        nxt = simulate_push(scene, a, sim).scene_after
        if max_grasp_reward(nxt, grip)[0] >= cfg.r_gp_star:
            return False
    return True


def _decoy_slab(w: float, h: float, s: float) -> ConvexPolygon:
    """Parallelogram slab with vertical end faces, sheared by s.

    The gripper contact on an end face sits off the centroid line, so every
    push turns the slab a little; successive pushes on it are therefore never
    exactly collinear and each one counts as a separate action.
    """
    return ConvexPolygon.canonical([(-w / 2, -h / 2), (w / 2, -h / 2 + 2 * s),
                                    (w / 2, h / 2), (-w / 2, h / 2 - 2 * s)])


def _gen_trap(rng: random.Random, cfg: PlannerConfig, sim: SimParams,
              grip: GripperSpec) -> Scene | None:
    """Packed ring plus an outer second ring and a loose decoy slab.

    Freeing the target provably needs at least two pushes (exhaustive
    depth-one check), and straight merged shoves jam against the outer ring
    instead of escaping. The decoy sits east of the pile and sorts first by
    id: a depth-one planner that breaks zero-score ties by enumeration order
    spends several actions tumbling it into the pile before anything opens,
    while a deeper search frees the target from the far side right away."""
    ws = WORKSPACE_CM
    tw = rng.uniform(3.5, 4.5)
    th_ = rng.uniform(3.5, 4.5)
    gap = rng.uniform(0.1, 0.24)
    cx = rng.uniform(14.5, 16.5)
    cy = rng.uniform(19.0, 25.0)
    entries = [("t", ConvexPolygon.box(tw, th_), cx, cy,
                rng.uniform(-0.03, 0.03))]
    ring = _ring_blocks(rng, tw, th_, gap, jitter=0.015)
    sw = ring[0][2]  # side block thickness
    for i, (bx, by, w, h, dth) in enumerate(ring):
        entries.append((f"r{i}", ConvexPolygon.box(w, h), cx + bx, cy + by, dth))
    # outer ring: four long slabs boxing the inner assembly, corners open
    ax = tw / 2 + gap + sw  # inner assembly half-extent
    ay = th_ / 2 + gap + sw
    ow = rng.uniform(3.5, 5.0)
    gap2 = rng.uniform(0.3, 1.0)
    for i, (sx, sy) in enumerate(((1, 0), (-1, 0), (0, 1), (0, -1))):
        if sx:
            x, y = sx * (ax + gap2 + ow / 2), 0.0
            w, h = ow, 2 * ay
        else:
            x, y = 0.0, sy * (ay + gap2 + ow / 2)
            w, h = 2 * ax, ow
        entries.append((f"s{i}", ConvexPolygon.box(w, h), cx + x, cy + y,
                        rng.uniform(-0.015, 0.015)))
    # decoy east of the pile, aimed at one end of the outer east slab so the
    # eventual rams spin that slab aside rather than wedging head-on
    dw = rng.uniform(5.5, 6.5)
    dh = rng.uniform(3.2, 4.0)
    ssign = rng.choice((-1, 1))
    shear = ssign * rng.uniform(0.04, 0.08)
    xd = cx + ax + gap2 + ow + rng.uniform(8.0, 10.0) + dw / 2
    aim = cy + ssign * (ay - 1.0)
    entries.insert(1, ("a0", _decoy_slab(dw, dh, shear), xd,
                       aim - ssign * 2.0 + rng.uniform(-0.5, 0.5), 0.0))
    try:
        scene = _build(entries)
        scene.validate()
    except Exception:
        return None
    if max_grasp_reward(scene, grip)[0] != 0.0:
        return None
    if not _no_single_push_frees(scene, cfg, sim, grip):
        return None
    glog = greedy_episode(scene, cfg, sim, grip)
    if not glog.success or not 5 <= glog.counted_actions <= 12:
        return None
    probes = []
    for ps in range(2):
        pcfg = PlannerConfig(**{**cfg.to_dict(),
                                "seed": derive_seed(cfg.seed, 7000 + ps),
                                "early_stop": True})
        vlog = vft_episode(scene, pcfg, sim, grip)
        if not vlog.success:
            return None
        probes.append(vlog.counted_actions)
    if sum(probes) / len(probes) > 0.6 * glog.counted_actions:
        return None
    return scene


_GENERATORS = {"easy": _gen_easy, "packed": _gen_packed, "trap": _gen_trap}
_MAX_ATTEMPTS = 200


def generate_suite(kind: str, count: int, seed: int,
                   cfg: PlannerConfig | None = None,
                   sim: SimParams | None = None,
                   grip: GripperSpec | None = None) -> list[tuple[str, Scene]]:
    """Generate `count` certified scenarios; deterministic in `seed`."""
    if count < 1:
        raise ValueError("count must be >= 1")
    try:
        gen = _GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown suite kind {kind!r}") from None
    if cfg is None:
        cfg = PlannerConfig(seed=seed)
    if sim is None:
        sim = SimParams()
    if grip is None:
        grip = GripperSpec()
    out = []
    for i in range(count):
        scene = None
        for attempt in range(_MAX_ATTEMPTS):
            rng = random.Random(derive_seed(seed, i, attempt))
            scene = gen(rng, cfg, sim, grip)
            if scene is not None:
                break
        if scene is None:
            raise GenerationError(
                f"could not certify a {kind} scenario after {_MAX_ATTEMPTS} tries")
        out.append((f"{kind}_{i:02d}", scene))
    return out


def gen_suite(kind: str, count: int, seed: int, out_dir: str, **kw) -> list[str]:
    """Generate a suite and write one scenario JSON file per instance."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, scene in generate_suite(kind, count, seed, **kw):
        path = os.path.join(out_dir, f"{name}.json")
        with open(path, "w") as fh:
            fh.write(save_scenario(scene))
        paths.append(path)
    return paths


@dataclass
class ScenarioStats:
    scenario: str
    repeats: int
    mean_actions: float
    completion: float
    grasp_success: float


@dataclass
class SuiteResult:
    planner: str
    scenarios: list[ScenarioStats] = field(default_factory=list)

    @property
    def mean_actions(self) -> float:
        return sum(s.mean_actions for s in self.scenarios) / len(self.scenarios)

    @property
    def completion(self) -> float:
        return sum(s.completion for s in self.scenarios) / len(self.scenarios)

    @property
    def grasp_success(self) -> float:
        rates = [s.grasp_success for s in self.scenarios if not math.isnan(s.grasp_success)]
        return sum(rates) / len(rates) if rates else float("nan")


CSV_COLUMNS = ("scenario", "planner", "seed", "outcome", "actions",
               "grasp_attempts", "grasp_successes", "wall_ms")
# wall_ms is informational only; determinism checks must ignore it
CSV_TIMING_COLUMNS = ("wall_ms",)


def _episode_row(name: str, planner: str, seed: int, log: EpisodeLog,
                 wall_ms: float):
    attempts = sum(1 for s in log.steps if s.action.get("kind") == "grasp")
    successes = 1 if log.success else 0
    return (name, planner, seed,
            "success" if log.success else "budget_exhausted",
            log.counted_actions, attempts, successes, f"{wall_ms:.1f}")


def run_bench(suite: list[tuple[str, Scene]], planner: str, repeats: int,
              cfg: PlannerConfig, out_csv: str,
              sim: SimParams | None = None,
              grip: GripperSpec | None = None,
              make_figure: bool = True) -> SuiteResult:
    """Run `repeats` seeded episodes per scenario, append rows to a CSV.

    The CSV gets a config-echo comment header; rows arrive in sorted
    (scenario, repeat) order and are flushed per episode. A summary figure
    is rendered next to the CSV unless disabled.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if planner not in ("vft", "greedy"):
        raise ValueError(f"unknown planner {planner!r}")
    if sim is None:
        sim = SimParams()
    if grip is None:
        grip = GripperSpec()
    run = vft_episode if planner == "vft" else greedy_episode
    result = SuiteResult(planner=planner)
    new_file = not os.path.exists(out_csv)
    with open(out_csv, "a") as fh:
        if new_file:
            fh.write("# config: " + json.dumps({
                "planner_cfg": cfg.to_dict(), "sim": sim.to_dict(),
                "gripper": grip.to_dict(), "repeats": repeats,
            }, sort_keys=True) + "\n")
            fh.write(",".join(CSV_COLUMNS) + "\n")
        for name, scene in sorted(suite, key=lambda kv: kv[0]):
            actions = []
            completions = 0
            attempts_total = 0
            success_total = 0
            for rep in range(repeats):
                ep_seed = episode_seed(cfg.seed, name, rep)
                ep_cfg = PlannerConfig(**{**cfg.to_dict(), "seed": ep_seed})
                t0 = time.perf_counter()
                log = run(scene, ep_cfg, sim, grip, scenario=name)
                wall = (time.perf_counter() - t0) * 1e3
                row = _episode_row(name, planner, ep_seed, log, wall)
                fh.write(",".join(str(v) for v in row) + "\n")
                fh.flush()
                actions.append(log.counted_actions)
                completions += 1 if log.success else 0
                attempts_total += row[5]
                success_total += row[6]
            result.scenarios.append(ScenarioStats(
                scenario=name, repeats=repeats,
                mean_actions=sum(actions) / repeats,
                completion=completions / repeats,
                grasp_success=(success_total / attempts_total
                               if attempts_total else float("nan")),
            ))
    if make_figure:
        _summary_figure(result, out_csv + ".png")
    return result


def _summary_figure(result: SuiteResult, path: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = [s.scenario for s in result.scenarios]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(max(6, 0.5 * len(names)), 6),
                                   sharex=True)
    ax1.bar(names, [s.mean_actions for s in result.scenarios], color="#7b4fb5")
    ax1.set_ylabel("mean actions")
    ax1.set_title(f"planner: {result.planner}")
    ax2.bar(names, [s.completion for s in result.scenarios], color="#caa472")
    ax2.set_ylabel("completion rate")
    ax2.set_ylim(0, 1.05)
    ax2.tick_params(axis="x", rotation=75)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def summarize(result: SuiteResult) -> str:
    lines = [f"{'scenario':<12} {'mean_actions':>12} {'completion':>10} {'grasp_ok':>9}"]
    for s in result.scenarios:
        lines.append(f"{s.scenario:<12} {s.mean_actions:>12.2f} "
                     f"{s.completion:>10.2f} {s.grasp_success:>9.2f}")
    lines.append(f"{'overall':<12} {result.mean_actions:>12.2f} "
                 f"{result.completion:>10.2f} {result.grasp_success:>9.2f}")
    return "\n".join(lines)
