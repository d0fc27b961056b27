"""Push planning by tree search over imagined outcomes.

The outer loop grasps whenever the grasp evaluator clears the execution
threshold and otherwise runs a Monte-Carlo tree search whose transition
function is the push simulator and whose reward is grasp feasibility of the
successor states. Node values keep only the best few rollouts (top-m mean)
instead of the classic running mean, and back-propagation carries the
discounted maximum reward seen along the rollout path.

A depth-one greedy baseline (score every action by the immediate successor's
grasp reward) is included for benchmarking.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import random
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import Vec2
from .grasp import GripperSpec, is_grasp_feasible, max_grasp_reward
from .push_sim import PushAction, SimParams, action_candidates, simulate_push
from .scene import Scene, scene_hash


class NoActionsError(RuntimeError):
    """No collision-free push exists in the given state."""


@dataclass(frozen=True)
class PlannerConfig:
    n_max: int = 150
    gamma: float = 0.8
    d_star: int = 4
    r_g_star: float = 0.8
    r_gp_star: float = 1.0
    m: int = 3
    c: float = 2.0
    final_m: int = 1
    final_c: float = 0.0
    seed: int = 0
    episode_action_budget: int = 15
    # merge consecutive collinear pushes that chain end-to-start into one
    # counted action
    merge_collinear: bool = True
    # stop the search early once some root child already scores a full reward
    # (any such child is a final-selection argmax, so the answer can't improve)
    early_stop: bool = False
    # optional cap on the sampled action list (small exhaustive test instances)
    max_actions_per_state: int | None = None

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.m < 1 or self.final_m < 1:
            raise ValueError("m must be >= 1")
        if self.d_star < 1:
            raise ValueError("d_star must be >= 1")
        for t in (self.r_g_star, self.r_gp_star):
            if not 0.0 <= t <= 1.0:
                raise ValueError("thresholds must be in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "n_max": self.n_max, "gamma": self.gamma, "d_star": self.d_star,
            "r_g_star": self.r_g_star, "r_gp_star": self.r_gp_star,
            "m": self.m, "c": self.c, "seed": self.seed,
            "episode_action_budget": self.episode_action_budget,
            "merge_collinear": self.merge_collinear,
            "early_stop": self.early_stop,
        }


def derive_seed(*parts: int) -> int:
    """Stable 64-bit sub-seed from integer parts (process-independent)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(struct.pack("<q", p & (2**63 - 1) if p >= 0 else p))
    return int.from_bytes(h.digest(), "little")


def _row_action(rows, i: int) -> PushAction:
    return PushAction(Vec2(float(rows[i, 0]), float(rows[i, 1])),
                      Vec2(float(rows[i, 2]), float(rows[i, 3])))


def sample_action_space(scene: Scene, sim: SimParams | None = None) -> list[PushAction]:
    """Candidate pushes: per object, 4 principal-axis pokes plus 8 contour
    pokes, all aimed at the object's centroid.

    Candidates with no collision-free, in-workspace start are dropped. The
    order is deterministic: objects by id, then axis pushes, then contour
    index.
    """
    if sim is None:
        sim = SimParams()
    rows, valid = action_candidates(scene, sim)
    return [_row_action(rows, int(i)) for i in np.nonzero(valid)[0]]


class TreeNode:
    """Search node: one imagined scene plus visit statistics."""

    __slots__ = ("state", "incoming_action", "parent", "children",
                 "untried", "N", "Q", "depth", "reward", "uid")

    def __init__(self, state: Scene, incoming_action, parent, depth: int,
                 reward: float, uid: int):
        self.state = state
        self.incoming_action = incoming_action
        self.parent = parent
        self.children: list[TreeNode] = []
        self.untried: list[PushAction] = []
        self.N = 0
        self.Q: list[float] = []
        self.depth = depth
        self.reward = reward
        self.uid = uid


def uct(child: TreeNode, parent: TreeNode, m: int, c: float) -> float:
    """Top-m mean of the child's rollout returns plus the exploration bonus."""
    if child.N < 1:
        raise ValueError("uct needs a visited child")
    k = min(child.N, m)
    top = heapq.nlargest(k, child.Q)
    return sum(top) / k + c * math.sqrt(math.log(parent.N) / child.N)


@dataclass
class SearchRecord:
    """Optional per-iteration search trace, for debugging and auditing."""

    iterations: list[dict] = field(default_factory=list)
    root: TreeNode | None = None
    stopped_early: bool = False

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(it) for it in self.iterations)

    def to_dot(self) -> str:
        lines = ["digraph search {", '  node [shape=box, fontsize=9];']
        stack = [self.root] if self.root is not None else []
        while stack:
            n = stack.pop()
            q = max(n.Q) if n.Q else 0.0
            lines.append(
                f'  n{n.uid} [label="#{n.uid} d={n.depth}\\n'
                f'N={n.N} maxQ={q:.3f} R={n.reward:.2f}"];'
            )
            for ch in n.children:
                a = ch.incoming_action
                lines.append(
                    f'  n{n.uid} -> n{ch.uid} [label="({a.start.x:.1f},{a.start.y:.1f})'
                    f'->({a.end.x:.1f},{a.end.y:.1f})", fontsize=8];'
                )
                stack.append(ch)
        lines.append("}")
        return "\n".join(lines)


def _capped_actions(scene: Scene, cfg: PlannerConfig, sim: SimParams) -> list[PushAction]:
    acts = sample_action_space(scene, sim)
    if cfg.max_actions_per_state is not None:
        acts = acts[: cfg.max_actions_per_state]
    return acts


def _random_action(scene: Scene, cfg: PlannerConfig, sim: SimParams,
                   rng: random.Random) -> PushAction | None:
    """One uniformly random element of the capped action space."""
    rows, valid = action_candidates(scene, sim)
    idxs = np.nonzero(valid)[0]
    if cfg.max_actions_per_state is not None:
        idxs = idxs[: cfg.max_actions_per_state]
    if len(idxs) == 0:
        return None
    return _row_action(rows, int(idxs[rng.randrange(len(idxs))]))


def mcts_search(root_scene: Scene, cfg: PlannerConfig,
                sim: SimParams | None = None, grip: GripperSpec | None = None,
                *, seed: int | None = None,
                record: SearchRecord | None = None) -> PushAction:
    """Pick the next push for a state whose grasp reward is still too low.

    Each iteration selects a fully-expanded path by UCT, expands one untried
    push chosen uniformly at random, rolls out random pushes to the depth cap,
    and back-propagates the discounted maximum grasp reward along the path.
    The final answer maximizes the best single rollout (m=1, no exploration
    bonus), ties broken by child creation order.
    """
    if sim is None:
        sim = SimParams()
    if grip is None:
        grip = GripperSpec()
    rng = random.Random(cfg.seed if seed is None else seed)
    root = TreeNode(root_scene, None, None, 0,
                    max_grasp_reward(root_scene, grip)[0], 0)
    root.untried = _capped_actions(root_scene, cfg, sim)
    if not root.untried:
        raise NoActionsError("no feasible push from the root state")
    if record is not None:
        record.root = root
    next_uid = 1
    for it in range(cfg.n_max):
        node = root
        path = [0]
        while not node.untried and node.children:
            node = max(node.children,
                       key=lambda ch: uct(ch, node, cfg.m, cfg.c))
            path.append(node.uid)
        expanded = None
        if node.untried:
            action = node.untried.pop(rng.randrange(len(node.untried)))
            child_state = simulate_push(node.state, action, sim).scene_after
            child = TreeNode(child_state, action, node, node.depth + 1,
                             max_grasp_reward(child_state, grip)[0], next_uid)
            next_uid += 1
            if child.depth < cfg.d_star and child.reward < cfg.r_gp_star:
                child.untried = _capped_actions(child_state, cfg, sim)
            node.children.append(child)
            node = child
            path.append(child.uid)
            expanded = child
        # rollout: random pushes until the shared depth budget or a full
        # reward; r keeps the discounted best grasp reward seen
        r = 0.0
        d = 1
        state = node.state
        state_reward = node.reward
        depth = node.depth
        rollout_rewards = []
        while depth < cfg.d_star and state_reward < cfg.r_gp_star:
            act = _random_action(state, cfg, sim, rng)
            if act is None:
                break
            state = simulate_push(state, act, sim).scene_after
            state_reward = max_grasp_reward(state, grip)[0]
            depth += 1
            r = max(r, cfg.gamma ** d * state_reward)
            rollout_rewards.append(state_reward)
            d += 1
        # back-propagation, child to root exclusive: the node's own reward is
        # taken undiscounted at its own level, then decays by gamma per step up
        appended = []
        n = node
        while n is not root:
            n.N += 1
            r = max(r, n.reward)
            n.Q.append(r)
            appended.append((n.uid, r))
            r *= cfg.gamma
            n = n.parent
        root.N += 1
        if record is not None:
            record.iterations.append({
                "iteration": it,
                "path": path,
                "expanded": expanded.uid if expanded is not None else None,
                "expanded_action": (expanded.incoming_action.to_dict()
                                    if expanded is not None else None),
                "node_reward": node.reward,
                "rollout_rewards": rollout_rewards,
                "appended": appended,
            })
        if cfg.early_stop and expanded is not None and \
                expanded.depth == 1 and expanded.reward >= cfg.r_gp_star:
            if record is not None:
                record.stopped_early = True
            break
    best = max(root.children,
               key=lambda ch: uct(ch, root, cfg.final_m, cfg.final_c))
    return best.incoming_action


def greedy_baseline(scene: Scene, cfg: PlannerConfig,
                    sim: SimParams | None = None,
                    grip: GripperSpec | None = None) -> PushAction:
    """Depth-one search: score every push by the successor's grasp reward."""
    if sim is None:
        sim = SimParams()
    if grip is None:
        grip = GripperSpec()
    acts = _capped_actions(scene, cfg, sim)
    if not acts:
        raise NoActionsError("no feasible push from the given state")
    best = None
    best_v = -1.0
    for a in acts:
        nxt = simulate_push(scene, a, sim).scene_after
        v = max_grasp_reward(nxt, grip)[0]
        if v > best_v:
            best, best_v = a, v
    return best


@dataclass
class StepRecord:
    state_hash: int
    action: dict
    reward: float  # grasp reward of the state the action was taken in
    merged: bool = False
    wall_ms: float = 0.0


@dataclass
class EpisodeLog:
    steps: list[StepRecord]
    success: bool
    counted_actions: int
    executed_actions: int
    final_state_hash: int
    scenario: str = ""
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "success": self.success,
            "counted_actions": self.counted_actions,
            "executed_actions": self.executed_actions,
            "final_state_hash": self.final_state_hash,
            "steps": [
                {"state_hash": s.state_hash, "action": s.action,
                 "reward": s.reward, "merged": s.merged,
                 "wall_ms": s.wall_ms}
                for s in self.steps
            ],
        }


def _chains(prev: PushAction, new: PushAction) -> bool:
    """Same direction, same line, and no forward gap between the segments."""
    d = prev.direction
    if d.dot(new.direction) < 1.0 - 1e-9:
        return False
    off = new.start - prev.end
    if abs(off.cross(d)) > 1e-6:
        return False
    return off.dot(d) <= 1e-9


def _run_episode(scene: Scene, cfg: PlannerConfig, sim: SimParams,
                 grip: GripperSpec, choose_push,
                 scenario: str = "") -> EpisodeLog:
    steps: list[StepRecord] = []
    counted = 0
    executed = 0
    success = False
    prev_push: PushAction | None = None
    while counted < cfg.episode_action_budget and \
            executed < 4 * cfg.episode_action_budget:
        t0 = time.perf_counter()
        value, best = max_grasp_reward(scene, grip)
        if value > cfg.r_g_star:
            executed += 1
            counted += 1
            ok = is_grasp_feasible(scene, best, grip)
            steps.append(StepRecord(scene_hash(scene), best.to_dict(), value,
                                    wall_ms=(time.perf_counter() - t0) * 1e3))
            prev_push = None
            if ok:
                scene = scene.without_object(scene.target_index)
                success = True
                break
        else:
            action = choose_push(scene, executed)
            merged = (cfg.merge_collinear and prev_push is not None
                      and _chains(prev_push, action))
            executed += 1
            if not merged:
                counted += 1
            pre_hash = scene_hash(scene)
            scene = simulate_push(scene, action, sim).scene_after
            steps.append(StepRecord(pre_hash, action.to_dict(),
                                    value, merged,
                                    wall_ms=(time.perf_counter() - t0) * 1e3))
            prev_push = action
    return EpisodeLog(steps=steps, success=success, counted_actions=counted,
                      executed_actions=executed,
                      final_state_hash=scene_hash(scene),
                      scenario=scenario, seed=cfg.seed)


def vft_episode(scene: Scene, cfg: PlannerConfig,
                sim: SimParams | None = None,
                grip: GripperSpec | None = None,
                scenario: str = "") -> EpisodeLog:
    """Run one retrieval episode with the tree-search planner.

    Grasps when the evaluator clears the threshold, otherwise executes the
    searched push. Consecutive collinear chained pushes count as one action.
    Per-step search seeds derive from the config seed and the step index.
    """
    if sim is None:
        sim = SimParams()
    if grip is None:
        grip = GripperSpec()

    def choose(s: Scene, step: int) -> PushAction:
        return mcts_search(s, cfg, sim, grip,
                           seed=derive_seed(cfg.seed, step))

    return _run_episode(scene, cfg, sim, grip, choose, scenario=scenario)


def greedy_episode(scene: Scene, cfg: PlannerConfig,
                   sim: SimParams | None = None,
                   grip: GripperSpec | None = None,
                   scenario: str = "") -> EpisodeLog:
    """Same episode loop with the depth-one baseline choosing pushes."""
    if sim is None:
        sim = SimParams()
    if grip is None:
        grip = GripperSpec()
    return _run_episode(scene, cfg, sim, grip,
                        lambda s, step: greedy_baseline(s, cfg, sim, grip),
                        scenario=scenario)
