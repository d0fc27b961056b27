"""Deterministic quasi-static push model.

The transition function: the closed-gripper sweep rectangle advances from
start to end in fixed substeps, displacing penetrated objects out along the
minimum-translation vector and propagating contacts through the pile until a
fixed point. Off-center contacts rotate objects about the contact centroid.
Velocity-free by design: only pose displacements are modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .geometry import CONTACT_EPS, ConvexPolygon, Pose2D, Vec2
from .scene import ObjectSpec, Scene, WORKSPACE_CM

EFFECTIVE_PUSH_CM = 5.0
STANDOFF_CLEARANCE_CM = 0.5
RETRACT_STEP_CM = 0.25
RETRACT_BUDGET_CM = 3.0


@dataclass(frozen=True)
class GripperFootprint:
    """Closed-gripper sweep rectangle: width across motion, depth along it."""

    width: float = 2.0
    depth: float = 1.5

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0:
            raise ValueError("gripper footprint dimensions must be positive")


@dataclass(frozen=True)
class SimParams:
    substep: float = 0.1
    rotation_gain: float = 0.5
    max_resolve_iters: int = 64
    eps_contact: float = CONTACT_EPS
    footprint: GripperFootprint = GripperFootprint()

    def __post_init__(self):
        if self.substep <= 0 or self.substep > 0.2:
            raise ValueError("substep must be in (0, 0.2] cm")
        if self.max_resolve_iters < 8:
            raise ValueError("max_resolve_iters must be >= 8")
        if not 0.0 <= self.rotation_gain <= 1.0:
            raise ValueError("rotation_gain must be in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "substep_cm": self.substep,
            "rotation_gain": self.rotation_gain,
            "max_resolve_iters": self.max_resolve_iters,
            "eps_contact_cm": self.eps_contact,
            "gripper_width_cm": self.footprint.width,
            "gripper_depth_cm": self.footprint.depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimParams":
        return cls(
            substep=d.get("substep_cm", 0.1),
            rotation_gain=d.get("rotation_gain", 0.5),
            max_resolve_iters=d.get("max_resolve_iters", 64),
            eps_contact=d.get("eps_contact_cm", CONTACT_EPS),
            footprint=GripperFootprint(
                width=d.get("gripper_width_cm", 2.0),
                depth=d.get("gripper_depth_cm", 1.5),
            ),
        )


@dataclass(frozen=True)
class PushAction:
    start: Vec2
    end: Vec2

    def __post_init__(self):
        if (self.end - self.start).norm() < 1e-9:
            raise ValueError("push start and end coincide")

    @property
    def direction(self) -> Vec2:
        return (self.end - self.start).normalized()

    @property
    def travel(self) -> float:
        return (self.end - self.start).norm()

    def to_dict(self) -> dict:
        return {
            "kind": "push",
            "x0": self.start.x,
            "y0": self.start.y,
            "x1": self.end.x,
            "y1": self.end.y,
        }


@dataclass(frozen=True)
class PushResult:
    scene_after: Scene
    deltas: tuple[Pose2D, ...]  # per-object pose change
    contacted: tuple[bool, ...]  # moved at all during this push
    direct: tuple[bool, ...]  # displaced by the gripper itself
    truncated: bool = False


class InvalidPushError(ValueError):
    pass


def _footprint_free(scene: Scene, center: Vec2, direction: Vec2,
                    fp: GripperFootprint, eps: float) -> bool:
    polys, nvs, _ = scene.kernel_arrays()
    return not K.footprint_penetrates(
        polys, nvs, scene.n, center.x, center.y, direction.x, direction.y,
        fp.width, fp.depth, eps,
    )


def _inside_workspace(scene: Scene, p: Vec2) -> bool:
    return 0.0 <= p.x <= scene.workspace and 0.0 <= p.y <= scene.workspace


def validate_action(scene: Scene, action: PushAction, params: SimParams) -> None:
    if not _inside_workspace(scene, action.start) or not _inside_workspace(scene, action.end):
        raise InvalidPushError("push endpoints must lie inside the workspace")
    if not _footprint_free(scene, action.start, action.direction,
                           params.footprint, params.eps_contact):
        raise InvalidPushError("gripper footprint penetrates an object at the start pose")


def simulate_push(scene: Scene, action: PushAction, params: SimParams) -> PushResult:
    """Apply one push; pure function of its inputs."""
    validate_action(scene, action, params)
    polys, nvs, cents = scene.kernel_arrays()
    polys = polys.copy()
    nvs = nvs.copy()
    cents = cents.copy()
    dths = np.zeros(scene.n)
    contacted = np.zeros(scene.n, dtype=np.bool_)
    direct = np.zeros(scene.n, dtype=np.bool_)
    truncated = K.push_kernel(
        polys, nvs, scene.n, cents, dths,
        action.start.x, action.start.y, action.end.x, action.end.y,
        params.footprint.width, params.footprint.depth,
        params.substep, params.rotation_gain, params.max_resolve_iters,
        params.eps_contact, 0.0, scene.workspace,
        contacted, direct,
    )
    new_poses: dict[int, Pose2D] = {}
    deltas = []
    for i in range(scene.n):
        if contacted[i]:
            old = scene.pose(i)
            pose = Pose2D(Vec2(float(cents[i, 0]), float(cents[i, 1])),
                          old.heading + float(dths[i]))
            new_poses[i] = pose
            deltas.append(
                Pose2D(pose.position - old.position, float(dths[i]))
            )
        else:
            deltas.append(Pose2D(Vec2(0.0, 0.0), 0.0))
    scene_after = scene.with_poses(new_poses)
    # hand the integrated vertex arrays to the successor so imagined rollouts
    # never pay for re-deriving them pose-by-pose
    scene_after._cache["arrays"] = (polys, nvs, cents)
    return PushResult(
        scene_after=scene_after,
        deltas=tuple(deltas),
        contacted=tuple(bool(c) for c in contacted),
        direct=tuple(bool(d) for d in direct),
        truncated=bool(truncated),
    )


def convergence_cases() -> tuple[tuple[str, Scene, PushAction], ...]:
    """The standard suite of named (scene, push) regression cases.

    Canonical contact configurations — isolated blocks, flush rows, and the
    fully packed 3x3 block — used to check that refining the integration
    substep leaves final poses within the scene-hash quantization bins.
    Piles with many simultaneously rotating objects are excluded on purpose:
    contact switching makes those outcomes discontinuous in the substep, so
    no fixed tolerance can hold there.
    """
    c = 0.5 * WORKSPACE_CM

    def box(oid, x, y, th=0.0, target=False):
        return (ObjectSpec(id=oid, shape=ConvexPolygon.box(4.0, 4.0),
                           is_target=target), Pose2D(Vec2(x, y), th))

    def push(x0, y0, x1, y1):
        return PushAction(Vec2(x0, y0), Vec2(x1, y1))

    single = Scene((box("t", c, c, target=True),), WORKSPACE_CM)
    pair = Scene((box("a", c - 4, c), box("t", c, c, target=True)), WORKSPACE_CM)
    row3 = Scene((box("a", c - 8, c), box("b", c - 4, c),
                  box("t", c, c, target=True)), WORKSPACE_CM)
    packed = []
    k = 0
    for dy in (-4.0, 0.0, 4.0):
        for dx in (-4.0, 0.0, 4.0):
            mid = dx == 0.0 and dy == 0.0
            packed.append(box("t" if mid else f"n{k}", c + dx, c + dy,
                              target=mid))
            k += 1
    packed9 = Scene(tuple(packed), WORKSPACE_CM)
    tilted = Scene((box("t", c, c, math.pi / 4, target=True),), WORKSPACE_CM)
    cases = (
        ("single_centroid", single, push(c - 6, c, c - 1, c)),
        ("single_offcenter", single, push(c - 6, c + 1, c - 1, c + 1)),
        ("single_diagonal", single, push(c - 5, c - 5, c - 1.5, c - 1.5)),
        ("single_tilted_45", tilted, push(c - 7, c, c - 2, c)),
        ("pair_row", pair, push(c - 10, c, c - 5, c)),
        ("row_of_three", row3, push(c - 10, c, c - 1, c)),
        ("packed9_center_row", packed9, push(c - 10, c, c - 5, c)),
        ("packed9_edge_row", packed9, push(c - 10, c - 4, c - 5, c - 4)),
        ("packed9_column", packed9, push(c, c - 10, c, c - 5)),
    )
    for _, scene, _a in cases:
        scene.validate()
    return cases


def action_candidates(scene: Scene, params: SimParams):
    """All per-object push candidates, via one kernel call per scene.

    Returns (rows, valid): rows is an (n*12, 4) array of start/end
    coordinates in the canonical candidate order (objects sorted by id, four
    axis pokes, eight contour pokes); valid marks rows with a collision-free
    start. Cached on the scene.
    """
    key = ("actions", params)
    hit = scene._cache.get(key)
    if hit is None:
        polys, nvs, cents = scene.kernel_arrays()
        order = np.array(sorted(range(scene.n), key=lambda i: scene.spec(i).id),
                         dtype=np.int64)
        rows = np.empty((scene.n * 12, 4))
        valid = np.zeros(scene.n * 12, dtype=np.bool_)
        fp = params.footprint
        K.action_space_kernel(
            polys, nvs, cents, scene.n, order, fp.width, fp.depth,
            EFFECTIVE_PUSH_CM, 0.5 * fp.depth + STANDOFF_CLEARANCE_CM,
            RETRACT_STEP_CM, RETRACT_BUDGET_CM, params.eps_contact,
            scene.workspace, rows, valid,
        )
        hit = (rows, valid)
        scene._cache[key] = hit
    return hit


def effective_push_action(scene: Scene, contact_point: Vec2, direction: Vec2,
                          params: SimParams) -> PushAction | None:
    """Build a push with a 5 cm effective distance past the contact point.

    The start retreats from the contact by the standoff (half gripper depth
    plus 0.5 cm), retracting further in 0.25 cm steps while the footprint
    collides, up to a 3 cm budget. Returns None when no collision-free,
    in-workspace start exists.
    """
    d = direction.normalized()
    fp = params.footprint
    base = 0.5 * fp.depth + STANDOFF_CLEARANCE_CM
    end = contact_point + d * EFFECTIVE_PUSH_CM
    if not _inside_workspace(scene, end):
        return None
    retract = 0.0
    while retract <= RETRACT_BUDGET_CM + 1e-9:
        start = contact_point - d * (base + retract)
        if _inside_workspace(scene, start):
            if _footprint_free(scene, start, d, fp, params.eps_contact):
                return PushAction(start, end)
        else:
            return None
        retract += RETRACT_STEP_CM
    return None
