"""Target grasp-feasibility reward.

A grasp is addressed by a grid cell and one of 16 closing-axis orientations
over [0, pi). It is feasible when both inflated finger rectangles clear every
object and the closing channel between them reaches the target without
clamping any other object. The scan reduces rectangle-vs-polygon overlap to
point-in-dilated-polygon tests (Minkowski sums), so the per-cell check is a
handful of half-plane evaluations.

Results are memoized by scene hash; in a 150-iteration tree search the same
states recur constantly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .geometry import CONTACT_EPS
from .scene import GRID_N, Scene, scene_hash

N_THETA = 16


@dataclass(frozen=True)
class GripperSpec:
    """Parallel-jaw gripper: 8.5 cm opening, finger cross-section, clearance."""

    max_opening: float = 8.5
    finger_thickness: float = 1.0
    finger_width: float = 2.0
    clearance: float = 0.25

    def __post_init__(self):
        for f in (self.max_opening, self.finger_thickness,
                  self.finger_width, self.clearance):
            if f <= 0:
                raise ValueError("gripper dimensions must be positive")
        if self.max_opening <= self.finger_thickness:
            raise ValueError("max_opening must exceed finger_thickness")

    def to_dict(self) -> dict:
        return {
            "max_opening_cm": self.max_opening,
            "finger_thickness_cm": self.finger_thickness,
            "finger_width_cm": self.finger_width,
            "clearance_cm": self.clearance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GripperSpec":
        return cls(
            max_opening=d.get("max_opening_cm", 8.5),
            finger_thickness=d.get("finger_thickness_cm", 1.0),
            finger_width=d.get("finger_width_cm", 2.0),
            clearance=d.get("clearance_cm", 0.25),
        )


@dataclass(frozen=True)
class GraspAction:
    cell: tuple[int, int]  # (row i, column j) on the occupancy grid
    theta_index: int

    def __post_init__(self):
        if not 0 <= self.theta_index < N_THETA:
            raise ValueError("theta_index out of range")

    @property
    def theta(self) -> float:
        return self.theta_index * math.pi / N_THETA

    def center(self, workspace: float, grid_n: int = GRID_N) -> tuple[float, float]:
        cell = workspace / grid_n
        i, j = self.cell
        return ((j + 0.5) * cell, (i + 0.5) * cell)

    def to_dict(self) -> dict:
        return {"kind": "grasp", "cell": list(self.cell),
                "theta_index": self.theta_index}


class RewardMap:
    """Per-orientation binary feasibility grids for one scene."""

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray):
        if values.shape[0] != N_THETA or values.shape[1] != values.shape[2]:
            raise ValueError("expected a (16, n, n) array")
        self.values = values

    @property
    def grid_n(self) -> int:
        return self.values.shape[1]

    def max(self) -> float:
        return float(self.values.max(initial=0))

    def argmax(self) -> GraspAction | None:
        """First maximal cell in (theta, row-major) order, None if all zero."""
        flat = int(self.values.argmax())
        if self.values.flat[flat] == 0:
            return None
        t, rest = divmod(flat, self.grid_n * self.grid_n)
        i, j = divmod(rest, self.grid_n)
        return GraspAction(cell=(i, j), theta_index=t)

    def save_pgm(self, path) -> None:
        """Heat map: per-cell count of feasible orientations, as ASCII PGM."""
        counts = self.values.sum(axis=0)
        with open(path, "w") as fh:
            fh.write(f"P2\n{self.grid_n} {self.grid_n}\n{N_THETA}\n")
            for row in counts:
                fh.write(" ".join(str(int(v)) for v in row) + "\n")


# Shared memo caches. Insertion is idempotent (values for a key are equal),
# so plain dict assignment is safe under the GIL.
_MAP_CACHE: dict = {}
_MAX_CACHE: dict = {}


def clear_cache() -> None:
    _MAP_CACHE.clear()
    _MAX_CACHE.clear()


def _memo_key(scene: Scene, spec: GripperSpec, grid_n: int):
    # scene_hash covers ids and quantized poses only; add a shape signature
    # so scenes that differ only in object geometry never share an entry
    sig = scene._cache.get("shape_sig")
    if sig is None:
        sig = hash(tuple((sp.id, sp.shape, sp.is_target)
                         for sp, _ in scene.objects))
        scene._cache["shape_sig"] = sig
    return (scene_hash(scene), sig, spec, grid_n)


def _scan_args(scene: Scene, spec: GripperSpec, grid_n: int):
    polys, nvs, _ = scene.kernel_arrays()
    return (
        polys, nvs, scene.n, scene.target_index, N_THETA,
        spec.max_opening, spec.finger_thickness, spec.finger_width,
        spec.clearance, CONTACT_EPS, grid_n, scene.workspace / grid_n,
    )


def is_grasp_feasible(scene: Scene, grasp: GraspAction, spec: GripperSpec,
                      grid_n: int = GRID_N) -> bool:
    """Check one (cell, orientation) grasp against the full scene."""
    i, j = grasp.cell
    if not (0 <= i < grid_n and 0 <= j < grid_n):
        raise ValueError("grasp cell outside the grid")
    polys, nvs, _ = scene.kernel_arrays()
    return bool(K.grasp_single(
        polys, nvs, scene.n, scene.target_index, N_THETA, grasp.theta_index,
        i, j, spec.max_opening, spec.finger_thickness, spec.finger_width,
        spec.clearance, CONTACT_EPS, scene.workspace / grid_n,
    ))


def reward_map(scene: Scene, spec: GripperSpec, grid_n: int = GRID_N) -> RewardMap:
    """Full binary feasibility map, memoized by (scene hash, spec, grid)."""
    key = _memo_key(scene, spec, grid_n)
    hit = _MAP_CACHE.get(key)
    if hit is not None:
        return hit
    out = np.zeros((N_THETA, grid_n, grid_n), dtype=np.uint8)
    K.grasp_scan(*_scan_args(scene, spec, grid_n), True, out)
    out.setflags(write=False)
    rm = RewardMap(out)
    _MAP_CACHE[key] = rm
    return rm


def max_grasp_reward(scene: Scene, spec: GripperSpec,
                     grid_n: int = GRID_N) -> tuple[float, GraspAction | None]:
    """Best achievable grasp reward and its argmax action.

    Ties break to the lowest theta_index, then row-major cell — the scan
    itself visits cells in exactly that order, so the first hit is the answer.
    """
    key = _memo_key(scene, spec, grid_n)
    hit = _MAX_CACHE.get(key)
    if hit is not None:
        return hit
    mapped = _MAP_CACHE.get(key)
    if mapped is not None:
        best = mapped.argmax()
        result = (mapped.max(), best)
    else:
        dummy = np.zeros((N_THETA, 1, 1), dtype=np.uint8)
        found, t, i, j = K.grasp_scan(*_scan_args(scene, spec, grid_n),
                                      False, dummy)
        if found:
            result = (1.0, GraspAction(cell=(int(i), int(j)), theta_index=int(t)))
        else:
            result = (0.0, None)
    _MAX_CACHE[key] = result
    return result
