"""World model: object catalog, poses, workspace, serialization, rasterization,
scene hashing and SVG rendering.

The state is geometric (poses of rigid convex footprints); the 224x224 grid
exists so grid-indexed actions keep a pixel-style addressing, and rendering is
plain deterministic SVG.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .geometry import CONTACT_EPS, ConvexPolygon, Pose2D, Vec2, transform

WORKSPACE_CM = 44.8
GRID_N = 224
CELL_CM = WORKSPACE_CM / GRID_N  # 0.2 cm per cell

# raster labels
BACKGROUND = 0
CLUTTER = 1
TARGET = 2

# hash quantization bins
POS_BIN_CM = 0.05
HEADING_BIN_RAD = math.radians(0.5)

CYLINDER_SIDES = 24


class ScenarioError(ValueError):
    """Raised for malformed or invariant-violating scenario input."""


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    shape: ConvexPolygon  # body frame, area centroid at the origin
    is_target: bool = False
    height: float = 3.0  # metadata only
    graspable: bool = True  # width check against the gripper opening, set at load


@dataclass(frozen=True, eq=False)
class Scene:
    objects: tuple[tuple[ObjectSpec, Pose2D], ...]
    workspace: float = WORKSPACE_CM
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    @property
    def n(self) -> int:
        return len(self.objects)

    @property
    def target_index(self) -> int:
        for i, (spec, _) in enumerate(self.objects):
            if spec.is_target:
                return i
        raise ScenarioError("scene has no target object")

    def spec(self, i: int) -> ObjectSpec:
        return self.objects[i][0]

    def pose(self, i: int) -> Pose2D:
        return self.objects[i][1]

    def world_poly(self, i: int) -> ConvexPolygon:
        polys = self._cache.get("world")
        if polys is None:
            polys = [transform(s.shape, p) for s, p in self.objects]
            self._cache["world"] = polys
        return polys[i]

    def kernel_arrays(self):
        """(padded verts, vertex counts, centroids) for the numba kernels."""
        arrs = self._cache.get("arrays")
        if arrs is None:
            polys = np.zeros((max(self.n, 1), K.MAX_VERTS, 2))
            nvs = np.zeros(max(self.n, 1), dtype=np.int64)
            cents = np.zeros((max(self.n, 1), 2))
            for i in range(self.n):
                wp = self.world_poly(i)
                polys[i, : wp.n] = wp.vertices
                nvs[i] = wp.n
                pos = self.pose(i).position
                cents[i] = (pos.x, pos.y)
            arrs = (polys, nvs, cents)
            self._cache["arrays"] = arrs
        return arrs

    def validate(self) -> None:
        """Check scene invariants; raises ScenarioError naming the offender."""
        ids = [s.id for s, _ in self.objects]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate object ids")
        targets = [s.id for s, _ in self.objects if s.is_target]
        if len(targets) != 1:
            raise ScenarioError(f"expected exactly one target, got {targets!r}")
        tol = 1e-6
        for i in range(self.n):
            xmin, ymin, xmax, ymax = self.world_poly(i).bbox()
            if xmin < -tol or ymin < -tol or xmax > self.workspace + tol or ymax > self.workspace + tol:
                raise ScenarioError(f"out of workspace: {ids[i]}")
        polys, nvs, _ = self.kernel_arrays()
        a, b = K.any_overlap(polys, nvs, self.n, CONTACT_EPS)
        if a >= 0:
            raise ScenarioError(f"overlap: {ids[a]},{ids[b]}")

    def with_poses(self, new_poses: dict[int, Pose2D]) -> "Scene":
        objs = tuple(
            (spec, new_poses.get(i, pose)) for i, (spec, pose) in enumerate(self.objects)
        )
        return Scene(objs, self.workspace)

    def without_object(self, index: int) -> "Scene":
        objs = tuple(op for i, op in enumerate(self.objects) if i != index)
        return Scene(objs, self.workspace)


def scene_hash(scene: Scene) -> int:
    """64-bit digest over object ids and quantized poses.

    Poses are binned at 0.05 cm / 0.5 deg, below simulator reproducibility
    noise, so refinements of the same imagined state collide on purpose.
    """
    cached = scene._cache.get("hash")
    if cached is not None:
        return cached
    h = hashlib.blake2b(digest_size=8)
    for spec, pose in scene.objects:
        qx = round(pose.position.x / POS_BIN_CM)
        qy = round(pose.position.y / POS_BIN_CM)
        qt = round(pose.heading / HEADING_BIN_RAD)
        h.update(spec.id.encode())
        h.update(struct.pack("<qqq", qx, qy, qt))
    digest = int.from_bytes(h.digest(), "little")
    scene._cache["hash"] = digest
    return digest


def _shape_from_json(spec: dict) -> ConvexPolygon:
    kind = spec.get("kind")
    if kind == "box":
        return ConvexPolygon.box(float(spec["w_cm"]), float(spec["h_cm"]))
    if kind == "cylinder":
        return ConvexPolygon.regular(CYLINDER_SIDES, float(spec["r_cm"]))
    if kind == "polygon":
        return ConvexPolygon.canonical(spec["vertices_cm"])
    raise ScenarioError(f"unknown shape kind: {kind!r}")


def _shape_to_json(spec_obj: ObjectSpec) -> dict:
    return {"kind": "polygon", "vertices_cm": spec_obj.shape.vertices.tolist()}


def load_scenario(data: bytes | str, max_opening: float | None = None) -> Scene:
    """Parse and validate a scenario JSON document.

    When `max_opening` is given, objects whose minimum footprint width exceeds
    it are flagged ungraspable instead of rejected.
    """
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"malformed JSON: {e}") from e
    if not isinstance(doc, dict) or "objects" not in doc:
        raise ScenarioError("scenario must be an object with an 'objects' list")
    workspace = float(doc.get("workspace_cm", WORKSPACE_CM))
    objs = []
    for entry in doc["objects"]:
        try:
            shape = _shape_from_json(entry["shape"])
            pose = Pose2D(
                Vec2(float(entry["pose"]["x_cm"]), float(entry["pose"]["y_cm"])),
                math.radians(float(entry["pose"].get("theta_deg", 0.0))),
            )
            oid = str(entry["id"])
        except (KeyError, TypeError, ValueError) as e:
            raise ScenarioError(f"bad object entry {entry.get('id', '?')!r}: {e}") from e
        graspable = True
        if max_opening is not None and shape.min_width() > max_opening:
            graspable = False
        objs.append(
            (
                ObjectSpec(
                    id=oid,
                    shape=shape,
                    is_target=bool(entry.get("target", False)),
                    height=float(entry.get("height_cm", 3.0)),
                    graspable=graspable,
                ),
                pose,
            )
        )
    scene = Scene(tuple(objs), workspace)
    scene.validate()
    return scene


def save_scenario(scene: Scene) -> str:
    doc = {
        "workspace_cm": scene.workspace,
        "objects": [
            {
                "id": spec.id,
                "target": spec.is_target,
                "shape": _shape_to_json(spec),
                "pose": {
                    "x_cm": pose.position.x,
                    "y_cm": pose.position.y,
                    "theta_deg": math.degrees(pose.heading),
                },
                "height_cm": spec.height,
            }
            for spec, pose in scene.objects
        ],
    }
    return json.dumps(doc, indent=2)


def rasterize(scene: Scene) -> np.ndarray:
    """224x224 occupancy grid by cell-center containment.

    grid[i, j] covers x in [j, j+1)*CELL_CM, y in [i, i+1)*CELL_CM; values are
    BACKGROUND / CLUTTER / TARGET. Later objects never overwrite the target.
    """
    grid = np.zeros((GRID_N, GRID_N), dtype=np.uint8)
    xs = (np.arange(GRID_N) + 0.5) * CELL_CM
    for idx in range(scene.n):
        poly = scene.world_poly(idx)
        label = TARGET if scene.spec(idx).is_target else CLUTTER
        xmin, ymin, xmax, ymax = poly.bbox()
        j0 = max(0, int(xmin / CELL_CM) - 1)
        j1 = min(GRID_N, int(xmax / CELL_CM) + 2)
        i0 = max(0, int(ymin / CELL_CM) - 1)
        i1 = min(GRID_N, int(ymax / CELL_CM) + 2)
        v = poly.vertices
        e = np.roll(v, -1, axis=0) - v
        px, py = np.meshgrid(xs[j0:j1], xs[i0:i1])
        inside = np.ones(px.shape, dtype=bool)
        for k in range(poly.n):
            inside &= e[k, 0] * (py - v[k, 1]) - e[k, 1] * (px - v[k, 0]) > 0.0
        grid[i0:i1, j0:j1][inside] = label
    return grid


# --- SVG rendering ---------------------------------------------------------

_SVG_SCALE = 10.0  # px per cm

_STYLE_TARGET = 'fill="#7b4fb5" stroke="#3c2066" stroke-width="1"'
_STYLE_CLUTTER = 'fill="#caa472" stroke="#6e5433" stroke-width="1"'
_STYLE_ARROW = 'stroke="#9b30d0" stroke-width="3" fill="none" marker-end="url(#tip)"'


@dataclass(frozen=True)
class ArrowAnnotation:
    start: Vec2
    end: Vec2


@dataclass(frozen=True)
class GraspAnnotation:
    position: Vec2
    theta: float
    opening: float = 8.5


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_svg(scene: Scene, annotations=()) -> str:
    """Deterministic SVG document; same scene and annotations, same bytes."""
    side = scene.workspace * _SVG_SCALE
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(side)}" '
        f'height="{_fmt(side)}" viewBox="0 0 {_fmt(side)} {_fmt(side)}">',
        "<defs>"
        '<marker id="tip" markerWidth="8" markerHeight="8" refX="6" refY="3" orient="auto">'
        '<path d="M0,0 L6,3 L0,6 z" fill="#9b30d0"/></marker>'
        "</defs>",
        f'<rect x="0" y="0" width="{_fmt(side)}" height="{_fmt(side)}" '
        'fill="#f4f0e8" stroke="#404040" stroke-width="2"/>',
    ]

    def pt(p: Vec2) -> str:
        # svg y grows downward
        return f"{_fmt(p.x * _SVG_SCALE)},{_fmt(side - p.y * _SVG_SCALE)}"

    for i in range(scene.n):
        poly = scene.world_poly(i)
        style = _STYLE_TARGET if scene.spec(i).is_target else _STYLE_CLUTTER
        pts = " ".join(pt(Vec2(float(x), float(y))) for x, y in poly.vertices)
        out.append(f'<polygon points="{pts}" {style}/>')
        pos = scene.pose(i).position
        out.append(
            f'<text x="{_fmt(pos.x * _SVG_SCALE)}" y="{_fmt(side - pos.y * _SVG_SCALE)}" '
            'font-size="10" text-anchor="middle" fill="#202020">'
            f"{scene.spec(i).id}</text>"
        )
    for ann in annotations:
        if isinstance(ann, ArrowAnnotation):
            out.append(f'<polyline points="{pt(ann.start)} {pt(ann.end)}" {_STYLE_ARROW}/>')
        elif isinstance(ann, GraspAnnotation):
            half = 0.5 * ann.opening
            ux = math.cos(ann.theta)
            uy = math.sin(ann.theta)
            a = Vec2(ann.position.x - half * ux, ann.position.y - half * uy)
            b = Vec2(ann.position.x + half * ux, ann.position.y + half * uy)
            out.append(
                f'<polyline points="{pt(a)} {pt(b)}" stroke="#1c7a30" '
                'stroke-width="2" stroke-dasharray="4,3" fill="none"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"
