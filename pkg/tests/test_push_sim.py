import math

import numpy as np
import pytest

from clutterpush.geometry import (ConvexPolygon, Pose2D, Vec2, intersects,
                                  transform)
from clutterpush.push_sim import (EFFECTIVE_PUSH_CM, GripperFootprint,
                                  InvalidPushError, PushAction, SimParams,
                                  convergence_cases, effective_push_action,
                                  simulate_push)
from clutterpush.scene import WORKSPACE_CM, ObjectSpec, Scene

PARAMS = SimParams()


def _scene(*objs):
    s = Scene(tuple(objs), WORKSPACE_CM)
    s.validate()
    return s


def _obj(oid, w, h, x, y, th=0.0, target=False):
    return (ObjectSpec(id=oid, shape=ConvexPolygon.box(w, h), is_target=target),
            Pose2D(Vec2(x, y), th))


def _single_square():
    return _scene(_obj("t", 4, 4, 22.4, 22.4, target=True))


def test_push_through_empty_space():
    s = _single_square()
    res = simulate_push(s, PushAction(Vec2(5, 5), Vec2(10, 5)), PARAMS)
    assert res.contacted == (False,)
    assert not res.truncated
    assert res.scene_after.pose(0).position.x == s.pose(0).position.x
    assert res.deltas[0].position.norm() == 0.0


def test_centroid_push_translates_without_rotation():
    s = _single_square()
    # push line through the centroid, from the left, 5 cm past first contact
    act = effective_push_action(s, Vec2(20.4, 22.4), Vec2(1, 0), PARAMS)
    assert act is not None
    res = simulate_push(s, act, PARAMS)
    d = res.deltas[0]
    assert abs(math.degrees(d.heading)) < 1.0
    assert abs(d.position.y) < 0.2
    # fine-substep oracle for the translation magnitude
    fine = simulate_push(s, act, SimParams(substep=0.01))
    ref = fine.deltas[0].position.x
    assert ref > 3.0  # sanity: the object clearly moved
    assert abs(d.position.x - ref) <= 0.05 * ref


def test_flush_pair_propagates():
    s = _scene(_obj("a", 4, 4, 18.4, 22.4, target=True),
               _obj("b", 4, 4, 22.4, 22.4))
    act = effective_push_action(s, Vec2(16.4, 22.4), Vec2(1, 0), PARAMS)
    res = simulate_push(s, act, PARAMS)
    assert res.contacted == (True, True)
    xa = res.scene_after.pose(0).position.x
    xb = res.scene_after.pose(1).position.x
    assert xa > 18.4 and xb > 22.4
    assert xb >= xa + 4 - 1e-3
    pa = res.scene_after.world_poly(0)
    pb = res.scene_after.world_poly(1)
    assert not intersects(pa, pb)


def test_effective_push_geometry():
    s = _single_square()
    act = effective_push_action(s, Vec2(20.4, 22.4), Vec2(1, 0), PARAMS)
    standoff = PARAMS.footprint.depth / 2 + 0.5
    assert abs(act.start.x - (20.4 - standoff)) < 1e-9
    assert abs(act.start.y - 22.4) < 1e-9
    # end sits 5 cm past the contact point: travel - standoff = 5 exactly
    assert abs(act.travel - standoff - EFFECTIVE_PUSH_CM) < 1e-9


def test_effective_push_blocked_returns_none():
    objs = [_obj("t", 4, 4, 22.4, 22.4, target=True)]
    k = 0
    for dx in (-4, 0, 4):
        for dy in (-4, 0, 4):
            if dx == dy == 0:
                continue
            objs.append(_obj(f"n{k}", 4, 4, 22.4 + dx, 22.4 + dy))
            k += 1
    # second wall west of the ring: the 3 cm retraction budget cannot clear it
    objs.append(_obj("w", 4, 12, 14.4, 22.4))
    s = _scene(*objs)
    assert effective_push_action(s, Vec2(20.4, 22.4), Vec2(1, 0), PARAMS) is None


def test_invalid_push_rejected():
    s = _single_square()
    with pytest.raises(InvalidPushError):
        simulate_push(s, PushAction(Vec2(22.4, 22.4), Vec2(30, 22.4)), PARAMS)
    with pytest.raises(InvalidPushError):
        simulate_push(s, PushAction(Vec2(-1, 5), Vec2(5, 5)), PARAMS)


def test_determinism():
    s = _scene(_obj("a", 4, 3, 18.4, 22.4, 0.2, target=True),
               _obj("b", 3, 5, 23.6, 23.0, -0.4))
    act = effective_push_action(s, Vec2(16.5, 22.0), Vec2(1, 0.1), PARAMS)
    r1 = simulate_push(s, act, PARAMS)
    r2 = simulate_push(s, act, PARAMS)
    for i in range(s.n):
        p1, p2 = r1.scene_after.pose(i), r2.scene_after.pose(i)
        assert p1.position.x == p2.position.x
        assert p1.position.y == p2.position.y
        assert p1.heading == p2.heading
    assert r1.contacted == r2.contacted


def test_substep_halving_stays_within_hash_bins():
    # final poses must land in the same scene-hash bin (0.05 cm / 0.5 deg)
    # when the integration substep is halved
    for name, scene, act in convergence_cases():
        coarse = simulate_push(scene, act, SimParams(substep=0.1)).scene_after
        fine = simulate_push(scene, act, SimParams(substep=0.05)).scene_after
        for i in range(scene.n):
            pc, pf = coarse.pose(i), fine.pose(i)
            dp = (pc.position - pf.position).norm()
            dth = abs(pc.heading - pf.heading) % (2 * math.pi)
            dth = min(dth, 2 * math.pi - dth)
            assert dp < 0.05, (name, i, dp)
            assert math.degrees(dth) < 0.5, (name, i, dth)


def _random_packed(rng):
    for _ in range(50):
        objs = []
        cx, cy = rng.uniform(16, 28, 2)
        n = rng.integers(2, 5)
        placed = []
        for i in range(n):
            w, h = rng.uniform(2.5, 5, 2)
            x = cx + rng.uniform(-6, 6)
            y = cy + rng.uniform(-6, 6)
            th = rng.uniform(-0.5, 0.5)
            poly = transform(ConvexPolygon.box(w, h), Pose2D(Vec2(x, y), th))
            if any(intersects(poly, q) for q in placed):
                continue
            placed.append(poly)
            objs.append(_obj(f"o{i}", w, h, x, y, th, target=(not objs)))
        if objs:
            try:
                return _scene(*objs)
            except Exception:
                continue
    raise RuntimeError("could not build a random scene")


def test_fuzz_validity_progress_locality():
    rng = np.random.default_rng(23)
    for _ in range(60):
        s = _random_packed(rng)
        i = int(rng.integers(s.n))
        c = s.pose(i).position
        ang = rng.uniform(0, 2 * math.pi)
        d = Vec2(math.cos(ang), math.sin(ang))
        bx0, by0, bx1, by1 = s.world_poly(i).bbox()
        edge = Vec2(c.x - d.x * 6, c.y - d.y * 6)
        act = effective_push_action(s, edge, d, PARAMS)
        if act is None:
            continue
        try:
            res = simulate_push(s, act, PARAMS)
        except InvalidPushError:
            continue
        after = res.scene_after
        after.validate()  # no interpenetration, inside workspace
        total = sum(dl.position.norm() for dl in res.deltas)
        for j in range(s.n):
            if res.direct[j]:
                # forward progress for directly pushed objects
                assert res.deltas[j].position.dot(act.direction) >= -1e-6
            if not res.contacted[j]:
                assert res.deltas[j].position.norm() == 0.0
                assert res.deltas[j].heading == 0.0
