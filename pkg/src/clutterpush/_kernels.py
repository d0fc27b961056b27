"""Numba-compiled geometry and simulation kernels.

Everything in here operates on padded float64 vertex arrays so the hot loops
(push resolution, grasp feasibility scans) run in machine code. The public
modules wrap these kernels with friendlier types; they should be the only
callers.

Conventions:
  - polygons are CCW vertex arrays of shape (MAX_VERTS, 2), with the actual
    vertex count carried separately
  - a "scene array" is (nobj, MAX_VERTS, 2) plus an int64 count vector
  - the minimum-translation vector returned by `sat_mtv` moves polygon B out
    of polygon A
"""

import math

import numpy as np
from numba import njit

MAX_VERTS = 32
# a MAX_VERTS-gon dilated by a box gains at most 4 vertices
DIL_VERTS = MAX_VERTS + 8

_TIE_TOL = 1e-12


@njit(cache=True)
def poly_bbox(verts, n):
    xmin = verts[0, 0]
    xmax = verts[0, 0]
    ymin = verts[0, 1]
    ymax = verts[0, 1]
    for i in range(1, n):
        x = verts[i, 0]
        y = verts[i, 1]
        if x < xmin:
            xmin = x
        if x > xmax:
            xmax = x
        if y < ymin:
            ymin = y
        if y > ymax:
            ymax = y
    return xmin, ymin, xmax, ymax


@njit(cache=True)
def _project(verts, n, ax, ay):
    lo = verts[0, 0] * ax + verts[0, 1] * ay
    hi = lo
    for i in range(1, n):
        d = verts[i, 0] * ax + verts[i, 1] * ay
        if d < lo:
            lo = d
        if d > hi:
            hi = d
    return lo, hi


@njit(cache=True)
def sat_mtv(va, na, vb, nb):
    """Minimum translation vector over the SAT axes of both polygons.

    Returns (depth, dx, dy): moving B by depth*(dx, dy) separates the pair.
    depth <= 0 means the interiors do not overlap. Per axis the push
    distance is the full interval clearance (hia - lob toward +axis,
    hib - loa toward -axis), not the projected overlap, so a contained
    interval still clears in one move. Ties between the two signs prefer
    the canonical +axis; ties between axes prefer the lexicographically
    largest direction (+x first, then +y).
    """
    best = np.inf
    bx = 0.0
    by = 0.0
    for which in range(2):
        if which == 0:
            verts, n = va, na
        else:
            verts, n = vb, nb
        for i in range(n):
            j = i + 1
            if j == n:
                j = 0
            ex = verts[j, 0] - verts[i, 0]
            ey = verts[j, 1] - verts[i, 1]
            ln = math.sqrt(ex * ex + ey * ey)
            if ln < 1e-15:
                continue
            # outward normal for CCW winding, canonicalized to x>0 / +y
            ax = ey / ln
            ay = -ex / ln
            if ax < -_TIE_TOL or (abs(ax) <= _TIE_TOL and ay < 0.0):
                ax = -ax
                ay = -ay
            loa, hia = _project(va, na, ax, ay)
            lob, hib = _project(vb, nb, ax, ay)
            o = min(hia, hib) - max(loa, lob)
            if o <= 0.0:
                return o, 0.0, 0.0
            d_pos = hia - lob
            d_neg = hib - loa
            if d_pos <= d_neg + _TIE_TOL:
                d = d_pos
                sx = ax
                sy = ay
            else:
                d = d_neg
                sx = -ax
                sy = -ay
            if d < best - _TIE_TOL:
                best = d
                bx = sx
                by = sy
            elif d < best + _TIE_TOL:
                if sx > bx + _TIE_TOL or (abs(sx - bx) <= _TIE_TOL and sy > by + _TIE_TOL):
                    bx = sx
                    by = sy
    if not np.isfinite(best):
        return -1.0, 0.0, 0.0
    return best, bx, by


@njit(cache=True)
def sat_depth(va, na, vb, nb):
    """Penetration depth only (min projected overlap over all SAT axes)."""
    best = np.inf
    for which in range(2):
        if which == 0:
            verts, n = va, na
        else:
            verts, n = vb, nb
        for i in range(n):
            j = i + 1
            if j == n:
                j = 0
            ex = verts[j, 0] - verts[i, 0]
            ey = verts[j, 1] - verts[i, 1]
            ln = math.sqrt(ex * ex + ey * ey)
            if ln < 1e-15:
                continue
            ax = ey / ln
            ay = -ex / ln
            loa, hia = _project(va, na, ax, ay)
            lob, hib = _project(vb, nb, ax, ay)
            o = min(hia, hib) - max(loa, lob)
            if o < best:
                best = o
            if best <= 0.0:
                return best
    return best


@njit(cache=True)
def poly_area_centroid(verts, n):
    a2 = 0.0
    cx = 0.0
    cy = 0.0
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        cr = verts[i, 0] * verts[j, 1] - verts[j, 0] * verts[i, 1]
        a2 += cr
        cx += (verts[i, 0] + verts[j, 0]) * cr
        cy += (verts[i, 1] + verts[j, 1]) * cr
    area = 0.5 * a2
    if abs(area) < 1e-12:
        # degenerate: fall back to the vertex mean
        cx = 0.0
        cy = 0.0
        for i in range(n):
            cx += verts[i, 0]
            cy += verts[i, 1]
        return area, cx / n, cy / n
    return area, cx / (3.0 * a2), cy / (3.0 * a2)


@njit(cache=True)
def clip_contact(subj, ns, clip, nc, ux, uy):
    """Contact point of two overlapping convex polygons for a push along (ux, uy).

    Sutherland-Hodgman clip of `subj` against `clip`, then the center of the
    overlap region's bounding box in the push-aligned frame; returns
    (ok, cx, cy), ok=False when the intersection is (numerically) empty.

    The extent midpoint, not the area centroid, is deliberate: a nearly flush
    face contact produces a wedge-shaped overlap whose area centroid drifts
    toward the deep corner by an amount inversely proportional to the
    penetration depth. Torque about that point grows as the substep shrinks
    and refinement then diverges. The lateral extent of the overlap is stable
    under refinement, so torques converge with the substep.
    """
    cur = np.empty((2 * MAX_VERTS, 2))
    nxt = np.empty((2 * MAX_VERTS, 2))
    m = ns
    for i in range(ns):
        cur[i, 0] = subj[i, 0]
        cur[i, 1] = subj[i, 1]
    for e in range(nc):
        f = e + 1
        if f == nc:
            f = 0
        ex = clip[f, 0] - clip[e, 0]
        ey = clip[f, 1] - clip[e, 1]
        k = 0
        for i in range(m):
            j = i + 1
            if j == m:
                j = 0
            # "inside" = left of the CCW clip edge
            di = ex * (cur[i, 1] - clip[e, 1]) - ey * (cur[i, 0] - clip[e, 0])
            dj = ex * (cur[j, 1] - clip[e, 1]) - ey * (cur[j, 0] - clip[e, 0])
            if di >= 0.0:
                nxt[k, 0] = cur[i, 0]
                nxt[k, 1] = cur[i, 1]
                k += 1
            if (di > 0.0 and dj < 0.0) or (di < 0.0 and dj > 0.0):
                t = di / (di - dj)
                nxt[k, 0] = cur[i, 0] + t * (cur[j, 0] - cur[i, 0])
                nxt[k, 1] = cur[i, 1] + t * (cur[j, 1] - cur[i, 1])
                k += 1
        m = k
        if m == 0:
            return False, 0.0, 0.0
        tmp = cur
        cur = nxt
        nxt = tmp
    s0 = cur[0, 0] * ux + cur[0, 1] * uy
    s1 = s0
    t0 = cur[0, 0] * uy - cur[0, 1] * ux
    t1 = t0
    for i in range(1, m):
        s = cur[i, 0] * ux + cur[i, 1] * uy
        t = cur[i, 0] * uy - cur[i, 1] * ux
        if s < s0:
            s0 = s
        elif s > s1:
            s1 = s
        if t < t0:
            t0 = t
        elif t > t1:
            t1 = t
    sm = 0.5 * (s0 + s1)
    tm = 0.5 * (t0 + t1)
    return True, sm * ux + tm * uy, sm * uy - tm * ux


@njit(cache=True)
def inside_margin(verts, n, px, py, eps):
    """True when (px, py) is inside the CCW polygon by more than eps."""
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        ex = verts[j, 0] - verts[i, 0]
        ey = verts[j, 1] - verts[i, 1]
        ln = math.sqrt(ex * ex + ey * ey)
        if ln < 1e-15:
            continue
        cr = ex * (py - verts[i, 1]) - ey * (px - verts[i, 0])
        if cr <= eps * ln:
            return False
    return True


@njit(cache=True)
def convex_hull(pts, n, out):
    """Andrew's monotone chain; returns CCW hull vertex count written to out."""
    order = np.empty(n, dtype=np.int64)
    for i in range(n):
        order[i] = i
    # insertion sort by (x, y); n stays small enough that this is fine
    for i in range(1, n):
        k = order[i]
        j = i - 1
        while j >= 0 and (
            pts[order[j], 0] > pts[k, 0]
            or (pts[order[j], 0] == pts[k, 0] and pts[order[j], 1] > pts[k, 1])
        ):
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = k
    hull = np.empty(2 * n, dtype=np.int64)
    k = 0
    for ii in range(n):
        p = order[ii]
        while k >= 2:
            ax = pts[hull[k - 1], 0] - pts[hull[k - 2], 0]
            ay = pts[hull[k - 1], 1] - pts[hull[k - 2], 1]
            bx = pts[p, 0] - pts[hull[k - 2], 0]
            by = pts[p, 1] - pts[hull[k - 2], 1]
            if ax * by - ay * bx <= 0.0:
                k -= 1
            else:
                break
        hull[k] = p
        k += 1
    lower = k + 1
    for ii in range(n - 2, -1, -1):
        p = order[ii]
        while k >= lower:
            ax = pts[hull[k - 1], 0] - pts[hull[k - 2], 0]
            ay = pts[hull[k - 1], 1] - pts[hull[k - 2], 1]
            bx = pts[p, 0] - pts[hull[k - 2], 0]
            by = pts[p, 1] - pts[hull[k - 2], 1]
            if ax * by - ay * bx <= 0.0:
                k -= 1
            else:
                break
        hull[k] = p
        k += 1
    m = k - 1
    for i in range(m):
        out[i, 0] = pts[hull[i], 0]
        out[i, 1] = pts[hull[i], 1]
    return m


@njit(cache=True)
def dilate_rect(verts, n, hx, hy, out):
    """Minkowski sum of a convex polygon with an axis-aligned box (2hx x 2hy)."""
    pts = np.empty((4 * MAX_VERTS, 2))
    k = 0
    for i in range(n):
        x = verts[i, 0]
        y = verts[i, 1]
        pts[k, 0] = x - hx
        pts[k, 1] = y - hy
        pts[k + 1, 0] = x + hx
        pts[k + 1, 1] = y - hy
        pts[k + 2, 0] = x + hx
        pts[k + 2, 1] = y + hy
        pts[k + 3, 0] = x - hx
        pts[k + 3, 1] = y + hy
        k += 4
    return convex_hull(pts, k, out)


# ---------------------------------------------------------------------------
# Grasp feasibility
#
# A grasp at grid cell center p with closing axis theta is evaluated in the
# frame rotated by -theta, where the closing axis is +x. Rectangle-vs-polygon
# interior overlap is reduced to a point test: the rectangle (half sizes
# hx, hy) centered at c overlaps a polygon iff c lies strictly inside the
# polygon dilated by the same box. Per theta and object we therefore build
#   - the finger box dilation (both finger centers are tested against it)
#   - the closing-channel dilation (the region swept between the fingers)
# and a grasp is feasible iff the cell center is inside the target's channel
# dilation, both finger centers clear every object, and the channel clears
# every non-target object.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _hp_from_poly(dil, nd, eps, hp, bb):
    """Half-plane rows (ex, ey, off, eps*len) plus the bbox for quick rejects.

    A point is strictly inside by margin eps iff ex*py - ey*px - off > eps*len
    for every edge -- the same predicate as `inside_margin`, with the
    edge-dependent parts hoisted out of the per-cell loop.
    """
    bb[0], bb[1], bb[2], bb[3] = poly_bbox(dil, nd)
    for i in range(nd):
        j = i + 1
        if j == nd:
            j = 0
        ex = dil[j, 0] - dil[i, 0]
        ey = dil[j, 1] - dil[i, 1]
        ln = math.sqrt(ex * ex + ey * ey)
        if ln < 1e-15:
            # degenerate edge: a row that every point passes
            hp[i, 0] = 0.0
            hp[i, 1] = 0.0
            hp[i, 2] = -1.0
            hp[i, 3] = 0.0
            continue
        hp[i, 0] = ex
        hp[i, 1] = ey
        hp[i, 2] = ex * dil[i, 1] - ey * dil[i, 0]
        hp[i, 3] = eps * ln


@njit(cache=True)
def _inside_hp(hp, nd, px, py):
    for i in range(nd):
        if hp[i, 0] * py - hp[i, 1] * px - hp[i, 2] <= hp[i, 3]:
            return False
    return True


@njit(cache=True)
def _grasp_prep_theta(polys, nvs, nobj, theta, hxf, hyf, hxc, hyc, eps,
                      dil_f, nf, dil_c, nch, hp_f, bb_f, hp_c, bb_c):
    c = math.cos(theta)
    s = math.sin(theta)
    rot = np.empty((MAX_VERTS, 2))
    for k in range(nobj):
        n = nvs[k]
        for i in range(n):
            x = polys[k, i, 0]
            y = polys[k, i, 1]
            # R(-theta)
            rot[i, 0] = c * x + s * y
            rot[i, 1] = -s * x + c * y
        nf[k] = dilate_rect(rot, n, hxf, hyf, dil_f[k])
        nch[k] = dilate_rect(rot, n, hxc, hyc, dil_c[k])
        _hp_from_poly(dil_f[k], nf[k], eps, hp_f[k], bb_f[k])
        _hp_from_poly(dil_c[k], nch[k], eps, hp_c[k], bb_c[k])
    return c, s


@njit(cache=True)
def _target_width(polys, nvs, tgt, c, s):
    """Projection width of the target onto the closing axis (theta direction)."""
    lo = np.inf
    hi = -np.inf
    for i in range(nvs[tgt]):
        p = c * polys[tgt, i, 0] + s * polys[tgt, i, 1]
        if p < lo:
            lo = p
        if p > hi:
            hi = p
    return hi - lo


@njit(cache=True)
def _cell_ok(px, py, nobj, tgt, half_open, hp_f, nf, bb_f, hp_c, nch, bb_c):
    if px <= bb_c[tgt, 0] or px >= bb_c[tgt, 2] or \
            py <= bb_c[tgt, 1] or py >= bb_c[tgt, 3]:
        return False
    if not _inside_hp(hp_c[tgt], nch[tgt], px, py):
        return False
    pxp = px + half_open
    pxm = px - half_open
    for k in range(nobj):
        if bb_f[k, 1] < py < bb_f[k, 3]:
            if bb_f[k, 0] < pxp < bb_f[k, 2] and _inside_hp(hp_f[k], nf[k], pxp, py):
                return False
            if bb_f[k, 0] < pxm < bb_f[k, 2] and _inside_hp(hp_f[k], nf[k], pxm, py):
                return False
        if k != tgt and bb_c[k, 0] < px < bb_c[k, 2] and \
                bb_c[k, 1] < py < bb_c[k, 3] and \
                _inside_hp(hp_c[k], nch[k], px, py):
            return False
    return True


@njit(cache=True)
def _theta_cell_range(dil_t, nt, c, s, cell, grid_n):
    # world-frame bbox of the rotated-back target channel region
    xmin = np.inf
    xmax = -np.inf
    ymin = np.inf
    ymax = -np.inf
    for i in range(nt):
        # R(theta) back to world
        x = c * dil_t[i, 0] - s * dil_t[i, 1]
        y = s * dil_t[i, 0] + c * dil_t[i, 1]
        if x < xmin:
            xmin = x
        if x > xmax:
            xmax = x
        if y < ymin:
            ymin = y
        if y > ymax:
            ymax = y
    j0 = max(0, int(math.floor(xmin / cell)) - 1)
    j1 = min(grid_n, int(math.ceil(xmax / cell)) + 1)
    i0 = max(0, int(math.floor(ymin / cell)) - 1)
    i1 = min(grid_n, int(math.ceil(ymax / cell)) + 1)
    return i0, i1, j0, j1


@njit(cache=True)
def grasp_scan(polys, nvs, nobj, tgt, n_theta, max_opening, finger_thickness,
               finger_width, clearance, eps, grid_n, cell, fill_map, out_map):
    """Scan grasp feasibility over the grid.

    With fill_map=True writes the full (n_theta, grid_n, grid_n) binary map.
    Always returns (found, theta_idx, i, j) for the first feasible grasp in
    (theta, row-major cell) order, or (False, -1, -1, -1).
    """
    hxf = 0.5 * finger_thickness + clearance
    hyf = 0.5 * finger_width + clearance
    hxc = 0.5 * (max_opening - finger_thickness) + clearance
    hyc = 0.5 * finger_width + clearance
    half_open = 0.5 * max_opening
    dil_f = np.empty((nobj, DIL_VERTS, 2))
    dil_c = np.empty((nobj, DIL_VERTS, 2))
    nf = np.empty(nobj, dtype=np.int64)
    nch = np.empty(nobj, dtype=np.int64)
    hp_f = np.empty((nobj, DIL_VERTS, 4))
    hp_c = np.empty((nobj, DIL_VERTS, 4))
    bb_f = np.empty((nobj, 4))
    bb_c = np.empty((nobj, 4))
    found = False
    ft = -1
    fi = -1
    fj = -1
    for t in range(n_theta):
        theta = t * math.pi / n_theta
        c, s = _grasp_prep_theta(polys, nvs, nobj, theta, hxf, hyf, hxc, hyc,
                                 eps, dil_f, nf, dil_c, nch,
                                 hp_f, bb_f, hp_c, bb_c)
        if _target_width(polys, nvs, tgt, c, s) > max_opening - 2.0 * clearance + eps:
            continue
        i0, i1, j0, j1 = _theta_cell_range(dil_c[tgt], nch[tgt], c, s, cell, grid_n)
        for i in range(i0, i1):
            wy = (i + 0.5) * cell
            for j in range(j0, j1):
                wx = (j + 0.5) * cell
                px = c * wx + s * wy
                py = -s * wx + c * wy
                if _cell_ok(px, py, nobj, tgt, half_open,
                            hp_f, nf, bb_f, hp_c, nch, bb_c):
                    if not found:
                        found = True
                        ft = t
                        fi = i
                        fj = j
                        if not fill_map:
                            return found, ft, fi, fj
                    if fill_map:
                        out_map[t, i, j] = 1
    return found, ft, fi, fj


@njit(cache=True)
def grasp_single(polys, nvs, nobj, tgt, n_theta, t_idx, i, j, max_opening,
                 finger_thickness, finger_width, clearance, eps, cell):
    """Feasibility of one (cell, theta) grasp; same arithmetic as grasp_scan."""
    hxf = 0.5 * finger_thickness + clearance
    hyf = 0.5 * finger_width + clearance
    hxc = 0.5 * (max_opening - finger_thickness) + clearance
    hyc = 0.5 * finger_width + clearance
    dil_f = np.empty((nobj, DIL_VERTS, 2))
    dil_c = np.empty((nobj, DIL_VERTS, 2))
    nf = np.empty(nobj, dtype=np.int64)
    nch = np.empty(nobj, dtype=np.int64)
    hp_f = np.empty((nobj, DIL_VERTS, 4))
    hp_c = np.empty((nobj, DIL_VERTS, 4))
    bb_f = np.empty((nobj, 4))
    bb_c = np.empty((nobj, 4))
    theta = t_idx * math.pi / n_theta
    c, s = _grasp_prep_theta(polys, nvs, nobj, theta, hxf, hyf, hxc, hyc,
                             eps, dil_f, nf, dil_c, nch,
                             hp_f, bb_f, hp_c, bb_c)
    if _target_width(polys, nvs, tgt, c, s) > max_opening - 2.0 * clearance + eps:
        return False
    wx = (j + 0.5) * cell
    wy = (i + 0.5) * cell
    px = c * wx + s * wy
    py = -s * wx + c * wy
    return _cell_ok(px, py, nobj, tgt, 0.5 * max_opening,
                    hp_f, nf, bb_f, hp_c, nch, bb_c)


# ---------------------------------------------------------------------------
# Quasi-static push resolution
#
# The gripper sweep rectangle advances in fixed substeps. Each substep,
# objects penetrated by the gripper are displaced out along the MTV, then
# object-object penetrations are resolved by propagating MTVs until a fixed
# point (or the iteration cap, in which case the substep is reverted and the
# motion truncated). Displaced objects pick up a rotation about the contact
# centroid proportional to the tangential lever-arm angle.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _clamp_disp(verts, n, dx, dy, ws_lo, ws_hi):
    xmin, ymin, xmax, ymax = poly_bbox(verts, n)
    if xmin + dx < ws_lo:
        dx = ws_lo - xmin
    if xmax + dx > ws_hi:
        dx = ws_hi - xmax
    if ymin + dy < ws_lo:
        dy = ws_lo - ymin
    if ymax + dy > ws_hi:
        dy = ws_hi - ymax
    return dx, dy


@njit(cache=True)
def _apply_disp(polys, nvs, cents, dths, k, dx, dy, cpx, cpy,
                rot_gain, ws_lo, ws_hi):
    n = nvs[k]
    dx, dy = _clamp_disp(polys[k], n, dx, dy, ws_lo, ws_hi)
    for i in range(n):
        polys[k, i, 0] += dx
        polys[k, i, 1] += dy
    lx = cents[k, 0] - cpx
    ly = cents[k, 1] - cpy
    cents[k, 0] += dx
    cents[k, 1] += dy
    if rot_gain > 0.0:
        ll = math.sqrt(lx * lx + ly * ly)
        if ll > 1e-9:
            # angle subtended by the tangential displacement at the centroid
            tang = lx * dy - ly * dx
            dth = rot_gain * math.atan2(tang, ll * ll)
            if dth != 0.0:
                rx = cpx + dx
                ry = cpy + dy
                cth = math.cos(dth)
                sth = math.sin(dth)
                for i in range(n):
                    x = polys[k, i, 0] - rx
                    y = polys[k, i, 1] - ry
                    polys[k, i, 0] = rx + cth * x - sth * y
                    polys[k, i, 1] = ry + sth * x + cth * y
                x = cents[k, 0] - rx
                y = cents[k, 1] - ry
                cents[k, 0] = rx + cth * x - sth * y
                cents[k, 1] = ry + sth * x + cth * y
                dths[k] += dth
                # rotation may poke past a wall; translate back inside
                fx, fy = _clamp_disp(polys[k], n, 0.0, 0.0, ws_lo, ws_hi)
                if fx != 0.0 or fy != 0.0:
                    for i in range(n):
                        polys[k, i, 0] += fx
                        polys[k, i, 1] += fy
                    cents[k, 0] += fx
                    cents[k, 1] += fy
    return dx, dy


@njit(cache=True)
def _bbox_near(pa, na, pb, nb, margin):
    axmin, aymin, axmax, aymax = poly_bbox(pa, na)
    bxmin, bymin, bxmax, bymax = poly_bbox(pb, nb)
    if axmin > bxmax + margin or bxmin > axmax + margin:
        return False
    if aymin > bymax + margin or bymin > aymax + margin:
        return False
    return True


@njit(cache=True)
def push_kernel(polys, nvs, nobj, cents, dths, sx, sy, ex, ey, wg, dg,
                substep, rot_gain, max_iters, eps, ws_lo, ws_hi,
                contacted, direct):
    """Run one push over the scene arrays, in place.

    Returns truncated=True when a substep failed to resolve; the arrays are
    then left at the last consistent substep.
    """
    ux = ex - sx
    uy = ey - sy
    length = math.sqrt(ux * ux + uy * uy)
    ux /= length
    uy /= length
    nsteps = int(math.ceil(length / substep))
    grip = np.empty((4, 2))
    cents0 = cents.copy()
    snap_polys = np.empty_like(polys)
    snap_cents = np.empty_like(cents)
    snap_dths = np.empty_like(dths)
    snap_contacted = np.empty_like(contacted)
    snap_direct = np.empty_like(direct)
    gcontact = np.empty(nobj, dtype=np.bool_)
    moved = np.empty(nobj, dtype=np.bool_)
    truncated = False
    hw = 0.5 * wg
    for step in range(1, nsteps + 1):
        t = step * substep
        if t > length:
            t = length
        # the action coordinate tracks the leading face of the sweep rectangle
        gx = sx + ux * t
        gy = sy + uy * t
        rx = gx - dg * ux
        ry = gy - dg * uy
        grip[0, 0] = rx + hw * uy
        grip[0, 1] = ry - hw * ux
        grip[1, 0] = gx + hw * uy
        grip[1, 1] = gy - hw * ux
        grip[2, 0] = gx - hw * uy
        grip[2, 1] = gy + hw * ux
        grip[3, 0] = rx - hw * uy
        grip[3, 1] = ry + hw * ux
        snap_polys[:] = polys
        snap_cents[:] = cents
        snap_dths[:] = dths
        snap_contacted[:] = contacted
        snap_direct[:] = direct
        for k in range(nobj):
            gcontact[k] = False
            moved[k] = False
        resolved = False
        for _ in range(max_iters):
            any_pen = False
            for k in range(nobj):
                if not _bbox_near(grip, 4, polys[k], nvs[k], eps):
                    continue
                depth, nx, ny = sat_mtv(grip, 4, polys[k], nvs[k])
                if depth <= eps:
                    continue
                any_pen = True
                dx = depth * nx
                dy = depth * ny
                # the gripper never pushes an object backward
                dd = dx * ux + dy * uy
                if dd < 0.0:
                    dx -= dd * ux
                    dy -= dd * uy
                dn = math.sqrt(dx * dx + dy * dy)
                if dn > 1e-12:
                    cux = dx / dn
                    cuy = dy / dn
                else:
                    cux = ux
                    cuy = uy
                ok, cpx, cpy = clip_contact(polys[k], nvs[k], grip, 4, cux, cuy)
                if not ok:
                    cpx = gx
                    cpy = gy
                _apply_disp(polys, nvs, cents, dths, k, dx, dy,
                            cpx, cpy, rot_gain, ws_lo, ws_hi)
                gcontact[k] = True
                direct[k] = True
                contacted[k] = True
                moved[k] = True
            for a in range(nobj):
                for b in range(a + 1, nobj):
                    if not (moved[a] or moved[b]):
                        continue
                    if not _bbox_near(polys[a], nvs[a], polys[b], nvs[b], eps):
                        continue
                    depth, nx, ny = sat_mtv(polys[a], nvs[a], polys[b], nvs[b])
                    if depth <= eps:
                        continue
                    any_pen = True
                    ok, cpx, cpy = clip_contact(polys[b], nvs[b], polys[a],
                                                nvs[a], nx, ny)
                    if not ok:
                        cpx = 0.5 * (cents[a, 0] + cents[b, 0])
                        cpy = 0.5 * (cents[a, 1] + cents[b, 1])
                    if moved[a] and not moved[b]:
                        sa = 0.0
                        sb = 1.0
                    elif moved[b] and not moved[a]:
                        sa = 1.0
                        sb = 0.0
                    else:
                        sa = 0.5
                        sb = 0.5
                    if sb > 0.0:
                        _apply_disp(polys, nvs, cents, dths, b,
                                    sb * depth * nx, sb * depth * ny,
                                    cpx, cpy, rot_gain, ws_lo, ws_hi)
                        contacted[b] = True
                        moved[b] = True
                    if sa > 0.0:
                        _apply_disp(polys, nvs, cents, dths, a,
                                    -sa * depth * nx, -sa * depth * ny,
                                    cpx, cpy, rot_gain, ws_lo, ws_hi)
                        contacted[a] = True
                        moved[a] = True
            # directly pushed objects never end up behind where they started
            # along the push direction (rotation about an off-center contact
            # can drift the centroid backward; treat that as a penetration of
            # a virtual wall at the starting position)
            for k in range(nobj):
                if not direct[k]:
                    continue
                back = ((cents[k, 0] - cents0[k, 0]) * ux
                        + (cents[k, 1] - cents0[k, 1]) * uy)
                if back < -1e-12:
                    any_pen = True
                    _apply_disp(polys, nvs, cents, dths, k,
                                -back * ux, -back * uy,
                                cents[k, 0], cents[k, 1], 0.0, ws_lo, ws_hi)
            if not any_pen:
                resolved = True
                break
        if not resolved:
            polys[:] = snap_polys
            cents[:] = snap_cents
            dths[:] = snap_dths
            contacted[:] = snap_contacted
            direct[:] = snap_direct
            truncated = True
            break
    return truncated


@njit(cache=True)
def footprint_penetrates(polys, nvs, nobj, cx, cy, ux, uy, wg, dg, eps):
    """True when the sweep rectangle with leading face at (cx, cy) overlaps any object."""
    grip = np.empty((4, 2))
    hw = 0.5 * wg
    rx = cx - dg * ux
    ry = cy - dg * uy
    grip[0, 0] = rx + hw * uy
    grip[0, 1] = ry - hw * ux
    grip[1, 0] = cx + hw * uy
    grip[1, 1] = cy - hw * ux
    grip[2, 0] = cx - hw * uy
    grip[2, 1] = cy + hw * ux
    grip[3, 0] = rx - hw * uy
    grip[3, 1] = ry + hw * ux
    for k in range(nobj):
        if not _bbox_near(grip, 4, polys[k], nvs[k], eps):
            continue
        if sat_depth(grip, 4, polys[k], nvs[k]) > eps:
            return True
    return False


@njit(cache=True)
def any_overlap(polys, nvs, nobj, eps):
    """Index pair of the first interior-overlapping pair, or (-1, -1)."""
    for a in range(nobj):
        for b in range(a + 1, nobj):
            if not _bbox_near(polys[a], nvs[a], polys[b], nvs[b], eps):
                continue
            if sat_depth(polys[a], nvs[a], polys[b], nvs[b]) > eps:
                return a, b
    return -1, -1


# ---------------------------------------------------------------------------
# Push-action candidate generation
#
# Per object, 12 candidate pushes: the exits of the +/- principal axis and
# its perpendicular from the centroid (aimed back at the centroid), plus 8
# contour points at equal arc spacing, also aimed at the centroid. Each
# candidate becomes a concrete start/end pair by retreating the start behind
# the contact until the sweep rectangle is collision-free, within a budget.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _principal_axis_k(verts, n):
    """Dominant eigenvector of the exact boundary covariance, x >= 0."""
    total = 0.0
    mx = 0.0
    my = 0.0
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        ln = math.hypot(verts[j, 0] - verts[i, 0], verts[j, 1] - verts[i, 1])
        total += ln
        mx += ln * 0.5 * (verts[i, 0] + verts[j, 0])
        my += ln * 0.5 * (verts[i, 1] + verts[j, 1])
    mx /= total
    my /= total
    cxx = 0.0
    cyy = 0.0
    cxy = 0.0
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        ax = verts[i, 0] - mx
        ay = verts[i, 1] - my
        bx = verts[j, 0] - mx
        by = verts[j, 1] - my
        ln = math.hypot(bx - ax, by - ay)
        cxx += ln * (ax * ax + bx * bx + ax * bx) / 3.0
        cyy += ln * (ay * ay + by * by + ay * by) / 3.0
        cxy += ln * (ax * ay + bx * by + 0.5 * (ax * by + bx * ay)) / 3.0
    cxx /= total
    cyy /= total
    cxy /= total
    dxx = cxx - cyy
    dxy = 2.0 * cxy
    spread = math.hypot(dxx, dxy)
    if spread <= 1e-9 * max(cxx + cyy, 1e-12):
        return 1.0, 0.0
    ang = 0.5 * math.atan2(dxy, dxx)
    x = math.cos(ang)
    y = math.sin(ang)
    if x < 0.0 or (x == 0.0 and y < 0.0):
        x = -x
        y = -y
    return x, y


@njit(cache=True)
def _ray_exit_k(verts, n, ox, oy, ux, uy):
    """Smallest t > 0 where ox,oy + t*u crosses the boundary (inf if none)."""
    t_exit = np.inf
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        nx = verts[j, 1] - verts[i, 1]
        ny = verts[i, 0] - verts[j, 0]
        den = nx * ux + ny * uy
        if den > 1e-12:
            t = (nx * (verts[i, 0] - ox) + ny * (verts[i, 1] - oy)) / den
            if t < t_exit:
                t_exit = t
    return t_exit


@njit(cache=True)
def _try_action(polys, nvs, nobj, px, py, dx, dy, wg, dg, push_len,
                base, rstep, rbudget, eps, ws, out, idx):
    ex = px + push_len * dx
    ey = py + push_len * dy
    if ex < 0.0 or ex > ws or ey < 0.0 or ey > ws:
        return False
    retract = 0.0
    while retract <= rbudget + 1e-9:
        sx = px - dx * (base + retract)
        sy = py - dy * (base + retract)
        if sx < 0.0 or sx > ws or sy < 0.0 or sy > ws:
            return False
        if not footprint_penetrates(polys, nvs, nobj, sx, sy, dx, dy,
                                    wg, dg, eps):
            out[idx, 0] = sx
            out[idx, 1] = sy
            out[idx, 2] = ex
            out[idx, 3] = ey
            return True
        retract += rstep
    return False


@njit(cache=True)
def action_space_kernel(polys, nvs, cents, nobj, order, wg, dg, push_len,
                        base, rstep, rbudget, eps, ws, out, valid):
    """Fill (nobj*12, 4) start/end rows plus a validity mask.

    Rows follow the canonical order: objects as given by `order`, then the
    four axis candidates (+axis, -axis, +perp, -perp), then contour index.
    """
    cum = np.empty(MAX_VERTS + 1)
    idx = 0
    for oo in range(nobj):
        k = order[oo]
        n = nvs[k]
        cx = cents[k, 0]
        cy = cents[k, 1]
        axx, axy = _principal_axis_k(polys[k], n)
        for c4 in range(4):
            if c4 == 0:
                ux, uy = axx, axy
            elif c4 == 1:
                ux, uy = -axx, -axy
            elif c4 == 2:
                ux, uy = -axy, axx
            else:
                ux, uy = axy, -axx
            valid[idx] = False
            t = _ray_exit_k(polys[k], n, cx, cy, ux, uy)
            if np.isfinite(t) and t > 1e-9:
                px = cx + t * ux
                py = cy + t * uy
                dn = math.hypot(cx - px, cy - py)
                if dn >= 1e-9:
                    valid[idx] = _try_action(
                        polys, nvs, nobj, px, py,
                        (cx - px) / dn, (cy - py) / dn, wg, dg, push_len,
                        base, rstep, rbudget, eps, ws, out, idx)
            idx += 1
        # contour candidates: walk CCW from the lexicographically smallest
        # vertex at equal arc spacing
        st = 0
        for i in range(1, n):
            if polys[k, i, 0] < polys[k, st, 0] or (
                polys[k, i, 0] == polys[k, st, 0]
                and polys[k, i, 1] < polys[k, st, 1]
            ):
                st = i
        cum[0] = 0.0
        for i in range(n):
            a = (st + i) % n
            b = (st + i + 1) % n
            cum[i + 1] = cum[i] + math.hypot(polys[k, b, 0] - polys[k, a, 0],
                                             polys[k, b, 1] - polys[k, a, 1])
        per = cum[n]
        for mpt in range(8):
            valid[idx] = False
            sarc = per * mpt / 8.0
            e = n - 1
            for i in range(n):
                if sarc < cum[i + 1]:
                    e = i
                    break
            a = (st + e) % n
            b = (st + e + 1) % n
            el = cum[e + 1] - cum[e]
            tt = (sarc - cum[e]) / el
            px = polys[k, a, 0] + (polys[k, b, 0] - polys[k, a, 0]) * tt
            py = polys[k, a, 1] + (polys[k, b, 1] - polys[k, a, 1]) * tt
            dn = math.hypot(cx - px, cy - py)
            if dn >= 1e-9:
                valid[idx] = _try_action(
                    polys, nvs, nobj, px, py,
                    (cx - px) / dn, (cy - py) / dn, wg, dg, push_len,
                    base, rstep, rbudget, eps, ws, out, idx)
            idx += 1
    return idx
