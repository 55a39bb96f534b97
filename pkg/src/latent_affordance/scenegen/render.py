"""Depth-buffered renderer for randomized table scenes.

Every primitive is scan-converted by casting one ray per pixel center through
a pinhole camera and solving the analytic ray/surface intersection; the
nearest hit wins the depth test. The same pass yields the RGB image (Lambertian
shading of object-space procedural textures) and the affordance labels, so
labels can never disagree with what is visible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import CameraPose, Clutter, SceneSpec, Texture

EPS = 1e-9
AMBIENT = 0.3
BACKGROUND = np.array([0.62, 0.64, 0.66])
WALL_COLOR = BACKGROUND
FLOOR_COLOR = np.array([0.35, 0.33, 0.30])
# the room: x, y, z extents; the ceiling is open
ROOM = ((-0.35, 1.25), (-1.0, 1.0), (-0.75, 0.65))

# object ids in the id buffer
BG, ROOM_ID, TABLE_ID, CUP_ID, CLUTTER0 = -1, 0, 1, 2, 3
# label codes
NO_LABEL, WRAP_GRASP, CONTAIN = 0, 1, 2


@dataclass
class Buffers:
    depth: np.ndarray  # (H, W) ray parameter of the visible hit, inf for background
    obj: np.ndarray  # (H, W) object id
    label: np.ndarray  # (H, W) 0 none, 1 wrap-grasp, 2 contain
    normal: np.ndarray  # (H, W, 3) world normal facing the camera
    point: np.ndarray  # (H, W, 3) world hit point
    local: np.ndarray  # (H, W, 3) object-space hit point
    material: np.ndarray  # (H, W) index into the material list


def camera_rays(cam: CameraPose) -> np.ndarray:
    """Unit ray directions (H*W, 3), row-major, through pixel centers."""
    h, w = cam.image_size
    f, r, u = cam.basis()
    ys = np.arange(h) + 0.5 - h / 2.0
    xs = np.arange(w) + 0.5 - w / 2.0
    X, Y = np.meshgrid(xs, ys)
    D = cam.focal * f + X.reshape(-1, 1) * r - Y.reshape(-1, 1) * u
    return D / np.linalg.norm(D, axis=1, keepdims=True)


def project(cam: CameraPose, points) -> np.ndarray:
    """Pixel coordinates (col, row) of world points; inverse of ``camera_rays``."""
    f, r, u = cam.basis()
    rel = np.atleast_2d(points) - np.asarray(cam.position)
    z = rel @ f
    h, w = cam.image_size
    return np.stack([cam.focal * (rel @ r) / z + w / 2.0, -cam.focal * (rel @ u) / z + h / 2.0], axis=1)


# --- intersections: each returns t (N,), outward normal (N, 3) -------------


def _no_hit(n):
    return np.full(n, np.inf), np.zeros((n, 3))


def _plane_z(o, D, z0, inside):
    """Hits on the plane z = z0 restricted by ``inside(x, y)``."""
    t = np.full(len(D), np.inf)
    dz = D[:, 2]
    ok = np.abs(dz) > EPS
    tt = np.where(ok, (z0 - o[2]) / np.where(ok, dz, 1.0), -1.0)
    P = o + tt[:, None] * D
    hit = ok & (tt > EPS) & inside(P[:, 0], P[:, 1])
    t[hit] = tt[hit]
    n = np.zeros((len(D), 3))
    n[:, 2] = 1.0
    return t, n


def _sphere(o, D, center, radius):
    oc = o - center
    b = D @ oc
    c = oc @ oc - radius * radius
    disc = b * b - c
    t = np.full(len(D), np.inf)
    ok = disc >= 0
    s = np.sqrt(np.where(ok, disc, 0.0))
    t1, t2 = -b - s, -b + s
    t = np.where(ok & (t1 > EPS), t1, np.where(ok & (t2 > EPS), t2, np.inf))
    P = o + np.where(np.isfinite(t), t, 0.0)[:, None] * D
    n = (P - center) / radius
    return t, n


def _box_local(o, D, half):
    """Slab test for an axis-aligned box centered at the origin."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / D
        t0 = (-half - o) * inv
        t1 = (half - o) * inv
    tmin = np.minimum(t0, t1)
    tmax = np.maximum(t0, t1)
    tmin = np.where(np.isnan(tmin), -np.inf, tmin)
    tmax = np.where(np.isnan(tmax), np.inf, tmax)
    near = tmin.max(axis=1)
    far = tmax.min(axis=1)
    hit = (near <= far) & (far > EPS)
    t = np.where(hit, np.where(near > EPS, near, far), np.inf)
    axis = np.where(near > EPS, tmin.argmax(axis=1), tmax.argmin(axis=1))
    n = np.zeros((len(D), 3))
    rows = np.arange(len(D))
    n[rows, axis] = -np.sign(D[rows, axis])
    n[rows, axis] = np.where(near > EPS, n[rows, axis], -n[rows, axis])
    return t, n


def _frustum(o, D, cx, cy, h0, h1, r0, r1):
    """Lateral surface of a vertical truncated cone; normals point outward."""
    slope = (r1 - r0) / (h1 - h0)
    X0, Y0 = o[0] - cx, o[1] - cy
    a0 = r0 + slope * (o[2] - h0)
    a1 = slope * D[:, 2]
    A = D[:, 0] ** 2 + D[:, 1] ** 2 - a1 * a1
    B = X0 * D[:, 0] + Y0 * D[:, 1] - a0 * a1
    C = X0 * X0 + Y0 * Y0 - a0 * a0
    n = len(D)
    quad = np.abs(A) > 1e-12
    disc = B * B - A * C
    ok = quad & (disc >= 0)
    s = np.sqrt(np.where(ok, disc, 0.0))
    Asafe = np.where(quad, A, 1.0)
    ta = (-B - s) / Asafe
    tb = (-B + s) / Asafe
    lo = np.where(ok, np.minimum(ta, tb), np.inf)
    hi = np.where(ok, np.maximum(ta, tb), np.inf)
    lin = ~quad & (np.abs(B) > 1e-15)
    tl = np.where(lin, -C / (2.0 * np.where(lin, B, 1.0)), np.inf)
    lo = np.where(lin, tl, lo)
    hi = np.where(lin, np.inf, hi)

    def valid(t):
        tf = np.where(np.isfinite(t), t, 0.0)
        z = o[2] + tf * D[:, 2]
        rad = a0 + a1 * tf
        return np.isfinite(t) & (t > EPS) & (z >= h0) & (z <= h1) & (rad >= 0)

    t = np.where(valid(lo), lo, np.where(valid(hi), hi, np.inf))
    tf = np.where(np.isfinite(t), t, 0.0)
    P = o + tf[:, None] * D
    rad = r0 + slope * (P[:, 2] - h0)
    nrm = np.stack([P[:, 0] - cx, P[:, 1] - cy, -rad * slope], axis=1)
    nrm /= np.maximum(np.linalg.norm(nrm, axis=1, keepdims=True), EPS)
    return t, nrm


def _rotz(yaw):
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _clutter_hits(o, D, c: Clutter):
    x, y, yaw = c.pose
    if c.shape == "sphere":
        r = c.scale[0]
        center = np.array([x, y, r])
        t, n = _sphere(o, D, center, r)
        return t, n, center, np.eye(3)
    R = _rotz(yaw)
    hz = c.scale[2]
    center = np.array([x, y, hz])
    ol = R.T @ (o - center)
    Dl = D @ R
    if c.shape == "box":
        t, nl = _box_local(ol, Dl, np.asarray(c.scale))
    else:
        rad = c.scale[0]
        t, nl = _frustum(ol, Dl, 0.0, 0.0, -hz, hz, rad, rad)
        tc, nc = _plane_z(ol, Dl, hz, lambda px, py: px * px + py * py <= rad * rad)
        closer = tc < t
        t = np.where(closer, tc, t)
        nl = np.where(closer[:, None], nc, nl)
    return t, nl @ R.T, center, R


def _room_hits(o, D):
    """Inside of the open-topped room box: floor and four walls."""
    lo = np.array([b[0] for b in ROOM])
    hi = np.array([b[1] for b in ROOM])
    if np.any(o <= lo) or np.any(o >= hi):
        return _no_hit(len(D))
    with np.errstate(divide="ignore", invalid="ignore"):
        texit = np.where(D > 0, (hi - o) / D, np.where(D < 0, (lo - o) / D, np.inf))
    axis = texit.argmin(axis=1)
    rows = np.arange(len(D))
    t = texit[rows, axis]
    ceiling = (axis == 2) & (D[:, 2] > 0)
    t = np.where(ceiling, np.inf, t)
    n = np.zeros((len(D), 3))
    n[rows, axis] = -np.sign(D[rows, axis])
    return t, n


# --- textures -------------------------------------------------------------------


def _hash01(ix, iy, iz, seed):
    h = (ix.astype(np.int64) * 73856093) ^ (iy.astype(np.int64) * 19349663) ^ (iz.astype(np.int64) * 83492791)
    h = (h ^ np.int64(seed * 2654435761 % (2**31))) & 0xFFFFFFFF
    h = (h ^ (h >> 16)) * 0x45D9F3B & 0xFFFFFFFF
    h = (h ^ (h >> 16)) * 0x45D9F3B & 0xFFFFFFFF
    h = h ^ (h >> 16)
    return (h & 0xFFFFFF) / float(0x1000000)


def _value_noise(P, seed):
    i = np.floor(P).astype(np.int64)
    f = P - i
    f = f * f * (3.0 - 2.0 * f)
    out = np.zeros(len(P))
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                w = (f[:, 0] if dx else 1 - f[:, 0]) * (f[:, 1] if dy else 1 - f[:, 1]) * (f[:, 2] if dz else 1 - f[:, 2])
                out += w * _hash01(i[:, 0] + dx, i[:, 1] + dy, i[:, 2] + dz, seed)
    return out


def texture_color(tex: Texture, P: np.ndarray) -> np.ndarray:
    """Albedo (N, 3) at object-space points ``P`` (N, 3), meters."""
    base = np.asarray(tex.base_color, dtype=float)
    if tex.kind == "flat" or len(P) == 0:
        return np.broadcast_to(base, (len(P), 3)).copy()
    c2 = np.asarray(tex.params["color2"], dtype=float)
    s = float(tex.params["scale"])
    if tex.kind == "checker":
        k = np.floor(P * s).astype(np.int64).sum(axis=1) & 1
        w = k.astype(float)
    elif tex.kind == "stripes":
        d = np.asarray(tex.params["direction"], dtype=float)
        w = (np.sin(2 * np.pi * s * (P @ d)) > 0).astype(float)
    elif tex.kind == "noise":
        w = _value_noise(P * s, int(tex.params["seed"]))
    else:
        raise ValueError(f"unknown texture kind {tex.kind!r}")
    return base * (1 - w[:, None]) + c2 * w[:, None]


# --- the pass -----------------------------------------------------------------------


def render_buffers(scene: SceneSpec) -> tuple[Buffers, list[Texture | np.ndarray]]:
    """Run the depth-tested geometry pass for ``scene``.

    Returns the buffers and the material list that ``Buffers.material``
    indexes (a Texture, or a fixed RGB array for the room).
    """
    cam = scene.camera
    h, w = cam.image_size
    o = np.asarray(cam.position, dtype=float)
    D = camera_rays(cam)
    n = len(D)
    depth = np.full(n, np.inf)
    obj = np.full(n, BG, dtype=np.int64)
    label = np.zeros(n, dtype=np.uint8)
    normal = np.zeros((n, 3))
    local = np.zeros((n, 3))
    material = np.full(n, -1, dtype=np.int64)
    materials: list = []

    def submit(t, nrm, oid, mat, lab, origin, R=None):
        win = t < depth
        if not win.any():
            return
        depth[win] = t[win]
        obj[win] = oid
        normal[win] = nrm[win]
        material[win] = mat[win] if isinstance(mat, np.ndarray) else mat
        label[win] = lab[win] if isinstance(lab, np.ndarray) else lab
        P = o + t[win, None] * D[win] - origin
        local[win] = P if R is None else P @ R

    # room: walls and floor share one material slot each
    materials += [WALL_COLOR, FLOOR_COLOR]
    t, nrm = _room_hits(o, D)
    floor_hit = nrm[:, 2] > 0.5
    submit(t, nrm, ROOM_ID, np.where(floor_hit, 1, 0), NO_LABEL, np.zeros(3))

    x0, x1, y0, y1 = scene.table.bounds
    materials.append(scene.table.texture)
    t, nrm = _plane_z(o, D, 0.0, lambda px, py: (px >= x0) & (px <= x1) & (py >= y0) & (py <= y1))
    submit(t, nrm, TABLE_ID, len(materials) - 1, NO_LABEL, np.zeros(3))

    if scene.cup is not None:
        cup = scene.cup
        prof = cup.profile
        materials += [cup.outer_texture, cup.inner_texture]
        m_out, m_in = len(materials) - 2, len(materials) - 1
        origin = np.array([cup.x, cup.y, 0.0])
        hs, rs = prof.heights, prof.radii
        for k in range(len(hs) - 1):
            t, nrm = _frustum(o, D, cup.x, cup.y, hs[k], hs[k + 1], rs[k], rs[k + 1])
            inside = np.einsum("ij,ij->i", nrm, D) > 0
            submit(
                t,
                nrm,
                CUP_ID,
                np.where(inside, m_in, m_out),
                np.where(inside, CONTAIN, WRAP_GRASP).astype(np.uint8),
                origin,
            )
        r_floor = float(prof.radius_at(prof.split_height))
        t, nrm = _plane_z(o, D, prof.split_height, lambda px, py: (px - cup.x) ** 2 + (py - cup.y) ** 2 <= r_floor**2)
        t = np.where(D[:, 2] < 0, t, np.inf)
        submit(t, nrm, CUP_ID, m_in, CONTAIN, origin)

    for i, c in enumerate(scene.clutter):
        materials.append(c.texture)
        t, nrm, center, R = _clutter_hits(o, D, c)
        submit(t, nrm, CLUTTER0 + i, len(materials) - 1, NO_LABEL, center, R)

    # two-sided shading: normals face the viewer
    flip = np.einsum("ij,ij->i", normal, D) > 0
    normal[flip] *= -1.0
    point = o + np.where(np.isfinite(depth), depth, 0.0)[:, None] * D
    buf = Buffers(
        depth.reshape(h, w),
        obj.reshape(h, w),
        label.reshape(h, w),
        normal.reshape(h, w, 3),
        point.reshape(h, w, 3),
        local.reshape(h, w, 3),
        material.reshape(h, w),
    )
    return buf, materials


def shade(scene: SceneSpec, buf: Buffers, materials) -> np.ndarray:
    h, w = buf.depth.shape
    mat = buf.material.reshape(-1)
    loc = buf.local.reshape(-1, 3)
    albedo = np.broadcast_to(BACKGROUND, (h * w, 3)).copy()
    for m, spec in enumerate(materials):
        sel = mat == m
        if not sel.any():
            continue
        if isinstance(spec, Texture):
            albedo[sel] = texture_color(spec, loc[sel])
        else:
            albedo[sel] = spec
    hit = mat >= 0
    N = buf.normal.reshape(-1, 3)[hit]
    P = buf.point.reshape(-1, 3)[hit]
    light = np.full(len(P), AMBIENT)
    for L in scene.lights:
        v = np.asarray(L.position, dtype=float) - P
        v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), EPS)
        light += L.intensity * np.clip(np.einsum("ij,ij->i", N, v), 0.0, None)
    rgb = albedo
    rgb[hit] = albedo[hit] * light[:, None]
    return (np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8).reshape(h, w, 3)


def labels_from_buffers(buf: Buffers) -> np.ndarray:
    """(H, W, 2) uint8 masks: channel 0 wrap-grasp, channel 1 contain."""
    return np.stack([buf.label == WRAP_GRASP, buf.label == CONTAIN], axis=-1).astype(np.uint8)


def render_sample(scene: SceneSpec) -> tuple[np.ndarray, np.ndarray, Buffers]:
    buf, mats = render_buffers(scene)
    return shade(scene, buf, mats), labels_from_buffers(buf), buf


def render(scene: SceneSpec) -> np.ndarray:
    """H x W x 3 uint8 image."""
    return render_sample(scene)[0]


def render_labels(scene: SceneSpec) -> np.ndarray:
    return render_sample(scene)[1]
