"""Discrete topological diagnostics of a director field around the post.

Vertical post edges are numbered 1..4 at (x, y) = (0, 0), (Lp, 0),
(Lp, Lp), (0, Lp).  Lateral faces are named by their outward normal:
``-y`` joins edges 1-2, ``+x`` joins 2-3, ``+y`` joins 4-3, ``-x`` joins 1-4.
Post vertices are ``top1..top4`` (at z = h) and ``base1..base4`` (z = 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .director import DirectorField
from .errors import (CorruptEdge, DegenerateTriangle, InvalidParams, PathTooCoarse,
                     ProjectionDegenerate, SurfaceOpen)
from .geometry import GridGeometry

LATERAL_FACES = ("-y", "+x", "+y", "-x")
FACES = LATERAL_FACES + ("top", "substrate")
VERTICES = tuple(f"{lvl}{e}" for lvl in ("top", "base") for e in (1, 2, 3, 4))
HORIZONTAL_EDGES = ("y0", "x1", "y1", "x0")   # along x at y=0, along y at x=Lp, ...
PLANAR_THRESHOLD = 0.15

_KINK_TOL = 1e-9


@dataclass(frozen=True)
class EdgeSignature:
    vertical: tuple[int, ...]
    horizontal_top: tuple[int, ...]
    horizontal_base: tuple[int, ...]


@dataclass(frozen=True)
class FacePathRotation:
    face: str
    start_edge: str
    end_edge: str
    net_rotation: float
    kink: int

    @property
    def principal(self) -> float:
        """Net rotation with the full turns removed, in [-pi, pi]."""
        return self.net_rotation - 2 * math.pi * self.kink


@dataclass(frozen=True)
class VertexDegree:
    vertex: str
    solid_angle: float


def _corner_index(geom: GridGeometry, edge: int) -> tuple[int, int]:
    lo, hi = geom.post_lo, geom.post_hi
    return {1: (lo, lo), 2: (hi, lo), 3: (hi, hi), 4: (lo, hi)}[edge]


def _require_post(geom: GridGeometry):
    if not geom.has_post:
        raise InvalidParams("diagnostic needs a post (h > 0)")


def _edge_sign(values: np.ndarray, direction, edge_id) -> int:
    if len(values) == 0:
        raise InvalidParams(f"edge {edge_id} has no interior nodes; the post needs at least two cells per side")
    comp = values @ np.asarray(direction, dtype=float)
    weakest = float(np.min(np.abs(comp)))
    if weakest < 0.9:
        raise CorruptEdge(edge_id, weakest)
    if not (np.all(comp > 0) or np.all(comp < 0)):
        raise CorruptEdge(edge_id, weakest)
    return 1 if comp[0] > 0 else -1


def edge_orientation_signature(field: DirectorField) -> EdgeSignature:
    """Signs of ``n`` along each post edge, read from the pinned edge nodes."""
    geom = field.geom
    _require_post(geom)
    v = field.values
    lo, hi, kh = geom.post_lo, geom.post_hi, geom.post_top
    vertical = []
    for e in (1, 2, 3, 4):
        i, j = _corner_index(geom, e)
        vertical.append(_edge_sign(v[i, j, 1:kh], (0, 0, 1), f"vertical{e}"))
    inner = slice(lo + 1, hi)
    horizontal = {}
    for level, k in (("top", kh), ("base", 0)):
        signs = [
            _edge_sign(v[inner, lo, k], (1, 0, 0), f"{level}-y0"),
            _edge_sign(v[hi, inner, k], (0, 1, 0), f"{level}-x1"),
            _edge_sign(v[inner, hi, k], (1, 0, 0), f"{level}-y1"),
            _edge_sign(v[lo, inner, k], (0, 1, 0), f"{level}-x0"),
        ]
        horizontal[level] = tuple(signs)
    return EdgeSignature(tuple(vertical), horizontal["top"], horizontal["base"])


def kink_number(net_rotation: float) -> int:
    """Extra full turns beyond a minimal rotation.

    A rotation of exactly +/-pi (antiparallel endpoints) counts as minimal.
    """
    turns = math.floor((abs(net_rotation) + math.pi - _KINK_TOL) / (2 * math.pi))
    return int(math.copysign(turns, net_rotation)) if turns else 0


def path_rotation(vectors: np.ndarray, e1, e2) -> float:
    """Unwrapped in-plane rotation of ``vectors`` along a path.

    ``e1, e2`` span the plane; each vector is projected onto it and must keep
    at least half its length.  Single steps of pi/2 or more are rejected.
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    a, b = vectors @ e1, vectors @ e2
    if np.any(np.hypot(a, b) <= 0.5):
        raise ProjectionDegenerate("director nearly normal to the path plane")
    theta = np.arctan2(b, a)
    steps = np.diff(theta)
    steps = (steps + np.pi) % (2 * np.pi) - np.pi
    if np.any(np.abs(steps) >= np.pi / 2):
        raise PathTooCoarse("director turns by pi/2 or more between adjacent path nodes")
    return float(math.fsum(steps.tolist()))


def face_path_rotation(field: DirectorField, face: str, line: int,
                       vertical: bool = False) -> FacePathRotation:
    """Rotation of ``n`` along a straight grid path across a post face.

    Lateral faces: by default the path is the horizontal row at z index
    ``line`` joining the two vertical edges; with ``vertical=True`` it is
    the column at in-face index ``line`` (offset from the lower edge)
    joining the base edge to the top edge.  Top face: the path runs along x
    at y offset ``line`` from the ``-y`` side, joining the ``x0`` and
    ``x1`` top edges.
    """
    geom = field.geom
    _require_post(geom)
    v = field.values
    lo, hi, kh = geom.post_lo, geom.post_hi, geom.post_top
    if face in LATERAL_FACES:
        normal_axis = 0 if face.endswith("x") else 1
        at = lo if face.startswith("-") else hi
        along = 1 - normal_axis
        e_along = np.eye(3)[along]
        edges = {"-y": (1, 2), "+x": (2, 3), "+y": (4, 3), "-x": (1, 4)}[face]
        if not vertical:
            if not 0 < line < kh:
                raise InvalidParams(f"z index {line} not strictly inside (0, {kh})")
            path = v[at, lo:hi + 1, line] if normal_axis == 0 else v[lo:hi + 1, at, line]
            net = path_rotation(path, e_along, (0, 0, 1))
            start, end = f"vertical{edges[0]}", f"vertical{edges[1]}"
        else:
            pos = lo + line
            if not lo < pos < hi:
                raise InvalidParams(f"offset {line} not strictly inside the face")
            path = v[at, pos, 0:kh + 1] if normal_axis == 0 else v[pos, at, 0:kh + 1]
            net = path_rotation(path, e_along, (0, 0, 1))
            start, end = "base", "top"
    elif face == "top":
        pos = lo + line
        if not lo <= pos <= hi:
            raise InvalidParams(f"offset {line} outside the top face")
        path = v[lo:hi + 1, pos, kh]
        net = path_rotation(path, (1, 0, 0), (0, 1, 0))
        start, end = "top-x0", "top-x1"
    else:
        raise InvalidParams(f"face must be one of {LATERAL_FACES + ('top',)}; "
                            "use substrate_corner_rotation for the substrate")
    return FacePathRotation(face, start, end, net, kink_number(net))


def substrate_corner_path(geom: GridGeometry, edge: int, offset: int) -> list[tuple[int, int, int]]:
    """Substrate nodes wrapping round the base of vertical edge ``edge``.

    Starts on the base edge running along x, steps ``offset`` nodes away from
    the post, walks round the corner outside the footprint, and ends on the
    base edge running along y.  Every node is at z = 0.
    """
    _require_post(geom)
    lo, hi = geom.post_lo, geom.post_hi
    if not 0 < offset < hi - lo:
        raise InvalidParams(f"offset must lie in (0, {hi - lo})")
    ci, cj = _corner_index(geom, edge)
    sx = -1 if ci == lo else 1       # outward direction in x
    sy = -1 if cj == lo else 1
    r = offset
    pts = [(ci - sx * r, cj)]
    pts += [(ci - sx * r, cj + sy * t) for t in range(1, r + 1)]
    pts += [(ci - sx * r + sx * t, cj + sy * r) for t in range(1, 2 * r + 1)]
    pts += [(ci + sx * r, cj + sy * r - sy * t) for t in range(1, 2 * r + 1)]
    pts += [(ci + sx * r - sx * t, cj - sy * r) for t in range(1, r + 1)]
    return [(i % geom.N, j % geom.N, 0) for i, j in pts]


def substrate_corner_rotation(field: DirectorField, edge: int, offset: int) -> FacePathRotation:
    geom = field.geom
    path = substrate_corner_path(geom, edge, offset)
    vecs = np.array([field.values[p] for p in path])
    net = path_rotation(vecs, (1, 0, 0), (0, 1, 0))
    return FacePathRotation("substrate", f"base-x-edge@{edge}", f"base-y-edge@{edge}",
                            net, kink_number(net))


def _solid_angle(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    for p, q in ((a, b), (b, c), (c, a)):
        if float(p @ q) < -1.0 + 1e-9:
            raise DegenerateTriangle("adjacent directors are antipodal")
    num = float(a @ np.cross(b, c))
    den = 1.0 + float(a @ b) + float(b @ c) + float(c @ a)
    return 2.0 * math.atan2(num, den)


def _vertex_node(geom: GridGeometry, vertex: str) -> tuple[int, int, int]:
    if vertex not in VERTICES:
        raise InvalidParams(f"vertex must be one of {VERTICES}")
    level, e = vertex[:-1], int(vertex[-1])
    i, j = _corner_index(geom, e)
    return i, j, geom.post_top if level == "top" else 0


def _cell_face_quad(cell, axis: int, side: int) -> list[tuple[int, int, int]]:
    """Corners of one cell face ordered counter-clockwise seen from outside."""
    b, c = (axis + 1) % 3, (axis + 2) % 3
    ring = [(0, 0), (1, 0), (1, 1), (0, 1)]
    if side == 0:
        ring = ring[::-1]
    out = []
    for ub, uc in ring:
        off = [0, 0, 0]
        off[axis] = side
        off[b] = ub
        off[c] = uc
        out.append(tuple(cell[t] + off[t] for t in range(3)))
    return out


def vertex_degree(field: DirectorField, vertex: str) -> VertexDegree:
    """Signed solid angle swept by ``n`` over the cap surrounding a post vertex.

    The cap is the part of the boundary of the vertex's cell cluster that
    faces other liquid-crystal cells; its rim lies on the post and substrate
    faces.  Each cap quad is split into two triangles oriented outward.
    The total is reduced into [-2 pi, 2 pi].
    """
    geom = field.geom
    _require_post(geom)
    N, nzc = geom.N, geom.nz - 1
    vi, vj, vk = _vertex_node(geom, vertex)

    def wrapped(cell):
        return (cell[0] % N, cell[1] % N, cell[2])

    def is_lc(cell):
        return 0 <= cell[2] < nzc and bool(geom.cell_mask[cell[0] % N, cell[1] % N, cell[2]])

    cluster = set()
    for a in (0, 1):
        for b in (0, 1):
            for c in (0, 1):
                cell = (vi - a, vj - b, vk - c)
                if is_lc(cell):
                    cluster.add(cell)
    cluster_keys = {wrapped(c) for c in cluster}

    quads, cap = [], []
    for cell in sorted(cluster):
        for axis in range(3):
            for side in (0, 1):
                nb = list(cell)
                nb[axis] += 1 if side else -1
                nb = tuple(nb)
                if wrapped(nb) in cluster_keys:
                    continue
                quad = _cell_face_quad(cell, axis, side)
                quads.append(quad)
                if is_lc(nb):
                    cap.append(quad)

    edges: dict[tuple, int] = {}
    for quad in quads:
        for p, q in zip(quad, quad[1:] + quad[:1]):
            edges[(p, q)] = edges.get((p, q), 0) + 1
    for (p, q), count in edges.items():
        if count != 1 or edges.get((q, p), 0) != 1:
            raise SurfaceOpen(f"cluster surface around {vertex} is not closed at edge {p}-{q}")

    v = field.values
    total = []
    for quad in cap:
        n = [v[p[0] % N, p[1] % N, p[2]] for p in quad]
        total.append(_solid_angle(n[0], n[1], n[2]))
        total.append(_solid_angle(n[0], n[2], n[3]))
    # an image area is only defined modulo the full sphere
    angle = math.fsum(total)
    return VertexDegree(vertex, angle - 4 * math.pi * round(angle / (4 * math.pi)))


def planar_band(field: DirectorField, face: str, threshold: float = PLANAR_THRESHOLD) -> bool:
    """True iff every interior row of a lateral face has a node with |n_z| <= threshold."""
    geom = field.geom
    _require_post(geom)
    if face not in LATERAL_FACES:
        raise InvalidParams(f"face must be one of {LATERAL_FACES}")
    lo, hi, kh = geom.post_lo, geom.post_hi, geom.post_top
    at = lo if face.startswith("-") else hi
    nz = field.values[at, lo + 1:hi, 1:kh, 2] if face.endswith("x") else field.values[lo + 1:hi, at, 1:kh, 2]
    if nz.size == 0:
        return False
    return bool(np.all(np.any(np.abs(nz) <= threshold, axis=0)))


@dataclass
class Diagnostics:
    signature: EdgeSignature
    face_kinks: dict[str, list[int]] = field(default_factory=dict)
    face_rotations: dict[str, list[float]] = field(default_factory=dict)
    planar: dict[str, bool] = field(default_factory=dict)
    vertex_degrees: dict[str, float] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def all_kinks_zero(self) -> bool:
        return all(k == 0 for ks in self.face_kinks.values() for k in ks) and not self.errors

    def planar_faces(self) -> tuple[str, ...]:
        return tuple(f for f in LATERAL_FACES if self.planar.get(f))


def diagnose(field: DirectorField, threshold: float = PLANAR_THRESHOLD) -> Diagnostics:
    """All diagnostics for a field with a post.

    Path and vertex failures are collected in ``errors`` rather than raised.
    """
    geom = field.geom
    diag = Diagnostics(edge_orientation_signature(field))
    for face in LATERAL_FACES:
        kinks, rots = [], []
        try:
            for k in range(1, geom.post_top):
                r = face_path_rotation(field, face, k)
                kinks.append(r.kink)
                rots.append(r.net_rotation)
        except (ProjectionDegenerate, PathTooCoarse) as exc:
            diag.errors[f"path:{face}"] = str(exc)
        diag.face_kinks[face] = kinks
        diag.face_rotations[face] = rots
        diag.planar[face] = planar_band(field, face, threshold)
    for vertex in VERTICES:
        try:
            diag.vertex_degrees[vertex] = vertex_degree(field, vertex).solid_angle
        except (SurfaceOpen, DegenerateTriangle) as exc:
            diag.errors[f"vertex:{vertex}"] = str(exc)
    return diag
