"""Structured grid for a single square post inside a periodic cell.

The liquid crystal occupies the cell ``[-Lc/4, 3Lc/4)^2 x [0, H]`` minus the
post ``[0, Lp]^2 x [0, h]``.  Nodes sit on a uniform lattice of spacing
``delta = Lc / N``; the x and y indices are periodic modulo ``N`` and the z
index runs over ``H / delta + 1`` levels.  Arrays indexed by node always have
shape ``(N, N, nz)`` with axes ``(x, y, z)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidParams, NonConformingGrid, OutOfRange

_CONFORM_TOL = 1e-9


class Tag(enum.IntEnum):
    INTERIOR = 0
    SUBSTRATE = 1       # tangent to z = 0
    POST_FACE = 2       # tangent to a post face (lateral or top)
    TOP = 3             # fixed to +z on the top plate
    EDGE = 4            # fixed along a post edge
    VERTEX = 5          # post corner, unit norm only
    EXCLUDED = 6        # inside the post


TANGENT_TAGS = (Tag.SUBSTRATE, Tag.POST_FACE)
FIXED_TAGS = (Tag.TOP, Tag.EDGE)


@dataclass(frozen=True)
class NodeClass:
    """Boundary class of one node.

    ``normal`` is set for tangent nodes, ``direction`` for edge nodes.  The
    vertical edges carry ``+z`` here; the sign is chosen by the trial field.
    """

    tag: Tag
    normal: tuple[float, float, float] | None = None
    direction: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class CellParams:
    h: float = 1.0
    N: int = 16
    Lc: float = 1.0
    Lp: float | None = None
    H: float | None = None
    substrate: str = "tangent"      # "normal" pins the bottom plate to +z (flat cells only)

    def __post_init__(self):
        if self.Lp is None:
            object.__setattr__(self, "Lp", self.Lc / 2)
        if self.H is None:
            object.__setattr__(self, "H", 3 * self.Lc)

    @property
    def delta(self) -> float:
        return self.Lc / self.N


def _steps(value: float, delta: float, name: str) -> int:
    ratio = value / delta
    k = int(round(ratio))
    if abs(ratio - k) > _CONFORM_TOL * max(1.0, abs(ratio)):
        raise NonConformingGrid(f"{name}={value!r} is not a multiple of delta={delta!r}")
    return k


@dataclass(frozen=True, eq=False)
class GridGeometry:
    """Immutable node lattice with per-node boundary classification.

    Attributes
    ----------
    tags : (N, N, nz) int8 array of :class:`Tag` values.
    normals : (N, N, nz, 3) surface normal at tangent nodes, zero elsewhere.
    edge_dirs : (N, N, nz, 3) unit edge direction at EDGE nodes, zero elsewhere.
    cell_mask : (N, N, nz - 1) bool, True for cells in the liquid crystal.
    """

    params: CellParams
    N: int
    nz: int
    delta: float
    post_lo: int
    post_hi: int
    post_top: int
    tags: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    edge_dirs: np.ndarray = field(repr=False)
    cell_mask: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N, self.N, self.nz)

    @property
    def has_post(self) -> bool:
        return self.post_top > 0

    @property
    def n_nodes(self) -> int:
        return self.N * self.N * self.nz

    @cached_property
    def x(self) -> np.ndarray:
        return -self.params.Lc / 4 + self.delta * np.arange(self.N)

    @cached_property
    def z(self) -> np.ndarray:
        return self.delta * np.arange(self.nz)

    @cached_property
    def coords(self) -> np.ndarray:
        """(N, N, nz, 3) node positions."""
        X, Y, Z = np.meshgrid(self.x, self.x, self.z, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    @cached_property
    def cells(self) -> np.ndarray:
        """(n_cells, 3) lower-corner indices of liquid-crystal cells, C order."""
        return np.argwhere(self.cell_mask)

    @cached_property
    def active(self) -> np.ndarray:
        return self.tags != Tag.EXCLUDED

    @cached_property
    def fixed(self) -> np.ndarray:
        return np.isin(self.tags, FIXED_TAGS)

    @cached_property
    def tangent(self) -> np.ndarray:
        return np.isin(self.tags, TANGENT_TAGS)

    @cached_property
    def free(self) -> np.ndarray:
        """Nodes whose value the relaxation may change."""
        return self.active & ~self.fixed

    def counts(self) -> dict[str, int]:
        return {t.name: int(np.count_nonzero(self.tags == t)) for t in Tag}

    # index helpers -------------------------------------------------------

    def node_index(self, i: int, j: int, k: int) -> int:
        """Flat node index with periodic wrapping in x and y."""
        if not 0 <= k < self.nz:
            raise OutOfRange(f"z index {k} outside [0, {self.nz})")
        return (int(i) % self.N * self.N + int(j) % self.N) * self.nz + int(k)

    def unravel(self, node: int) -> tuple[int, int, int]:
        if not 0 <= node < self.n_nodes:
            raise OutOfRange(f"node {node} outside [0, {self.n_nodes})")
        i, rest = divmod(int(node), self.N * self.nz)
        j, k = divmod(rest, self.nz)
        return i, j, k

    def locate(self, x: float, y: float, z: float) -> tuple[int, int, int]:
        """Grid indices of the node at physical position ``(x, y, z)``."""
        lc = self.params.Lc
        i = _steps(x + lc / 4, self.delta, "x") % self.N
        j = _steps(y + lc / 4, self.delta, "y") % self.N
        k = _steps(z, self.delta, "z")
        if not 0 <= k < self.nz:
            raise OutOfRange(f"z={z!r} outside [0, {self.params.H}]")
        return i, j, k

    def wrap_x(self, node: int, shift: int) -> int:
        i, j, k = self.unravel(node)
        return self.node_index(i + shift, j, k)

    def wrap_y(self, node: int, shift: int) -> int:
        i, j, k = self.unravel(node)
        return self.node_index(i, j + shift, k)


def build_geometry(params: CellParams) -> GridGeometry:
    """Classify every node of the discretized cell."""
    N = params.N
    if not isinstance(N, (int, np.integer)) or N < 8:
        raise InvalidParams(f"N must be an integer >= 8, got {N!r}")
    if params.Lc <= 0 or params.Lp <= 0 or params.H <= 0:
        raise InvalidParams("cell lengths Lc, Lp, H must all be positive")
    if params.substrate not in ("tangent", "normal"):
        raise InvalidParams(f"substrate anchoring must be 'tangent' or 'normal', got {params.substrate!r}")
    if params.h < 0 or params.h >= params.H:
        raise InvalidParams(f"post height h={params.h!r} must satisfy 0 <= h < H={params.H!r}")
    delta = params.delta
    offset = _steps(params.Lc / 4, delta, "Lc/4")
    n_post = _steps(params.Lp, delta, "Lp")
    kh = _steps(params.h, delta, "h")
    kH = _steps(params.H, delta, "H")
    if n_post >= N - 1:
        raise InvalidParams("post must leave at least one liquid-crystal column")
    lo, hi = offset, offset + n_post
    nz = kH + 1

    tags = np.full((N, N, nz), Tag.INTERIOR, dtype=np.int8)
    normals = np.zeros((N, N, nz, 3))
    edge_dirs = np.zeros((N, N, nz, 3))

    if params.substrate == "normal":
        if kh > 0:
            raise InvalidParams("normal substrate anchoring is only defined for a flat cell (h = 0)")
        tags[:, :, 0] = Tag.TOP
    else:
        tags[:, :, 0] = Tag.SUBSTRATE
        normals[:, :, 0, 2] = 1.0
    tags[:, :, kH] = Tag.TOP

    if kh > 0:
        inner = slice(lo + 1, hi)
        lateral = slice(1, kh)
        levels = (0, kh)
        tags[inner, inner, :kh] = Tag.EXCLUDED
        normals[inner, inner, :kh] = 0.0
        # top face
        tags[inner, inner, kh] = Tag.POST_FACE
        normals[inner, inner, kh] = (0.0, 0.0, 1.0)
        # lateral faces
        for i, sign in ((lo, -1.0), (hi, 1.0)):
            tags[i, inner, lateral] = Tag.POST_FACE
            normals[i, inner, lateral] = (sign, 0.0, 0.0)
            tags[inner, i, lateral] = Tag.POST_FACE
            normals[inner, i, lateral] = (0.0, sign, 0.0)
        # horizontal edges on the top face and the base
        for k in levels:
            for i in (lo, hi):
                tags[inner, i, k] = Tag.EDGE
                normals[inner, i, k] = 0.0
                edge_dirs[inner, i, k] = (1.0, 0.0, 0.0)
                tags[i, inner, k] = Tag.EDGE
                normals[i, inner, k] = 0.0
                edge_dirs[i, inner, k] = (0.0, 1.0, 0.0)
        # vertical edges and vertices
        for i in (lo, hi):
            for j in (lo, hi):
                tags[i, j, lateral] = Tag.EDGE
                edge_dirs[i, j, lateral] = (0.0, 0.0, 1.0)
                for k in levels:
                    tags[i, j, k] = Tag.VERTEX
                    normals[i, j, k] = 0.0

    cell_mask = np.ones((N, N, nz - 1), dtype=bool)
    if kh > 0:
        cell_mask[lo:hi, lo:hi, :kh] = False

    for arr in (tags, normals, edge_dirs, cell_mask):
        arr.setflags(write=False)
    return GridGeometry(
        params=params, N=N, nz=nz, delta=delta, post_lo=lo, post_hi=hi, post_top=kh,
        tags=tags, normals=normals, edge_dirs=edge_dirs, cell_mask=cell_mask,
    )


def classify_node(geom: GridGeometry, node: int) -> NodeClass:
    i, j, k = geom.unravel(node)
    tag = Tag(int(geom.tags[i, j, k]))
    if tag in TANGENT_TAGS:
        return NodeClass(tag, normal=tuple(float(c) for c in geom.normals[i, j, k]))
    if tag == Tag.EDGE:
        return NodeClass(tag, direction=tuple(float(c) for c in geom.edge_dirs[i, j, k]))
    return NodeClass(tag)


# corner order of a cell: bit 0 -> x, bit 1 -> y, bit 2 -> z
CORNER_OFFSETS = np.array([[(c >> 0) & 1, (c >> 1) & 1, (c >> 2) & 1] for c in range(8)])


def cell_nodes(geom: GridGeometry, cell: int) -> list[int]:
    """Flat indices of the 8 corners of ``geom.cells[cell]``.

    Corner ``c`` sits at offset ``((c & 1), (c >> 1) & 1, (c >> 2) & 1)`` from
    the lower corner; x and y wrap periodically.
    """
    if not 0 <= cell < len(geom.cells):
        raise OutOfRange(f"cell {cell} outside [0, {len(geom.cells)})")
    i, j, k = geom.cells[cell]
    return [geom.node_index(i + a, j + b, k + c) for a, b, c in CORNER_OFFSETS]
