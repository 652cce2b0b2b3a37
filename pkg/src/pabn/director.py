"""Discrete director fields and the four topological trial configurations."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInterior, InvalidParams, NotNormalized, ZeroVector
from .geometry import GridGeometry, Tag

_ZERO = 1e-12


class Topology(enum.Enum):
    """Vertical edge orientations, edges ordered (0,0), (Lp,0), (Lp,Lp), (0,Lp)."""

    T = (1, 1, 1, 1)
    P1 = (1, 1, -1, 1)
    P2 = (1, -1, -1, 1)
    P3 = (1, -1, 1, -1)

    @property
    def label(self) -> str:
        return self.name

    @property
    def vertical_signature(self) -> tuple[int, int, int, int]:
        return self.value

    @classmethod
    def parse(cls, label: "str | Topology") -> "Topology":
        if isinstance(label, Topology):
            return label
        try:
            return cls[str(label).upper()]
        except KeyError:
            raise ValueError(f"unknown topology {label!r}; expected one of T, P1, P2, P3") from None


@dataclass(eq=False)
class DirectorField:
    """Unit vector per node; excluded nodes hold the zero vector."""

    geom: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.geom.shape + (3,):
            raise ValueError(f"values shape {self.values.shape} != {self.geom.shape + (3,)}")

    def copy(self) -> "DirectorField":
        return DirectorField(self.geom, self.values.copy())

    def norm_residual(self) -> float:
        """Largest deviation from unit norm over active nodes."""
        norms = np.linalg.norm(self.values[self.geom.active], axis=-1)
        return float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0

    def check_normalized(self, tol: float = 1e-9) -> None:
        dev = np.abs(np.linalg.norm(self.values, axis=-1) - 1.0)
        dev[~self.geom.active] = 0.0
        if dev.max(initial=0.0) > tol:
            i, j, k = np.unravel_index(int(np.argmax(dev)), dev.shape)
            node = self.geom.node_index(i, j, k)
            raise NotNormalized(node, float(np.linalg.norm(self.values[i, j, k])))


def normalize_field(field: DirectorField) -> DirectorField:
    geom = field.geom
    norms = np.linalg.norm(field.values, axis=-1)
    bad = geom.active & (norms < _ZERO)
    if bad.any():
        i, j, k = np.argwhere(bad)[0]
        raise ZeroVector(geom.node_index(i, j, k))
    out = np.zeros_like(field.values)
    act = geom.active
    out[act] = field.values[act] / norms[act][:, None]
    return DirectorField(geom, out)


def _unnormalized(geom: GridGeometry, topo: Topology) -> np.ndarray:
    p = geom.params
    X, Y, Z = (geom.coords[..., a] for a in range(3))
    lp, h, H = p.Lp, p.h, p.H
    damp = (H - Z) / H
    nx = np.sin(np.pi * X / lp) ** 2 * damp
    ny = np.sin(np.pi * Y / lp) ** 2 * damp
    cx, cy = np.cos(np.pi * X / lp), np.cos(np.pi * Y / lp)
    bump = Z * (h - Z)
    if topo is Topology.T:
        low = bump
    elif topo is Topology.P1:
        low = bump * (1 + cx + cy)
    elif topo is Topology.P2:
        low = bump * cx
    else:
        low = bump * cx * cy
    high = (Z - h) / (H - h)
    nz = np.where(Z <= h, low, high)
    return np.stack([nx, ny, nz], axis=-1)


def enforce_constraints(geom: GridGeometry, values: np.ndarray) -> np.ndarray:
    """Project tangent nodes, pin fixed nodes to +/- their direction, renormalize.

    Edge nodes keep the sign of their current component along the edge.
    """
    out = values.copy()
    tan = geom.tangent
    nu = geom.normals[tan]
    out[tan] -= np.sum(out[tan] * nu, axis=-1, keepdims=True) * nu
    edge = geom.tags == Tag.EDGE
    d = geom.edge_dirs[edge]
    s = np.where(np.sum(out[edge] * d, axis=-1) < 0, -1.0, 1.0)
    out[edge] = s[:, None] * d
    out[geom.tags == Tag.TOP] = (0.0, 0.0, 1.0)
    out[~geom.active] = 0.0
    return out


def trial_field(geom: GridGeometry, topo: Topology | str) -> DirectorField:
    """Normalized trial configuration of class ``topo``.

    The raw vector vanishes only at post vertices (and, for a flat cell, at
    the four substrate points below where the post corners would be).  Those
    nodes take the normalized mean of their axis neighbours.
    """
    topo = Topology.parse(topo)
    if topo is not Topology.T and not geom.has_post:
        raise InvalidParams(f"topology {topo.name} needs a post with vertical edges (h > 0)")
    raw = _unnormalized(geom, topo)
    raw[~geom.active] = 0.0
    norms = np.linalg.norm(raw, axis=-1)
    degenerate = geom.active & (norms < _ZERO)
    allowed = geom.tags == Tag.VERTEX
    if not geom.has_post:
        allowed = allowed.copy()
        allowed[:, :, 0] = True
    if (degenerate & ~allowed).any():
        i, j, k = np.argwhere(degenerate & ~allowed)[0]
        raise DegenerateInterior(geom.node_index(i, j, k))

    unit = np.zeros_like(raw)
    ok = geom.active & ~degenerate
    unit[ok] = raw[ok] / norms[ok][:, None]
    N, nz = geom.N, geom.nz
    for i, j, k in np.argwhere(degenerate):
        acc = np.zeros(3)
        for di, dj, dk in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            kk = k + dk
            if 0 <= kk < nz:
                acc += unit[(i + di) % N, (j + dj) % N, kk]
        nrm = np.linalg.norm(acc)
        unit[i, j, k] = acc / nrm if nrm > _ZERO else (0.0, 0.0, 1.0)

    values = enforce_constraints(geom, unit)
    return normalize_field(DirectorField(geom, values))
