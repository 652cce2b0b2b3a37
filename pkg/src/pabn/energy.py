"""Discrete nematic elastic energy with its exact gradient.

The boundary-constraint projections used by the relaxation live here too.

Nodal values are interpolated trilinearly inside each liquid-crystal cell.
At every quadrature point the interpolated director is renormalized to ``m``
while the gradient ``G[i, j] = d n_j / d x_i`` is taken from the raw
interpolant.  Two rules are available:

``"gauss"`` (default)
    2x2x2 Gauss points.  Full integration, no zero-energy checkerboard modes.
``"center"``
    One point at the cell centre.  Cheaper, but alternating nodal patterns
    are invisible to it, and relaxation drifts into them.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .director import DirectorField, enforce_constraints
from .errors import InvalidParams, ZeroVector
from .geometry import CORNER_OFFSETS, GridGeometry, Tag

try:
    from . import _kernel
except ImportError:  # pragma: no cover
    _kernel = None

BACKEND = os.environ.get("PABN_BACKEND", "numba" if _kernel is not None else "numpy")
RULES = ("gauss", "center")
DEFAULT_RULE = "gauss"


@dataclass(frozen=True)
class ElasticConstants:
    K1: float = 1.0
    K2: float = 1.0
    K3: float = 1.0
    K24: float = 0.0

    def __post_init__(self):
        for name in ("K1", "K2", "K3"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"{name} must be positive")

    @property
    def K_max(self) -> float:
        return max(self.K1, self.K2, self.K3, abs(self.K24))

    def weights(self) -> tuple[float, float, float, float]:
        return (self.K1, self.K2, self.K3, self.K24)


@dataclass(frozen=True)
class EnergyBreakdown:
    splay: float
    twist: float
    bend: float
    saddle: float

    @property
    def total(self) -> float:
        return math.fsum((self.splay, self.twist, self.bend, self.saddle))

    def as_dict(self) -> dict[str, float]:
        return {"splay": self.splay, "twist": self.twist, "bend": self.bend,
                "saddle": self.saddle, "total": self.total}


@lru_cache(maxsize=None)
def quadrature(rule: str, delta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Interpolation weights ``W[p, c]``, derivative weights ``D[p, b, c]`` and
    point volumes ``wq[p]`` for a cube of side ``delta``."""
    if rule == "gauss":
        g = 0.5 / math.sqrt(3.0)
        pts = [(0.5 + sx * g, 0.5 + sy * g, 0.5 + sz * g)
               for sz in (-1, 1) for sy in (-1, 1) for sx in (-1, 1)]
    elif rule == "center":
        pts = [(0.5, 0.5, 0.5)]
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}; expected one of {RULES}")
    nq = len(pts)
    W = np.empty((nq, 8))
    D = np.empty((nq, 3, 8))
    for p, xi in enumerate(pts):
        for c, off in enumerate(CORNER_OFFSETS):
            f = [xi[a] if off[a] else 1.0 - xi[a] for a in range(3)]
            W[p, c] = f[0] * f[1] * f[2]
            for b in range(3):
                df = [f[a] if a != b else (1.0 if off[a] else -1.0) for a in range(3)]
                D[p, b, c] = df[0] * df[1] * df[2] / delta
    wq = np.full(nq, delta ** 3 / nq)
    for arr in (W, D, wq):
        arr.setflags(write=False)
    return W, D, wq


def _corner_stack(geom: GridGeometry, values: np.ndarray) -> np.ndarray:
    """(8, 3, N, N, nz-1) corner values of every cell, periodic in x and y."""
    v = np.moveaxis(values, -1, 0)
    nzc = geom.nz - 1
    out = np.empty((8, 3) + geom.cell_mask.shape)
    for c, (a, b, z) in enumerate(CORNER_OFFSETS):
        shifted = np.roll(v, (-a, -b), axis=(1, 2)) if (a or b) else v
        out[c] = shifted[..., z:z + nzc]
    return out


def _scatter_corners(geom: GridGeometry, gc: np.ndarray) -> np.ndarray:
    nzc = geom.nz - 1
    grad = np.zeros((3,) + geom.shape)
    for c, (a, b, z) in enumerate(CORNER_OFFSETS):
        contrib = np.roll(gc[c], (a, b), axis=(1, 2)) if (a or b) else gc[c]
        grad[..., z:z + nzc] += contrib
    return np.ascontiguousarray(np.moveaxis(grad, 0, -1))


def _numpy_evaluate(geom, values, k, want_grad, rule):
    W, D, wq = quadrature(rule, geom.delta)
    K1, K2, K3, K24 = k.weights()
    C = _corner_stack(geom, values)
    mask = geom.cell_mask
    dens = np.zeros((4,) + mask.shape)
    gc = np.zeros_like(C) if want_grad else None
    for p in range(len(wq)):
        nb = np.tensordot(W[p], C, axes=1)
        G = [np.tensordot(D[p, b], C, axes=1) for b in range(3)]
        norm = np.sqrt(np.sum(nb * nb, axis=0))
        norm = np.where(mask, norm, 1.0)
        if np.any(norm < 1e-300):
            raise ZeroVector(None, "interpolated director vanishes at a quadrature point")
        m = nb / norm
        div = G[0][0] + G[1][1] + G[2][2]
        curl = np.stack([G[1][2] - G[2][1], G[2][0] - G[0][2], G[0][1] - G[1][0]])
        mc = np.sum(m * curl, axis=0)
        mm = np.sum(m * m, axis=0)
        cc = np.sum(curl * curl, axis=0)
        trGG = sum(G[i][j] * G[j][i] for i in range(3) for j in range(3))
        dens += wq[p] * np.stack([div ** 2, mc ** 2, mm * cc - mc ** 2, trGG - div ** 2])
        if not want_grad:
            continue
        dm = 2 * K2 * mc * curl + 2 * K3 * (cc * m - mc * curl)
        dc = 2 * K2 * mc * m + 2 * K3 * (mm * curl - mc * m)
        # dw/dG[i][j], starting from the saddle-splay part
        dG = [[2 * K24 * G[j][i] for j in range(3)] for i in range(3)]
        for i in range(3):
            dG[i][i] = dG[i][i] + 2 * (K1 - K24) * div
        dG[1][2] = dG[1][2] + dc[0]
        dG[2][1] = dG[2][1] - dc[0]
        dG[2][0] = dG[2][0] + dc[1]
        dG[0][2] = dG[0][2] - dc[1]
        dG[0][1] = dG[0][1] + dc[2]
        dG[1][0] = dG[1][0] - dc[2]
        dn = (dm - np.sum(dm * m, axis=0) * m) / norm * wq[p]
        dGs = [np.stack(dG[b]) * wq[p] for b in range(3)]
        for c in range(8):
            gc[c] += W[p, c] * dn + D[p, 0, c] * dGs[0] + D[p, 1, c] * dGs[1] + D[p, 2, c] * dGs[2]
    dens = np.stack([d[mask] for d in dens], axis=-1)
    if not want_grad:
        return dens, None
    gc *= mask
    return dens, _scatter_corners(geom, gc)


def _numba_evaluate(geom, values, k, want_grad, rule):
    W, D, wq = quadrature(rule, geom.delta)
    dens = np.empty((len(geom.cells), 4))
    grad = np.zeros(values.shape) if want_grad else np.zeros((1, 1, 1, 3))
    _kernel.cell_energy_grad(np.ascontiguousarray(values, dtype=np.float64), geom.cell_mask,
                             W, D, wq, k.K1, k.K2, k.K3, k.K24, want_grad, dens, grad)
    if not np.all(np.isfinite(dens)):
        raise ZeroVector(None, "interpolated director vanishes at a quadrature point")
    return dens, (grad if want_grad else None)


def cell_energies(geom: GridGeometry, values: np.ndarray, k: ElasticConstants,
                  want_grad: bool = False, rule: str | None = None,
                  backend: str | None = None):
    """Unscaled per-cell term energies (LC cells in C order) and optional gradient.

    Column t of the first result is the energy of term t (splay, twist,
    bend, saddle) in each cell with that term's constant set to one.
    """
    rule = rule or DEFAULT_RULE
    if (backend or BACKEND) == "numba":
        dens, grad = _numba_evaluate(geom, values, k, want_grad, rule)
    else:
        dens, grad = _numpy_evaluate(geom, values, k, want_grad, rule)
    if grad is not None:
        grad[~geom.free] = 0.0
    return dens, grad


def _weighted_sum(dens: np.ndarray, k: ElasticConstants) -> float:
    K1, K2, K3, K24 = k.weights()
    per_cell = dens[:, 0] * K1 + dens[:, 1] * K2 + dens[:, 2] * K3 + dens[:, 3] * K24
    return math.fsum(per_cell.tolist())


def energy_breakdown(field: DirectorField, k: ElasticConstants,
                     rule: str | None = None) -> EnergyBreakdown:
    """Per-term energies, each summed with exact rounding (order independent)."""
    field.check_normalized()
    dens, _ = cell_energies(field.geom, field.values, k, rule=rule)
    return EnergyBreakdown(*[w * math.fsum(dens[:, t].tolist())
                             for t, w in enumerate(k.weights())])


def total_energy(field: DirectorField, k: ElasticConstants, rule: str | None = None,
                 check: bool = True) -> float:
    if check:
        field.check_normalized()
    dens, _ = cell_energies(field.geom, field.values, k, rule=rule)
    return _weighted_sum(dens, k)


def energy_and_gradient(field: DirectorField, k: ElasticConstants, rule: str | None = None,
                        check: bool = True) -> tuple[float, np.ndarray]:
    """Total energy and its derivative with respect to every free nodal value.

    Fixed (top, edge) and excluded nodes get zero gradient.
    """
    if check:
        field.check_normalized()
    dens, grad = cell_energies(field.geom, field.values, k, want_grad=True, rule=rule)
    return _weighted_sum(dens, k), grad


def discrete_gradient(field: DirectorField, k: ElasticConstants,
                      rule: str | None = None) -> np.ndarray:
    return energy_and_gradient(field, k, rule=rule)[1]


def project_gradient(grad: np.ndarray, field: DirectorField) -> np.ndarray:
    """Tangent-space projection of a nodal gradient.

    Removes the component along ``n`` everywhere and along the surface normal
    at tangent nodes; fixed and excluded nodes are zeroed.
    """
    geom = field.geom
    if grad.shape != field.values.shape:
        raise ValueError("gradient and field shapes differ")
    n = field.values
    out = grad - np.sum(grad * n, axis=-1, keepdims=True) * n
    nu = geom.normals
    out -= np.sum(out * nu, axis=-1, keepdims=True) * nu
    out[~geom.free] = 0.0
    return out


def project_field(field: DirectorField) -> DirectorField:
    """Restore every boundary constraint and the unit norm.

    Tangent nodes lose their normal component, fixed nodes are reset (edge
    nodes keep their current orientation sign), all nodes are renormalized.
    """
    geom = field.geom
    values = enforce_constraints(geom, field.values)
    norms = np.linalg.norm(values, axis=-1)
    bad = geom.active & (norms < 1e-12)
    if bad.any():
        i, j, kk = np.argwhere(bad)[0]
        raise ZeroVector(geom.node_index(i, j, kk))
    act = geom.active
    values[act] /= norms[act][:, None]
    return DirectorField(geom, values)


def constraint_residual(field: DirectorField) -> float:
    """Largest violation of any node-class constraint, unit norm included."""
    geom = field.geom
    v = field.values
    res = [field.norm_residual()]
    tan = geom.tangent
    if tan.any():
        res.append(float(np.max(np.abs(np.sum(v[tan] * geom.normals[tan], axis=-1)))))
    top = geom.tags == Tag.TOP
    res.append(float(np.max(np.abs(v[top] - (0.0, 0.0, 1.0)))))
    edge = geom.tags == Tag.EDGE
    if edge.any():
        along = np.abs(np.sum(v[edge] * geom.edge_dirs[edge], axis=-1))
        res.append(float(np.max(np.abs(along - 1.0))))
    return max(res)
