"""Fused per-cell energy/gradient loop compiled with numba.

Mirrors ``_numpy_evaluate`` in :mod:`pabn.energy`.  Cells are visited in a
fixed order and gradients are scattered sequentially, so the output is
bit-reproducible.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def cell_energy_grad(values, mask, W, D, wq, K1, K2, K3, K24, want_grad, dens_out, grad_out):
    """Quadrature over every masked cell.

    ``W[p, c]`` and ``D[p, b, c]`` are the value and d/dx_b weights of
    corner ``c`` at quadrature point ``p``, ``wq[p]`` the point volumes.
    ``dens_out[cell, t]`` receives the unscaled (K = 1) energy of term t in
    that cell.
    """
    N = values.shape[0]
    nzc = values.shape[2] - 1
    nq = W.shape[0]
    cv = np.empty((8, 3))
    G = np.empty((3, 3))
    dG = np.empty((3, 3))
    m = np.empty(3)
    c = np.empty(3)
    dm = np.empty(3)
    dc = np.empty(3)
    dn = np.empty(3)
    gc = np.empty((8, 3))
    idx = np.empty((8, 3), dtype=np.int64)
    cell = 0
    for i in range(N):
        for j in range(N):
            for k in range(nzc):
                if not mask[i, j, k]:
                    continue
                for q in range(8):
                    ii = i + 1 if (q & 1) else i
                    if ii == N:
                        ii = 0
                    jj = j + 1 if (q & 2) else j
                    if jj == N:
                        jj = 0
                    kk = k + 1 if (q & 4) else k
                    idx[q, 0] = ii
                    idx[q, 1] = jj
                    idx[q, 2] = kk
                    for a in range(3):
                        cv[q, a] = values[ii, jj, kk, a]
                        gc[q, a] = 0.0
                e0 = 0.0
                e1 = 0.0
                e2 = 0.0
                e3 = 0.0
                for p in range(nq):
                    for a in range(3):
                        s = 0.0
                        for q in range(8):
                            s += W[p, q] * cv[q, a]
                        m[a] = s
                        for b in range(3):
                            s = 0.0
                            for q in range(8):
                                s += D[p, b, q] * cv[q, a]
                            G[b, a] = s
                    norm = np.sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2])
                    for a in range(3):
                        m[a] /= norm
                    div = G[0, 0] + G[1, 1] + G[2, 2]
                    c[0] = G[1, 2] - G[2, 1]
                    c[1] = G[2, 0] - G[0, 2]
                    c[2] = G[0, 1] - G[1, 0]
                    mc = m[0] * c[0] + m[1] * c[1] + m[2] * c[2]
                    mm = m[0] * m[0] + m[1] * m[1] + m[2] * m[2]
                    cc = c[0] * c[0] + c[1] * c[1] + c[2] * c[2]
                    trGG = 0.0
                    for a in range(3):
                        for b in range(3):
                            trGG += G[a, b] * G[b, a]
                    w = wq[p]
                    e0 += w * (div * div)
                    e1 += w * (mc * mc)
                    e2 += w * (mm * cc - mc * mc)
                    e3 += w * (trGG - div * div)
                    if not want_grad:
                        continue
                    for a in range(3):
                        dm[a] = 2.0 * K2 * mc * c[a] + 2.0 * K3 * (cc * m[a] - mc * c[a])
                        dc[a] = 2.0 * K2 * mc * m[a] + 2.0 * K3 * (mm * c[a] - mc * m[a])
                    for a in range(3):
                        for b in range(3):
                            dG[a, b] = 2.0 * K24 * G[b, a]
                        dG[a, a] += 2.0 * (K1 - K24) * div
                    dG[1, 2] += dc[0]
                    dG[2, 1] -= dc[0]
                    dG[2, 0] += dc[1]
                    dG[0, 2] -= dc[1]
                    dG[0, 1] += dc[2]
                    dG[1, 0] -= dc[2]
                    dmm = dm[0] * m[0] + dm[1] * m[1] + dm[2] * m[2]
                    for a in range(3):
                        dn[a] = (dm[a] - dmm * m[a]) / norm * w
                    for q in range(8):
                        wv = W[p, q]
                        d0 = D[p, 0, q] * w
                        d1 = D[p, 1, q] * w
                        d2 = D[p, 2, q] * w
                        for a in range(3):
                            gc[q, a] += wv * dn[a] + d0 * dG[0, a] + d1 * dG[1, a] + d2 * dG[2, a]
                dens_out[cell, 0] = e0
                dens_out[cell, 1] = e1
                dens_out[cell, 2] = e2
                dens_out[cell, 3] = e3
                cell += 1
                if want_grad:
                    for q in range(8):
                        for a in range(3):
                            grad_out[idx[q, 0], idx[q, 1], idx[q, 2], a] += gc[q, a]
