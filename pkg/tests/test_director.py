import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pabn.director import Topology, enforce_constraints, normalize_field, trial_field
from pabn.errors import InvalidParams, NotNormalized, ZeroVector
from pabn.geometry import CellParams, Tag, build_geometry
from pabn.topology import edge_orientation_signature


def _raw(topo, x, y, z, Lp=0.5, h=1.0, H=3.0):
    nx = math.sin(math.pi * x / Lp) ** 2 * (H - z) / H
    ny = math.sin(math.pi * y / Lp) ** 2 * (H - z) / H
    cx, cy = math.cos(math.pi * x / Lp), math.cos(math.pi * y / Lp)
    factor = {"T": 1.0, "P1": 1 + cx + cy, "P2": cx, "P3": cx * cy}[topo]
    nz = z * (h - z) * factor if z <= h else (z - h) / (H - h)
    v = np.array([nx, ny, nz])
    return v / np.linalg.norm(v)


@pytest.mark.parametrize("topo", ["T", "P1", "P2", "P3"])
def test_trial_matches_closed_form_at_interior_nodes(geom, topo):
    g = geom(1.0, 16)
    f = trial_field(g, topo)
    for (i, j, k) in [(2, 3, 5), (9, 13, 20), (14, 1, 10), (0, 7, 40)]:
        assert g.tags[i, j, k] == Tag.INTERIOR
        x, y, z = g.coords[i, j, k]
        np.testing.assert_allclose(f.values[i, j, k], _raw(topo, x, y, z), atol=1e-14)


@pytest.mark.parametrize("topo", list(Topology))
def test_trial_is_normalized_and_constrained(geom, topo):
    g = geom(1.0, 16)
    f = trial_field(g, topo)
    f.check_normalized(1e-12)
    assert np.all(f.values[~g.active] == 0)
    tan = g.tangent
    assert np.max(np.abs(np.sum(f.values[tan] * g.normals[tan], axis=-1))) < 1e-15
    assert np.all(f.values[g.tags == Tag.TOP] == (0, 0, 1))


def test_t_trial_tilts_upward(geom):
    f = trial_field(geom(1.0, 16), "T")
    assert f.values[..., 2].min() >= 0.0


def test_p2_antisymmetry(geom):
    g = geom(1.0, 16)
    f = trial_field(g, "P2")
    lo, hi = g.post_lo, g.post_hi
    for i in range(g.N):
        mirror = (lo + hi - i) % g.N
        for k in range(1, g.post_top):
            for j in range(g.N):
                if g.tags[i, j, k] == Tag.INTERIOR and g.tags[mirror, j, k] == Tag.INTERIOR:
                    assert f.values[i, j, k, 2] == pytest.approx(-f.values[mirror, j, k, 2], abs=1e-12)


def test_p_class_needs_post(geom):
    with pytest.raises(InvalidParams):
        trial_field(geom(0.0, 8), "P3")
    trial_field(geom(0.0, 8), "T").check_normalized()


def test_parse_topology():
    assert Topology.parse("p2") is Topology.P2
    assert Topology.P3.vertical_signature == (1, -1, 1, -1)
    with pytest.raises(ValueError):
        Topology.parse("P4")


def test_normalization_errors(geom):
    g = geom(0.5, 8)
    f = trial_field(g, "T")
    bad = f.copy()
    bad.values[3, 3, 10] *= 1.01
    with pytest.raises(NotNormalized) as exc:
        bad.check_normalized()
    assert exc.value.node == g.node_index(3, 3, 10)
    bad.values[3, 3, 10] = 0
    with pytest.raises(ZeroVector):
        normalize_field(bad)


@settings(max_examples=25, deadline=None)
@given(N=st.sampled_from([8, 12, 16, 20]), steps=st.integers(2, 12),
       topo=st.sampled_from(list(Topology)))
def test_signature_round_trip(N, steps, topo):
    h = steps / N
    if h >= 1.5:
        return
    g = build_geometry(CellParams(h=h, N=N))
    sig = edge_orientation_signature(trial_field(g, topo))
    assert sig.vertical == topo.vertical_signature
    assert sig.horizontal_top == sig.horizontal_base == (1, 1, 1, 1)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_enforce_constraints_idempotent(seed):
    g = build_geometry(CellParams(h=0.5, N=8))
    v = np.random.default_rng(seed).normal(size=g.shape + (3,))
    once = enforce_constraints(g, v)
    np.testing.assert_array_equal(enforce_constraints(g, once), once)


def test_signature_needs_interior_edge_nodes():
    g = build_geometry(CellParams(h=0.125, N=8))
    with pytest.raises(InvalidParams):
        edge_orientation_signature(trial_field(g, "T"))
