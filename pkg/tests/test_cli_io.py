import csv
import json

import numpy as np
import pytest

from pabn.cli_io import (DIAG_HEADER, ENERGY_HEADER, EPS_HEADER, main, parse_config, read_vtk,
                         write_csv, write_vtk)
from pabn.director import Topology, trial_field
from pabn.energy import ElasticConstants, EnergyBreakdown
from pabn.errors import IoError, ParseError
from pabn.experiments import SweepResult, SweepRow
from pabn.relax import RelaxReport, StopReason
from pabn.topology import diagnose

ENERGY_GOLDEN = ("topology,h_over_Lc,grid_N,K1,K2,K3,K24,E_total,E_splay,E_twist,E_bend,"
                 "E_saddle,iterations,converged")


def test_csv_headers_are_stable():
    assert ",".join(ENERGY_HEADER) == ENERGY_GOLDEN
    assert ",".join(EPS_HEADER) == "h_over_Lc,eps1,eps3"
    assert DIAG_HEADER == ("kind", "id", "value", "detail")


def test_parse_run_flags():
    cfg = parse_config("run --topology T --height 1.0 --grid 16 --k1 4 --k2 2 --k3 6".split())
    assert cfg.command == "run" and cfg.topology is Topology.T
    assert cfg.constants == ElasticConstants(4, 2, 6, 0)
    assert cfg.grid == 16 and cfg.height == 1.0


@pytest.mark.parametrize("argv, key, reason", [
    ("run --height 0.3 --grid 8", "height", "not conforming to grid"),
    ("run --k2 -2", "k2", "must be positive"),
    ("run --grid 10", "grid", None),
    ("run --topology P9", "topology", None),
    ("run --method newton", "method", None),
    ("sweep --heights 0.5,0.33 --grid 8", "heights", None),
    ("run --grid sixteen", "grid", None),
    ("trial --topology P2 --height 0", "height", None),
])
def test_parse_errors_name_the_key(argv, key, reason):
    with pytest.raises(ParseError) as exc:
        parse_config(argv.split())
    assert exc.value.key == key
    if reason:
        assert exc.value.reason == reason


def test_config_file_and_flag_override(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"k1": -1}))
    with pytest.raises(ParseError) as exc:
        parse_config(["run"], path)
    assert (exc.value.key, exc.value.reason) == ("k1", "must be positive")
    path.write_text(json.dumps({"k1": 3, "heights": [1.0, 0.5], "topologies": "T,P3",
                                "grid": 8, "max_iters": 7}))
    cfg = parse_config(["sweep", "--config", str(path), "--k1", "5"])
    assert cfg.constants.K1 == 5.0
    assert cfg.heights == (0.5, 1.0) and cfg.topologies == (Topology.T, Topology.P3)
    assert cfg.relax.max_iters == 7
    path.write_text(json.dumps({"colour": "blue"}))
    with pytest.raises(ParseError) as exc:
        parse_config(["run"], path)
    assert exc.value.key == "colour"


def _report(total):
    e = EnergyBreakdown(total / 2, total / 4, total / 4, 0.0)
    return e, RelaxReport(12, e, True, StopReason.ENERGY_FLAT, total)


def _rows(spec):
    k = ElasticConstants(4, 2, 6)
    out = []
    for topo, h, total in spec:
        e, rep = _report(total)
        out.append(SweepRow(Topology.parse(topo), h, 16, k, e, rep, None))
    return out


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_write_csv_single_and_empty(tmp_path):
    write_csv(SweepResult(_rows([("T", 1.0, 40.1)]), {}, {}, {}), tmp_path / "one")
    rows = _read(tmp_path / "one" / "energies.csv")
    assert len(rows) == 2
    assert rows[1] == ["T", "1.0", "16", "4.0", "2.0", "6.0", "0.0", "40.1", "20.05",
                       "10.025", "10.025", "0.0", "12", "true"]
    write_csv(SweepResult([], {}, {}, {}), tmp_path / "empty")
    assert _read(tmp_path / "empty" / "energies.csv") == [list(ENERGY_HEADER)]
    assert _read(tmp_path / "empty" / "epsilons.csv") == [list(EPS_HEADER)]


def test_write_csv_partial_sweep(tmp_path):
    from pabn.experiments import relative_gaps
    rows = _rows([("P3", 0.5, 13.0), ("T", 0.5, 10.0), ("P1", 0.5, 11.0), ("T", 1.0, 20.0),
                  ("P1", 1.0, 25.0), ("P3", 1.0, 30.0)])
    eps1, eps3 = relative_gaps(rows)
    write_csv(SweepResult(rows, eps1, eps3, {}), tmp_path)
    energies = _read(tmp_path / "energies.csv")[1:]
    assert [(r[0], r[1]) for r in energies] == [("T", "0.5"), ("T", "1.0"), ("P1", "0.5"),
                                                 ("P1", "1.0"), ("P3", "0.5"), ("P3", "1.0")]
    eps = _read(tmp_path / "epsilons.csv")[1:]
    assert eps == [["0.5", repr(0.1), repr(0.3)], ["1.0", "0.25", "0.5"]]


def test_vtk_layout_and_round_trip(tmp_path, geom):
    g = geom(1.0, 16)
    f = trial_field(g, "P1")
    path = write_vtk(f, tmp_path / "f.vtk")
    lines = path.read_text().splitlines()
    assert lines[3] == "DATASET STRUCTURED_POINTS"
    assert lines[4] == f"DIMENSIONS 16 16 {g.nz}"
    assert lines[5] == "SPACING 0.0625 0.0625 0.0625"
    assert lines[6] == "ORIGIN -0.25 -0.25 0.0"
    start = lines.index("LOOKUP_TABLE default") + 1
    mask = np.array([int(s) for s in lines[start:start + g.n_nodes]])
    c = g.counts()
    assert np.count_nonzero(mask == 0) == c["EXCLUDED"]
    assert np.count_nonzero(mask == 2) == c["TOP"] + c["EDGE"]
    assert np.count_nonzero(mask == 1) == g.n_nodes - c["EXCLUDED"] - c["TOP"] - c["EDGE"]
    # x varies fastest
    first = np.array([float(t) for t in lines[lines.index("VECTORS director float") + 2].split()])
    np.testing.assert_array_equal(first, f.values[1, 0, 0])
    back = read_vtk(path)
    np.testing.assert_array_equal(back.values, f.values)
    assert back.geom.counts() == c


def test_flat_vtk_has_no_excluded(tmp_path, geom):
    path = write_vtk(trial_field(geom(0.0, 8), "T"), tmp_path / "flat.vtk")
    lines = path.read_text().splitlines()
    start = lines.index("LOOKUP_TABLE default") + 1
    assert "0" not in lines[start:]


def test_unwritable_path(tmp_path, geom):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoError):
        write_vtk(trial_field(geom(0.5, 8), "T"), blocker / "f.vtk")
    with pytest.raises(IoError):
        write_csv(SweepResult([], {}, {}, {}), blocker)
    with pytest.raises(IoError):
        read_vtk(tmp_path / "missing.vtk")


@pytest.mark.parametrize("topo", list(Topology))
def test_trial_vtk_diagnose_round_trip(tmp_path, topo, capsys):
    out = tmp_path / topo.name
    assert main(["trial", "--topology", topo.name, "--height", "1.0", "--grid", "16",
                 "--out", str(out)]) == 0
    assert main(["diagnose", str(out / "trial.vtk"), "--out", str(out)]) == 0
    rows = _read(out / "diagnostics.csv")
    vertical = [int(r[2]) for r in rows if r[0] == "edge" and r[1].startswith("vertical")]
    assert tuple(vertical) == topo.vertical_signature
    assert diagnose(read_vtk(out / "trial.vtk")).signature.vertical == topo.vertical_signature


def test_cli_run_writes_outputs(tmp_path, capsys):
    code = main(["run", "--topology", "P2", "--height", "0.5", "--grid", "8", "--out", str(tmp_path)])
    assert code == 0
    assert {p.name for p in tmp_path.iterdir()} == {"field.vtk", "energies.csv", "epsilons.csv",
                                                   "diagnostics.csv"}
    assert len(_read(tmp_path / "energies.csv")) == 2
    assert "P2: E=" in capsys.readouterr().out


def test_cli_reports_config_errors(capsys):
    assert main(["run", "--height", "0.3", "--grid", "8"]) == 2
    assert "not conforming to grid" in capsys.readouterr().err
