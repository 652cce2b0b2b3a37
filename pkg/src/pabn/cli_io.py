"""The ``pabn`` command line with its configuration parser and file writers.

Subcommands::

    pabn run       relax one class, write field.vtk, energies.csv, diagnostics.csv
    pabn sweep     relax every (height, class) pair, write energies.csv, epsilons.csv
    pabn diagnose  recompute topology diagnostics from a saved VTK field
    pabn trial     write the unrelaxed trial field

Every option may also come from a JSON file given with ``--config``; flags on
the command line win over the file.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .director import DirectorField, Topology, trial_field
from .energy import ElasticConstants, RULES
from .errors import InvalidParams, IoError, PabnError, ParseError
from .experiments import (DEFAULT_HEIGHTS, SweepResult, SweepRow, SweepSpec, relative_gaps,
                          plateau_slopes, run_single, sweep_heights)
from .geometry import CellParams, GridGeometry, build_geometry
from .relax import METHODS, RelaxOptions
from .topology import LATERAL_FACES, PLANAR_THRESHOLD, Diagnostics, diagnose

COMMANDS = ("run", "sweep", "diagnose", "trial")
ENERGY_HEADER = ("topology", "h_over_Lc", "grid_N", "K1", "K2", "K3", "K24", "E_total",
                 "E_splay", "E_twist", "E_bend", "E_saddle", "iterations", "converged")
EPS_HEADER = ("h_over_Lc", "eps1", "eps3")
DIAG_HEADER = ("kind", "id", "value", "detail")
_CONFORM_TOL = 1e-9


@dataclass(frozen=True)
class RunConfig:
    command: str
    topology: Topology = Topology.T
    height: float = 1.0
    grid: int = 16
    Lc: float = 1.0
    constants: ElasticConstants = field(default_factory=lambda: ElasticConstants(4.0, 2.0, 6.0))
    relax: RelaxOptions = field(default_factory=RelaxOptions)
    heights: tuple[float, ...] = DEFAULT_HEIGHTS
    topologies: tuple[Topology, ...] = tuple(Topology)
    out: Path = Path("out")
    threads: int = 1
    planar_threshold: float = PLANAR_THRESHOLD
    input: Path | None = None

    def sweep_spec(self) -> SweepSpec:
        return SweepSpec(self.heights, self.topologies, self.constants, self.grid,
                         self.relax, self.Lc)


# --------------------------------------------------------------------------
# configuration

_FLAGS = {
    # key: (type, help)
    "topology": (str, "class label T, P1, P2 or P3"),
    "height": (float, "post height h/Lc"),
    "grid": (int, "grid resolution N (cells per Lc)"),
    "Lc": (float, "cell period"),
    "k1": (float, "splay constant"),
    "k2": (float, "twist constant"),
    "k3": (float, "bend constant"),
    "k24": (float, "saddle-splay constant"),
    "max_iters": (int, "iteration cap"),
    "tol_energy": (float, "relative energy change over the window"),
    "tol_step": (float, "largest nodal rotation in radians"),
    "step0": (float, "initial step for gradient descent"),
    "method": (str, f"descent direction, one of {METHODS}"),
    "rule": (str, f"quadrature rule, one of {RULES}"),
    "progress": (int, "log progress to stderr every M iterations (0 = off)"),
    "heights": (str, "comma separated h/Lc values"),
    "topologies": (str, "comma separated class labels"),
    "out": (str, "output directory"),
    "threads": (int, "worker processes for sweeps"),
    "planar_threshold": (float, "|n_z| bound for a planar band"),
}
_DEFAULTS = {"topology": "T", "height": 1.0, "grid": 16, "Lc": 1.0, "k1": 4.0, "k2": 2.0,
             "k3": 6.0, "k24": 0.0, "progress": 0, "out": "out",
             "planar_threshold": PLANAR_THRESHOLD}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pabn", description="Post-aligned nematic cell solver")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        s = sub.add_parser(cmd)
        s.add_argument("--config", help="JSON file with default option values")
        if cmd == "diagnose":
            s.add_argument("input", help="legacy VTK file written by run or trial")
        for key, (typ, helptext) in _FLAGS.items():
            # argparse.SUPPRESS keeps absent flags out of the namespace
            s.add_argument(f"--{key.replace('_', '-')}", dest=key, type=str,
                           default=argparse.SUPPRESS, help=helptext)
    return p


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError("config", f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(data, dict):
        raise ParseError("config", "top level must be an object")
    aliases = {"h": "height", "N": "grid", "K1": "k1", "K2": "k2", "K3": "k3", "K24": "k24"}
    out = {}
    for key, value in data.items():
        key = aliases.get(key, key)
        if key not in _FLAGS:
            raise ParseError(key, "unknown option")
        out[key] = value
    return out


def _coerce(key: str, value):
    typ = _FLAGS[key][0]
    if key in ("heights", "topologies"):
        items = value.split(",") if isinstance(value, str) else list(value)
        items = [str(v).strip() for v in items if str(v).strip()]
        if not items:
            raise ParseError(key, "must not be empty")
        if key == "topologies":
            try:
                return tuple(Topology.parse(v) for v in items)
            except ValueError as exc:
                raise ParseError(key, str(exc)) from None
        return tuple(_coerce("height", v) for v in items)
    try:
        if typ is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            out = int(value) if not isinstance(value, str) else int(value, 10)
        elif typ is float:
            out = float(value)
            if not math.isfinite(out):
                raise ValueError
        else:
            out = str(value)
    except (TypeError, ValueError):
        raise ParseError(key, f"expected {typ.__name__}, got {value!r}") from None
    return out


def _conforming_height(h: float, grid: int) -> bool:
    steps = h * grid
    return abs(steps - round(steps)) <= _CONFORM_TOL * max(1.0, abs(steps))


def parse_config(argv: list[str], config_file: str | os.PathLike | None = None) -> RunConfig:
    """Validated configuration from command-line tokens and an optional JSON file.

    ``argv`` starts with the subcommand.  Any problem raises
    ``ParseError(key, reason)`` naming the offending option.
    """
    try:
        ns = _parser().parse_args(argv)
    except SystemExit as exc:
        raise ParseError("argv", "invalid command line") from exc
    raw = dict(_DEFAULTS)
    file = config_file or getattr(ns, "config", None)
    if file:
        raw.update(_load_json(file))
    raw.update({k: v for k, v in vars(ns).items() if k in _FLAGS})
    vals = {k: _coerce(k, v) for k, v in raw.items()}

    for key in ("k1", "k2", "k3", "Lc"):
        if not vals[key] > 0:
            raise ParseError(key, "must be positive")
    grid = vals["grid"]
    if grid < 8 or grid % 4:
        raise ParseError("grid", "must be a multiple of 4 and at least 8")
    if vals["height"] < 0:
        raise ParseError("height", "must be non-negative")
    if vals["height"] >= 3.0:
        raise ParseError("height", "must be below the cell thickness 3 Lc")
    if not _conforming_height(vals["height"], grid):
        raise ParseError("height", "not conforming to grid")
    for h in vals.get("heights", ()):
        if h < 0 or h >= 3.0:
            raise ParseError("heights", f"{h!r} outside [0, 3)")
        if not _conforming_height(h, grid):
            raise ParseError("heights", f"{h!r} not conforming to grid")
    if vals.get("method", "lbfgs") not in METHODS:
        raise ParseError("method", f"must be one of {METHODS}")
    if vals.get("rule", "gauss") not in RULES:
        raise ParseError("rule", f"must be one of {RULES}")
    if vals.get("threads", 1) < 1:
        raise ParseError("threads", "must be positive")
    if not vals["planar_threshold"] > 0:
        raise ParseError("planar_threshold", "must be positive")
    try:
        topo = Topology.parse(vals["topology"])
    except ValueError as exc:
        raise ParseError("topology", str(exc)) from None
    if topo is not Topology.T and vals["height"] == 0 and ns.command in ("run", "trial"):
        raise ParseError("height", f"topology {topo.name} needs a post (height > 0)")

    relax_keys = ("max_iters", "tol_energy", "tol_step", "step0", "method", "rule")
    relax_kw = {k: vals[k] for k in relax_keys if k in vals}
    relax_kw["progress_every"] = vals["progress"]
    try:
        opts = RelaxOptions(**relax_kw)
    except InvalidParams as exc:
        key = next((k for k in relax_keys if k in str(exc)), "relax")
        raise ParseError(key, str(exc)) from None
    constants = ElasticConstants(vals["k1"], vals["k2"], vals["k3"], vals["k24"])
    kwargs = {}
    if "heights" in vals:
        kwargs["heights"] = tuple(sorted(set(vals["heights"])))
    if "topologies" in vals:
        kwargs["topologies"] = tuple(t for t in Topology if t in vals["topologies"])
    return RunConfig(
        command=ns.command, topology=topo, height=vals["height"], grid=grid, Lc=vals["Lc"],
        constants=constants, relax=opts, out=Path(vals["out"]),
        threads=vals.get("threads", int(os.environ.get("PABN_WORKERS", "1"))),
        planar_threshold=vals["planar_threshold"],
        input=Path(ns.input) if getattr(ns, "input", None) else None, **kwargs)


# --------------------------------------------------------------------------
# CSV

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror}") from None


def energy_rows(rows: list[SweepRow]) -> list[list[str]]:
    out = []
    for r in sorted(rows, key=lambda r: r.key):
        if r.energy is None:
            continue
        e, k = r.energy, r.constants
        out.append([_fmt(v) for v in (
            r.topology.name, float(r.h_over_Lc), r.grid_N, float(k.K1), float(k.K2),
            float(k.K3), float(k.K24), e.total, e.splay, e.twist, e.bend, e.saddle,
            r.report.iterations, r.converged)])
    return out


def write_csv(result: SweepResult, directory: str | os.PathLike) -> tuple[Path, Path]:
    """Write ``energies.csv`` and ``epsilons.csv`` into ``directory``.

    Floats use the shortest round-trip decimal form.  Rows that failed to
    produce an energy are left out of ``energies.csv``.
    """
    directory = Path(directory)
    e_path, eps_path = directory / "energies.csv", directory / "epsilons.csv"
    try:
        with _open_for_write(e_path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ENERGY_HEADER)
            w.writerows(energy_rows(result.rows))
        with _open_for_write(eps_path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EPS_HEADER)
            for h in sorted(set(result.eps1) | set(result.eps3)):
                w.writerow([_fmt(float(h)), _fmt(result.eps1.get(h, "")),
                            _fmt(result.eps3.get(h, ""))])
    except OSError as exc:
        raise IoError(f"cannot write CSV output in {directory}: {exc}") from None
    return e_path, eps_path


def diagnostics_rows(diag: Diagnostics) -> list[list[str]]:
    """Rows for the post edges and faces, followed by one per vertex."""
    rows = []
    sig = diag.signature
    for e, s in enumerate(sig.vertical, start=1):
        rows.append(["edge", f"vertical{e}", str(s), ""])
    for level, signs in (("top", sig.horizontal_top), ("base", sig.horizontal_base)):
        for name, s in zip(("y0", "x1", "y1", "x0"), signs):
            rows.append(["edge", f"{level}-{name}", str(s), ""])
    for face in LATERAL_FACES:
        kinks = diag.face_kinks.get(face, [])
        max_kink = max((abs(k) for k in kinks), default=0)
        rows.append(["face", face, str(max_kink),
                     f"planar={_fmt(diag.planar.get(face, False))};rows={len(kinks)}"])
    for vertex, angle in diag.vertex_degrees.items():
        rows.append(["vertex", vertex, repr(angle), ""])
    for key, msg in diag.errors.items():
        rows.append(["error", key, "", msg])
    return rows


def write_diagnostics_csv(diag: Diagnostics, path: str | os.PathLike) -> Path:
    path = Path(path)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAG_HEADER)
        w.writerows(diagnostics_rows(diag))
    return path


# --------------------------------------------------------------------------
# VTK

def _mask_codes(geom: GridGeometry) -> np.ndarray:
    codes = np.ones(geom.shape, dtype=int)
    codes[geom.fixed] = 2
    codes[~geom.active] = 0
    return codes


def write_vtk(field: DirectorField, path: str | os.PathLike) -> Path:
    """Legacy ASCII structured-points file with the director and a node mask.

    Mask codes: 0 excluded, 1 active, 2 fixed.  Points are listed with x
    varying fastest.  The title line records the cell parameters so the
    file can be read back exactly.
    """
    geom = field.geom
    p = geom.params
    path = Path(path)
    n_pts = geom.n_nodes
    # VTK order: x fastest, then y, then z
    vec = np.transpose(field.values, (2, 1, 0, 3)).reshape(-1, 3)
    mask = np.transpose(_mask_codes(geom), (2, 1, 0)).ravel()
    title = f"pabn director N={geom.N} Lc={p.Lc!r} Lp={p.Lp!r} H={p.H!r} h={p.h!r}"
    lines = [
        "# vtk DataFile Version 3.0", title, "ASCII", "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {geom.N} {geom.N} {geom.nz}",
        f"SPACING {geom.delta!r} {geom.delta!r} {geom.delta!r}",
        f"ORIGIN {-p.Lc / 4!r} {-p.Lc / 4!r} 0.0",
        f"POINT_DATA {n_pts}", "VECTORS director float",
    ]
    lines += [f"{a!r} {b!r} {c!r}" for a, b, c in vec.tolist()]
    lines += ["SCALARS mask int 1", "LOOKUP_TABLE default"]
    lines += [str(m) for m in mask.tolist()]
    with _open_for_write(path) as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_vtk(path: str | os.PathLike) -> DirectorField:
    """Read a field written by :func:`write_vtk`."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None
    if len(text) < 9 or not text[0].startswith("# vtk"):
        raise IoError(f"{path} is not a legacy VTK file")
    meta = dict(tok.split("=", 1) for tok in text[1].split() if "=" in tok)
    try:
        N = int(meta["N"])
        params = CellParams(h=float(meta["h"]), N=N, Lc=float(meta["Lc"]),
                            Lp=float(meta["Lp"]), H=float(meta["H"]))
    except (KeyError, ValueError):
        raise IoError(f"{path}: title line lacks cell parameters") from None
    geom = build_geometry(params)
    try:
        start = text.index("VECTORS director float") + 1
    except ValueError:
        raise IoError(f"{path}: no director vectors") from None
    rows = text[start:start + geom.n_nodes]
    try:
        vec = np.array([[float(t) for t in r.split()] for r in rows])
    except ValueError:
        raise IoError(f"{path}: malformed vector data") from None
    if vec.shape != (geom.n_nodes, 3):
        raise IoError(f"{path}: expected {geom.n_nodes} vectors")
    values = np.ascontiguousarray(vec.reshape(geom.nz, N, N, 3).transpose(2, 1, 0, 3))
    return DirectorField(geom, values)


# --------------------------------------------------------------------------
# commands

def _summary_line(label: str, res) -> str:
    e = res.energy
    return (f"{label}: E={e.total:.10g} (splay {e.splay:.6g}, twist {e.twist:.6g}, "
            f"bend {e.bend:.6g}, saddle {e.saddle:.6g}) iterations={res.report.iterations} "
            f"reason={res.report.reason.value}")


def _print_diagnostics(diag: Diagnostics, out=sys.stdout):
    sig = diag.signature
    fmt = lambda s: "".join("+" if v > 0 else "-" for v in s)  # noqa: E731
    print(f"vertical signature {fmt(sig.vertical)}  top {fmt(sig.horizontal_top)}  "
          f"base {fmt(sig.horizontal_base)}", file=out)
    print(f"kinks all zero: {diag.all_kinks_zero}", file=out)
    print(f"planar faces: {','.join(diag.planar_faces()) or 'none'}", file=out)
    for v, a in diag.vertex_degrees.items():
        print(f"  {v}: solid angle {a / math.pi:+.4f} pi", file=out)
    for key, msg in diag.errors.items():
        print(f"  {key}: {msg}", file=out)


def cmd_run(cfg: RunConfig) -> int:
    res = run_single(cfg.topology, cfg.height, cfg.constants, cfg.grid, cfg.relax, cfg.Lc,
                     cfg.planar_threshold)
    write_vtk(res.field, cfg.out / "field.vtk")
    row = SweepRow(cfg.topology, cfg.height, cfg.grid, cfg.constants, res.energy, res.report,
                   res.diagnostics.signature if res.diagnostics else None)
    eps1, eps3 = relative_gaps([row])
    write_csv(SweepResult([row], eps1, eps3, plateau_slopes(eps1, eps3)), cfg.out)
    print(_summary_line(cfg.topology.name, res))
    if res.diagnostics is not None:
        write_diagnostics_csv(res.diagnostics, cfg.out / "diagnostics.csv")
        _print_diagnostics(res.diagnostics)
    return 0 if res.report.converged else 3


def cmd_sweep(cfg: RunConfig) -> int:
    result = sweep_heights(cfg.sweep_spec(), workers=cfg.threads)
    write_csv(result, cfg.out)
    for r in result.rows:
        status = r.error or f"E={r.energy.total:.10g} converged={r.converged}"
        print(f"{r.topology.name} h={r.h_over_Lc:g}: {status}")
    for name, (lo, hi) in result.plateau.items():
        print(f"{name} slope low {lo:.6g} high {hi:.6g}")
    return 0 if all(r.converged for r in result.rows) else 3


def cmd_diagnose(cfg: RunConfig) -> int:
    fld = read_vtk(cfg.input)
    diag = diagnose(fld, cfg.planar_threshold)
    _print_diagnostics(diag)
    write_diagnostics_csv(diag, cfg.out / "diagnostics.csv")
    return 0


def cmd_trial(cfg: RunConfig) -> int:
    geom = build_geometry(CellParams(h=cfg.height * cfg.Lc, N=cfg.grid, Lc=cfg.Lc))
    path = write_vtk(trial_field(geom, cfg.topology), cfg.out / "trial.vtk")
    print(f"wrote {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ParseError as exc:
        if exc.key == "argv":
            return 2      # argparse has already printed usage
        print(f"pabn: configuration error in '{exc.key}': {exc.reason}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if cfg.relax.progress_every else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "diagnose": cmd_diagnose, "trial": cmd_trial}
    try:
        return handler[cfg.command](cfg)
    except PabnError as exc:
        print(f"pabn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
