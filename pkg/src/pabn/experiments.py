"""Height sweeps over the four topological classes and the relative energy gaps.

``eps1 = (E_P1 - E_T) / E_T`` and ``eps3 = (E_P3 - E_T) / E_T`` are formed at
every height where the classes involved converged.  Runs are independent and
may be spread over worker processes; results are keyed on (topology, height)
so the outcome does not depend on completion order.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .director import DirectorField, Topology, trial_field
from .energy import ElasticConstants, EnergyBreakdown
from .errors import EmptySpec, InvalidParams, PabnError
from .geometry import CellParams, build_geometry
from .relax import RelaxOptions, RelaxReport, relax
from .topology import Diagnostics, EdgeSignature, diagnose

WORKERS_ENV = "PABN_WORKERS"
DEFAULT_HEIGHTS = tuple(0.25 + 0.125 * i for i in range(11))
LOW_WINDOW = (0.5, 0.9)
HIGH_WINDOW_START = 1.0


@dataclass
class RunResult:
    field: DirectorField
    energy: EnergyBreakdown
    report: RelaxReport
    diagnostics: Diagnostics | None


def run_single(topo: Topology | str, h: float, k: ElasticConstants, N: int = 16,
               opts: RelaxOptions | None = None, Lc: float = 1.0,
               planar_threshold: float | None = None) -> RunResult:
    """Relax the trial field of one class at post height ``h`` (in units of Lc)."""
    topo = Topology.parse(topo)
    geom = build_geometry(CellParams(h=h * Lc, N=N, Lc=Lc))
    start = trial_field(geom, topo)
    relaxed, report = relax(start, k, opts)
    diag = None
    if geom.has_post:
        diag = diagnose(relaxed) if planar_threshold is None else diagnose(relaxed, planar_threshold)
    return RunResult(relaxed, report.final_energy, report, diag)


@dataclass(frozen=True)
class SweepSpec:
    heights: tuple[float, ...] = DEFAULT_HEIGHTS
    topologies: tuple[Topology, ...] = tuple(Topology)
    constants: ElasticConstants = field(default_factory=lambda: ElasticConstants(4.0, 2.0, 6.0))
    N: int = 16
    options: RelaxOptions = field(default_factory=RelaxOptions)
    Lc: float = 1.0

    def __post_init__(self):
        hs = tuple(float(h) for h in self.heights)
        if any(h < 0 for h in hs):
            raise InvalidParams("heights must be non-negative")
        if len(set(hs)) != len(hs):
            raise InvalidParams("heights must be distinct")
        object.__setattr__(self, "heights", tuple(sorted(hs)))
        topos = tuple(dict.fromkeys(Topology.parse(t) for t in self.topologies))
        object.__setattr__(self, "topologies", tuple(t for t in Topology if t in topos))
        for h in self.heights:
            build_geometry(CellParams(h=h * self.Lc, N=self.N, Lc=self.Lc))


@dataclass
class SweepRow:
    topology: Topology
    h_over_Lc: float
    grid_N: int
    constants: ElasticConstants
    energy: EnergyBreakdown | None
    report: RelaxReport | None
    signature: EdgeSignature | None
    kinks_zero: bool | None = None
    error: str | None = None

    @property
    def converged(self) -> bool:
        return self.report is not None and self.report.converged

    @property
    def key(self) -> tuple[int, float]:
        return (list(Topology).index(self.topology), self.h_over_Lc)


@dataclass
class SweepResult:
    rows: list[SweepRow]
    eps1: dict[float, float]
    eps3: dict[float, float]
    plateau: dict[str, tuple[float, float]]


def _run_row(args) -> SweepRow:
    topo, h, k, N, opts, Lc = args
    try:
        res = run_single(topo, h, k, N, opts, Lc)
    except PabnError as exc:
        return SweepRow(topo, h, N, k, None, None, None, error=f"{type(exc).__name__}: {exc}")
    diag = res.diagnostics
    return SweepRow(topo, h, N, k, res.energy, res.report,
                    diag.signature if diag else None,
                    diag.all_kinks_zero if diag else None)


def relative_gaps(rows: list[SweepRow]) -> tuple[dict[float, float], dict[float, float]]:
    """eps1 and eps3 per height, using converged rows only."""
    energy = {(r.topology, r.h_over_Lc): r.energy.total for r in rows if r.converged}
    eps = {}
    for name, other in (("eps1", Topology.P1), ("eps3", Topology.P3)):
        out = {}
        for (topo, h), e_t in energy.items():
            if topo is Topology.T and (other, h) in energy:
                out[h] = (energy[(other, h)] - e_t) / e_t
        eps[name] = dict(sorted(out.items()))
    return eps["eps1"], eps["eps3"]


def window_slope(series: dict[float, float], lo: float, hi: float) -> float:
    """Least-squares slope of ``series`` over heights in ``[lo, hi]``; NaN with fewer than two points."""
    pts = [(h, v) for h, v in series.items() if lo - 1e-12 <= h <= hi + 1e-12]
    if len(pts) < 2:
        return math.nan
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def plateau_slopes(eps1: dict[float, float], eps3: dict[float, float],
                   low: tuple[float, float] = LOW_WINDOW,
                   high_start: float = HIGH_WINDOW_START) -> dict[str, tuple[float, float]]:
    top = max(list(eps1) + list(eps3), default=high_start)
    return {name: (window_slope(s, *low), window_slope(s, high_start, top))
            for name, s in (("eps1", eps1), ("eps3", eps3))}


def _workers(requested: int | None) -> int:
    if requested is None:
        requested = int(os.environ.get(WORKERS_ENV, "1"))
    if requested < 1:
        raise InvalidParams("worker count must be positive")
    return requested


def sweep_heights(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Relax every (height, class) pair of ``spec``.

    A failing run becomes a row with ``error`` set; the sweep carries on.
    """
    if not spec.heights or not spec.topologies:
        raise EmptySpec("sweep needs at least one height and one topology")
    jobs = [(t, h, spec.constants, spec.N, spec.options, spec.Lc)
            for h in spec.heights for t in spec.topologies]
    n = _workers(workers)
    if n == 1 or len(jobs) == 1:
        rows = [_run_row(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as pool:
            rows = list(pool.map(_run_row, jobs))
    rows.sort(key=lambda r: r.key)
    eps1, eps3 = relative_gaps(rows)
    return SweepResult(rows, eps1, eps3, plateau_slopes(eps1, eps3))
