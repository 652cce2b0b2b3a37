"""Constrained energy minimization by projected descent with backtracking.

Every iterate is ``project_field(n + tau * d)`` where ``d`` lies in the
tangent space of the constraints at ``n``.  A step is accepted only if the
energy strictly decreases.  Two direction choices:

``"lbfgs"``
    limited-memory BFGS two-loop recursion on projected gradients, with the
    result projected back onto the tangent space.  Unit trial step.
``"gradient"``
    plain projected steepest descent; the step grows by ``grow`` after each
    acceptance and shrinks by ``backtrack`` on failure.
"""
from __future__ import annotations

import enum
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .director import DirectorField
from .energy import (EnergyBreakdown, ElasticConstants, energy_and_gradient, energy_breakdown,
                     project_field, project_gradient, total_energy)
from .errors import InvalidParams

log = logging.getLogger(__name__)

METHODS = ("lbfgs", "gradient")


class StopReason(str, enum.Enum):
    ENERGY_FLAT = "EnergyFlat"
    STEP_SMALL = "StepSmall"
    MAX_ITERS = "MaxIters"
    LINE_SEARCH_STALL = "LineSearchStall"


@dataclass(frozen=True)
class RelaxOptions:
    max_iters: int = 50000
    tol_energy: float = 1e-9
    energy_window: int = 10
    tol_step: float = 1e-7
    step0: float | None = None      # default 1e-2 * delta**2 / K_max
    backtrack: float = 0.5
    grow: float = 1.1
    method: str = "lbfgs"
    memory: int = 10
    rule: str | None = None         # quadrature rule, see pabn.energy
    progress_every: int = 0
    trace_points: int = 200

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidParams("max_iters must be positive")
        for name in ("tol_energy", "tol_step"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"{name} must be positive")
        if self.step0 is not None and not self.step0 > 0:
            raise InvalidParams("step0 must be positive")
        if not 0 < self.backtrack < 1:
            raise InvalidParams("backtrack must lie in (0, 1)")
        if not self.grow >= 1:
            raise InvalidParams("grow must be >= 1")
        if self.method not in METHODS:
            raise InvalidParams(f"method must be one of {METHODS}")
        if self.energy_window < 1 or self.memory < 1:
            raise InvalidParams("energy_window and memory must be positive")


@dataclass
class RelaxReport:
    iterations: int
    final_energy: EnergyBreakdown
    converged: bool
    reason: StopReason
    initial_energy: float
    energy_trace: list[float] = field(default_factory=list)
    max_rotation: float = math.nan


def _max_rotation(old: np.ndarray, new: np.ndarray) -> float:
    chord = np.linalg.norm(new - old, axis=-1)
    return float(2.0 * np.arcsin(min(1.0, chord.max(initial=0.0) / 2.0)))


class _LBFGS:
    def __init__(self, memory: int):
        self.pairs: deque = deque(maxlen=memory)

    def clear(self):
        self.pairs.clear()

    def update(self, s: np.ndarray, y: np.ndarray):
        sy = float(s @ y)
        if sy > 1e-12 * math.sqrt(float(s @ s) * float(y @ y)):
            self.pairs.append((s, y, 1.0 / sy))

    def direction(self, g: np.ndarray, scale0: float) -> np.ndarray:
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(self.pairs):
            a = rho * float(s @ q)
            q -= a * y
            alphas.append(a)
        if self.pairs:
            s, y, _ = self.pairs[-1]
            q *= float(s @ y) / float(y @ y)
        else:
            q *= scale0
        for (s, y, rho), a in zip(self.pairs, reversed(alphas)):
            q += (a - rho * float(y @ q)) * s
        return -q


def relax(field: DirectorField, k: ElasticConstants, opts: RelaxOptions | None = None,
          callback: Callable[[int, DirectorField, float], None] | None = None,
          ) -> tuple[DirectorField, RelaxReport]:
    """Minimize the discrete energy within the constraint set.

    ``callback(iteration, field, energy)`` is invoked after every accepted
    step.  A failed line search is not raised; the best field so far is
    returned with ``reason == LINE_SEARCH_STALL``.
    """
    opts = opts or RelaxOptions()
    field.check_normalized()
    geom = field.geom
    vol = geom.delta ** 3
    step0 = opts.step0 if opts.step0 is not None else 1e-2 * geom.delta ** 2 / k.K_max
    free = geom.free
    # energies below this are round-off for the given constants and cell size
    floor = 1e-12 * k.K_max * geom.params.Lc

    cur = project_field(field)
    energy, grad = energy_and_gradient(cur, k, rule=opts.rule, check=False)
    pg = project_gradient(grad, cur) / vol
    initial = energy
    history = [energy]
    trace_stride = max(1, opts.max_iters // max(1, opts.trace_points))
    trace = [energy]
    qn = _LBFGS(opts.memory) if opts.method == "lbfgs" else None
    tau = step0
    reason = StopReason.MAX_ITERS
    it = 0
    rotation = math.nan

    while it < opts.max_iters:
        if qn is not None:
            d = np.zeros_like(pg)
            d[free] = qn.direction(pg[free].ravel(), step0).reshape(-1, 3)
            d = project_gradient(d, cur)
            if float(np.sum(d * pg)) >= 0.0:
                qn.clear()
                d = -step0 * pg
            tau = 1.0
        else:
            d = -pg

        dmax = float(np.abs(d).max(initial=0.0))
        accepted = None
        while tau * dmax > 1e-16:
            trial = project_field(DirectorField(geom, cur.values + tau * d))
            e_trial = total_energy(trial, k, rule=opts.rule, check=False)
            if e_trial < energy:
                accepted = trial
                break
            tau *= opts.backtrack
        if accepted is None:
            if qn is not None and qn.pairs:
                qn.clear()
                continue
            w = min(opts.energy_window, len(history) - 1)
            flat = (dmax == 0.0 or abs(energy) <= floor
                    or (w > 0 and history[-1 - w] - energy <= opts.tol_energy * max(abs(energy), floor)))
            reason = StopReason.ENERGY_FLAT if flat else StopReason.LINE_SEARCH_STALL
            break

        it += 1
        e_new, grad = energy_and_gradient(accepted, k, rule=opts.rule, check=False)
        pg_new = project_gradient(grad, accepted) / vol
        if qn is not None:
            qn.update((accepted.values - cur.values)[free].ravel(), (pg_new - pg)[free].ravel())
        else:
            tau *= opts.grow
        rotation = _max_rotation(cur.values, accepted.values)
        cur, energy, pg = accepted, e_new, pg_new
        history.append(energy)
        if it % trace_stride == 0:
            trace.append(energy)
        if callback is not None:
            callback(it, cur, energy)
        if opts.progress_every and it % opts.progress_every == 0:
            log.info("iter %d  energy %.12g  step %.3g  rotation %.3g", it, energy, tau, rotation)

        w = opts.energy_window
        if len(history) > w and (history[-1 - w] - energy) <= opts.tol_energy * max(abs(energy), floor):
            reason = StopReason.ENERGY_FLAT
            break
        if rotation < opts.tol_step:
            reason = StopReason.STEP_SMALL
            break

    if trace[-1] != energy:
        trace.append(energy)
    report = RelaxReport(
        iterations=it,
        final_energy=energy_breakdown(cur, k, rule=opts.rule),
        converged=reason in (StopReason.ENERGY_FLAT, StopReason.STEP_SMALL),
        reason=reason,
        initial_energy=initial,
        energy_trace=trace,
        max_rotation=rotation,
    )
    return cur, report
