"""Method-of-steps driver producing a piecewise Taylor-polynomial solution."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from . import series as ts
from .errors import OutOfDomain
from .lowering import RecurrencePlan, compile_rhs, expr_series, rhs_series, run_plan
from .model import DelayModel, evaluate_expr
from .schedule import HISTORY, SegmentSchedule, build_schedule, locate
from .series import TruncatedSeries

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Segment:
    index: int
    interval: tuple  # (left, right]; left is the expansion center
    series: TruncatedSeries
    seeds: tuple
    slots: dict = field(compare=False, repr=False)

    @property
    def order(self) -> int:
        return self.series.order


@dataclass(frozen=True)
class PiecewiseSolution:
    model: DelayModel
    schedule: SegmentSchedule
    plan: RecurrencePlan
    segments: tuple
    warnings: tuple = ()

    def __call__(self, t: float) -> float:
        return eval_solution(self, t)


def _history_slot(m: DelayModel, p: int, tau, center, need: int) -> TruncatedSeries:
    phi = expr_series(m.history, center - tau, need + p, {})
    return TruncatedSeries(center, ts.derivative(phi, p).coeffs)


def initial_seeds(m: DelayModel) -> tuple:
    """``U_1(0..n-1)``: from explicit initial values or from the history at ``t0``."""
    n = m.order
    if m.initial_values is not None:
        return tuple(v / math.factorial(i) for i, v in enumerate(m.initial_values))
    return expr_series(m.history, m.t0, n - 1, {}).coeffs


def solve(m: DelayModel, schedule: Optional[SegmentSchedule] = None) -> PiecewiseSolution:
    m.check()
    plan = compile_rhs(m)
    sched = schedule or build_schedule(m.t0, m.T, m.delays)
    n = m.order
    segments: list[Segment] = []
    warnings: list[str] = []
    for j in range(1, sched.n_segments + 1):
        left, right = sched.interval(j)
        N = m.order_for_segment(j)
        need = N - n  # highest right-hand-side coefficient the recurrence consumes
        slots = {}
        for p, i in plan.slots:
            tau = sched.delays[i - 1]
            src = sched.source(j, i)
            if src.segment == HISTORY:
                slots[(p, i)] = _history_slot(m, p, tau, left, need)
                continue
            source = segments[src.segment - 1].series
            if source.order - p < need:
                msg = (
                    f"segment {j}: u{chr(39) * p}[{i}] reads segment {src.segment} of order "
                    f"{source.order}; coefficients above {source.order - p} taken as zero"
                )
                if msg not in warnings:
                    warnings.append(msg)
                    log.warning(msg)
            slots[(p, i)] = ts.delayed_term_series(source, p, tau, left, need)
        if j == 1:
            seeds = initial_seeds(m)
        else:
            seeds = ts.taylor_shift(segments[-1].series, left).coeffs[:n]
        u = run_plan(plan, slots, seeds, N, left, segment=j)
        segments.append(Segment(j, (left, right), u, tuple(seeds), slots))
    return PiecewiseSolution(m, sched, plan, tuple(segments), tuple(warnings))


def eval_solution(sol: PiecewiseSolution, t: float) -> float:
    j = locate(sol.schedule, t)
    if j == HISTORY:
        return evaluate_expr(sol.model.history, float(t))
    return ts.evaluate(sol.segments[j - 1].series, t)


def sample(sol: PiecewiseSolution, t_start: float, t_end: float, step: float) -> list[tuple[float, float]]:
    """Inclusive uniform samples ``t_start, t_start + step, ..., t_end``."""
    if not step > 0:
        raise ValueError("step must be positive")
    if t_end < t_start:
        raise OutOfDomain(f"empty sample range [{t_start}, {t_end}]")
    count = math.floor((t_end - t_start) / step + 1e-9)
    out = []
    for i in range(count + 1):
        t = t_start + i * step
        if abs(t - t_end) <= 1e-9 * step:
            t = t_end
        out.append((t, eval_solution(sol, t)))
    return out


def segment_residual(sol: PiecewiseSolution, j: int) -> float:
    """Largest relative mismatch between ``u_j^(n)`` and the right-hand side series.

    Compares coefficients ``0..N_j - n``, the orders the recurrence determines.
    """
    seg = sol.segments[j - 1]
    n = sol.model.order
    M = seg.order - n
    lhs = ts.derivative(seg.series, n)
    rhs = rhs_series(sol.plan, seg.slots, seg.series, M)
    scale = max(1.0, max(abs(c) for c in lhs.coeffs), max(abs(c) for c in rhs.coeffs))
    return max(abs(lhs[k] - rhs[k]) for k in range(M + 1)) / scale


def junction_jumps(sol: PiecewiseSolution) -> list[list[float]]:
    """Relative jumps of ``u, u', ..., u^(n-1)`` at each interior junction."""
    n = sol.model.order
    out = []
    for a, b in zip(sol.segments, sol.segments[1:]):
        t = float(b.interval[0])
        row = []
        for i in range(n):
            x = ts.evaluate(ts.derivative(a.series, i), t)
            y = b.series[i] * math.factorial(i)
            row.append(abs(x - y) / max(1.0, abs(x)))
        out.append(row)
    return out
