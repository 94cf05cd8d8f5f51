"""Segment grids for the method of steps.

Commensurate (exact rational) delays use a uniform grid of width
``alpha = gcd(delays)``: every delayed image of a segment is exactly an earlier
segment, so coefficients are reused without re-expansion.  Otherwise the grid
is the set of all points ``t0 + sum K_i tau_i`` below ``T``; delayed images
then land inside a single earlier segment but need a Taylor shift.
"""

from __future__ import annotations

import bisect
import heapq
import logging
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .errors import OutOfDomain, TooManySegments

log = logging.getLogger(__name__)

Real = Union[float, Fraction]

HISTORY = 0  # source index meaning "read the history function"

DEFAULT_SEGMENT_CAP = 10_000
CAP_ENV = "DDE_DTM_SEGMENT_CAP"


def segment_cap() -> int:
    value = os.environ.get(CAP_ENV)
    return int(value) if value else DEFAULT_SEGMENT_CAP


@dataclass(frozen=True)
class Source:
    """Where segment ``j`` reads delay ``i`` from: ``segment == HISTORY`` or a 1-based index."""

    segment: int
    shift: Real  # sigma_{j-1} - sigma_{l-1} - tau_i; zero for history sources

    @property
    def is_history(self) -> bool:
        return self.segment == HISTORY


@dataclass(frozen=True)
class SegmentSchedule:
    mode: str  # "commensurate" or "noncommensurate"
    grid: tuple  # sigma_0 = t0 < sigma_1 < ... < sigma_K < T
    T: Real
    delays: tuple
    source_map: tuple  # source_map[j - 1][i - 1] -> Source
    alpha: Optional[Fraction] = None
    multiples: tuple = ()  # k_i with tau_i = k_i * alpha (commensurate only)
    eps: float = 0.0

    @property
    def t0(self) -> Real:
        return self.grid[0]

    @property
    def K(self) -> int:
        return len(self.grid) - 1

    @property
    def n_segments(self) -> int:
        return len(self.grid)

    @property
    def bounds(self) -> tuple:
        return self.grid + (self.T,)

    def interval(self, j: int) -> tuple:
        """``(left, right)`` of segment ``j``; the interval is left-open, right-closed."""
        b = self.bounds
        return b[j - 1], b[j]

    def source(self, j: int, i: int) -> Source:
        return self.source_map[j - 1][i - 1]


def rational_gcd(delays: Sequence[Fraction]) -> Fraction:
    """Largest rational ``alpha`` with every delay an integer multiple of it."""
    fr = [Fraction(d) for d in delays]
    if not fr:
        raise ValueError("need at least one delay")
    if any(d <= 0 for d in fr):
        raise ValueError("delays must be positive")
    den = math.lcm(*(d.denominator for d in fr))
    num = math.gcd(*(d.numerator * (den // d.denominator) for d in fr))
    return Fraction(num, den)


def _max_delay(delays) -> Real:
    return max(delays) if delays else 0


def build_commensurate(
    t0: Real, T: Real, delays: Sequence[Fraction], cap: Optional[int] = None
) -> SegmentSchedule:
    t0, T = Fraction(t0), Fraction(T)
    if not T > t0:
        raise ValueError("T must exceed t0")
    cap = segment_cap() if cap is None else cap
    delays = tuple(Fraction(d) for d in delays)
    if not delays:
        return SegmentSchedule("commensurate", (t0,), T, (), ((),))
    alpha = rational_gcd(delays)
    ks = tuple(int(d / alpha) for d in delays)
    # T in (t0 + K alpha, t0 + (K + 1) alpha]
    K = math.ceil((T - t0) / alpha) - 1
    if K + 1 > cap:
        raise TooManySegments(f"{K + 1} segments exceed the cap of {cap}")
    grid = tuple(t0 + j * alpha for j in range(K + 1))
    smap = tuple(
        tuple(Source(j - k, Fraction(0)) if j - k >= 1 else Source(HISTORY, Fraction(0)) for k in ks)
        for j in range(1, K + 2)
    )
    return SegmentSchedule("commensurate", grid, T, delays, smap, alpha, ks)


def dedupe_tolerance(t0: Real, T: Real) -> float:
    return 1e-9 * max(1.0, abs(float(T) - float(t0)))


def sigma_points(t0: float, T: float, delays: Sequence[float], cap: int, eps: float) -> list[float]:
    """Ascending, de-duplicated ``t0 + sum K_i tau_i < T`` by smallest-first expansion."""
    taus = sorted(set(float(d) for d in delays))
    heap = [t0]
    out: list[float] = []
    seen: set = set()
    while heap:
        s = heapq.heappop(heap)
        if out and s - out[-1] <= eps:
            continue
        out.append(s)
        if len(out) > cap:
            raise TooManySegments(f"more than {cap} segments")
        for tau in taus:
            nxt = s + tau
            if nxt < T - eps:
                key = round(nxt / eps) if eps > 0 else nxt
                if key not in seen:
                    seen.add(key)
                    heapq.heappush(heap, nxt)
    return out


def _near_rational(x: float, max_den: int = 64, tol: float = 1e-12) -> bool:
    f = Fraction(x).limit_denominator(max_den)
    return abs(float(f) - x) <= tol * max(1.0, abs(x))


def build_sigma_grid(
    t0: Real, T: Real, delays: Sequence[Real], cap: Optional[int] = None
) -> SegmentSchedule:
    t0f, Tf = float(t0), float(T)
    if not Tf > t0f:
        raise ValueError("T must exceed t0")
    if any(float(d) <= 0 for d in delays):
        raise ValueError("delays must be positive")
    cap = segment_cap() if cap is None else cap
    eps = dedupe_tolerance(t0f, Tf)
    taus = tuple(float(d) for d in delays)
    grid = tuple(sigma_points(t0f, Tf, taus, cap, eps))
    sched = SegmentSchedule("noncommensurate", grid, Tf, taus, (), eps=eps)
    bounds = sched.bounds
    smap = []
    for j in range(1, len(grid) + 1):
        left, right = bounds[j - 1], bounds[j]
        mid = 0.5 * (left + right)
        row = []
        for tau in taus:
            if right - tau <= t0f + eps:
                row.append(Source(HISTORY, 0.0))
                continue
            l = locate(sched, mid - tau)
            if l == HISTORY:
                raise AssertionError("delayed image straddles t0")  # excluded by construction
            row.append(Source(l, left - bounds[l - 1] - tau))
        smap.append(tuple(row))
    return SegmentSchedule("noncommensurate", grid, Tf, taus, tuple(smap), eps=eps)


def build_schedule(t0: Real, T: Real, delays: Sequence[Real], cap: Optional[int] = None) -> SegmentSchedule:
    """Route exact delays to the uniform grid and float delays to the sigma grid."""
    if all(isinstance(d, Fraction) for d in delays):
        return build_commensurate(t0, T, delays, cap)
    floats = [float(d) for d in delays]
    if len(floats) > 1 and all(_near_rational(a / floats[0]) for a in floats[1:]):
        log.warning(
            "delays %s look commensurate; write them as fractions p/q for exact scheduling",
            floats,
        )
    return build_sigma_grid(t0, T, delays, cap)


def locate(schedule: SegmentSchedule, t: float) -> int:
    """Segment index containing ``t`` (1-based), or ``HISTORY`` for ``t <= t0``."""
    t = float(t)
    t0 = float(schedule.t0)
    eps = schedule.eps or dedupe_tolerance(t0, schedule.T)
    if t < t0 - float(_max_delay(schedule.delays)) - eps or t > float(schedule.T) + eps:
        raise OutOfDomain(f"t = {t} outside [{t0} - t*, {float(schedule.T)}]")
    if t <= t0:
        return HISTORY
    b = [float(x) for x in schedule.bounds]
    j = bisect.bisect_left(b, t - eps)
    return min(max(j, 1), len(b) - 1)
