"""Truncated Taylor series about an arbitrary center.

A :class:`TruncatedSeries` stores ``c_0..c_N`` with ``u(t) ~ sum c_k (t - center)^k``,
so ``c_k = u^(k)(center) / k!``.  Every operation that can raise the degree takes
an explicit truncation order; nothing grows silently.

Centers may be ``float`` or ``fractions.Fraction``.  Exact centers let the
commensurate scheduler detect aligned delays (zero shift) without rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from .errors import CenterMismatch, DivisionBySmallLeadingCoefficient, OrderTooLow

Real = Union[float, Fraction]

DIV_FLOOR = 1e-12


@dataclass(frozen=True)
class TruncatedSeries:
    center: Real
    coeffs: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise ValueError("a truncated series needs at least one coefficient")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError(f"non-finite coefficient in {coeffs!r}")
        if not isinstance(self.center, Fraction):
            center = float(self.center)
            if not math.isfinite(center):
                raise ValueError(f"non-finite center {self.center!r}")
            object.__setattr__(self, "center", center)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, k: int) -> float:
        # out-of-range coefficients of a truncated series are zero
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return 0.0

    def __call__(self, t: float) -> float:
        return evaluate(self, t)

    @classmethod
    def constant(cls, value: float, center: Real = 0.0) -> "TruncatedSeries":
        return cls(center, (value,))

    @classmethod
    def variable(cls, center: Real) -> "TruncatedSeries":
        """The series of ``t`` itself about ``center``: ``[center, 1]``."""
        return cls(center, (float(center), 1.0))


def _check_centers(a: TruncatedSeries, b: TruncatedSeries) -> None:
    if a.center != b.center:
        raise CenterMismatch(f"centers differ: {a.center!r} vs {b.center!r}")


def evaluate(s: TruncatedSeries, t: float) -> float:
    """Horner evaluation of ``s`` at ``t``; returns ``c_0`` exactly at the center."""
    x = float(t) - float(s.center)
    acc = 0.0
    for c in reversed(s.coeffs):
        acc = acc * x + c
    return acc


def truncate(s: TruncatedSeries, N: int) -> TruncatedSeries:
    if N < 0:
        raise ValueError("truncation order must be non-negative")
    if s.order <= N:
        return s
    return TruncatedSeries(s.center, s.coeffs[: N + 1])


def pad(s: TruncatedSeries, N: int) -> TruncatedSeries:
    """Return ``s`` with exactly ``N + 1`` coefficients (zero-filled or cut)."""
    c = s.coeffs[: N + 1] + (0.0,) * max(0, N - s.order)
    return TruncatedSeries(s.center, c)


def add(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    _check_centers(a, b)
    n = max(len(a.coeffs), len(b.coeffs))
    return TruncatedSeries(a.center, tuple(a[k] + b[k] for k in range(n)))


def sub(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    _check_centers(a, b)
    n = max(len(a.coeffs), len(b.coeffs))
    return TruncatedSeries(a.center, tuple(a[k] - b[k] for k in range(n)))


def neg(a: TruncatedSeries) -> TruncatedSeries:
    return TruncatedSeries(a.center, tuple(-c for c in a.coeffs))


def scale(a: TruncatedSeries, factor: float) -> TruncatedSeries:
    return TruncatedSeries(a.center, tuple(factor * c for c in a.coeffs))


def cauchy_coefficient(a: Sequence[float], b: Sequence[float], k: int) -> float:
    """``sum_{l=0}^{k} a_l b_{k-l}`` with out-of-range terms treated as zero.

    Terms ``l`` and ``k - l`` are added pairwise so the result is bit-identical
    with the operands swapped.
    """
    na, nb = len(a), len(b)

    def term(l: int) -> float:
        m = k - l
        return a[l] * b[m] if l < na and m < nb else 0.0

    acc = 0.0
    for l in range(max(0, k - max(na, nb) + 1), k // 2 + 1):
        m = k - l
        if l == m:
            acc += term(l)
        else:
            acc += term(l) + term(m)
    return acc


def mul(a: TruncatedSeries, b: TruncatedSeries, N: int) -> TruncatedSeries:
    """Cauchy product of ``a`` and ``b`` truncated at order ``N``."""
    _check_centers(a, b)
    if N < 0:
        raise ValueError("truncation order must be non-negative")
    ca, cb = a.coeffs, b.coeffs
    return TruncatedSeries(a.center, tuple(cauchy_coefficient(ca, cb, k) for k in range(N + 1)))


def falling_factor(k: int, p: int) -> int:
    """``(k + p)! / k!``"""
    return math.perm(k + p, p)


def derivative(s: TruncatedSeries, p: int) -> TruncatedSeries:
    """Series of the ``p``-th derivative; the order drops by ``p``."""
    if p < 0:
        raise ValueError("derivative order must be non-negative")
    if p > s.order:
        raise OrderTooLow(f"cannot take derivative {p} of a series of order {s.order}")
    if p == 0:
        return s
    c = s.coeffs
    return TruncatedSeries(
        s.center, tuple(falling_factor(k, p) * c[k + p] for k in range(s.order - p + 1))
    )


def division_floor(num_c0: float) -> float:
    return DIV_FLOOR * max(1.0, abs(num_c0))


def div(num: TruncatedSeries, den: TruncatedSeries, N: int) -> TruncatedSeries:
    """Quotient series ``q`` with ``den * q == num`` through order ``N``."""
    _check_centers(num, den)
    d0 = den[0]
    if abs(d0) <= division_floor(num[0]):
        raise DivisionBySmallLeadingCoefficient(
            f"denominator leading coefficient {d0!r} is below the division floor"
        )
    q: list[float] = []
    for k in range(N + 1):
        acc = num[k]
        for l in range(1, min(k, den.order) + 1):
            acc -= den.coeffs[l] * q[k - l]
        q.append(acc / d0)
    return TruncatedSeries(num.center, tuple(q))


def exp_series(g: TruncatedSeries, N: int) -> TruncatedSeries:
    """Series of ``exp(g(t))`` through order ``N``.

    Uses ``E_0 = exp(g_0)`` and ``k E_k = sum_{l=1}^{k} l g_l E_{k-l}``, which
    follows from ``E' = g' E``.
    """
    E = [math.exp(g[0])]
    for k in range(1, N + 1):
        acc = 0.0
        for l in range(1, min(k, g.order) + 1):
            acc += l * g.coeffs[l] * E[k - l]
        E.append(acc / k)
    return TruncatedSeries(g.center, tuple(E))


def _binomial_shift(c: Sequence[float], d: float) -> list[float]:
    N = len(c) - 1
    return [
        sum(math.comb(y, k) * d ** (y - k) * c[y] for y in range(k, N + 1))
        for k in range(N + 1)
    ]


def taylor_shift(s: TruncatedSeries, new_center: Real, check: bool = False) -> TruncatedSeries:
    """Re-expand ``s`` about ``new_center`` keeping the same order.

    Repeated synthetic division; algebraically the binomial rearrangement
    ``b_k = sum_{y>=k} C(y, k) d^(y-k) c_y`` with ``d = new_center - center``.
    ``check=True`` also evaluates the binomial form and asserts agreement.
    """
    d = float(new_center - s.center)
    b = list(s.coeffs)
    N = len(b) - 1
    if d != 0.0:
        for i in range(N):
            for j in range(N - 1, i - 1, -1):
                b[j] += d * b[j + 1]
    if check:
        ref = _binomial_shift(s.coeffs, d)
        scale_ = max(1.0, max(abs(x) for x in ref))
        for got, want in zip(b, ref):
            if abs(got - want) > 1e-10 * scale_:
                raise AssertionError(f"taylor shift mismatch: {got!r} vs {want!r}")
    return TruncatedSeries(new_center, tuple(b))


def delayed_term_series(
    source: TruncatedSeries, p: int, tau: Real, target_center: Real, N: int
) -> TruncatedSeries:
    """Series of ``t -> source^(p)(t - tau)`` about ``target_center``, truncated at ``N``.

    When ``target_center - tau`` coincides with ``source.center`` the coefficients
    are read off directly as ``(k+p)!/k! c_{k+p}``; otherwise the source is first
    re-expanded about ``target_center - tau``.  The result may have order below
    ``N`` when the source polynomial is too short; missing terms are zero.
    """
    anchor = target_center - tau
    if anchor == source.center:
        shifted = source
    else:
        shifted = taylor_shift(source, anchor)
    out = derivative(shifted, p)
    return truncate(TruncatedSeries(target_center, out.coeffs), N)
