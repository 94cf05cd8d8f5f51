"""Reference solver: fixed-step RK4 method of steps with cubic Hermite dense output.

Deliberately shares nothing with the Taylor pipeline beyond the parsed AST:
the right-hand side is interpreted at point values and the history's
derivatives come from symbolic differentiation of its expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import NonFiniteState, StepTooLarge
from .model import (
    Add,
    Const,
    DelayModel,
    Div,
    Exp,
    Expr,
    Mul,
    Neg,
    Pow,
    State,
    Sub,
    TimeVar,
    evaluate_expr,
)


def diff_t(e: Expr) -> Expr:
    """Symbolic d/dt of a state-free expression (no simplification)."""
    match e:
        case Const(_):
            return Const(0.0)
        case TimeVar():
            return Const(1.0)
        case Add(cs):
            return Add(tuple(diff_t(c) for c in cs))
        case Sub(l, r):
            return Sub(diff_t(l), diff_t(r))
        case Neg(c):
            return Neg(diff_t(c))
        case Mul(cs):
            terms = []
            for i, c in enumerate(cs):
                terms.append(Mul(cs[:i] + (diff_t(c),) + cs[i + 1:]))
            return Add(tuple(terms)) if len(terms) > 1 else terms[0]
        case Div(n, d):
            return Div(Sub(Mul((diff_t(n), d)), Mul((n, diff_t(d)))), Pow(d, 2))
        case Pow(b, k):
            if k == 0:
                return Const(0.0)
            return Mul((Const(float(k)), Pow(b, k - 1), diff_t(b)))
        case Exp(a):
            return Mul((e, diff_t(a)))
        case State():
            raise ValueError("cannot differentiate a state reference symbolically")
    raise TypeError(f"not an expression node: {e!r}")


def _hermite(theta: float, h: float, y0: float, m0: float, y1: float, m1: float) -> float:
    t2 = theta * theta
    t3 = t2 * theta
    return (
        (2 * t3 - 3 * t2 + 1) * y0
        + (t3 - 2 * t2 + theta) * h * m0
        + (-2 * t3 + 3 * t2) * y1
        + (t3 - t2) * h * m1
    )


def _hermite_slope(theta: float, h: float, y0: float, m0: float, y1: float, m1: float) -> float:
    t2 = theta * theta
    return (
        (6 * t2 - 6 * theta) * y0
        + (3 * t2 - 4 * theta + 1) * h * m0
        + (-6 * t2 + 6 * theta) * y1
        + (3 * t2 - 2 * theta) * h * m1
    ) / h


@dataclass
class DenseTrajectory:
    """RK4 nodes ``t0 + k h`` with state ``(u, u', ..., u^(n-1))`` and its slopes.

    Between nodes each component is the cubic Hermite interpolant of its node
    values and slopes; before ``t0`` the history (and its derivatives) applies.
    Slopes are kept as left and right limits because delayed terms make the
    highest derivative jump at nodes that are images of ``t0``.
    """

    t0: float
    h: float
    values: list  # values[k][c] = u^(c)(t_k)
    left: list  # left[k][c] = u^(c+1)(t_k-)
    right: list  # right[k][c] = u^(c+1)(t_k+)
    history: Sequence[Expr]  # history[p] = d^p phi / dt^p

    @property
    def nodes(self) -> list[float]:
        return [self.t0 + k * self.h for k in range(len(self.values))]

    @property
    def t_end(self) -> float:
        return self.t0 + (len(self.values) - 1) * self.h

    def derivative(self, s: float, p: int, side: str = "right") -> float:
        """``u^(p)(s)`` for ``0 <= p <= n``; ``side`` picks the limit at nodes."""
        tol = 1e-9 * self.h
        if s < self.t0 - tol or (s <= self.t0 + tol and side == "left"):
            return evaluate_expr(self.history[p], s)
        n = len(self.values[0])
        x = (s - self.t0) / self.h
        k = round(x)
        if abs(x - k) * self.h <= tol and k < len(self.values):
            if p < n:
                return self.values[k][p]
            return (self.left if side == "left" and k > 0 else self.right)[k][n - 1]
        a = int(math.floor(x))
        b = a + 1
        if b >= len(self.values):
            raise ValueError(f"lookup at t = {s} ahead of the computed trajectory")
        c = min(p, n - 1)
        args = (x - a, self.h, self.values[a][c], self.right[a][c], self.values[b][c], self.left[b][c])
        if p < n:
            return _hermite(*args)
        return _hermite_slope(*args)

    def __call__(self, t: float) -> float:
        return self.derivative(t, 0)


def rk_solve(m: DelayModel, h: float) -> DenseTrajectory:
    if not h > 0:
        raise ValueError("step size must be positive")
    if m.delays and h > float(min(m.delays)):
        raise StepTooLarge(f"h = {h} exceeds the smallest delay {float(min(m.delays))}")
    n = m.order
    t0, T = float(m.t0), float(m.T)
    taus = [float(d) for d in m.delays]

    hist = [m.history]
    for _ in range(n):
        hist.append(diff_t(hist[-1]))
    traj = DenseTrajectory(t0, h, [], [], [], hist)

    def field_(t: float, y: Sequence[float], side: str) -> list[float]:
        def state(p: int, i: int) -> float:
            if i == 0:
                return y[p]
            return traj.derivative(t - taus[i - 1], p, side)

        try:
            top = evaluate_expr(m.rhs, t, state)
        except (OverflowError, ZeroDivisionError) as exc:
            raise NonFiniteState(f"right-hand side failed at t = {t}: {exc}") from exc
        return list(y[1:]) + [top]

    if m.initial_values is not None:
        y = [float(v) for v in m.initial_values]
    else:
        y = [evaluate_expr(hist[p], t0) for p in range(n)]

    steps = math.ceil((T - t0) / h - 1e-9)
    traj.values.append(y)
    traj.right.append(field_(t0, y, "right"))
    traj.left.append(traj.right[0])
    for k in range(steps):
        t = t0 + k * h
        k1 = traj.right[-1]
        k2 = field_(t + h / 2, [a + h / 2 * b for a, b in zip(y, k1)], "right")
        k3 = field_(t + h / 2, [a + h / 2 * b for a, b in zip(y, k2)], "right")
        k4 = field_(t + h, [a + h * b for a, b in zip(y, k3)], "left")
        y = [a + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        if not all(math.isfinite(v) for v in y):
            raise NonFiniteState(f"state became non-finite at t = {t + h}")
        t_next = t0 + (k + 1) * h
        traj.values.append(y)
        traj.left.append(field_(t_next, y, "left"))
        traj.right.append(field_(t_next, y, "right"))
    return traj


@dataclass(frozen=True)
class CompareReport:
    max_abs_diff: float
    argmax_t: float
    rows: tuple  # (t, u_dtm, u_ref, abs_diff)


def compare(
    sol: Callable[[float], float],
    reference: Callable[[float], float],
    t_start: float,
    t_end: float,
    step: float,
) -> CompareReport:
    """Tabulate ``|sol - reference|`` on an inclusive uniform grid."""
    count = math.floor((t_end - t_start) / step + 1e-9)
    rows = []
    for i in range(count + 1):
        t = t_start + i * step
        if abs(t - t_end) <= 1e-9 * step:
            t = t_end
        a, b = sol(t), reference(t)
        rows.append((t, a, b, abs(a - b)))
    worst = max(rows, key=lambda r: r[3])
    return CompareReport(worst[3], worst[0], tuple(rows))
