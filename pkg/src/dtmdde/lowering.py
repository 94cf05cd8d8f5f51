"""Compile a right-hand side into an order-by-order coefficient recurrence.

The compiled :class:`RecurrencePlan` is a flat, topologically ordered list of
coefficient-stream instructions.  Producing coefficient ``k`` of every stream
needs only coefficients ``<= k`` of its operands, and the unknown's derivative
stream ``u^(p)`` reads ``U(k + p)`` with ``p <= n - 1``.  Hence the right-hand
side coefficient ``F(k)`` is available once ``U(0..k+n-1)`` is known, and

    (k+n)!/k! * U(k+n) = F(k)

can be solved forward.  Delayed terms enter as known series ("slots") that
the solver binds per segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional, Sequence

from . import series as ts
from .errors import (
    DivisionBySmallLeadingCoefficient,
    ImplicitRecurrence,
    LoweringError,
    NonFiniteCoefficient,
    UnsupportedCurrentStateDenominator,
    UnsupportedCurrentStateInExp,
)
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
    has_current_state,
    to_text,
)
from .series import Real, TruncatedSeries

BLOWUP = 1e100

SlotKey = tuple  # (deriv p, delay index i >= 1)


class Instr(NamedTuple):
    op: str
    args: tuple = ()
    value: float = 0.0


@dataclass(frozen=True)
class RecurrencePlan:
    instructions: tuple[Instr, ...]
    root: int
    order: int
    slots: tuple[SlotKey, ...]

    def __str__(self):
        lines = []
        for idx, ins in enumerate(self.instructions):
            arg = ", ".join(f"%{a}" for a in ins.args) if ins.op not in ("unknown", "slot") else ins.args
            extra = f" {ins.value!r}" if ins.op in ("const", "scale") else ""
            lines.append(f"%{idx} = {ins.op}{extra} {arg}")
        return "\n".join(lines)


class _Compiler:
    def __init__(self, n: int):
        self.n = n
        self.instrs: list[Instr] = []
        self.memo: dict = {}
        self.slots: set = set()

    def emit(self, ins: Instr) -> int:
        if ins in self.memo:
            return self.memo[ins]
        self.instrs.append(ins)
        self.memo[ins] = len(self.instrs) - 1
        return self.memo[ins]

    def lower(self, e: Expr) -> int:
        match e:
            case Const(v):
                return self.emit(Instr("const", (), float(v)))
            case TimeVar():
                return self.emit(Instr("time"))
            case State(p, 0):
                if p >= self.n:
                    raise ImplicitRecurrence(
                        f"u with {p} prime(s) at the current time on the right of an "
                        f"order-{self.n} equation makes the recurrence implicit"
                    )
                return self.emit(Instr("unknown", (p,)))
            case State(p, i):
                self.slots.add((p, i))
                return self.emit(Instr("slot", (p, i)))
            case Add(cs):
                idx = self.lower(cs[0])
                for c in cs[1:]:
                    idx = self.emit(Instr("add", (idx, self.lower(c))))
                return idx
            case Sub(l, r):
                return self.emit(Instr("sub", (self.lower(l), self.lower(r))))
            case Neg(c):
                return self.emit(Instr("neg", (self.lower(c),)))
            case Mul(cs):
                consts = [c.value for c in cs if isinstance(c, Const)]
                rest = [c for c in cs if not isinstance(c, Const)]
                if not rest:
                    return self.emit(Instr("const", (), math.prod(consts)))
                idx = self.lower(rest[0])
                for c in rest[1:]:
                    idx = self.emit(Instr("mul", (idx, self.lower(c))))
                if consts:
                    idx = self.emit(Instr("scale", (idx,), math.prod(consts)))
                return idx
            case Pow(b, k):
                if k == 0:
                    return self.emit(Instr("const", (), 1.0))
                base = self.lower(b)
                idx = base
                for _ in range(k - 1):
                    idx = self.emit(Instr("mul", (idx, base)))
                return idx
            case Div(num, den):
                if has_current_state(den):
                    raise UnsupportedCurrentStateDenominator(
                        f"denominator {to_text(den)} depends on the current unknown"
                    )
                return self.emit(Instr("div", (self.lower(num), self.lower(den))))
            case Exp(a):
                if has_current_state(a):
                    raise UnsupportedCurrentStateInExp(
                        f"exp argument {to_text(a)} depends on the current unknown"
                    )
                return self.emit(Instr("exp", (self.lower(a),)))
        raise LoweringError(f"cannot lower {e!r}")


def compile_expr(rhs: Expr, order: int) -> RecurrencePlan:
    c = _Compiler(order)
    root = c.lower(rhs)
    return RecurrencePlan(tuple(c.instrs), root, order, tuple(sorted(c.slots)))


def compile_rhs(m: DelayModel) -> RecurrencePlan:
    return compile_expr(m.rhs, m.order)


class _Streams:
    """Coefficient buffers for one evaluation of a plan."""

    def __init__(
        self,
        plan: RecurrencePlan,
        slots: Mapping[SlotKey, TruncatedSeries],
        center: Real,
        unknown: Sequence[float],
        reads: Optional[list] = None,
    ):
        missing = [k for k in plan.slots if k not in slots]
        if missing:
            raise LoweringError(f"unbound delayed-term slots: {missing}")
        self.plan = plan
        self.slots = slots
        self.center = float(center)
        self.U = unknown
        self.reads = reads
        self.buf: list[list[float]] = [[] for _ in plan.instructions]

    def step(self, k: int) -> float:
        """Append coefficient ``k`` to every stream and return the root's."""
        buf = self.buf
        for idx, ins in enumerate(self.plan.instructions):
            op, args = ins.op, ins.args
            if op == "const":
                v = ins.value if k == 0 else 0.0
            elif op == "time":
                v = self.center if k == 0 else (1.0 if k == 1 else 0.0)
            elif op == "unknown":
                p = args[0]
                if self.reads is not None:
                    self.reads.append((k, k + p))
                v = ts.falling_factor(k, p) * self.U[k + p]
            elif op == "slot":
                v = self.slots[args][k]
            elif op == "add":
                v = buf[args[0]][k] + buf[args[1]][k]
            elif op == "sub":
                v = buf[args[0]][k] - buf[args[1]][k]
            elif op == "neg":
                v = -buf[args[0]][k]
            elif op == "scale":
                v = ins.value * buf[args[0]][k]
            elif op == "mul":
                a, b = buf[args[0]], buf[args[1]]
                v = ts.cauchy_coefficient(a, b, k)
            elif op == "div":
                num, den = buf[args[0]], buf[args[1]]
                q = buf[idx]
                if k == 0 and abs(den[0]) <= ts.division_floor(num[0]):
                    raise DivisionBySmallLeadingCoefficient(
                        f"denominator leading coefficient {den[0]!r} is below the division floor"
                    )
                acc = num[k]
                for l in range(1, k + 1):
                    acc -= den[l] * q[k - l]
                v = acc / den[0]
            elif op == "exp":
                g = buf[args[0]]
                E = buf[idx]
                if k == 0:
                    v = math.exp(g[0])
                else:
                    acc = 0.0
                    for l in range(1, k + 1):
                        acc += l * g[l] * E[k - l]
                    v = acc / k
            else:
                raise LoweringError(f"unknown instruction {op!r}")
            buf[idx].append(v)
        return buf[self.plan.root][k]


def run_plan(
    plan: RecurrencePlan,
    known_slots: Mapping[SlotKey, TruncatedSeries],
    init: Sequence[float],
    N: int,
    center: Real = 0.0,
    segment: Optional[int] = None,
    reads: Optional[list] = None,
) -> TruncatedSeries:
    """Solve the recurrence for ``U(0..N)`` about ``center`` from ``U(0..n-1) = init``.

    ``reads``, when given, collects ``(k, index)`` for every unknown coefficient
    read while producing ``F(k)``.
    """
    n = plan.order
    if len(init) != n:
        raise LoweringError(f"need exactly {n} initial coefficients, got {len(init)}")
    if N < n - 1:
        raise LoweringError(f"truncation order {N} is below the equation order")
    where = f" in segment {segment}" if segment is not None else ""
    U = [float(x) for x in init]
    for k, x in enumerate(U):
        if not math.isfinite(x) or abs(x) > BLOWUP:
            raise NonFiniteCoefficient(f"initial coefficient U({k}) = {x!r}{where}", segment)
    streams = _Streams(plan, known_slots, center, U, reads)
    for k in range(N - n + 1):
        F = streams.step(k)
        nxt = F / ts.falling_factor(k, n)
        if not math.isfinite(nxt) or abs(nxt) > BLOWUP:
            raise NonFiniteCoefficient(
                f"coefficient U({k + n}) = {nxt!r}{where}: the solution is blowing up", segment
            )
        U.append(nxt)
    return TruncatedSeries(center, tuple(U))


def rhs_series(
    plan: RecurrencePlan,
    known_slots: Mapping[SlotKey, TruncatedSeries],
    u: TruncatedSeries,
    M: int,
) -> TruncatedSeries:
    """Coefficients ``F(0..M)`` of the right-hand side with the unknown replaced by ``u``."""
    U = list(u.coeffs) + [0.0] * (M + plan.order)
    streams = _Streams(plan, known_slots, u.center, U)
    return TruncatedSeries(u.center, tuple(streams.step(k) for k in range(M + 1)))


def expr_series(
    e: Expr, center: Real, N: int, slots: Mapping[SlotKey, TruncatedSeries]
) -> TruncatedSeries:
    """Series of an expression free of the current unknown, built with the series module.

    ``t`` becomes ``[center, 1]`` and delayed references are looked up in ``slots``.
    The result has exactly ``N + 1`` coefficients.
    """

    def go(x: Expr) -> TruncatedSeries:
        match x:
            case Const(v):
                return TruncatedSeries.constant(v, center)
            case TimeVar():
                return TruncatedSeries.variable(center)
            case State(_, 0):
                raise LoweringError("expression depends on the current unknown")
            case State(p, i):
                return slots[(p, i)]
            case Add(cs):
                acc = go(cs[0])
                for c in cs[1:]:
                    acc = ts.add(acc, go(c))
                return acc
            case Sub(l, r):
                return ts.sub(go(l), go(r))
            case Neg(c):
                return ts.neg(go(c))
            case Mul(cs):
                acc = go(cs[0])
                for c in cs[1:]:
                    acc = ts.mul(acc, go(c), N)
                return acc
            case Pow(b, k):
                base = go(b)
                acc = TruncatedSeries.constant(1.0, center)
                for _ in range(k):
                    acc = ts.mul(acc, base, N)
                return acc
            case Div(num, den):
                return ts.div(go(num), go(den), N)
            case Exp(a):
                return ts.exp_series(go(a), N)
        raise LoweringError(f"cannot expand {x!r}")

    return ts.pad(go(e), N)
