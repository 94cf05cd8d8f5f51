"""Model DSL: expression AST, parser, canonical printer and the model file format.

Expression grammar::

    expr     := term (('+' | '-') term)*
    term     := factor (('*' | '/') factor)*
    factor   := atom ('^' uint)?
    atom     := number | 't' | stateref | '(' expr ')' | 'exp(' expr ')' | '-' atom
    stateref := 'u' "'"* ('[' uint ']')?

Primes give the derivative order and the bracketed index selects the delay
(1-based); a bare ``u`` is the unknown at the current time.  Note that unary
minus is an atom, so ``-u^2`` means ``(-u)^2``.

Model files are ``key = value`` lines::

    order   = 1
    delays  = [1/10]
    rhs     = "u * (2 - 4*u[1])"
    history = "1"
    t0      = 0
    T       = 0.5
    N       = [3, 4, 5, 6, 7]
    # ic    = [1]
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Optional, Union

from .errors import (
    DerivativeOrderTooHigh,
    HistoryContainsState,
    ModelError,
    ModelSyntaxError,
    NonIntegerExponent,
    UnknownDelayIndex,
)

Real = Union[float, Fraction]

DEFAULT_ORDER = 16


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class TimeVar:
    pass


@dataclass(frozen=True)
class State:
    deriv: int = 0
    delay: int = 0  # 0 = current time, i >= 1 selects delays[i - 1]


@dataclass(frozen=True)
class Add:
    children: tuple


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Mul:
    children: tuple


@dataclass(frozen=True)
class Div:
    num: object
    den: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True)
class Exp:
    arg: object


@dataclass(frozen=True)
class Neg:
    child: object


Expr = Union[Const, TimeVar, State, Add, Sub, Mul, Div, Pow, Exp, Neg]


def children(e: Expr) -> tuple:
    match e:
        case Add(cs) | Mul(cs):
            return cs
        case Sub(l, r):
            return (l, r)
        case Div(n, d):
            return (n, d)
        case Pow(b, _):
            return (b,)
        case Exp(a) | Neg(a):
            return (a,)
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    """Pre-order traversal."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def state_refs(e: Expr) -> set[State]:
    return {n for n in walk(e) if isinstance(n, State)}


def has_current_state(e: Expr) -> bool:
    return any(isinstance(n, State) and n.delay == 0 for n in walk(e))


# --------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<state>u(?P<primes>'*)(?:\[(?P<index>[^\]]*)\])?(?![A-Za-z0-9_]))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    text: str
    pos: int
    primes: int = 0
    index: Optional[str] = None


class _Parser:
    def __init__(self, text: str, line: int = 1, column: int = 1):
        self.text = text
        self.line = line
        self.column = column
        self.tokens = self._tokenize(text)
        self.i = 0

    def error(self, msg: str, pos: int, cls=ModelSyntaxError):
        if cls is ModelSyntaxError:
            raise ModelSyntaxError(msg, self.line, self.column + pos)
        raise cls(f"line {self.line}, column {self.column + pos}: {msg}")

    def _tokenize(self, text: str) -> list[_Token]:
        out = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                self.error(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup
            if kind == "primes" or kind == "index":
                kind = "state"
            if m.group("state") is not None:
                kind = "state"
            if kind != "ws":
                out.append(
                    _Token(kind, m.group(0), pos, len(m.group("primes") or ""), m.group("index"))
                )
            pos = m.end()
        out.append(_Token("eof", "", len(text)))
        return out

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}", self.tok.pos)

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}", self.tok.pos)
        return e

    def expr(self) -> Expr:
        result = self.term()
        chain = False  # result is an Add built by this loop (not a parenthesised atom)
        while True:
            if self.accept("+"):
                rhs = self.term()
                if chain:
                    result = Add(result.children + (rhs,))
                else:
                    result = Add((result, rhs))
                chain = True
            elif self.accept("-"):
                result = Sub(result, self.term())
                chain = False
            else:
                return result

    def term(self) -> Expr:
        result = self.factor()
        chain = False
        while True:
            if self.accept("*"):
                rhs = self.factor()
                if chain:
                    result = Mul(result.children + (rhs,))
                else:
                    result = Mul((result, rhs))
                chain = True
            elif self.accept("/"):
                result = Div(result, self.factor())
                chain = False
            else:
                return result

    def factor(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            tok = self.tok
            if tok.kind != "number" or not tok.text.isdigit():
                self.error(
                    f"exponent must be a non-negative integer literal, found {tok.text!r}",
                    tok.pos,
                    NonIntegerExponent,
                )
            self.i += 1
            return Pow(base, int(tok.text))
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "number":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "state":
            self.i += 1
            delay = 0
            if tok.index is not None:
                idx = tok.index.strip()
                if not idx.isdigit():
                    self.error(f"delay index must be a positive integer, found {idx!r}", tok.pos)
                delay = int(idx)
                if delay == 0:
                    self.error("delay indices are 1-based", tok.pos, UnknownDelayIndex)
            return State(tok.primes, delay)
        if tok.kind == "ident":
            if tok.text == "t":
                self.i += 1
                return TimeVar()
            if tok.text == "exp":
                self.i += 1
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Exp(arg)
            self.error(f"unknown identifier {tok.text!r}", tok.pos)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("-"):
            return Neg(self.atom())
        found = tok.text or "end of input"
        self.error(f"expected an operand, found {found!r}", tok.pos)


def parse_expr(text: str, line: int = 1, column: int = 1) -> Expr:
    return _Parser(text, line, column).parse()


def _print_atom(e: Expr) -> str:
    if isinstance(e, (Pow, Neg)) or (isinstance(e, Const) and e.value < 0):
        return "(" + to_text(e) + ")"
    return to_text(e)


def to_text(e: Expr) -> str:
    """Canonical, fully parenthesised rendering that re-parses to the same AST."""
    match e:
        case Const(v):
            return repr(float(v)) if v >= 0 else "-" + repr(-float(v))
        case TimeVar():
            return "t"
        case State(p, i):
            return "u" + "'" * p + (f"[{i}]" if i else "")
        case Add(cs):
            return "(" + " + ".join(to_text(c) for c in cs) + ")"
        case Sub(l, r):
            return f"({to_text(l)} - {to_text(r)})"
        case Mul(cs):
            return "(" + " * ".join(to_text(c) for c in cs) + ")"
        case Div(n, d):
            return f"({to_text(n)} / {to_text(d)})"
        case Pow(b, k):
            return f"{_print_atom(b)}^{k}"
        case Exp(a):
            return f"exp({to_text(a)})"
        case Neg(c):
            return "-" + _print_atom(c)
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# point evaluation

def evaluate_expr(e: Expr, t: float, state: Callable[[int, int], float] | None = None) -> float:
    """Interpret ``e`` at time ``t``; ``state(p, i)`` supplies ``u^(p)`` at ``t - tau_i``."""
    match e:
        case Const(v):
            return v
        case TimeVar():
            return t
        case State(p, i):
            if state is None:
                raise ModelError("expression refers to the unknown but no state was supplied")
            return state(p, i)
        case Add(cs):
            return math.fsum(evaluate_expr(c, t, state) for c in cs)
        case Sub(l, r):
            return evaluate_expr(l, t, state) - evaluate_expr(r, t, state)
        case Mul(cs):
            return math.prod(evaluate_expr(c, t, state) for c in cs)
        case Div(n, d):
            return evaluate_expr(n, t, state) / evaluate_expr(d, t, state)
        case Pow(b, k):
            return evaluate_expr(b, t, state) ** k
        case Exp(a):
            return math.exp(evaluate_expr(a, t, state))
        case Neg(c):
            return -evaluate_expr(c, t, state)
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# model

@dataclass(frozen=True)
class DelayModel:
    rhs: Expr
    history: Expr
    T: Real
    order: int = 1
    delays: tuple = ()
    t0: Real = Fraction(0)
    trunc_order: Union[int, tuple] = DEFAULT_ORDER
    initial_values: Optional[tuple] = None
    source: str = field(default="", compare=False)

    @property
    def exact_delays(self) -> bool:
        return all(isinstance(d, Fraction) for d in self.delays)

    @property
    def max_delay(self) -> Real:
        return max(self.delays) if self.delays else 0

    def order_for_segment(self, j: int) -> int:
        """Truncation order of segment ``j`` (1-based); short lists repeat their last entry."""
        if isinstance(self.trunc_order, int):
            return self.trunc_order
        return self.trunc_order[min(j, len(self.trunc_order)) - 1]

    def with_trunc_order(self, N) -> "DelayModel":
        from dataclasses import replace

        return replace(self, trunc_order=N)

    def check(self) -> None:
        """Raise the first violated structural invariant."""
        for cls, msg in invariant_problems(self):
            raise cls(msg)


def invariant_problems(m: DelayModel) -> Iterator[tuple[type, str]]:
    if not isinstance(m.order, int) or m.order < 1:
        yield ModelError, f"order must be an integer >= 1, got {m.order!r}"
        return
    if not m.T > m.t0:
        yield ModelError, f"horizon T must exceed t0 (T = {m.T}, t0 = {m.t0})"
    for d in m.delays:
        if not d > 0:
            yield ModelError, f"delays must be positive, got {d}"
    if len(set(float(d) for d in m.delays)) != len(m.delays):
        yield ModelError, "delays must be pairwise distinct"
    orders = [m.trunc_order] if isinstance(m.trunc_order, int) else list(m.trunc_order)
    if not orders or any(not isinstance(N, int) or N < 1 for N in orders):
        yield ModelError, f"truncation orders must be integers >= 1, got {m.trunc_order!r}"
    elif min(orders) < m.order:
        yield ModelError, f"truncation order must be at least the equation order {m.order}"
    r = len(m.delays)
    for s in sorted(state_refs(m.rhs), key=lambda s: (s.delay, s.deriv)):
        if s.delay > r:
            yield UnknownDelayIndex, f"u[{s.delay}] refers to delay {s.delay} but only {r} given"
        elif s.delay >= 1 and s.deriv > m.order:
            yield (
                DerivativeOrderTooHigh,
                f"delayed derivative of order {s.deriv} exceeds equation order {m.order}",
            )
        elif s.delay == 0 and s.deriv > m.order - 1:
            yield (
                DerivativeOrderTooHigh,
                f"current-time derivative of order {s.deriv} must be below equation order {m.order}",
            )
    if state_refs(m.history):
        yield HistoryContainsState, "history may only depend on t"
    if m.initial_values is not None:
        if len(m.initial_values) != m.order:
            yield ModelError, f"ic needs exactly {m.order} values, got {len(m.initial_values)}"
        elif not state_refs(m.history):
            from .lowering import expr_series

            phi = expr_series(m.history, m.t0, m.order - 1, {})
            for i, given in enumerate(m.initial_values):
                want = phi[i] * math.factorial(i)
                if abs(given - want) > 1e-9 * max(1.0, abs(want)):
                    yield (
                        ModelError,
                        f"ic[{i}] = {given} does not match history derivative {want} at t0",
                    )


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


def classify(m: DelayModel) -> str:
    """One of ``"ODE"``, ``"delayed"`` or ``"neutral"``."""
    delayed = [s for s in state_refs(m.rhs) if s.delay >= 1]
    if not delayed:
        return "ODE"
    if any(s.deriv == m.order for s in delayed):
        return "neutral"
    return "delayed"


def validate_model(m: DelayModel) -> list[Diagnostic]:
    diags = [Diagnostic(cls.__name__, msg) for cls, msg in invariant_problems(m)]
    for node in walk(m.rhs):
        if isinstance(node, Div) and has_current_state(node.den):
            diags.append(
                Diagnostic(
                    "UnsupportedCurrentStateDenominator",
                    f"denominator {to_text(node.den)} depends on the current unknown",
                )
            )
        elif isinstance(node, Exp) and has_current_state(node.arg):
            diags.append(
                Diagnostic(
                    "UnsupportedCurrentStateInExp",
                    f"exp argument {to_text(node.arg)} depends on the current unknown",
                )
            )
    return diags


# --------------------------------------------------------------------------
# model files

_KEYS = {"order", "delays", "rhs", "history", "t0", "T", "N", "ic"}


def _parse_exact(text: str, what: str, line: int) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ModelSyntaxError(f"{what}: not a number: {text.strip()!r}", line) from None


def _parse_delay(text: str, line: int) -> Real:
    s = text.strip()
    if re.fullmatch(r"\d+(/\d+)?", s):
        return _parse_exact(s, "delays", line)
    try:
        return float(s)
    except ValueError:
        raise ModelSyntaxError(f"delays: not a number: {s!r}", line) from None


def _split_list(text: str, key: str, line: int) -> list[str]:
    s = text.strip()
    if not (s.startswith("[") and s.endswith("]")):
        raise ModelSyntaxError(f"{key}: expected a bracketed list", line)
    inner = s[1:-1].strip()
    return [x for x in (p.strip() for p in inner.split(",")) if x] if inner else []


def _parse_int(text: str, key: str, line: int) -> int:
    s = text.strip()
    if not re.fullmatch(r"[+-]?\d+", s):
        raise ModelSyntaxError(f"{key}: expected an integer, got {s!r}", line)
    return int(s)


def parse_model(text: str) -> DelayModel:
    """Parse and validate a model file."""
    values: dict[str, tuple[str, int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in raw:
            raise ModelSyntaxError("expected 'key = value'", lineno)
        key, _, value = raw.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ModelSyntaxError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ModelSyntaxError(f"duplicate key {key!r}", lineno)
        column = len(raw) - len(value) + 1 + (len(value) - len(value.lstrip()))
        values[key] = (value.strip(), lineno, column)

    for required in ("rhs", "history", "T"):
        if required not in values:
            raise ModelSyntaxError(f"missing required key {required!r}", 1)

    def quoted(key: str) -> Expr:
        s, line, col = values[key]
        if len(s) < 2 or s[0] not in "\"'" or s[-1] != s[0]:
            raise ModelSyntaxError(f"{key}: expression must be quoted", line, col)
        return parse_expr(s[1:-1], line, col + 1)

    kwargs: dict = {"rhs": quoted("rhs"), "history": quoted("history"), "source": text}
    if "order" in values:
        s, line, _ = values["order"]
        kwargs["order"] = _parse_int(s, "order", line)
    if "delays" in values:
        s, line, _ = values["delays"]
        kwargs["delays"] = tuple(_parse_delay(x, line) for x in _split_list(s, "delays", line))
    for key in ("t0", "T"):
        if key in values:
            s, line, _ = values[key]
            kwargs[key] = _parse_exact(s, key, line)
    if "N" in values:
        s, line, _ = values["N"]
        if s.startswith("["):
            kwargs["trunc_order"] = tuple(_parse_int(x, "N", line) for x in _split_list(s, "N", line))
        else:
            kwargs["trunc_order"] = _parse_int(s, "N", line)
    if "ic" in values:
        s, line, _ = values["ic"]
        try:
            kwargs["initial_values"] = tuple(float(x) for x in _split_list(s, "ic", line))
        except ValueError:
            raise ModelSyntaxError("ic: expected numbers", line) from None

    m = DelayModel(**kwargs)
    m.check()
    return m
