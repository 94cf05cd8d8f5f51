import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtmdde import series as ts
from dtmdde.errors import (
    DivisionBySmallLeadingCoefficient,
    ImplicitRecurrence,
    LoweringError,
    NonFiniteCoefficient,
    UnsupportedCurrentStateDenominator,
    UnsupportedCurrentStateInExp,
)
from dtmdde.lowering import compile_expr, compile_rhs, expr_series, rhs_series, run_plan
from dtmdde.model import Add, Const, Div, Exp, Mul, Neg, Pow, State, Sub, TimeVar, parse_expr, parse_model
from dtmdde.series import TruncatedSeries

HUTCHINSON = parse_expr("u * (2 - 4*u[1])")
GYORI = parse_expr("u * (0.45*(1 - u[1]/3) + 0.3*u'[2]/u[2])")


def plan(text, n=1):
    return compile_expr(parse_expr(text), n)


# compile examples ----------------------------------------------------------

def test_hutchinson_with_constant_history_gives_geometric_recurrence():
    p = compile_expr(HUTCHINSON, 1)
    assert p.slots == ((0, 1),)
    U = run_plan(p, {(0, 1): TruncatedSeries(0.0, (1.0,))}, [1.0], 12)
    for k in range(12):
        assert U[k + 1] == pytest.approx(-2 / (k + 1) * U[k], rel=1e-15)


def test_hutchinson_segment_two_is_a_kronecker_delta_convolution():
    seg1 = TruncatedSeries(0.0, (1.0, -2.0, 2.0, -4 / 3))
    slot = ts.delayed_term_series(seg1, 0, ts.Fraction(1, 10), ts.Fraction(1, 10), 3)
    p = compile_expr(HUTCHINSON, 1)
    U = run_plan(p, {(0, 1): slot}, [0.81867], 4, center=ts.Fraction(1, 10))
    delta = [-2.0, 8.0, -8.0, 16 / 3]
    for k in range(4):
        F = sum(delta[l] * U[k - l] for l in range(min(k, 3) + 1))
        assert U[k + 1] == pytest.approx(F / (k + 1), rel=1e-14)


def test_plain_exponential_plan():
    p = plan("u")
    U = run_plan(p, {}, [1.0], 15)
    for k in range(15):
        assert U[k + 1] == pytest.approx(U[k] / (k + 1), rel=1e-15)
    assert str(p) == "%0 = unknown (0,)"


# run_plan examples ----------------------------------------------------------

def test_run_plan_hutchinson_segment_one_is_exact():
    U = run_plan(compile_expr(HUTCHINSON, 1), {(0, 1): TruncatedSeries(0.0, (1.0,))}, [1.0], 3)
    assert U.coeffs == (1.0, -2.0, 2.0, -4 / 3)


def test_run_plan_hutchinson_segment_two_from_rounded_seed():
    seg1 = TruncatedSeries(0.0, (1.0, -2.0, 2.0, -4 / 3))
    slot = ts.delayed_term_series(seg1, 0, ts.Fraction(1, 10), ts.Fraction(1, 10), 3)
    U = run_plan(compile_expr(HUTCHINSON, 1), {(0, 1): slot}, [0.81867], 4, center=ts.Fraction(1, 10))
    reference = [0.81867, -1.63734, 4.91202, -9.82404, 19.10230]
    assert U.coeffs == pytest.approx(reference, abs=1e-5)


def test_run_plan_neutral_second_segment():
    a = 0.105
    N = 6
    u2 = TruncatedSeries(1.0, tuple(2.3 * a**k / math.factorial(k) for k in range(N + 1)))
    slots = {
        (0, 1): TruncatedSeries(1.0, (2.3,)),  # history through tau = 2
        (0, 2): u2,
        (1, 2): ts.derivative(ts.pad(u2, N + 1), 1),
    }
    u0 = 2.3 * math.exp(a)
    U = run_plan(compile_expr(GYORI, 1), slots, [u0], N, center=1.0)
    want = [u0 * (1.3 * a) ** k / math.factorial(k) for k in range(N + 1)]
    assert U.coeffs == pytest.approx(want, rel=1e-13)


# errors -------------------------------------------------------------------

def test_implicit_recurrence():
    with pytest.raises(ImplicitRecurrence):
        compile_expr(State(1, 0), 1)
    with pytest.raises(ImplicitRecurrence):
        compile_expr(parse_expr("u + u''"), 2)
    compile_expr(parse_expr("u + u'"), 2)  # fine for a second-order equation


def test_unsupported_current_state():
    with pytest.raises(UnsupportedCurrentStateDenominator):
        plan("1/u")
    with pytest.raises(UnsupportedCurrentStateDenominator):
        plan("u[1]/(t + u)")
    with pytest.raises(UnsupportedCurrentStateInExp):
        plan("exp(2*u)")
    plan("u/u[1] + exp(u[1])")


def test_compile_rhs_uses_model_order(model_text):
    m = parse_model(model_text("neutral_gyori"))
    p = compile_rhs(m)
    assert p.order == 1
    assert p.slots == ((0, 1), (0, 2), (1, 2))


def test_run_plan_argument_checks():
    p = compile_expr(HUTCHINSON, 1)
    with pytest.raises(LoweringError, match="unbound"):
        run_plan(p, {}, [1.0], 3)
    with pytest.raises(LoweringError, match="initial"):
        run_plan(p, {(0, 1): TruncatedSeries(0.0, (1.0,))}, [1.0, 0.0], 3)


def test_division_floor_in_plan():
    p = plan("u / (u[1] - 1)")
    with pytest.raises(DivisionBySmallLeadingCoefficient):
        run_plan(p, {(0, 1): TruncatedSeries(0.0, (1.0, 1.0))}, [1.0], 4)


def test_blow_up_names_segment():
    p = plan("1e60 * u^2")
    with pytest.raises(NonFiniteCoefficient, match="segment 7"):
        run_plan(p, {}, [1.0], 10, segment=7)


# properties ---------------------------------------------------------------

def test_powers_of_t_about_a_center():
    for n in range(6):
        for a in (0.0, 0.5, -1.25, 3.0):
            F = rhs_series(plan(f"t^{n}"), {}, TruncatedSeries(a, (0.0,)), n + 2)
            want = [math.comb(n, k) * a ** (n - k) for k in range(n + 1)] + [0.0, 0.0]
            assert list(F.coeffs) == pytest.approx(want, rel=1e-15, abs=1e-15)


@settings(max_examples=200)
@given(st.floats(-3, 3, allow_nan=False), st.floats(-5, 5, allow_nan=False).filter(lambda x: x != 0), st.integers(1, 25))
def test_linear_rhs_gives_scaled_exponential(a, u0, N):
    p = compile_expr(Mul((Const(a), State(0, 0))), 1)
    U = run_plan(p, {}, [u0], N)
    for k in range(N + 1):
        assert U[k] == pytest.approx(u0 * a**k / math.factorial(k), rel=1e-13, abs=1e-300)


# State-free expressions with safe denominators
free_leaf = st.one_of(st.floats(-2, 2, allow_nan=False).map(Const), st.just(TimeVar()))


def _free_tree(children):
    many = st.lists(children, min_size=2, max_size=3).map(tuple)
    return st.one_of(
        many.map(Add),
        many.map(Mul),
        st.builds(Sub, children, children),
        st.builds(Neg, children),
        st.builds(Pow, children, st.integers(0, 3)),
        st.builds(lambda c: Exp(Mul((Const(0.5), c))), children),
        st.builds(lambda n, d: Div(n, Add((Const(2.0), Pow(d, 2)))), children, children),
    )


free_exprs = st.recursive(free_leaf, _free_tree, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(free_exprs, st.floats(-1, 1, allow_nan=False), st.integers(0, 12))
def test_state_free_plan_matches_series_module(e, c0, N):
    F = rhs_series(compile_expr(e, 1), {}, TruncatedSeries(c0, (0.0,)), N)
    G = expr_series(e, c0, N, {})
    scale = max(1.0, max(abs(x) for x in G.coeffs))
    for k in range(N + 1):
        assert abs(F[k] - G[k]) <= 1e-13 * scale


rhs_texts = st.sampled_from(
    [
        ("u * (1 - u[1])", 1),
        ("u'[1] * u / (1 + u[1]^2)", 1),
        ("u' * u + u[1] * u'' - u'''[2]", 3),
        ("u'^2 + exp(u'[1]) * u", 2),
        ("-u + t * u' + u''[1] / (2 + u[2])", 2),
    ]
)


@settings(max_examples=60, deadline=None)
@given(rhs_texts, st.integers(0, 10))
def test_recurrence_is_explicit(case, N):
    text, n = case
    p = compile_expr(parse_expr(text), n)
    slots = {
        key: TruncatedSeries(0.0, tuple(1.0 / (1 + i + sum(key)) for i in range(N + n + 1)))
        for key in p.slots
    }
    reads = []
    run_plan(p, slots, [0.5 + 0.1 * i for i in range(n)], N + n, reads=reads)
    assert reads
    for k, index in reads:
        assert index <= k + n - 1
