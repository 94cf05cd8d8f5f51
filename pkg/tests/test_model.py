import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtmdde.errors import (
    DerivativeOrderTooHigh,
    HistoryContainsState,
    ModelError,
    ModelSyntaxError,
    NonIntegerExponent,
    UnknownDelayIndex,
)
from dtmdde.model import (
    Add,
    Const,
    DelayModel,
    Div,
    Exp,
    Mul,
    Neg,
    Pow,
    State,
    Sub,
    TimeVar,
    classify,
    evaluate_expr,
    parse_expr,
    parse_model,
    to_text,
    validate_model,
    walk,
)


def model(rhs, delays="", history="1", extra=""):
    lines = [f'rhs = "{rhs}"', f'history = "{history}"', "T = 1"]
    if delays:
        lines.append(f"delays = [{delays}]")
    return parse_model("\n".join(lines) + "\n" + extra)


# parse_model examples -----------------------------------------------------

def test_parse_hutchinson(model_text):
    m = parse_model(model_text("hutchinson"))
    assert m.order == 1
    assert m.delays == (Fraction(1, 10),)
    assert m.rhs == Mul((State(0, 0), Sub(Const(2.0), Mul((Const(4.0), State(0, 1))))))
    assert m.history == Const(1.0)
    assert m.T == Fraction(1, 2) and m.t0 == 0
    assert m.trunc_order == (3, 4, 5, 6, 7)


def test_parse_plain_ode():
    m = model("u")
    assert m.delays == ()
    assert m.rhs == State(0, 0)
    assert classify(m) == "ODE"
    assert m.trunc_order == 16


def test_parse_neutral(model_text):
    m = parse_model(model_text("neutral_gyori"))
    assert m.delays == (Fraction(2), Fraction(1))
    assert State(1, 2) in set(_states(m.rhs))
    assert m.history == Const(2.3)
    assert m.trunc_order == 20


def _states(e):
    return [n for n in walk(e) if isinstance(n, State)]


def test_parse_tree_shapes():
    assert parse_expr("1 + 2 + 3") == Add((Const(1.0), Const(2.0), Const(3.0)))
    assert parse_expr("1 - 2 - 3") == Sub(Sub(Const(1.0), Const(2.0)), Const(3.0))
    assert parse_expr("2 * t / u") == Div(Mul((Const(2.0), TimeVar())), State(0, 0))
    assert parse_expr("u''[3]^2") == Pow(State(2, 3), 2)
    assert parse_expr("exp(-t)") == Exp(Neg(TimeVar()))
    # unary minus binds tighter than ^
    assert parse_expr("-u^2") == Pow(Neg(State(0, 0)), 2)
    assert parse_expr("1.5e-3") == Const(1.5e-3)


def test_delay_literals_exact_and_float():
    m = model("u[1] + u[2] + u[3]", "3/2, 2, 0.25")
    assert m.delays == (Fraction(3, 2), Fraction(2), 0.25)
    assert isinstance(m.delays[2], float)
    assert not m.exact_delays


def test_model_file_features():
    text = """# comment line
order = 2
  # indented comment
delays = [1]
rhs = "-u + 0.1*u[1]"
history = "exp(t)"
t0 = 1/2
T = 3
N = [10, 12]
ic = [1.6487212707001282, 1.6487212707001282]
"""
    m = parse_model(text)
    assert m.order == 2
    assert m.t0 == Fraction(1, 2)
    assert m.order_for_segment(1) == 10
    assert m.order_for_segment(2) == 12
    assert m.order_for_segment(7) == 12
    assert m.initial_values == (math.exp(0.5), math.exp(0.5))


def test_ic_mismatch_rejected():
    with pytest.raises(ModelError, match="ic"):
        model("u", extra="ic = [2]\n")
    with pytest.raises(ModelError, match="exactly"):
        model("u", extra="ic = [1, 0]\n")


def test_missing_and_unknown_keys():
    with pytest.raises(ModelSyntaxError, match="rhs"):
        parse_model('history = "1"\nT = 1\n')
    with pytest.raises(ModelSyntaxError) as exc:
        parse_model('rhs = "u"\nhistory = "1"\nT = 1\nfoo = 2\n')
    assert exc.value.line == 4
    with pytest.raises(ModelSyntaxError, match="quoted"):
        parse_model("rhs = u\nhistory = \"1\"\nT = 1\n")


# errors -------------------------------------------------------------------

def test_syntax_error_reports_line_and_column():
    with pytest.raises(ModelSyntaxError) as exc:
        parse_model('T = 1\nhistory = "1"\nrhs = "u * (2 - sin(u))"\n')
    # the expression starts at column 8 (after the quote); 'sin' is 9 characters in
    assert exc.value.line == 3
    assert exc.value.column == 8 + 9
    assert "sin" in exc.value.reason


@pytest.mark.parametrize("text", ["u +", "(u", "u )", "2 ** u", "u $ 1", "exp u", "u[x]"])
def test_syntax_errors(text):
    with pytest.raises(ModelSyntaxError):
        parse_expr(text)


def test_unknown_delay_index():
    with pytest.raises(UnknownDelayIndex):
        model("u * u[2]", "1")
    with pytest.raises(UnknownDelayIndex):
        parse_expr("u[0]")


def test_derivative_order_too_high():
    with pytest.raises(DerivativeOrderTooHigh):
        model("u''[1]", "1")
    with pytest.raises(DerivativeOrderTooHigh):
        model("u'", "1")
    # neutral u'[1] with n = 1 is fine
    assert classify(model("u'[1]", "1")) == "neutral"


def test_history_contains_state():
    with pytest.raises(HistoryContainsState):
        model("u", history="u + 1")


def test_non_integer_exponent():
    with pytest.raises(NonIntegerExponent):
        parse_expr("u^1.5")
    with pytest.raises(NonIntegerExponent):
        parse_expr("u^t")
    with pytest.raises(NonIntegerExponent):
        parse_expr("u^-1")


def test_invariant_violations():
    with pytest.raises(ModelError, match="T must exceed t0"):
        parse_model('rhs = "u"\nhistory = "1"\nT = 0\n')
    with pytest.raises(ModelError, match="distinct"):
        model("u[1]", "1, 1")
    with pytest.raises(ModelError, match="positive"):
        DelayModel(State(0, 1), Const(1.0), 1, delays=(-1.0,)).check()
    with pytest.raises(ModelError, match="truncation"):
        model("u", extra="N = 0\n")


# validate / classify -------------------------------------------------------

def test_validate_examples(model_text):
    h = parse_model(model_text("hutchinson"))
    assert validate_model(h) == [] and classify(h) == "delayed"
    g = parse_model(model_text("neutral_gyori"))
    assert validate_model(g) == [] and classify(g) == "neutral"


def test_validate_flags_current_state_denominator_and_exp():
    diags = validate_model(model("1/u"))
    assert [d.code for d in diags] == ["UnsupportedCurrentStateDenominator"]
    diags = validate_model(model("exp(u[1] + u)", "1"))
    assert [d.code for d in diags] == ["UnsupportedCurrentStateInExp"]
    # delayed terms in denominators and exponents are fine
    assert validate_model(model("u / u[1] + exp(-u[1])", "1")) == []


def test_every_delay_index_within_range(model_text):
    for name in ("hutchinson", "neutral_gyori", "noncommensurate_logistic"):
        m = parse_model(model_text(name))
        assert all(s.delay <= len(m.delays) for s in _states(m.rhs))


# evaluation ---------------------------------------------------------------

def test_evaluate_expr():
    e = parse_expr("u * (2 - 4*u[1]) + t^2 / exp(t)")
    vals = {(0, 0): 0.5, (0, 1): 0.25}
    got = evaluate_expr(e, 2.0, lambda p, i: vals[(p, i)])
    assert got == pytest.approx(0.5 * 1.0 + 4 / math.exp(2))


# canonical printing -------------------------------------------------------

leaf = st.one_of(
    st.floats(0, 1e6, allow_nan=False, allow_infinity=False).map(Const),
    st.just(TimeVar()),
    st.builds(State, st.integers(0, 3), st.integers(0, 4)),
)


def _tree(children):
    many = st.lists(children, min_size=2, max_size=4).map(tuple)
    return st.one_of(
        many.map(Add),
        many.map(Mul),
        st.builds(Sub, children, children),
        st.builds(Div, children, children),
        st.builds(Pow, children, st.integers(0, 5)),
        st.builds(Exp, children),
        st.builds(Neg, children),
    )


exprs = st.recursive(leaf, _tree, max_leaves=25)


@settings(max_examples=300)
@given(exprs)
def test_print_parse_round_trip(e):
    assert parse_expr(to_text(e)) == e


@settings(max_examples=200)
@given(exprs)
def test_parse_print_parse_fixed_point(e):
    # start from arbitrary (non-canonical) text as well
    first = parse_expr(to_text(e).replace("(", " ( ").replace("*", " * "))
    again = parse_expr(to_text(first))
    assert again == first


def test_negative_constant_prints_reparsable():
    e = Mul((Const(-2.5), State(0, 0)))
    assert parse_expr(to_text(e)) == Mul((Neg(Const(2.5)), State(0, 0)))
