import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from implicit_extremes.expressions import ParseError, parse_expression, parse_loss_expr
from implicit_extremes.geometry import LossValidationError, harmonic
from implicit_extremes.rng import RngStream


def test_sqrt_product_accepted():
    expr = parse_loss_expr("pow(pos(x1)*pos(x2), 1/2)")
    f = expr.as_loss()
    assert f((4.0, 9.0)) == pytest.approx(6.0, rel=1e-15)
    assert f((-4.0, 9.0)) == 0.0
    assert expr.degree() == 1


def test_affine_rejected_with_lambda_2_witness():
    with pytest.raises(LossValidationError) as info:
        parse_loss_expr("x1 + 1")
    assert info.value.witness["lambda"] == 2.0


def test_harmonic_expression_matches_builtin():
    f = parse_loss_expr("1 / (1/pos(x1) + 1/pos(x2))").as_loss()
    assert f((2.0, 2.0)) == pytest.approx(1.0, rel=1e-15)
    gen = RngStream(4).generator()
    x = np.exp(gen.normal(size=(1000, 2)))
    np.testing.assert_allclose(f(x), harmonic(2)(x), rtol=1e-13)


def test_negative_loss_rejected():
    with pytest.raises(LossValidationError) as info:
        parse_loss_expr("x1 - 2*x2")
    assert info.value.witness is not None


def test_wrong_degree_rejected():
    with pytest.raises(LossValidationError):
        parse_loss_expr("pos(x1)*pos(x2)")


@pytest.mark.parametrize(
    "text,position",
    [
        ("x1 +", 4),
        ("(x1 + x2", 8),
        ("x1 $ x2", 3),
        ("foo(x1)", 0),
        ("pow(x1, x2)", 8),
        ("x1 ^ x2", 5),
        ("pow(x1, 1/0)", 9),
    ],
)
def test_syntax_errors_carry_position(text, position):
    with pytest.raises(ParseError) as info:
        parse_expression(text)
    assert info.value.position == position


def test_empty_expression():
    with pytest.raises(ParseError):
        parse_expression("   ")


def test_dimension_checks():
    assert parse_expression("pos(x1)").dimension == 1
    assert parse_expression("pos(x1)", 3).dimension == 3
    with pytest.raises(ParseError):
        parse_expression("pos(x3)", 2)


def test_exponent_forms():
    a = parse_expression("pos(x1)^(1/2) * pos(x2)^0.5")
    b = parse_expression("pow(pos(x1), 1/2) * pow(pos(x2), 1/2)")
    x = np.array([[4.0, 9.0]])
    assert a.evaluate(x)[0] == pytest.approx(6.0) and b.evaluate(x)[0] == pytest.approx(6.0)
    assert a.degree() == 1


def test_min_max_and_constants():
    f = parse_loss_expr("max(pos(x1), 2*pos(x2)) + 0.5*min(pos(x1), pos(x2))").as_loss()
    assert f((3.0, 1.0)) == pytest.approx(3.5)


# -- round trip ------------------------------------------------------------------

_coords = st.sampled_from(["x1", "x2", "x3"])
_numbers = st.sampled_from(["1", "2", "0.5", "3", "1.25", "10"])
_exponents = st.sampled_from(["1/2", "2", "-1", "3/4", "1"])


def _expressions():
    leaf = st.one_of(_coords, _numbers, _coords.map(lambda c: f"pos({c})"))

    def extend(children):
        return st.one_of(
            st.tuples(children, st.sampled_from("+-*/"), children).map(lambda t: f"{t[0]} {t[1]} {t[2]}"),
            children.map(lambda c: f"({c})"),
            children.map(lambda c: f"pos({c})"),
            st.tuples(children, _exponents).map(lambda t: f"pow({t[0]}, {t[1]})"),
            st.tuples(children, children).map(lambda t: f"min({t[0]}, {t[1]})"),
            st.tuples(children, children, children).map(lambda t: f"max({t[0]}, {t[1]}, {t[2]})"),
            st.tuples(leaf, st.sampled_from(["2", "(1/2)", "(-1/3)"])).map(lambda t: f"{t[0]}^{t[1]}"),
        )

    return st.recursive(leaf, extend, max_leaves=12)


@given(_expressions())
@settings(max_examples=400, deadline=None)
def test_parse_print_parse_fixed_point(text):
    first = parse_expression(text, 3)
    printed = first.to_text()
    second = parse_expression(printed, 3)
    assert second.to_text() == printed
    x = np.array([[1.3, 0.7, 2.9], [0.4, 5.0, 1.1]])
    with np.errstate(all="ignore"):
        np.testing.assert_allclose(second.evaluate(x), first.evaluate(x), rtol=1e-12, equal_nan=True)
