import math

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from approxde.polynomial import (
    Polynomial,
    PolynomialSyntaxError,
    abs_coeff_sum,
    coefficient_of,
    coefficient_terms,
    evaluate,
    format_polynomial,
    mono_degree,
    mono_mul,
    monomial,
    parse_polynomial,
    partial_derivative,
    rename,
    substitute,
)

NV = 3
SYMS = sp.symbols(f"x0:{NV}")
NAMES = [f"x{i}" for i in range(NV)]

monos = st.lists(st.tuples(st.integers(0, NV - 1), st.integers(1, 3)), max_size=3).map(
    lambda ps: monomial(*ps))
coeffs = st.integers(-5, 5).map(float)
polys = st.dictionaries(monos, coeffs, max_size=5).map(Polynomial)
points = st.lists(st.floats(-2, 2, allow_nan=False), min_size=NV, max_size=NV)


def to_sympy(p):
    return sp.expand(sum((c * sp.Mul(*[SYMS[v] ** e for v, e in m]) for m, c in p.items()),
                         sp.Integer(0)))


def same(p, expr):
    return sp.expand(to_sympy(p) - expr) == 0


def resolve(name):
    return NAMES.index(name) if name in NAMES else {}[name]


def test_normal_form_merges_and_drops_zeros():
    p = Polynomial({monomial((0, 1)): 2.0}) + Polynomial({monomial((0, 1)): -2.0})
    assert not p and len(p) == 0
    q = parse_polynomial("x0*x1 + x1*x0 - 3", resolve)
    assert coefficient_of(q, monomial((0, 1), (1, 1))) == 2.0
    assert coefficient_of(q, ()) == -3.0


def test_running_example_terms():
    p = parse_polynomial("-4.0*x0 + x1 + x2", resolve)
    assert abs_coeff_sum(p) == 6.0
    assert p.degree() == 1
    assert p.variables() == {0, 1, 2}


def test_monomial_rejects_negative_exponent():
    with pytest.raises(ValueError):
        monomial((0, -1))


@given(monos, monos)
def test_mono_mul_degree_adds(a, b):
    assert mono_degree(mono_mul(a, b)) == mono_degree(a) + mono_degree(b)
    assert mono_mul(a, b) == mono_mul(b, a)


@given(polys, polys)
def test_arithmetic_matches_sympy(p, q):
    assert same(p + q, to_sympy(p) + to_sympy(q))
    assert same(p - q, to_sympy(p) - to_sympy(q))
    assert same(p * q, to_sympy(p) * to_sympy(q))


@given(polys, polys, polys)
@settings(max_examples=50)
def test_ring_laws(p, q, r):
    assert (p * (q + r) - (p * q + p * r)).is_zero(1e-9)
    assert ((p * q) * r - p * (q * r)).is_zero(1e-9)


@given(polys, st.integers(0, NV - 1))
def test_derivative_matches_sympy(p, v):
    assert same(partial_derivative(p, v), sp.diff(to_sympy(p), SYMS[v]))


@given(polys, polys, st.integers(0, NV - 1))
@settings(max_examples=50)
def test_substitute_matches_sympy(p, q, v):
    got = substitute(p, {v: q})
    assert same(got, to_sympy(p).xreplace({SYMS[v]: to_sympy(q)}))


@given(polys)
def test_substitution_is_simultaneous(p):
    swap = substitute(p, {0: Polynomial.variable(1), 1: Polynomial.variable(0)})
    assert swap == rename(p, {0: 1, 1: 0})
    assert rename(swap, {0: 1, 1: 0}) == p


@given(polys, points)
def test_evaluate_matches_sympy(p, x):
    want = float(to_sympy(p).subs(dict(zip(SYMS, x))))
    assert math.isclose(evaluate(p, x), want, rel_tol=1e-9, abs_tol=1e-9)


def test_evaluate_names_missing_variable():
    with pytest.raises(KeyError, match="x2"):
        evaluate(Polynomial.variable(2), [1.0, 2.0], NAMES)


@given(polys)
def test_format_parse_round_trip(p):
    assert parse_polynomial(format_polynomial(p, NAMES), resolve) == p


def test_format_omits_unit_coefficients():
    p = parse_polynomial("x1 - x0^2 + 2.5", resolve)
    assert format_polynomial(p, NAMES) == "2.5 + x1 - x0^2"


@pytest.mark.parametrize("text,col", [("x0 + * x1", 5), ("x0 $ 1", 3), ("x0^-1", 2), ("", 0), ("y + 1", 0)])
def test_syntax_errors_carry_column(text, col):
    with pytest.raises(PolynomialSyntaxError) as info:
        parse_polynomial(text, resolve)
    assert info.value.column == col


@given(polys)
def test_coefficient_terms_reassemble(p):
    parts = coefficient_terms(p, lambda v: v != 2)
    total = Polynomial()
    for mono, coef in parts.items():
        assert all(v != 2 for v, _ in mono)
        assert all(v == 2 for m in coef.monomials() for v, _ in m)
        total = total + coef * Polynomial({mono: 1.0})
    assert total == p
