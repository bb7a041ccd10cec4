"""Gaussian rationals and the sqrt(q) extension."""

from fractions import Fraction

import mpmath as mp
from hypothesis import given, settings, strategies as st

from casoratia.exact import ExactScalars, QQi, SqrtExt, fraction_from_decimal

frac = st.fractions(min_value=-5, max_value=5, max_denominator=16)


@settings(max_examples=60, deadline=None)
@given(frac, frac)
def test_conjugation_involution(re, im):
    z = QQi(re, im)
    assert z.conjugate().conjugate() == z


@settings(max_examples=60, deadline=None)
@given(frac, frac, frac, frac)
def test_qqi_field_ops(a, b, c, d):
    x, y = QQi(a, b), QQi(c, d)
    assert (x + y) - y == x
    assert x * y == y * x
    if not y.is_zero():
        assert (x / y) * y == x


@settings(max_examples=40, deadline=None)
@given(frac, frac, frac, frac)
def test_sqrt_ext_inverse(a, b, c, d):
    q = Fraction(2, 5)
    x = SqrtExt(QQi(a, b), QQi(c, d), q)
    if x.is_zero():
        return
    one = SqrtExt(QQi(1), QQi(0), q)
    assert x * x.inverse() == one


def test_sqrt_ext_norm():
    q = Fraction(3, 7)
    x = SqrtExt(QQi(Fraction(1, 2)), QQi(Fraction(2, 3)), q)
    conj = SqrtExt(x.a, -x.b, q)
    prod = x * conj
    assert prod.b.is_zero()
    assert prod.a == QQi(Fraction(1, 4) - Fraction(4, 9) * q)


def test_q_power_half_integers():
    sc = ExactScalars(Fraction(4, 9))
    assert sc.q_power(Fraction(1, 2)) == sc.sqrt_q()
    v = sc.q_power(Fraction(-3, 2))
    direct = sc.one / (sc.q_power(1) * sc.sqrt_q())
    assert v == direct
    got = v.to_mpc()
    want = mp.power(mp.mpf(4) / 9, mp.mpf(-1.5))
    assert abs(got - want) < 1e-12


def test_to_mpc_roundtrip():
    z = QQi(Fraction(3, 8), Fraction(-5, 16))
    m = z.to_mpc()
    assert m.real == mp.mpf(3) / 8 and m.imag == mp.mpf(-5) / 16


def test_fraction_from_decimal():
    assert fraction_from_decimal("-1.25") == Fraction(-5, 4)
    assert fraction_from_decimal("3/2") == Fraction(3, 2)
