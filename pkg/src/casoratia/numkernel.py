"""Precision policy, shifted factorials and comparison helpers.

All floating computation runs on mpmath at an explicit bit precision; the
escalation ladder doubles bits when a certificate fails.  Scalars are plain
``mpmath.mpc`` values under an active precision context (``workbits``); exact
Gaussian-rational scalars from :mod:`casoratia.exact` flow through the same
generic routines via operator overloading.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import mpmath as mp

DEFAULT_BITS = 256
PRECISION_LADDER = (256, 512, 1024)


@contextlib.contextmanager
def workbits(bits: int):
    """Temporarily set the mpmath working precision in bits."""
    old = mp.mp.prec
    mp.mp.prec = bits
    try:
        yield
    finally:
        mp.mp.prec = old


@dataclass(frozen=True)
class TolerancePolicy:
    """Relative/absolute tolerance derived from the working precision.

    The default relative tolerance 2**(-bits/2) halves its exponent relative
    to full precision, leaving headroom for cancellation in the residuals it
    judges; abs_floor guards comparisons around zero.
    """

    precision_bits: int = DEFAULT_BITS
    rel_tol: mp.mpf = field(default=None)
    abs_floor: mp.mpf = field(default=None)

    def __post_init__(self):
        if self.precision_bits < 64:
            raise ValueError("precision_bits must be >= 64")
        if self.rel_tol is None:
            object.__setattr__(self, "rel_tol", mp.mpf(2) ** (-self.precision_bits // 2))
        if self.abs_floor is None:
            object.__setattr__(self, "abs_floor", mp.mpf(2) ** (-2 * self.precision_bits))

    def escalate(self) -> "TolerancePolicy":
        return TolerancePolicy(self.precision_bits * 2)


def to_mpc(re, im=0) -> mp.mpc:
    """Build an mpc from numbers, decimal strings or Fractions at current precision."""
    def conv(v):
        if isinstance(v, str):
            return mp.mpf(v)
        try:
            from fractions import Fraction
            if isinstance(v, Fraction):
                return mp.mpf(v.numerator) / v.denominator
        except ImportError:  # pragma: no cover
            pass
        return mp.mpf(v)
    return mp.mpc(conv(re), conv(im))


def pochhammer(a, n: int):
    """Shifted factorial (a)_n = a (a+1) ... (a+n-1); (a)_0 = 1."""
    if n < 0:
        raise ValueError("pochhammer order must be nonnegative")
    out = _one_like(a)
    for k in range(n):
        out = out * (a + k)
    return out


def q_pochhammer(a, q, n: int):
    """q-shifted factorial (a;q)_n = prod_{i<n} (1 - a q^i); (a;q)_0 = 1."""
    if n < 0:
        raise ValueError("q_pochhammer order must be nonnegative")
    out = _one_like(a)
    aq = a
    for _ in range(n):
        out = out * (1 - aq)
        aq = aq * q
    return out


def _one_like(a):
    if isinstance(a, (int, float, complex)):
        return mp.mpc(1)
    if isinstance(a, (mp.mpf, mp.mpc)):
        return mp.mpc(1)
    # exact scalars: x/x would be unsafe for zero; use 0*a + 1 via operator overloads
    return a * 0 + 1


def approx_equal(x, y, pol: TolerancePolicy) -> bool:
    """|x - y| <= rel_tol * max(|x|, |y|) + abs_floor."""
    d = abs(mp.mpc(x) - mp.mpc(y))
    return d <= pol.rel_tol * max(abs(mp.mpc(x)), abs(mp.mpc(y))) + pol.abs_floor


def rel_residual(x, y) -> mp.mpf:
    """|x - y| / max(|x|, |y|, 1e-300) -- scale-free residual."""
    xs, ys = abs(mp.mpc(x)), abs(mp.mpc(y))
    s = max(xs, ys)
    if s == 0:
        return mp.mpf(0)
    return abs(mp.mpc(x) - mp.mpc(y)) / s


class MPScalars:
    """mpmath scalar backend; elements are mpc under the ambient precision."""

    name = "float"

    def __init__(self, bits: int = DEFAULT_BITS):
        self.bits = bits
        self.q = None  # set by AW parameter sets

    @property
    def zero(self):
        return mp.mpc(0)

    @property
    def one(self):
        return mp.mpc(1)

    @property
    def i(self):
        return mp.mpc(0, 1)

    def from_int(self, n: int):
        return mp.mpc(n)

    def from_fraction(self, re, im=0):
        from fractions import Fraction
        def conv(v):
            v = Fraction(v)
            return mp.mpf(v.numerator) / v.denominator
        return mp.mpc(conv(re), conv(im))

    @staticmethod
    def is_zero(x) -> bool:
        return x == 0

    def is_negligible(self, x, scale) -> bool:
        eps = mp.mpf(2) ** (-self.bits + 16)
        return abs(x) <= eps * abs(scale)

    @staticmethod
    def conj(x):
        return mp.conj(x)

    @staticmethod
    def to_mpc(x):
        return mp.mpc(x)
