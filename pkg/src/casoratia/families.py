"""Registry of the three idQM systems: continuous Hahn, Wilson, Askey-Wilson.

Carries the per-family data the construction needs: potential numerators and
denominators, sinusoidal coordinate, energies, base polynomials from the
terminating hypergeometric series, virtual-state parameter twists with their
alpha constants and energies, and the parameter shifts delta / delta-tilde.

Every transcribed item is gated: base polynomials and energies by the
difference-equation eigenrelation, virtual twists by the potential functional
identities plus the closed-form virtual energies, h_n ratios by the
three-term-recurrence route, and the delta-tilde shifts by calibration against
the deformed eigenrelation (see miop.delta_tilde).

Extension point (not built): the Meixner-Pollaczek family arises from cH by a
parameter limit and has a single virtual-state type; a fourth Family subclass
with M_II = 0 everywhere would slot into the same interfaces.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp

from .exact import ExactScalars, QQi, SqrtExt, fraction_from_decimal
from .numkernel import MPScalars, pochhammer, q_pochhammer
from .polycore import Poly

HALF = Fraction(1, 2)


class CalibrationFailure(RuntimeError):
    """No candidate twist / shift passed its gate."""


@dataclass(frozen=True, eq=False)
class ParamSet:
    """Family parameters (a1..a4, q for AW) in a concrete scalar backend."""

    family: str                # 'ch' | 'w' | 'aw'
    a: tuple
    q: object                  # scalar, AW only (None otherwise)
    mode: str                  # 'physical' | 'generic'
    scalars: object

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if len(self.a) != 4:
            raise ValueError("need four parameters a1..a4")
        if (self.family == "aw") != (self.q is not None):
            raise ValueError("q is required exactly for the AW family")

    @property
    def fam(self) -> "Family":
        return FAMILIES[self.family]

    def with_a(self, a, q=None) -> "ParamSet":
        return ParamSet(self.family, tuple(a), self.q if q is None else q,
                        self.mode, self.scalars)

    def b1(self):
        return self.a[0] + self.a[1] + self.a[2] + self.a[3]

    def b4(self):
        return self.a[0] * self.a[1] * self.a[2] * self.a[3]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.family}|{self.mode}|{self.scalars.name}|".encode())
        for v in (*self.a, self.q):
            h.update(_render_scalar(v).encode())
            h.update(b"|")
        return h.hexdigest()[:16]


def _render_scalar(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, QQi):
        return f"{v.re},{v.im}"
    if isinstance(v, SqrtExt):
        return f"{v.a.re},{v.a.im}+s({v.q})*{v.b.re},{v.b.im}"
    return mp.nstr(mp.mpc(v), 40)


class Family:
    tag = ""
    var_kind = "x"  # 'x' or 'z'

    # -- coordinates ------------------------------------------------------------

    def eta_at(self, u, lam: ParamSet):
        raise NotImplementedError

    def shift_arg(self, u, t, lam: ParamSet):
        """Working-variable image of x -> x + i t gamma (t rational)."""
        raise NotImplementedError

    def gamma_value(self, lam: ParamSet) -> mp.mpf:
        """Numeric gamma (float path only)."""
        raise NotImplementedError

    # -- potential --------------------------------------------------------------

    def v_numer_at(self, a, u, lam: ParamSet):
        raise NotImplementedError

    def v_denom_at(self, u, lam: ParamSet):
        raise NotImplementedError

    def v_at(self, a, u, lam: ParamSet):
        return self.v_numer_at(a, u, lam) / self.v_denom_at(u, lam)

    def v_star_at(self, a, u, lam: ParamSet):
        """Starred partner; generic-mode rule, equal to conj-params form when physical."""
        raise NotImplementedError

    # -- spectra ----------------------------------------------------------------

    def energy(self, n: int, lam: ParamSet):
        raise NotImplementedError

    def etilde(self, vtype: str, v: int, lam: ParamSet):
        raise NotImplementedError

    def twist_a(self, vtype: str, lam: ParamSet) -> tuple:
        raise NotImplementedError

    def alpha(self, vtype: str, lam: ParamSet):
        raise NotImplementedError

    # -- shifts -------------------------------------------------------------------

    delta_vec = (HALF, HALF, HALF, HALF)

    def dtilde_candidates(self, vtype: str):
        raise NotImplementedError

    def apply_shift_vec(self, lam: ParamSet, vec) -> ParamSet:
        raise NotImplementedError

    def shift_lam(self, lam: ParamSet, vec) -> ParamSet:
        return self.apply_shift_vec(lam, vec)

    # -- ranges (float path) -------------------------------------------------------

    def x_bounds(self, lam: ParamSet):
        raise NotImplementedError

    def eta_physical_interval(self, lam: ParamSet):
        raise NotImplementedError

    def recover_x(self, eta):
        raise NotImplementedError

    def arg_of_x(self, x, lam: ParamSet):
        """Working variable u for a given complex x (float path)."""
        return x

    def x_of_arg(self, u, lam: ParamSet):
        return u

    def sample_args(self, count: int, lam: ParamSet, salt: str):
        raise NotImplementedError

    def exact_sample_args(self, count: int, lam: ParamSet):
        raise NotImplementedError


def _qp_inf(a, q):
    """(a; q)_infty by direct truncated product at the working precision."""
    absq = abs(q)
    if absq >= 1:
        raise ValueError("need |q| < 1")
    terms = int(mp.mp.prec * mp.log(2) / (-mp.log(absq))) + 12
    out = mp.mpc(1)
    aq = mp.mpc(a)
    for _ in range(terms):
        out *= 1 - aq
        aq *= q
    return out


def _jitter(salt: str) -> float:
    h = hashlib.sha256(salt.encode()).digest()
    return int.from_bytes(h[:4], "big") / 2**32


class ContinuousHahn(Family):
    tag = "ch"
    var_kind = "x"

    def eta_at(self, u, lam):
        return u

    def shift_arg(self, u, t, lam):
        t = Fraction(t)
        return u + lam.scalars.i * lam.scalars.from_fraction(t)

    def gamma_value(self, lam):
        return mp.mpf(1)

    def v_numer_at(self, a, u, lam):
        i = lam.scalars.i
        return (a[0] + i * u) * (a[1] + i * u)

    def v_denom_at(self, u, lam):
        return lam.scalars.one

    def v_star_at(self, a, u, lam):
        i = lam.scalars.i
        return (a[2] - i * u) * (a[3] - i * u)

    def energy(self, n, lam):
        sc = lam.scalars
        return sc.from_int(n) * (lam.b1() + sc.from_int(n - 1))

    def etilde(self, vtype, v, lam):
        a1, a2, a3, a4 = lam.a
        sc = lam.scalars
        vv = sc.from_int(v)
        if vtype == "I":
            return -(a1 + a3 - vv - sc.one) * (a2 + a4 + vv)
        return -(a2 + a4 - vv - sc.one) * (a1 + a3 + vv)

    def twist_a(self, vtype, lam):
        # reflected swap within the conjugate pair; plain reflection fails the
        # potential consistency identity (calibration pins this down)
        a1, a2, a3, a4 = lam.a
        one = lam.scalars.one
        if vtype == "I":
            return (one - a3, a2, one - a1, a4)
        return (a1, one - a4, a3, one - a2)

    def alpha(self, vtype, lam):
        return lam.scalars.one

    def dtilde_candidates(self, vtype):
        vals = [Fraction(0), HALF, -HALF, Fraction(1), Fraction(-1)]
        best_first = [(-HALF, HALF, -HALF, HALF)] if vtype == "I" else [(HALF, -HALF, HALF, -HALF)]
        cands = list(best_first)
        for u in vals:
            for w in vals:
                vec = (u, w, u, w)
                if vec not in cands:
                    cands.append(vec)
        return cands

    def apply_shift_vec(self, lam, vec):
        sc = lam.scalars
        return lam.with_a(tuple(ai + sc.from_fraction(f) for ai, f in zip(lam.a, vec)))

    def x_bounds(self, lam):
        return (mp.mpf("-inf"), mp.mpf("+inf"))

    def eta_physical_interval(self, lam):
        return (mp.mpf("-inf"), mp.mpf("+inf"))

    def recover_x(self, eta):
        return mp.mpc(eta)

    def sample_args(self, count, lam, salt):
        j = _jitter(salt)
        lo, hi = mp.mpf("-2.4"), mp.mpf("2.6")
        return [lo + (hi - lo) * (s + mp.mpf(0.35) + mp.mpf(0.3) * j) / count for s in range(count)]

    def exact_sample_args(self, count, lam):
        return [lam.scalars.from_fraction(Fraction(2 * s + 1, 3)) for s in range(count)]

    def base_poly(self, n, lam, a=None) -> Poly:
        """Continuous Hahn polynomial p_n(eta) in the Askey-scheme normalization."""
        sc = lam.scalars
        a1, a2, a3, a4 = a if a is not None else lam.a
        b1 = a1 + a2 + a3 + a4
        acc = Poly.const(sc.one, sc)
        coef = sc.one
        base = Poly.const(sc.one, sc)
        for k in range(1, n + 1):
            km1 = sc.from_int(k - 1)
            coef = coef * (sc.from_int(-n) + km1) * (sc.from_int(n - 1) + b1 + km1)
            coef = coef / ((a1 + a3 + km1) * (a1 + a4 + km1) * sc.from_int(k))
            base = base * Poly([a1 + km1, sc.i], sc)
            acc = acc + base.scale(coef)
        pref = (sc.i ** n) * pochhammer(a1 + a3, n) * pochhammer(a1 + a4, n)
        fact = sc.one
        for k in range(2, n + 1):
            fact = fact * sc.from_int(k)
        return acc.scale(pref / fact).trim()

    def h_ratio_base(self, n, m, lam):
        return self._h_over_h0(n, lam) / self._h_over_h0(m, lam)

    def _h_over_h0(self, n, lam):
        a1, a2, a3, a4 = lam.a
        sc = lam.scalars
        b1 = lam.b1()
        num = (pochhammer(a1 + a3, n) * pochhammer(a1 + a4, n)
               * pochhammer(a2 + a3, n) * pochhammer(a2 + a4, n) * (b1 - sc.one))
        den = pochhammer(sc.one, n) * pochhammer(b1 - sc.one, n) * (b1 + sc.from_int(2 * n - 1))
        return num / den

    def h_abs(self, n, lam):
        a1, a2, a3, a4 = (mp.mpc(x) for x in lam.a)
        b1 = a1 + a2 + a3 + a4
        num = mp.gamma(n + a1 + a3) * mp.gamma(n + a1 + a4) * mp.gamma(n + a2 + a3) * mp.gamma(n + a2 + a4)
        den = mp.factorial(n) * (2 * n + b1 - 1) * mp.gamma(n + b1 - 1)
        return 2 * mp.pi * num / den

    def phi0_sq(self, x, lam):
        a1, a2, a3, a4 = (mp.mpc(v) for v in lam.a)
        return (mp.gamma(a1 + 1j * x) * mp.gamma(a2 + 1j * x)
                * mp.gamma(a3 - 1j * x) * mp.gamma(a4 - 1j * x))


class Wilson(Family):
    tag = "w"
    var_kind = "x"

    def eta_at(self, u, lam):
        return u * u

    def shift_arg(self, u, t, lam):
        return u + lam.scalars.i * lam.scalars.from_fraction(Fraction(t))

    def gamma_value(self, lam):
        return mp.mpf(1)

    def v_numer_at(self, a, u, lam):
        i = lam.scalars.i
        out = lam.scalars.one
        for ai in a:
            out = out * (ai + i * u)
        return out

    def v_denom_at(self, u, lam):
        sc = lam.scalars
        two_i_u = sc.from_int(2) * sc.i * u
        return two_i_u * (two_i_u + sc.one)

    def v_star_at(self, a, u, lam):
        return self.v_numer_at(a, -u, lam) / self.v_denom_at(-u, lam)

    def energy(self, n, lam):
        sc = lam.scalars
        return sc.from_int(n) * (lam.b1() + sc.from_int(n - 1))

    def etilde(self, vtype, v, lam):
        a1, a2, a3, a4 = lam.a
        sc = lam.scalars
        vv = sc.from_int(v)
        if vtype == "I":
            return -(a1 + a2 - vv - sc.one) * (a3 + a4 + vv)
        return -(a3 + a4 - vv - sc.one) * (a1 + a2 + vv)

    def twist_a(self, vtype, lam):
        a1, a2, a3, a4 = lam.a
        one = lam.scalars.one
        if vtype == "I":
            return (one - a1, one - a2, a3, a4)
        return (a1, a2, one - a3, one - a4)

    def alpha(self, vtype, lam):
        return lam.scalars.one

    def dtilde_candidates(self, vtype):
        vals = [Fraction(0), HALF, -HALF, Fraction(1), Fraction(-1)]
        best_first = [(-HALF, -HALF, HALF, HALF)] if vtype == "I" else [(HALF, HALF, -HALF, -HALF)]
        cands = list(best_first)
        for u in vals:
            for w in vals:
                vec = (u, u, w, w)
                if vec not in cands:
                    cands.append(vec)
        return cands

    def apply_shift_vec(self, lam, vec):
        sc = lam.scalars
        return lam.with_a(tuple(ai + sc.from_fraction(f) for ai, f in zip(lam.a, vec)))

    def x_bounds(self, lam):
        return (mp.mpf(0), mp.mpf("+inf"))

    def eta_physical_interval(self, lam):
        return (mp.mpf(0), mp.mpf("+inf"))

    def recover_x(self, eta):
        x = mp.sqrt(mp.mpc(eta))
        if mp.re(x) < 0 or (mp.re(x) == 0 and mp.im(x) < 0):
            x = -x
        return x

    def sample_args(self, count, lam, salt):
        j = _jitter(salt)
        lo, hi = mp.mpf("0.37"), mp.mpf("3.9")
        return [lo + (hi - lo) * (s + mp.mpf(0.3) + mp.mpf(0.4) * j) / count for s in range(count)]

    def exact_sample_args(self, count, lam):
        return [lam.scalars.from_fraction(Fraction(2 * s + 1, 2)) for s in range(count)]

    def base_poly(self, n, lam, a=None) -> Poly:
        """Wilson polynomial W_n(eta) (eta = x^2) in the Askey-scheme normalization."""
        sc = lam.scalars
        a1, a2, a3, a4 = a if a is not None else lam.a
        b1 = a1 + a2 + a3 + a4
        acc = Poly.const(sc.one, sc)
        coef = sc.one
        base = Poly.const(sc.one, sc)
        for k in range(1, n + 1):
            km1 = sc.from_int(k - 1)
            coef = coef * (sc.from_int(-n) + km1) * (sc.from_int(n - 1) + b1 + km1)
            coef = coef / ((a1 + a2 + km1) * (a1 + a3 + km1) * (a1 + a4 + km1) * sc.from_int(k))
            s = a1 + km1
            base = base * Poly([s * s, sc.one], sc)
            acc = acc + base.scale(coef)
        pref = pochhammer(a1 + a2, n) * pochhammer(a1 + a3, n) * pochhammer(a1 + a4, n)
        return acc.scale(pref).trim()

    def h_ratio_base(self, n, m, lam):
        return self._h_over_h0(n, lam) / self._h_over_h0(m, lam)

    def _h_over_h0(self, n, lam):
        a = lam.a
        sc = lam.scalars
        b1 = lam.b1()
        num = pochhammer(sc.one, n) * pochhammer(b1 + sc.from_int(n - 1), n)
        for i in range(4):
            for j in range(i + 1, 4):
                num = num * pochhammer(a[i] + a[j], n)
        return num / pochhammer(b1, 2 * n)

    def h_abs(self, n, lam):
        a = [mp.mpc(x) for x in lam.a]
        b1 = sum(a)
        num = mp.factorial(n) * mp.rf(b1 + n - 1, n)
        for i in range(4):
            for j in range(i + 1, 4):
                num *= mp.gamma(n + a[i] + a[j])
        return 2 * mp.pi * num / mp.gamma(2 * n + b1)

    def phi0_sq(self, x, lam):
        a = [mp.mpc(v) for v in lam.a]
        num = mp.mpf(1)
        for ai in a:
            num *= mp.gamma(ai + 1j * x) * mp.gamma(ai - 1j * x)
        return num / (mp.gamma(2j * x) * mp.gamma(-2j * x))


class AskeyWilson(Family):
    tag = "aw"
    var_kind = "z"

    def eta_at(self, u, lam):
        sc = lam.scalars
        return (u + sc.one / u) / sc.from_int(2)

    def shift_arg(self, u, t, lam):
        """x -> x + i t gamma is z -> z q^{-t} (gamma = log q)."""
        t = Fraction(t)
        sc = lam.scalars
        if sc.name == "exact":
            return u * sc.q_power(-t)
        return u * mp.power(mp.mpc(lam.q), -mp.mpf(t.numerator) / t.denominator)

    def gamma_value(self, lam):
        return mp.log(mp.mpf(mp.re(mp.mpc(lam.q))))

    def v_numer_at(self, a, u, lam):
        out = lam.scalars.one
        for ai in a:
            out = out * (lam.scalars.one - ai * u)
        return out

    def v_denom_at(self, u, lam):
        sc = lam.scalars
        u2 = u * u
        return (sc.one - u2) * (sc.one - lam.q * u2)

    def v_star_at(self, a, u, lam):
        return self.v_numer_at(a, lam.scalars.one / u, lam) / self.v_denom_at(lam.scalars.one / u, lam)

    def energy(self, n, lam):
        sc = lam.scalars
        q = lam.q
        qn = q ** n
        q_mn = sc.one / qn
        return (q_mn - sc.one) * (sc.one - lam.b4() * qn / q)

    def etilde(self, vtype, v, lam):
        sc = lam.scalars
        q = lam.q
        a1, a2, a3, a4 = lam.a
        qv = q ** v
        q_mv1 = sc.one / (qv * q)
        if vtype == "I":
            return -(sc.one - a1 * a2 * q_mv1) * (sc.one - a3 * a4 * qv)
        return -(sc.one - a3 * a4 * q_mv1) * (sc.one - a1 * a2 * qv)

    def twist_a(self, vtype, lam):
        a1, a2, a3, a4 = lam.a
        q = lam.q
        if vtype == "I":
            return (q / a1, q / a2, a3, a4)
        return (a1, a2, q / a3, q / a4)

    def alpha(self, vtype, lam):
        if vtype == "I":
            return lam.a[0] * lam.a[1] / lam.q
        return lam.a[2] * lam.a[3] / lam.q

    def dtilde_candidates(self, vtype):
        vals = [Fraction(0), HALF, -HALF, Fraction(1), Fraction(-1)]
        best_first = [(-HALF, -HALF, HALF, HALF)] if vtype == "I" else [(HALF, HALF, -HALF, -HALF)]
        cands = list(best_first)
        for u in vals:
            for w in vals:
                vec = (u, u, w, w)
                if vec not in cands:
                    cands.append(vec)
        return cands

    def apply_shift_vec(self, lam, vec):
        sc = lam.scalars
        if sc.name == "exact":
            return lam.with_a(tuple(ai * sc.q_power(f) for ai, f in zip(lam.a, vec)))
        qm = mp.mpc(lam.q)
        return lam.with_a(tuple(ai * mp.power(qm, mp.mpf(Fraction(f).numerator) / Fraction(f).denominator)
                                for ai, f in zip(lam.a, vec)))

    def x_bounds(self, lam):
        return (mp.mpf(0), mp.pi)

    def eta_physical_interval(self, lam):
        return (mp.mpf(-1), mp.mpf(1))

    def recover_x(self, eta):
        return mp.acos(mp.mpc(eta))

    def sample_args(self, count, lam, salt):
        j = _jitter(salt)
        lo, hi = mp.mpf("0.17"), mp.pi - mp.mpf("0.19")
        return [mp.exp(1j * (lo + (hi - lo) * (s + mp.mpf(0.3) + mp.mpf(0.4) * j) / count))
                for s in range(count)]

    def exact_sample_args(self, count, lam):
        return [lam.scalars.from_fraction(Fraction(s + 2, 1)) + lam.scalars.from_fraction(Fraction(1, s + 3))
                for s in range(count)]

    def base_poly(self, n, lam, a=None) -> Poly:
        """Askey-Wilson polynomial p_n(eta) (eta = cos x), Askey-scheme normalization."""
        sc = lam.scalars
        a1, a2, a3, a4 = a if a is not None else lam.a
        q = lam.q
        b4 = a1 * a2 * a3 * a4
        acc = Poly.const(sc.one, sc)
        coef = sc.one
        base = Poly.const(sc.one, sc)
        qk = sc.one  # q^{k-1}
        qn = q ** n
        for k in range(1, n + 1):
            coef = coef * (sc.one - qk / qn) * (sc.one - b4 * qn * qk / q) * q
            coef = coef / ((sc.one - a1 * a2 * qk) * (sc.one - a1 * a3 * qk)
                           * (sc.one - a1 * a4 * qk) * (sc.one - qk * q))
            base = base * Poly([sc.one + a1 * a1 * qk * qk, sc.from_int(-2) * a1 * qk], sc)
            acc = acc + base.scale(coef)
            qk = qk * q
        pref = q_pochhammer(a1 * a2, q, n) * q_pochhammer(a1 * a3, q, n) * q_pochhammer(a1 * a4, q, n)
        pref = pref / (a1 ** n)
        return acc.scale(pref).trim()

    def h_ratio_base(self, n, m, lam):
        return self._h_over_h0(n, lam) / self._h_over_h0(m, lam)

    def _h_over_h0(self, n, lam):
        a = lam.a
        sc = lam.scalars
        q = lam.q
        b4 = lam.b4()
        num = q_pochhammer(b4 * q ** (n - 1), q, n) * q_pochhammer(q, q, n)
        for i in range(4):
            for j in range(i + 1, 4):
                num = num * q_pochhammer(a[i] * a[j], q, n)
        return num / q_pochhammer(b4, q, 2 * n)

    def h_abs(self, n, lam):
        a = [mp.mpc(x) for x in lam.a]
        q = mp.mpc(lam.q)
        b4 = a[0] * a[1] * a[2] * a[3]
        num = q_pochhammer(b4 * q ** (n - 1), q, n) * mp.qp(b4 * q ** (2 * n), q)
        den = mp.qp(q ** (n + 1), q)
        for i in range(4):
            for j in range(i + 1, 4):
                den *= mp.qp(a[i] * a[j] * q ** n, q)
        return 2 * mp.pi * num / den

    def phi0_sq(self, x, lam):
        a = [mp.mpc(v) for v in lam.a]
        q = mp.mpc(lam.q)
        z = mp.exp(1j * mp.mpc(x))
        num = _qp_inf(z * z, q) * _qp_inf(1 / (z * z), q)
        den = mp.mpf(1)
        for ai in a:
            den *= _qp_inf(ai * z, q) * _qp_inf(ai / z, q)
        return num / den


FAMILIES = {"ch": ContinuousHahn(), "w": Wilson(), "aw": AskeyWilson()}


# -- parameter construction -----------------------------------------------------


def params_from_values(family: str, a_vals, q_val=None, mode: str = "physical",
                       backend: str = "float", bits: int = 256) -> ParamSet:
    """Build a ParamSet from (re, im) pairs of numbers/decimal strings."""
    if backend == "exact":
        qf = fraction_from_decimal(str(q_val)) if family == "aw" else None
        sc = ExactScalars(qf)
        a = tuple(sc.from_fraction(fraction_from_decimal(str(re)), fraction_from_decimal(str(im)))
                  for re, im in a_vals)
        q = sc.from_fraction(qf) if qf is not None else None
        return ParamSet(family, a, q, mode, sc)
    sc = MPScalars(bits)
    a = tuple(sc.from_fraction(fraction_from_decimal(str(re)), fraction_from_decimal(str(im)))
              if isinstance(re, str) else mp.mpc(re, im)
              for re, im in a_vals)
    q = None
    if family == "aw":
        q = sc.from_fraction(fraction_from_decimal(str(q_val))) if isinstance(q_val, str) else mp.mpc(q_val)
    return ParamSet(family, a, q, mode, sc)


def validate_physical(lam: ParamSet, tol=1e-25) -> bool:
    """Check the physical-mode conjugation constraints."""
    a = [mp.mpc(lam.scalars.to_mpc(x)) for x in lam.a]
    if lam.family == "ch":
        return (abs(a[2] - mp.conj(a[0])) <= tol * (1 + abs(a[0]))
                and abs(a[3] - mp.conj(a[1])) <= tol * (1 + abs(a[1]))
                and all(mp.re(x) > 0 for x in a))
    conj_set = sorted((mp.conj(x) for x in a), key=lambda z: (mp.re(z), mp.im(z)))
    orig = sorted(a, key=lambda z: (mp.re(z), mp.im(z)))
    ok = all(abs(u - v) <= tol * (1 + abs(u)) for u, v in zip(conj_set, orig))
    if lam.family == "aw":
        q = mp.mpc(lam.scalars.to_mpc(lam.q))
        ok = ok and abs(mp.im(q)) <= tol and 0 < mp.re(q) < 1
    return ok


def draw_params(family: str, mode: str, seed: int, bits: int = 256, dmax: int = 3) -> ParamSet:
    """Deterministic random parameter draw with virtual-state margins."""
    rng = random.Random(f"{family}|{mode}|{seed}")
    sc = MPScalars(bits)

    def u(lo, hi):
        return lo + (hi - lo) * rng.random()

    if family == "ch":
        need = (dmax + 1) / 2 + 0.35
        if mode == "physical":
            r1, r2 = u(need, need + 1.0), u(need, need + 1.2)
            v1, v2 = u(0.15, 0.8), u(0.15, 0.9)
            a = (mp.mpc(r1, v1), mp.mpc(r2, v2), mp.mpc(r1, -v1), mp.mpc(r2, -v2))
        else:
            a = tuple(mp.mpc(u(need, need + 1.2), u(-0.9, 0.9)) for _ in range(4))
        return ParamSet("ch", a, None, mode, sc)
    if family == "w":
        need = (dmax + 1) / 2 + 0.3
        if mode == "physical":
            a1, a2 = u(need, need + 0.9), u(need, need + 1.1)
            r, v = u(need, need + 0.8), u(0.2, 0.9)
            a = (mp.mpc(a1), mp.mpc(a2), mp.mpc(r, v), mp.mpc(r, -v))
        else:
            a = tuple(mp.mpc(u(need, need + 1.0), u(-0.8, 0.8)) for _ in range(4))
        return ParamSet("w", a, None, mode, sc)
    if family == "aw":
        q = u(0.32, 0.52)
        if mode == "physical":
            # virtual-state margins in q-space: a1 a2 < q^{v+1} and a3 a4 < q^{v+1}
            # for v <= dmax, i.e. exponents mu with mu_1 + mu_2 > dmax + 1
            need = (dmax + 1) / 2 + 0.2
            m1, m2 = u(need, need + 0.6), u(need, need + 0.7)
            m3, th = u(need, need + 0.6), u(0.35, 1.2)
            a = (mp.mpf(q) ** m1, mp.mpf(q) ** m2,
                 mp.mpf(q) ** m3 * mp.exp(1j * th), mp.mpf(q) ** m3 * mp.exp(-1j * th))
            return ParamSet("aw", a, mp.mpc(q), mode, sc)
        a = tuple(mp.mpc(u(0.55, 0.95), u(-0.25, 0.25)) for _ in range(4))
        return ParamSet("aw", a, mp.mpc(q, u(-0.04, 0.04)), mode, sc)
    raise ValueError(f"unknown family {family!r}")


def virtual_poly(lam: ParamSet, vtype: str, v: int):
    """Virtual-state polynomial xi_v: the base polynomial at twisted parameters."""
    fam = lam.fam
    return fam.base_poly(v, lam, a=fam.twist_a(vtype, lam))


def virtual_energy(lam: ParamSet, vtype: str, v: int):
    """Closed-form virtual-state energy (negative in admissible physical mode)."""
    return lam.fam.etilde(vtype, v, lam)


def eval_eta_shifted(p, x, t, lam: ParamSet):
    """p(eta(x + i t gamma)) for an eta polynomial p (float path)."""
    fam = lam.fam
    u = mp.exp(1j * mp.mpc(x)) if fam.var_kind == "z" else mp.mpc(x)
    u = fam.shift_arg(u, Fraction(t), lam)
    return p(fam.eta_at(u, lam))


# -- twist calibration: alpha fitted from the potential identities --------------


def calibrate_twist(lam: ParamSet, vtype: str, samples: int = 6):
    """Fit (alpha, Etilde_0) for the family's parameter twist and gate them.

    Identity (A): alpha^2 V'*(x) V'(x+i gamma) = V*(x) V(x+i gamma)
    Identity (B): V + V* = alpha (V' + V'*) - Etilde_0
    Gate: Etilde_v = alpha E_v(t(lam)) + Etilde_0 matches the closed forms for
    v <= 6.  Returns (alpha, Etilde_0, max_rel_err).
    """
    fam = lam.fam
    ta = fam.twist_a(vtype, lam)
    tlam = lam.with_a(ta)
    us = fam.sample_args(samples + 2, lam, f"twist|{vtype}")
    alpha2 = None
    for u in us:
        up = fam.shift_arg(u, 1, lam)
        lhs = fam.v_star_at(lam.a, u, lam) * fam.v_at(lam.a, up, lam)
        rhs = fam.v_star_at(ta, u, lam) * fam.v_at(ta, up, lam)
        val = lhs / rhs
        if alpha2 is None:
            alpha2 = val
        elif abs(val - alpha2) > mp.mpf(2) ** (-mp.mp.prec // 2) * (1 + abs(alpha2)):
            raise CalibrationFailure(f"{lam.family} type {vtype}: alpha^2 not constant")
    alpha = mp.sqrt(alpha2)
    best = None
    for cand in (alpha, -alpha):
        e0s = []
        ok = True
        for u in us:
            vv = fam.v_at(lam.a, u, lam) + fam.v_star_at(lam.a, u, lam)
            vvt = fam.v_at(ta, u, lam) + fam.v_star_at(ta, u, lam)
            e0s.append(cand * vvt - vv)
        for e in e0s[1:]:
            if abs(e - e0s[0]) > mp.mpf(2) ** (-mp.mp.prec // 2) * (1 + abs(e0s[0])):
                ok = False
                break
        if ok:
            best = (cand, e0s[0])
            break
    if best is None:
        raise CalibrationFailure(f"{lam.family} type {vtype}: no consistent alpha sign")
    alpha, e0 = best
    worst = mp.mpf(0)
    for v in range(7):
        pred = alpha * mp.mpc(fam.energy(v, tlam)) + e0
        ref = mp.mpc(fam.etilde(vtype, v, lam))
        worst = max(worst, abs(pred - ref) / max(1, abs(ref)))
    if worst > mp.mpf(2) ** (-mp.mp.prec // 2):
        raise CalibrationFailure(
            f"{lam.family} type {vtype}: fitted virtual energies disagree ({mp.nstr(worst, 5)})")
    closed = mp.mpc(fam.alpha(vtype, lam))
    if abs(alpha - closed) > mp.mpf(2) ** (-mp.mp.prec // 2) * (1 + abs(closed)):
        raise CalibrationFailure(f"{lam.family} type {vtype}: alpha differs from closed form")
    return alpha, e0, worst
