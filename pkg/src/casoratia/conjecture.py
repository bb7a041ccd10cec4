"""Closed-form evaluation of the conjectured normalization constants k_a.

Case (0) uses the norm ratios h_{D,n}/h_{D,N}; cases (1)/(2) the derived index
sets that lower one degree within a type; case (3) the sets that delete one
degree of each type.  Case (3) crosses type-count classes, so its prediction
carries the square of the mixed-identity constant C (the alpha-product
calibration) and one fitted count-pair constant zeta that is reported, cached
per parameter set, and must reconcile every other case-(3) entry.

One factor in the case-(1)/(2) closed forms admits two natural readings of
its index (the removed degree d_j versus the replacement epsilon_k); both are
evaluated and the resolved reading is recorded in every result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import mpmath as mp

from .families import ParamSet
from .miop import IndexSet, h_ratio, reference_index_set
from .numkernel import pochhammer as poch, q_pochhammer as qpoch


class FormulaSingular(RuntimeError):
    """A Pochhammer factor in the closed form hit a zero denominator."""


@dataclass
class ConjectureEntry:
    origin: str
    case: int
    predicted: mp.mpc
    measured: mp.mpc
    rel_err: mp.mpf


@dataclass
class ConjectureResult:
    entries: list
    max_rel_err: mp.mpf
    reading: str           # 'j' or 'eps' for the ambiguous case-(1)/(2) factor
    zeta: mp.mpc | None    # fitted count-pair constant (case 3 only)
    mixed_C: mp.mpc | None
    extras: dict = field(default_factory=dict)


class _View:
    """Family parameters with the primary/secondary type roles possibly swapped."""

    def __init__(self, lam: ParamSet, D: IndexSet, swap: bool):
        a = [mp.mpc(lam.scalars.to_mpc(x)) for x in lam.a]
        self.q = mp.mpc(lam.scalars.to_mpc(lam.q)) if lam.q is not None else None
        self.family = lam.family
        if not swap:
            self.a = a
            self.primary = list(D.d1)
            self.secondary = list(D.d2)
        elif lam.family == "ch":
            self.a = [a[1], a[0], a[3], a[2]]
            self.primary = list(D.d2)
            self.secondary = list(D.d1)
        else:
            self.a = [a[2], a[3], a[0], a[1]]
            self.primary = list(D.d2)
            self.secondary = list(D.d1)

    @property
    def bprime(self):
        a = self.a
        if self.family == "ch":
            return a[0] + a[2] - a[1] - a[3]
        if self.family == "w":
            return a[0] + a[1] - a[2] - a[3]
        return a[0] * a[1] / (a[2] * a[3])


def _guard(x):
    if abs(x) == 0:
        raise FormulaSingular("zero factor in conjecture closed form")
    return x


def _case0_const(lam: ParamSet, N: int):
    a = [mp.mpc(lam.scalars.to_mpc(x)) for x in lam.a]
    if lam.family in ("ch", "w"):
        b1 = sum(a)
        return 1 / _guard(2 * (b1 + 2 * N - 1))
    q = mp.mpc(lam.scalars.to_mpc(lam.q))
    b4 = a[0] * a[1] * a[2] * a[3]
    return q ** (N + 1) / _guard((1 - q ** 2) * (1 - b4 * q ** (2 * N - 1)))


def _case12_product(v: _View, d: int, eps: int, j: int, reading: str):
    """The case-(1) closed-form product (case (2) goes through the swapped view)."""
    delta = d - eps
    rstar = d if reading == "j" else eps
    a1, a2, a3, a4 = v.a
    if v.family == "ch":
        bp = v.bprime
        val = poch(mp.mpc(eps + 1), delta) / 2
        val /= _guard(poch(a1 + a3 - d - 1, delta) * poch(a2 + a4 + eps, delta))
        val /= _guard(poch(a1 - a2 - d, delta) * poch(a3 - a4 - d, delta))
        val *= poch(bp - rstar, delta) / _guard(-bp + 1 + 2 * eps)
        for i, di in enumerate(v.primary, start=1):
            if i == j:
                continue
            val *= mp.mpf(di - eps) / _guard(mp.mpf(di - d))
            val *= (-bp + di + eps + 1) / _guard(-bp + di + d + 1)
        for ei in v.secondary:
            val *= mp.mpf(ei + eps + 1) / (ei + d + 1)
            val *= (bp + ei - eps) / _guard(bp + ei - d)
        return val
    if v.family == "w":
        bp = v.bprime
        val = 1 / _guard(2 * poch(mp.mpc(eps + 1), delta))
        val /= _guard(poch(a1 + a2 - d - 1, delta) * poch(a3 + a4 + eps, delta))
        for l in (a1, a2):
            for m in (a3, a4):
                val /= _guard(poch(l - m - d, delta))
        val *= poch(bp - rstar, delta) / _guard(-bp + 1 + 2 * eps)
        for i, di in enumerate(v.primary, start=1):
            if i == j:
                continue
            val *= mp.mpf(di - eps) / _guard(mp.mpf(di - d))
            val *= (-bp + di + eps + 1) / _guard(-bp + di + d + 1)
        for ei in v.secondary:
            val *= mp.mpf(ei + eps + 1) / (ei + d + 1)
            val *= (bp + ei - eps) / _guard(bp + ei - d)
        return val
    q = v.q
    bp = v.bprime
    A, B = a1 * a2, a3 * a4
    val = A ** (2 * delta - 1) * B ** (-delta) / _guard((1 - q ** 2) * qpoch(q ** (eps + 1), q, delta))
    val *= q ** (2 - 2 * d * (d + 1) + eps * (2 * eps + 3))
    val /= _guard(qpoch(A * q ** (-d - 1), q, delta) * qpoch(B * q ** eps, q, delta))
    for l in (a1, a2):
        for m in (a3, a4):
            val /= _guard(qpoch(l / m * q ** (-d), q, delta))
    val *= qpoch(bp * q ** (-rstar), q, delta) / _guard(1 - q ** (1 + 2 * eps) / bp)
    for i, di in enumerate(v.primary, start=1):
        if i == j:
            continue
        val *= (1 - q ** (di - eps)) / _guard(1 - q ** (di - d))
        val *= (1 - q ** (di + eps + 1) / bp) / _guard(1 - q ** (di + d + 1) / bp)
    for ei in v.secondary:
        val *= (1 - q ** (ei + eps + 1)) / (1 - q ** (ei + d + 1))
        val *= (1 - bp * q ** (ei - eps)) / _guard(1 - bp * q ** (ei - d))
    return val


def _case3_product(lam: ParamSet, D: IndexSet, d: int, e: int, j: int, k: int):
    a = [mp.mpc(lam.scalars.to_mpc(x)) for x in lam.a]
    a1, a2, a3, a4 = a
    d1, d2 = list(D.d1), list(D.d2)
    sgn = mp.mpf(-1) ** (d + e + 1)
    if lam.family == "ch":
        bp = a1 + a3 - a2 - a4
        val = sgn * mp.factorial(d) * mp.factorial(e) / (2 * (d + e + 1))
        val /= _guard(poch(a1 + a3 - d - 1, d + e + 1) * poch(a2 + a4 - e - 1, d + e + 1))
        val *= poch(-bp - e, d) * poch(bp - d, e)
        val /= _guard(poch(a1 - a2 - d, d + e + 1) * poch(a3 - a4 - d, d + e + 1))
        for i, di in enumerate(d1, start=1):
            if i == j:
                continue
            val /= _guard(mp.mpf(di - d) * (di + e + 1) * (-bp + di + d + 1) * (-bp + di - e))
        for i, ei in enumerate(d2, start=1):
            if i == k:
                continue
            val /= _guard(mp.mpf(ei - e) * (ei + d + 1) * (bp + ei + e + 1) * (bp + ei - d))
        return val
    if lam.family == "w":
        bp = a1 + a2 - a3 - a4
        val = sgn / (2 * (d + e + 1) * mp.factorial(d) * mp.factorial(e))
        val /= _guard(poch(a1 + a2 - d - 1, d + e + 1) * poch(a3 + a4 - e - 1, d + e + 1))
        val *= poch(-bp - e, d) * poch(bp - d, e)
        for l in (a1, a2):
            for m in (a3, a4):
                val /= _guard(poch(l - m - d, d + e + 1))
        for i, di in enumerate(d1, start=1):
            if i == j:
                continue
            val /= _guard(mp.mpf(di - d) * (di + e + 1) * (-bp + di + d + 1) * (-bp + di - e))
        for i, ei in enumerate(d2, start=1):
            if i == k:
                continue
            val /= _guard(mp.mpf(ei - e) * (ei + d + 1) * (bp + ei + e + 1) * (bp + ei - d))
        return val
    q = mp.mpc(lam.scalars.to_mpc(lam.q))
    A, B = a1 * a2, a3 * a4
    bp = A / B
    val = sgn * A ** (3 * d + 2) * B ** (e - 2 * d)
    val /= _guard((1 - q ** 2) * (1 - q ** (d + e + 1)) * qpoch(q, q, d) * qpoch(q, q, e))
    val *= q ** mp.mpf(-(5 * d * d - 2 * d * e + e * e + 3 * d - e + 8) // 2)
    val /= _guard(qpoch(A * q ** (-d - 1), q, d + e + 1) * qpoch(B * q ** (-e - 1), q, d + e + 1))
    val *= qpoch(q ** (-e) / bp, q, d) * qpoch(bp * q ** (-d), q, e)
    for l in (a1, a2):
        for m in (a3, a4):
            val /= _guard(qpoch(l / m * q ** (-d), q, d + e + 1))
    for i, di in enumerate(d1, start=1):
        if i == j:
            continue
        val *= q ** (2 * (di - i - D.M2) - 1) / bp
        val /= _guard((1 - q ** (di - d)) * (1 - q ** (di + e + 1))
                      * (1 - q ** (di + d + 1) / bp) * (1 - q ** (di - e) / bp))
    for i, ei in enumerate(d2, start=1):
        if i == k:
            continue
        val *= bp * q ** (2 * (ei - i - D.M1) - 1)
        val /= _guard((1 - q ** (ei - e)) * (1 - q ** (ei + d + 1))
                      * (1 - bp * q ** (ei + e + 1)) * (1 - bp * q ** (ei - d)))
    return val


def predicted_k(lam: ParamSet, D: IndexSet, N: int, entry, *, reading: str = "j",
                mixed_C=None, zeta=None):
    """Closed-form k_a for one Pa-basis entry (zeta defaults to 1 for case 3)."""
    fam = lam.fam
    to = lam.scalars.to_mpc
    EN = mp.mpc(to(fam.energy(N, lam)))
    if entry.case == 0:
        hr = mp.mpc(to(h_ratio(lam, D, entry.n, N)))
        return hr * _case0_const(lam, N)
    if entry.case in (1, 2):
        ds = entry.derived
        d, eps = ds.removed[0], ds.added[0]
        vtype = "I" if entry.case == 1 else "II"
        ev_d = mp.mpc(to(fam.etilde(vtype, d, lam)))
        ev_e = mp.mpc(to(fam.etilde(vtype, eps, lam)))
        hr = (EN - ev_e) / _guard(EN - ev_d)
        v = _View(lam, D, swap=(entry.case == 2))
        return hr * _case12_product(v, d, eps, ds.j, reading)
    ds = entry.derived
    d, e = ds.removed
    ev_d = mp.mpc(to(fam.etilde("I", d, lam)))
    ev_e = mp.mpc(to(fam.etilde("II", e, lam)))
    if mixed_C is None:
        raise ValueError("case (3) prediction needs the calibrated mixed constant")
    hr = mp.mpc(mixed_C) ** 2 / _guard((EN - ev_d) * (EN - ev_e))
    base = hr * _case3_product(lam, D, d, e, ds.j, ds.k)
    return base * (mp.mpc(1) if zeta is None else mp.mpc(zeta))


_ZETA = {}


def zeta_constant(lam: ParamSet, counts, bits: int = 256):
    """Fitted count-pair constant for case (3), cached per parameter set.

    Fit once on the first case-(3) entry of the canonical instance of the
    class; every other case-(3) entry anywhere then genuinely tests the
    conjecture against the cached value.
    """
    key = (lam.digest(), counts, bits)
    if key in _ZETA:
        return _ZETA[key]
    from .dortho import verify_orthogonality
    from .identities import mixed_constant
    D = reference_index_set(counts)
    rep = verify_orthogonality(lam, D, 2, bits, check_pa=False)
    C = mixed_constant(lam, (counts[0] - 1, counts[1] - 1), bits)
    basis = rep.extras["basis"]
    for a, entry in enumerate(basis.entries):
        if entry.case == 3:
            raw = predicted_k(lam, D, 2, entry, mixed_C=C)
            _ZETA[key] = rep.k[a] / raw
            return _ZETA[key]
    raise RuntimeError("reference instance has no case-(3) entry")


def compare(lam: ParamSet, D: IndexSet, N: int, report, bits: int = 256) -> ConjectureResult:
    """Measured k_a from a verified OrthoReport against the closed forms."""
    from .identities import mixed_constant
    basis = report.extras["basis"]
    C = None
    zeta = None
    if D.M1 >= 1 and D.M2 >= 1:
        C = mixed_constant(lam, (D.M1 - 1, D.M2 - 1), bits)
        zeta = zeta_constant(lam, D.counts, bits)
    best = None
    has_amb = any(e.case in (1, 2) for e in basis.entries)
    for reading in (("j", "eps") if has_amb else ("j",)):
        entries = []
        worst = mp.mpf(0)
        try:
            for a, entry in enumerate(basis.entries):
                pred = predicted_k(lam, D, N, entry, reading=reading,
                                   mixed_C=C, zeta=zeta)
                meas = report.k[a]
                rel = abs(meas - pred) / max(abs(pred), abs(meas))
                worst = max(worst, rel)
                entries.append(ConjectureEntry(entry.origin, entry.case, pred, meas, rel))
        except FormulaSingular:
            continue
        if best is None or worst < best[1]:
            best = (entries, worst, reading)
    if best is None:
        raise FormulaSingular("all readings hit singular closed forms")
    entries, worst, reading = best
    return ConjectureResult(entries=entries, max_rel_err=worst, reading=reading,
                            zeta=zeta, mixed_C=C)
