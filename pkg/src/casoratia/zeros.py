"""High-precision location of all zeros of an eta polynomial.

Seeds come from a double-precision companion-matrix eigensolve (numpy), are
refined by Aberth-Ehrlich simultaneous iteration at target precision and
polished with Newton steps.  Simplicity is certified through the minimum pair
distance; a failed certificate escalates the precision once before raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from .numkernel import TolerancePolicy, workbits
from .polycore import Poly


class MultipleRootSuspected(RuntimeError):
    """Simplicity certificate failed even after precision escalation."""


@dataclass
class ZeroSet:
    """Certified simple zeros eta_j with recovered strip representatives x_j."""

    eta: list
    x: list = field(default_factory=list)
    min_pair_distance: mp.mpf = mp.mpf(0)
    min_deriv_magnitude: mp.mpf = mp.mpf(0)
    residual_bound: mp.mpf = mp.mpf(0)
    precision_bits: int = 0


def _seed_roots(coeffs):
    """Double-precision companion-matrix seeds (highest degree first for numpy)."""
    mags = [abs(c) for c in coeffs]
    m = max(mags)
    try:
        arr = np.array([complex(c / m) for c in reversed(coeffs)], dtype=complex)
        if not np.all(np.isfinite(arr)):
            raise OverflowError
        rts = np.roots(arr)
        return [mp.mpc(r) for r in rts]
    except (OverflowError, ValueError, np.linalg.LinAlgError):
        return [mp.mpc(r) for r in mp.polyroots([mp.mpc(c) for c in reversed(coeffs)],
                                                maxsteps=200, extraprec=120)]


def _aberth(coeffs, seeds, bits):
    """Aberth-Ehrlich simultaneous refinement at the working precision."""
    n = len(coeffs) - 1
    p = Poly(coeffs, _MP)
    dp = p.derivative()
    roots = [mp.mpc(r) + mp.mpc(0) for r in seeds]
    target = mp.mpf(2) ** (-bits + 24)
    norm = max(abs(c) for c in coeffs)
    for _ in range(220):
        moved = mp.mpf(0)
        new = list(roots)
        for i in range(n):
            z = roots[i]
            pz = p(z)
            dpz = dp(z)
            if dpz == 0:
                z = z + mp.mpf(2) ** (-bits // 3)
                pz, dpz = p(z), dp(z)
            w = pz / dpz
            s = mp.mpc(0)
            for j in range(n):
                if j != i:
                    d = z - roots[j]
                    if d == 0:
                        d = mp.mpf(2) ** (-bits)
                    s += 1 / d
            denom = 1 - w * s
            step = w / denom if denom != 0 else w
            new[i] = z - step
            moved = max(moved, abs(step))
        roots = new
        scale = max(max(abs(r) for r in roots), mp.mpf(1))
        if moved <= target * scale:
            break
    # Newton polish
    for _ in range(3):
        roots = [z - p(z) / dp(z) if dp(z) != 0 else z for z in roots]
    return roots, p, dp, norm


class _MPBackend:
    name = "float"
    zero = mp.mpc(0)
    one = mp.mpc(1)

    @staticmethod
    def is_zero(x):
        return x == 0

    @staticmethod
    def is_negligible(x, scale):
        return abs(x) <= mp.mpf(2) ** (-mp.mp.prec + 12) * abs(scale)

    @staticmethod
    def conj(x):
        return mp.conj(x)

    @staticmethod
    def to_mpc(x):
        return mp.mpc(x)

    @staticmethod
    def from_int(n):
        return mp.mpc(n)


_MP = _MPBackend()


def find_zeros(p: Poly, pol: TolerancePolicy, family=None, _escalated=False) -> ZeroSet:
    """All roots of the eta polynomial p, certified simple, sorted canonically."""
    bits = pol.precision_bits
    with workbits(bits + 32):
        coeffs = [mp.mpc(p.scalars.to_mpc(c)) for c in p.trim().coeffs]
        if len(coeffs) < 2:
            raise ValueError("need degree >= 1 to locate zeros")
        seeds = _seed_roots(coeffs)
        roots, poly, dpoly, norm = _aberth(coeffs, seeds, bits)
        roots.sort(key=lambda z: (mp.re(z), mp.im(z)))
        scale = max(max(abs(r) for r in roots), mp.mpf(1))
        minpair = mp.mpf("+inf")
        n = len(roots)
        for i in range(n):
            for j in range(i + 1, n):
                minpair = min(minpair, abs(roots[i] - roots[j]))
        threshold = mp.mpf(2) ** (-bits // 4) * scale
        if minpair < threshold:
            if _escalated:
                raise MultipleRootSuspected(
                    f"min pair distance {mp.nstr(minpair, 5)} below {mp.nstr(threshold, 5)}")
            return find_zeros(p, pol.escalate(), family, _escalated=True)
        minder = min(abs(dpoly(z)) for z in roots)
        resid = max(abs(poly(z)) for z in roots)
        zs = ZeroSet(
            eta=roots,
            min_pair_distance=minpair,
            min_deriv_magnitude=minder,
            residual_bound=resid / (norm * minder) if minder > 0 else mp.mpf("+inf"),
            precision_bits=bits,
        )
        if family is not None:
            zs.x = [family.recover_x(e) for e in roots]
        return zs


def recover_x(eta, fam):
    """Strip representative x with x1 <= Re x <= x2 (family branch rules)."""
    return fam.recover_x(eta)


def conjugation_closure_defect(zs: ZeroSet) -> mp.mpf:
    """Greedy multiset pairing defect of {eta_j*} against {eta_j}."""
    left = list(zs.eta)
    worst = mp.mpf(0)
    for e in zs.eta:
        tgt = mp.conj(e)
        best_i, best_d = None, mp.mpf("+inf")
        for i, cand in enumerate(left):
            d = abs(cand - tgt)
            if d < best_d:
                best_i, best_d = i, d
        worst = max(worst, best_d)
        left.pop(best_i)
    scale = max(max(abs(e) for e in zs.eta), mp.mpf(1))
    return worst / scale


def physical_interval_zeros(zs: ZeroSet, fam, lam, tol=None) -> list:
    """Real zeros strictly inside the family's physical eta interval, sorted."""
    lo, hi = fam.eta_physical_interval(lam)
    tol = tol if tol is not None else mp.mpf(2) ** (-zs.precision_bits // 3)
    out = []
    for e in zs.eta:
        if abs(mp.im(e)) <= tol * max(1, abs(e)) and lo < mp.re(e) < hi:
            out.append(mp.re(e))
    return sorted(out)


def interlace(a: list, b: list) -> bool:
    """True iff len(b) = len(a)+1 and a strictly interlaces b."""
    if len(b) != len(a) + 1:
        return False
    return all(b[i] < a[i] < b[i + 1] for i in range(len(a)))
