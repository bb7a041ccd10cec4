"""Discrete orthogonality: derived index sets, Pa basis, F weights, M matrices.

Implements the zero-grid orthogonality pipeline: the eigenbasis polynomials
P_a built from the lowered/derived index sets, the weight reciprocals F_j at
the zeros of P_{D,N} (computed by both closed forms and cross-checked), the
matrices M-tilde and its symmetrized M, and the Gram matrix whose off-diagonal
decay is the discrete orthogonality relation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp

from .families import ParamSet
from .miop import (IndexSet, MiopBundle, apply_htilde, build_miop, get_builder)
from .numkernel import TolerancePolicy
from .polycore import Poly
from .zeros import ZeroSet, find_zeros

HALF_FRAC = Fraction(1, 2)


class DegenerateSpectrum(RuntimeError):
    """Two P_a energies coincide (special parameters); perturb and retry."""


class WeightSingular(RuntimeError):
    """Some F_j vanished, voiding the weight 1/F."""


class DenominatorCollision(RuntimeError):
    """eta(x_j +- i gamma) collided with another zero eta_k."""


@dataclass
class DerivedSet:
    case: int             # 1, 2 or 3
    j: int                # 1-based position within the type list
    k: int                # 1-based position (epsilon index or type-II position)
    removed: tuple        # degrees removed from D
    added: tuple          # degrees added
    D: IndexSet


def derived_index_sets(D: IndexSet):
    """The index sets D'_{1,jk}, D'_{2,jk}, D'_{3,jk} with their bookkeeping."""
    out1, out2, out3 = [], [], []
    d1, d2 = list(D.d1), list(D.d2)
    if d1:
        e_full = [e for e in range(d1[-1] + 1) if e not in d1]
        for j, dj in enumerate(d1, start=1):
            ejs = [e for e in e_full if e < dj]
            for k, eps in enumerate(ejs, start=1):
                nd1 = sorted([x for x in d1 if x != dj] + [eps])
                out1.append(DerivedSet(1, j, k, (dj,), (eps,),
                                       IndexSet.make([(x, "I") for x in nd1]
                                                     + [(x, "II") for x in d2])))
    if d2:
        e_full = [e for e in range(d2[-1] + 1) if e not in d2]
        for j, dj in enumerate(d2, start=1):
            ejs = [e for e in e_full if e < dj]
            for k, eps in enumerate(ejs, start=1):
                nd2 = sorted([x for x in d2 if x != dj] + [eps])
                out2.append(DerivedSet(2, j, k, (dj,), (eps,),
                                       IndexSet.make([(x, "I") for x in d1]
                                                     + [(x, "II") for x in nd2])))
    for j, dj in enumerate(d1, start=1):
        for k, dk in enumerate(d2, start=1):
            out3.append(DerivedSet(3, j, k, (dj, dk), (),
                                   IndexSet.make([(x, "I") for x in d1 if x != dj]
                                                 + [(x, "II") for x in d2 if x != dk])))
    total = len(out1) + len(out2) + len(out3)
    if total != D.ell:
        raise AssertionError(f"derived-set count {total} != ell_D {D.ell}")
    return out1, out2, out3


@dataclass
class PaEntry:
    origin: str
    case: int
    poly: Poly
    energy: object
    n: int | None = None
    derived: DerivedSet | None = None


@dataclass
class PaBasis:
    entries: list

    def __len__(self):
        return len(self.entries)


def build_pa_basis(lam: ParamSet, D: IndexSet, N: int, bits: int = 256) -> PaBasis:
    """The N + ell_D polynomials P_a with their energies E^P_a (cases 0-3)."""
    fam = lam.fam
    b = get_builder(lam, bits)
    EN = fam.energy(N, lam)
    entries = []
    for n in range(N):
        entries.append(PaEntry(f"case0(n={n})", 0, b.P(D, n), fam.energy(n, lam), n=n))
    out1, out2, out3 = derived_index_sets(D)
    for ds in out1:
        e = fam.etilde("I", ds.removed[0], lam) + fam.etilde("I", ds.added[0], lam) - EN
        entries.append(PaEntry(f"case1(j={ds.j},k={ds.k})", 1, b.P(ds.D, N), e, derived=ds))
    for ds in out2:
        e = fam.etilde("II", ds.removed[0], lam) + fam.etilde("II", ds.added[0], lam) - EN
        entries.append(PaEntry(f"case2(j={ds.j},k={ds.k})", 2, b.P(ds.D, N), e, derived=ds))
    for ds in out3:
        e = fam.etilde("I", ds.removed[0], lam) + fam.etilde("II", ds.removed[1], lam) - EN
        entries.append(PaEntry(f"case3(j={ds.j},k={ds.k})", 3, b.P(ds.D, N), e, derived=ds))
    if len(entries) != N + D.ell:
        raise AssertionError("Pa basis count differs from N + ell_D")
    tilde_N = N + D.ell
    for e in entries:
        if e.poly.degree >= tilde_N:
            raise AssertionError(f"deg P_a = {e.poly.degree} not below {tilde_N} ({e.origin})")
    evals = [mp.mpc(lam.scalars.to_mpc(e.energy)) for e in entries]
    scale = max(max(abs(v) for v in evals), mp.mpf(1))
    tol = mp.mpf(2) ** (-bits // 3)
    for i in range(len(evals)):
        for j in range(i + 1, len(evals)):
            if abs(evals[i] - evals[j]) <= tol * scale:
                raise DegenerateSpectrum(
                    f"E^P degenerate: {entries[i].origin} vs {entries[j].origin}")
    return PaBasis(entries)


def pa_difference_equation_defect(lam: ParamSet, D: IndexSet, bundle: MiopBundle,
                                  basis: PaBasis, zs: ZeroSet, bits: int = 256) -> mp.mpf:
    """Worst residual of (H~_D P_a)(x_j) = E^P_a P_a(eta_j) over the basis and zeros."""
    b = get_builder(lam, bits)
    fam = lam.fam
    worst = mp.mpf(0)
    for entry in basis.entries:
        for xj in zs.x:
            u = _arg_of_x(fam, xj, lam)
            h = apply_htilde(b, bundle.lam_D, bundle.xi, bundle.xi_shift, entry.poly, u)
            ref = entry.energy * entry.poly(fam.eta_at(u, lam))
            h, ref = mp.mpc(h), mp.mpc(ref)
            worst = max(worst, abs(h - ref) / (abs(h) + abs(ref) + 1))
    return worst


def _arg_of_x(fam, x, lam):
    if fam.var_kind == "z":
        return mp.exp(1j * mp.mpc(x))
    return mp.mpc(x)


def compute_F(lam: ParamSet, D: IndexSet, bundle: MiopBundle, zs: ZeroSet,
              bits: int = 256):
    """Weights F_j by the symmetric two-term form, cross-checked by the one-term form."""
    fam = lam.fam
    dP = bundle.P[_top_n(bundle)].derivative()
    tol = mp.mpf(2) ** (-bits // 2 + 16)
    F = []
    cross_worst = mp.mpf(0)
    for xj in zs.x:
        u = _arg_of_x(fam, xj, lam)
        um, up = fam.shift_arg(u, -1, lam), fam.shift_arg(u, 1, lam)
        umh, uph = fam.shift_arg(u, -HALF_FRAC, lam), fam.shift_arg(u, HALF_FRAC, lam)
        eta_m, eta_p = fam.eta_at(um, lam), fam.eta_at(up, lam)
        xi_m, xi_p = bundle.xi(fam.eta_at(umh, lam)), bundle.xi(fam.eta_at(uph, lam))
        if abs(mp.mpc(xi_m)) == 0 or abs(mp.mpc(xi_p)) == 0:
            raise WeightSingular("Xi_D vanished at a zero's half-shifted points")
        v = fam.v_at(bundle.lam_D.a, u, lam)
        vs = fam.v_star_at(bundle.lam_D.a, u, lam)
        dpj = dP(fam.eta_at(u, lam))
        pN = bundle.P[_top_n(bundle)]
        two_term = -(eta_m * v * (xi_p / xi_m) * pN(eta_m)
                     + eta_p * vs * (xi_m / xi_p) * pN(eta_p)) / dpj
        one_term = (eta_p - eta_m) / dpj * v * (xi_p / xi_m) * pN(eta_m)
        fj, fj2 = mp.mpc(two_term), mp.mpc(one_term)
        rel = abs(fj - fj2) / max(abs(fj), abs(fj2), mp.mpf("1e-300"))
        cross_worst = max(cross_worst, rel)
        if rel > tol:
            raise WeightSingular(
                f"F_j dual-form disagreement {mp.nstr(rel, 5)} at zero {mp.nstr(mp.mpc(xj), 8)}")
        F.append(two_term)
    scale = max(abs(mp.mpc(f)) for f in F)
    for f in F:
        if abs(mp.mpc(f)) <= scale * mp.mpf(2) ** (-bits // 2):
            raise WeightSingular("some F_j is numerically zero")
    return F, cross_worst


def build_M(lam: ParamSet, D: IndexSet, bundle: MiopBundle, zs: ZeroSet, F,
            bits: int = 256, cross_check_diag: bool = True):
    """M-tilde per the closed forms, M = G^-1 M-tilde G with g_j = sqrt(F_j)."""
    fam = lam.fam
    n_t = len(zs.eta)
    etas = zs.eta
    tol = mp.mpf(2) ** (-bits + 40)
    Mt = [[mp.mpc(0)] * n_t for _ in range(n_t)]
    eta_pm = []
    for xj in zs.x:
        u = _arg_of_x(fam, xj, lam)
        um, up = fam.shift_arg(u, -1, lam), fam.shift_arg(u, 1, lam)
        eta_pm.append((mp.mpc(fam.eta_at(um, lam)), mp.mpc(fam.eta_at(up, lam))))
    scale_eta = max(max(abs(e) for e in etas), mp.mpf(1))
    for j in range(n_t):
        em, ep = eta_pm[j]
        for k in range(n_t):
            if k == j:
                continue
            d1, d2 = em - etas[k], ep - etas[k]
            if abs(d1) < tol * scale_eta or abs(d2) < tol * scale_eta:
                raise DenominatorCollision(
                    f"eta(x_{j} -+ i gamma) collides with eta_{k}")
            Mt[j][k] = mp.mpc(F[j]) / (d1 * d2)
    for j in range(n_t):
        em, ep = eta_pm[j]
        xj = zs.x[j]
        u = _arg_of_x(fam, xj, lam)
        umh, uph = fam.shift_arg(u, -HALF_FRAC, lam), fam.shift_arg(u, HALF_FRAC, lam)
        xi_m = mp.mpc(bundle.xi(fam.eta_at(umh, lam)))
        xi_p = mp.mpc(bundle.xi(fam.eta_at(uph, lam)))
        um, up = fam.shift_arg(u, -1, lam), fam.shift_arg(u, 1, lam)
        xid_0 = mp.mpc(bundle.xi_shift(fam.eta_at(u, lam)))
        xid_m = mp.mpc(bundle.xi_shift(fam.eta_at(um, lam)))
        xid_p = mp.mpc(bundle.xi_shift(fam.eta_at(up, lam)))
        v = mp.mpc(fam.v_at(bundle.lam_D.a, u, lam))
        vs = mp.mpc(fam.v_star_at(bundle.lam_D.a, u, lam))
        Mt[j][j] = (mp.mpc(F[j]) / ((em - etas[j]) * (ep - etas[j]))
                    - v * (xi_p / xi_m) * (xid_m / xid_0)
                    - vs * (xi_m / xi_p) * (xid_p / xid_0))
    diag_defect = mp.mpf(0)
    if cross_check_diag:
        j = _deterministic_index(lam, D, n_t)
        diag_defect = _diag_from_definition_defect(lam, bundle, zs, j, Mt[j][j], bits)
    g = [mp.sqrt(mp.mpc(f)) for f in F]
    M = [[Mt[j][k] * g[k] / g[j] for k in range(n_t)] for j in range(n_t)]
    mmax = max(max(abs(M[j][k]) for k in range(n_t)) for j in range(n_t))
    sym = mp.mpf(0)
    for j in range(n_t):
        for k in range(j + 1, n_t):
            sym = max(sym, abs(M[j][k] - M[k][j]))
    return Mt, M, sym / mmax, diag_defect


def _deterministic_index(lam, D, n) -> int:
    import hashlib
    h = hashlib.sha256((lam.digest() + D.key()).encode()).digest()
    return h[0] % n


def _diag_from_definition_defect(lam, bundle, zs, j, closed_value, bits) -> mp.mpf:
    """M~_jj from the definition: H~_D applied to the Lagrange numerator at x_j."""
    b = get_builder(lam, bits)
    fam = lam.fam
    sc = lam.scalars
    lag = Poly([sc.one], sc)
    for l, eta_l in enumerate(zs.eta):
        if l != j:
            lag = lag * Poly([-eta_l, sc.one], sc)
    denom = lag(zs.eta[j])
    u = _arg_of_x(fam, zs.x[j], lam)
    val = mp.mpc(apply_htilde(b, bundle.lam_D, bundle.xi, bundle.xi_shift, lag, u)) / mp.mpc(denom)
    return abs(val - closed_value) / max(abs(closed_value), mp.mpf(1))


def _top_n(bundle: MiopBundle) -> int:
    return max(bundle.P.keys())


@dataclass
class OrthoReport:
    family: str
    D: IndexSet
    N: int
    precision_bits: int
    F: list
    symmetry_defect: mp.mpf
    diag_defect: mp.mpf
    f_cross_defect: mp.mpf
    gram: list
    max_offdiag_rel: mp.mpf
    k: list
    origins: list
    eigen_residuals: list
    pa_energy: list
    extras: dict = field(default_factory=dict)


def verify_orthogonality(lam: ParamSet, D: IndexSet, N: int, bits: int = 256,
                         check_pa: bool = True, n_max: int | None = None) -> OrthoReport:
    """Run the full discrete-orthogonality pipeline at the given precision."""
    if lam.scalars.name != "float":
        raise ValueError("the orthogonality pipeline requires the float backend")
    fam = lam.fam
    bundle = build_miop(lam, D, max(N, n_max if n_max is not None else N), bits)
    if bundle.P[N].degree != N + D.ell:
        raise AssertionError("degree law violated for P_{D,N}")
    pol = TolerancePolicy(bits)
    zs = find_zeros(bundle.P[N], pol, fam)
    basis = build_pa_basis(lam, D, N, bits)
    F, f_cross = compute_F(lam, D, _sliced(bundle, N), zs, bits)
    Mt, M, sym, diagd = build_M(lam, D, _sliced(bundle, N), zs, F, bits)
    n_t = len(zs.eta)
    dP = bundle.P[N].derivative()
    dpj = [mp.mpc(dP(e)) for e in zs.eta]
    vals = [[mp.mpc(e.poly(zs.eta[j])) for j in range(n_t)] for e in basis.entries]
    eigres = []
    cP = mp.mpc(lam.scalars.to_mpc(bundle.P[N].lead()))
    for a, entry in enumerate(basis.entries):
        vt = [cP * vals[a][j] / dpj[j] for j in range(n_t)]
        ev = mp.mpc(lam.scalars.to_mpc(entry.energy))
        worst = mp.mpf(0)
        scale = max(max(abs(x) for x in vt), mp.mpf("1e-300")) * (abs(ev) + 1)
        for j in range(n_t):
            s = sum(Mt[j][k] * vt[k] for k in range(n_t))
            worst = max(worst, abs(s - ev * vt[j]) / scale)
        eigres.append(worst)
    gram = [[mp.mpc(0)] * len(basis.entries) for _ in basis.entries]
    for a in range(len(basis.entries)):
        for b_ in range(a, len(basis.entries)):
            s = mp.mpc(0)
            for j in range(n_t):
                s += (1 / mp.mpc(F[j])) * vals[a][j] * vals[b_][j] / (dpj[j] ** 2)
            gram[a][b_] = s
            gram[b_][a] = s
    offd = mp.mpf(0)
    for a in range(len(basis.entries)):
        for b_ in range(a + 1, len(basis.entries)):
            denom = mp.sqrt(abs(gram[a][a]) * abs(gram[b_][b_]))
            offd = max(offd, abs(gram[a][b_]) / denom)
    rep = OrthoReport(
        family=lam.family, D=D, N=N, precision_bits=bits,
        F=[mp.mpc(f) for f in F], symmetry_defect=sym, diag_defect=diagd,
        f_cross_defect=f_cross, gram=gram, max_offdiag_rel=offd,
        k=[gram[a][a] for a in range(len(basis.entries))],
        origins=[e.origin for e in basis.entries],
        eigen_residuals=eigres,
        pa_energy=[mp.mpc(lam.scalars.to_mpc(e.energy)) for e in basis.entries],
    )
    rep.extras["zeros"] = zs
    rep.extras["bundle"] = bundle
    rep.extras["basis"] = basis
    rep.extras["Mtilde"] = Mt
    rep.extras["M"] = M
    if check_pa:
        rep.extras["pa_defect"] = pa_difference_equation_defect(lam, D, bundle, basis, zs, bits)
    return rep


def _sliced(bundle: MiopBundle, N: int) -> MiopBundle:
    if _top_n(bundle) == N:
        return bundle
    return MiopBundle(bundle.lam, bundle.D, N, bundle.xi, bundle.xi_shift,
                      {n: p for n, p in bundle.P.items() if n <= N},
                      bundle.lam_D, bundle.gates)


def naive_weight_demo(lam: ParamSet, D: IndexSet, N: int, bits: int = 256) -> mp.mpf:
    """Gram off-diagonal with the naive weight P'_{D,N}/P_{D,N-1} (failure witness)."""
    bundle = build_miop(lam, D, N, bits)
    pol = TolerancePolicy(bits)
    zs = find_zeros(bundle.P[N], pol, lam.fam)
    dP = bundle.P[N].derivative()
    w = []
    for e in zs.eta:
        pm1 = mp.mpc(bundle.P[N - 1](e))
        w.append(mp.mpc(dP(e)) / pm1)
    vals = [[mp.mpc(bundle.P[n](e)) for e in zs.eta] for n in range(N)]
    dpj = [mp.mpc(dP(e)) for e in zs.eta]
    gram = [[sum(w[j] * vals[a][j] * vals[b][j] / dpj[j] ** 2 for j in range(len(w)))
             for b in range(N)] for a in range(N)]
    offd = mp.mpf(0)
    for a in range(N):
        for b in range(a + 1, N):
            offd = max(offd, abs(gram[a][b]) / mp.sqrt(abs(gram[a][a]) * abs(gram[b][b])))
    return offd
