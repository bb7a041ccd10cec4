"""Construction of the denominator polynomials Xi_D and multi-indexed P_{D,n}.

Both arise as polynomial parts of Casoratians of virtual-state entries (plus
the base eigenpolynomial for P).  Working at sample points, the determinant

    detPoly(x) = i^{R(R-1)/2} det[ prod_{m<j} N_c(x_m) * p_col(eta(x_j)) ]_{jk}

carries a rational prefactor that depends only on the type counts
(M_I, M_II) and on whether the P column is present, never on the degrees d_j
or n.  Xi_D and P_{D,n} are therefore recovered by interpolating the ratio of
detPoly against a canonical reference instance of the same class; mixed
classes bootstrap the reference denominator polynomial from a two-instance
pairing solve.  Every build is gated: degree law, nonzero leading
coefficient, held-out sample residuals, the deformed eigenrelation and shape
invariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp

from .families import FAMILIES, ParamSet, CalibrationFailure, draw_params
from .numkernel import TolerancePolicy, workbits
from .polycore import Poly, ladder_points, lstsq_dense, solve_dense, det_dense

HALF = Fraction(1, 2)


class DegenerateIndexSet(RuntimeError):
    """Casoratian vanished or leading coefficient is numerically zero."""


class PrefactorResidue(RuntimeError):
    """Polynomial-part extraction failed its held-out residual gate."""


class PoleAtSample(RuntimeError):
    """A denominator polynomial vanished at the requested sample point."""


@dataclass(frozen=True)
class IndexSet:
    """Multi-index D: degrees and types of the virtual states, standard order."""

    entries: tuple

    @staticmethod
    def make(pairs) -> "IndexSet":
        ent = tuple(sorted(((int(d), str(t)) for d, t in pairs), key=lambda e: (e[1], e[0])))
        d1 = [d for d, t in ent if t == "I"]
        d2 = [d for d, t in ent if t == "II"]
        if len(set(d1)) != len(d1) or len(set(d2)) != len(d2):
            raise ValueError("degrees must be mutually distinct within each type")
        if any(d < 0 for d, _ in ent) or any(t not in ("I", "II") for _, t in ent):
            raise ValueError("entries must be (nonnegative degree, 'I'|'II')")
        return IndexSet(ent)

    @property
    def d1(self):
        return tuple(d for d, t in self.entries if t == "I")

    @property
    def d2(self):
        return tuple(d for d, t in self.entries if t == "II")

    @property
    def M(self):
        return len(self.entries)

    @property
    def M1(self):
        return len(self.d1)

    @property
    def M2(self):
        return len(self.d2)

    @property
    def counts(self):
        return (self.M1, self.M2)

    @property
    def ell(self):
        return ell_degree(self)

    def key(self) -> str:
        return ";".join(f"{d}{t}" for d, t in self.entries)

    def __str__(self):
        return "{" + ", ".join(f"{d}^{t}" for d, t in self.entries) + "}"


def ell_degree(D: IndexSet) -> int:
    """ell_D = sum d_j - M(M-1)/2 + 2 M_I M_II."""
    M = D.M
    return sum(d for d, _ in D.entries) - (M * (M - 1)) // 2 + 2 * D.M1 * D.M2


def reference_index_set(counts) -> IndexSet:
    m1, m2 = counts
    return IndexSet.make([(d, "I") for d in range(m1)] + [(d, "II") for d in range(m2)])


def _bumped_reference(counts) -> IndexSet:
    m1, m2 = counts
    if m1 > 0:
        pairs = [(d, "I") for d in range(m1 - 1)] + [(m1, "I")] + [(d, "II") for d in range(m2)]
    else:
        pairs = [(d, "II") for d in range(m2 - 1)] + [(m2, "II")]
    return IndexSet.make(pairs)


# -- determinant values ----------------------------------------------------------


class Builder:
    """Per-parameter-set construction engine with caches."""

    def __init__(self, lam: ParamSet, bits: int = 256):
        self.lam = lam
        self.fam = lam.fam
        self.sc = lam.scalars
        self.bits = bits
        self._polys = {}        # ('I'|'II'|'P', deg) -> eta Poly
        self._weights = {}      # class tag -> twisted a tuple, alpha
        self._xi_ref = {}       # counts -> Poly (monic Xi_{D0})
        self._xi_cache = {}     # IndexSet.key -> Poly
        self._p_cache = {}      # (IndexSet.key, n) -> Poly
        self._shift_builder = None

    # .. column polynomials ......................................................

    def col_poly(self, kind: str, deg: int) -> Poly:
        key = (kind, deg)
        if key not in self._polys:
            if kind == "P":
                self._polys[key] = self.fam.base_poly(deg, self.lam)
            else:
                ta = self.fam.twist_a(kind, self.lam)
                self._polys[key] = self.fam.base_poly(deg, self.lam, a=ta)
        return self._polys[key]

    def _class_weight_params(self, kind: str):
        if kind not in self._weights:
            if kind == "P":
                self._weights[kind] = (self.lam.a, self.sc.one)
            else:
                self._weights[kind] = (self.fam.twist_a(kind, self.lam),
                                       self.fam.alpha(kind, self.lam))
        return self._weights[kind]

    # .. determinant values ......................................................

    def det_values(self, cols, us):
        """detPoly values at the sample arguments us."""
        fam, lam, sc = self.fam, self.lam, self.sc
        R = len(cols)
        if R == 0:
            return [sc.one for _ in us]
        ts = ladder_points(R)
        kinds = sorted({k for k, _ in cols})
        polys = [self.col_poly(k, d) for k, d in cols]
        phase = sc.i ** ((R * (R - 1)) // 2)
        out = []
        for u in us:
            pts = [fam.shift_arg(u, t, lam) for t in ts]
            etas = [fam.eta_at(p, lam) for p in pts]
            cum = {}
            for k in kinds:
                a, alpha = self._class_weight_params(k)
                w = [sc.one]
                for m in range(R - 1):
                    w.append(w[-1] * (alpha * fam.v_numer_at(a, pts[m], lam)))
                cum[k] = w
            rows = []
            for j in range(R):
                rows.append([cum[k][j] * polys[c](etas[j]) for c, (k, _) in enumerate(cols)])
            out.append(det_dense(rows, sc) * phase)
        return out

    # .. sampling / fitting ......................................................

    def _samples(self, count: int, salt: str):
        if self.sc.name == "exact":
            return self.fam.exact_sample_args(count, self.lam)
        return self.fam.sample_args(count, self.lam, salt + "|" + self.lam.digest())

    def _fit_eta_poly(self, etas, vals, deg: int) -> Poly:
        sc = self.sc
        rows = []
        for e in etas:
            row, p = [], sc.one
            for _ in range(deg + 1):
                row.append(p)
                p = p * e
            rows.append(row)
        if sc.name == "exact":
            sol = solve_dense(rows[: deg + 1], vals[: deg + 1], sc)
        else:
            sol = lstsq_dense(rows, vals, sc)
        return Poly(sol, sc)

    def _tolerance(self) -> mp.mpf:
        return mp.mpf(2) ** (-self.bits + 48)

    def _extract(self, cols, deg: int, ref_cols, ref_poly: Poly, salt: str) -> Poly:
        """Interpolate the eta polynomial of detPoly(cols) against a class reference."""
        sc = self.sc
        need = deg + 1 + (4 if sc.name == "exact" else 10)
        us = self._samples(need + 6, salt)
        vals = self.det_values(cols, us)
        refs = self.det_values(ref_cols, us)
        etas = [self.fam.eta_at(u, self.lam) for u in us]
        keep = []
        if sc.name == "exact":
            for u, e, v, r in zip(us, etas, vals, refs):
                if not sc.is_zero(r) and not sc.is_zero(ref_poly(e)):
                    keep.append((e, v * ref_poly(e) / r))
        else:
            mags = sorted(abs(r) for r in refs)
            floor = mags[len(mags) // 2] * mp.mpf(2) ** (-self.bits // 2)
            for e, v, r in zip(etas, vals, refs):
                if abs(r) > floor:
                    keep.append((e, v * ref_poly(e) / r))
        if len(keep) < deg + 4:
            raise DegenerateIndexSet("too many degenerate samples in extraction")
        fit_n = deg + 1 if sc.name == "exact" else min(deg + 9, len(keep) - 2)
        fit_pts = keep[:fit_n]
        hold = keep[fit_n:]
        poly = self._fit_eta_poly([e for e, _ in fit_pts], [v for _, v in fit_pts], deg)
        scale = _poly_scale(poly, sc)
        if scale == 0:
            raise DegenerateIndexSet("zero Casoratian polynomial part")
        for e, v in hold:
            pred = poly(e)
            err = abs(sc.to_mpc(pred) - sc.to_mpc(v))
            lim = (0 if sc.name == "exact"
                   else self._tolerance() * max(abs(sc.to_mpc(v)), scale * max(1, abs(sc.to_mpc(e))) ** deg))
            if sc.name == "exact":
                if not sc.is_zero(pred - v):
                    raise PrefactorResidue("exact extraction failed held-out equality")
            elif err > lim:
                raise PrefactorResidue(
                    f"extraction held-out residual {mp.nstr(err, 5)} exceeds {mp.nstr(lim, 5)}")
        return poly

    # .. class references ..........................................................

    def xi_reference(self, counts) -> Poly:
        """Monic Xi_{D0} for the class; bootstrapped by pairing for mixed counts."""
        if counts in self._xi_ref:
            return self._xi_ref[counts]
        m1, m2 = counts
        sc = self.sc
        if m1 == 0 or m2 == 0:
            ref = Poly.const(sc.one, sc)
        else:
            D0 = reference_index_set(counts)
            D1 = _bumped_reference(counts)
            ref = self._pairing_bootstrap(D0, D1)
        self._xi_ref[counts] = ref
        return ref

    def _pairing_bootstrap(self, D0: IndexSet, D1: IndexSet) -> Poly:
        """Solve detPoly_{D1} * B(eta) = detPoly_{D0} * A(eta) for monic B = Xi_{D0}."""
        sc = self.sc
        dB, dA = D0.ell, D1.ell
        nunk = (dA + 1) + dB
        count = nunk + (4 if sc.name == "exact" else 12)
        us = self._samples(count, f"pair|{D0.key()}|{D1.key()}")
        etas = [self.fam.eta_at(u, self.lam) for u in us]
        v0 = self.det_values(_xi_cols(D0), us)
        v1 = self.det_values(_xi_cols(D1), us)
        rows, rhs = [], []
        for e, a_s, b_s in zip(etas, v1, v0):
            pw = [sc.one]
            for _ in range(max(dA, dB)):
                pw.append(pw[-1] * e)
            row = [b_s * pw[k] for k in range(dA + 1)]
            row += [-(a_s) * pw[k] for k in range(dB)]
            rows.append(row)
            rhs.append(a_s * pw[dB])
        if sc.name == "exact":
            sol = solve_dense(rows[:nunk], rhs[:nunk], sc)
        else:
            scaled = []
            srhs = []
            for row, r in zip(rows, rhs):
                m = max(max(abs(x) for x in row), abs(r), mp.mpf(1) * 0 + mp.mpf("1e-300"))
                scaled.append([x / m for x in row])
                srhs.append(r / m)
            sol = lstsq_dense(scaled, srhs, sc)
        b_coeffs = list(sol[dA + 1:]) + [sc.one]
        xi0 = Poly(b_coeffs, sc)
        a_poly = Poly(sol[: dA + 1], sc)
        for e, a_s, b_s in list(zip(etas, v1, v0))[nunk:]:
            resid = a_s * xi0(e) - b_s * a_poly(e)
            if sc.name == "exact":
                if not sc.is_zero(resid):
                    raise PrefactorResidue("exact pairing bootstrap failed verification")
            else:
                scale = abs(a_s * xi0(e)) + abs(b_s * a_poly(e)) + mp.mpf("1e-300")
                if abs(resid) / scale > self._tolerance():
                    raise PrefactorResidue("pairing bootstrap residual above tolerance")
        return xi0

    def shift_builder(self) -> "Builder":
        """Builder at lambda + delta (used by the P normalization anchor)."""
        if self._shift_builder is None:
            lam_d = self.fam.apply_shift_vec(self.lam, self.fam.delta_vec)
            self._shift_builder = Builder(lam_d, self.bits)
        return self._shift_builder

    # .. public construction ......................................................

    def xi(self, D: IndexSet) -> Poly:
        key = D.key()
        if key in self._xi_cache:
            return self._xi_cache[key]
        counts = D.counts
        if D.M == 0:
            poly = Poly.const(self.sc.one, self.sc)
        elif D.entries == reference_index_set(counts).entries:
            poly = self.xi_reference(counts)
        else:
            ref = self.xi_reference(counts)
            D0 = reference_index_set(counts)
            poly = self._extract(_xi_cols(D), D.ell, _xi_cols(D0), ref, f"xi|{D.key()}")
        poly = poly.trim()
        if poly.degree != D.ell:
            raise DegenerateIndexSet(
                f"deg Xi_D = {poly.degree} but ell_D = {D.ell} for D = {D}")
        self._xi_cache[key] = poly
        return poly

    def P(self, D: IndexSet, n: int) -> Poly:
        key = (D.key(), n)
        if key in self._p_cache:
            return self._p_cache[key]
        if D.M == 0:
            poly = self.col_poly("P", n)
        else:
            counts = D.counts
            D0 = reference_index_set(counts)
            ref = self.shift_builder().xi(D0)
            poly = self._extract(_p_cols(D, n), D.ell + n, _p_cols(D0, 0), ref,
                                 f"p|{D.key()}|{n}")
        poly = poly.trim()
        if poly.degree != D.ell + n:
            raise DegenerateIndexSet(
                f"deg P_D,n = {poly.degree} but ell_D + n = {D.ell + n} for D = {D}")
        self._p_cache[key] = poly
        return poly


def _xi_cols(D: IndexSet):
    return [(t, d) for d, t in D.entries]


def _p_cols(D: IndexSet, n: int):
    return _xi_cols(D) + [("P", n)]


_BUILDERS = {}


def get_builder(lam: ParamSet, bits: int = 256) -> Builder:
    key = (lam.digest(), bits)
    if key not in _BUILDERS:
        _BUILDERS[key] = Builder(lam, bits)
    return _BUILDERS[key]


# -- delta-tilde calibration ------------------------------------------------------


_DTILDE = {}


def delta_tilde(family_tag: str, vtype: str):
    """Calibrated parameter shift entering lambda_D, unique over the candidate grid."""
    key = (family_tag, vtype)
    if key not in _DTILDE:
        _DTILDE[key] = _calibrate_delta_tilde(family_tag, vtype)
    return _DTILDE[key]


def _calibrate_delta_tilde(family_tag: str, vtype: str):
    fam = FAMILIES[family_tag]
    with workbits(192):
        lam = draw_params(family_tag, "generic", seed=1009, bits=192)
        b = Builder(lam, bits=192)
        D = IndexSet.make([(1, vtype)])
        xi_l = b.xi(D)
        xi_ld = b.shift_builder().xi(D)
        polys = {n: b.P(D, n) for n in range(3)}
        hits = []
        for vec in fam.dtilde_candidates(vtype):
            lam_d = fam.apply_shift_vec(lam, vec)
            worst = mp.mpf(0)
            try:
                for n, p in polys.items():
                    E = fam.energy(n, lam)
                    for u in fam.sample_args(5, lam, f"dt|{n}"):
                        r = _eigen_residual(b, lam_d, xi_l, xi_ld, p, E, u)
                        worst = max(worst, r)
            except PoleAtSample:
                continue
            if worst < mp.mpf(2) ** (-60):
                hits.append((vec, worst))
        if len(hits) != 1:
            raise CalibrationFailure(
                f"delta-tilde calibration for {family_tag}/{vtype} found {len(hits)} candidates: {hits}")
        return hits[0][0]


def shifted_params(lam: ParamSet, D: IndexSet) -> ParamSet:
    """lambda_D = lambda + M_I dtilde^I + M_II dtilde^II (counts only)."""
    fam = lam.fam
    vec = [Fraction(0)] * 4
    if D.M1:
        dt = delta_tilde(lam.family, "I")
        vec = [v + D.M1 * t for v, t in zip(vec, dt)]
    if D.M2:
        dt = delta_tilde(lam.family, "II")
        vec = [v + D.M2 * t for v, t in zip(vec, dt)]
    return fam.apply_shift_vec(lam, tuple(vec))


# -- deformed operator -------------------------------------------------------------


def apply_htilde(builder: Builder, lam_D: ParamSet, xi_l: Poly, xi_ld: Poly,
                 p: Poly, u):
    """(H~_D p-check)(x) per the deformed similarity-transformed Hamiltonian."""
    fam, lam, sc = builder.fam, builder.lam, builder.sc
    u_m = fam.shift_arg(u, -1, lam)
    u_p = fam.shift_arg(u, 1, lam)
    u_mh = fam.shift_arg(u, -HALF, lam)
    u_ph = fam.shift_arg(u, HALF, lam)
    eta = fam.eta_at(u, lam)
    xi_ph = xi_l(fam.eta_at(u_ph, lam))
    xi_mh = xi_l(fam.eta_at(u_mh, lam))
    xi0 = xi_ld(eta)
    scale = _poly_scale(xi_l, sc)
    scale_d = _poly_scale(xi_ld, sc)
    if sc.name != "exact":
        tiny = mp.mpf(2) ** (-builder.bits // 2)
        if abs(xi_ph) < tiny * scale or abs(xi_mh) < tiny * scale or abs(xi0) < tiny * scale_d:
            raise PoleAtSample("Xi_D vanished near sample point")
    elif sc.is_zero(xi_ph) or sc.is_zero(xi_mh) or sc.is_zero(xi0):
        raise PoleAtSample("Xi_D vanished at exact sample point")
    v = fam.v_at(lam_D.a, u, lam)
    vs = fam.v_star_at(lam_D.a, u, lam)
    pu = p(eta)
    t1 = v * (xi_ph / xi_mh) * (p(fam.eta_at(u_m, lam)) - (xi_ld(fam.eta_at(u_m, lam)) / xi0) * pu)
    t2 = vs * (xi_mh / xi_ph) * (p(fam.eta_at(u_p, lam)) - (xi_ld(fam.eta_at(u_p, lam)) / xi0) * pu)
    return t1 + t2


def _eigen_residual(builder: Builder, lam_D: ParamSet, xi_l, xi_ld, p, E, u) -> mp.mpf:
    sc = builder.sc
    h = apply_htilde(builder, lam_D, xi_l, xi_ld, p, u)
    val = sc.to_mpc(h)
    ref = sc.to_mpc(E * p(builder.fam.eta_at(u, builder.lam)))
    scale = abs(val) + abs(ref) + 1
    return abs(val - ref) / scale


def _poly_scale(p: Poly, sc) -> mp.mpf:
    if sc.name == "exact":
        return mp.mpf(1) if not all(sc.is_zero(c) for c in p.coeffs) else mp.mpf(0)
    return max((abs(c) for c in p.coeffs), default=mp.mpf(0))


# -- bundles and gates ----------------------------------------------------------------


@dataclass
class MiopBundle:
    """Xi_D, the P_{D,n} family and the deformed-system bookkeeping."""

    lam: ParamSet
    D: IndexSet
    n_max: int
    xi: Poly
    xi_shift: Poly
    P: dict
    lam_D: ParamSet
    gates: dict = field(default_factory=dict)

    @property
    def c_xi(self):
        return self.xi.lead()

    def c_P(self, n):
        return self.P[n].lead()


def build_miop(lam: ParamSet, D: IndexSet, n_max: int = 8, bits: int = 256,
               check: bool = True, samples: int = 12) -> MiopBundle:
    """Construct Xi_D and P_{D,0..n_max} and run the structural gates."""
    b = get_builder(lam, bits)
    fam = lam.fam
    xi = b.xi(D)
    xi_shift = b.shift_builder().xi(D)
    polys = {n: b.P(D, n) for n in range(n_max + 1)}
    lam_D = shifted_params(lam, D)
    bundle = MiopBundle(lam, D, n_max, xi, xi_shift, polys, lam_D)
    if not check:
        return bundle
    tolerance = mp.mpf(2) ** (-bits // 2)
    worst = mp.mpf(0)
    for n, p in polys.items():
        E = fam.energy(n, lam)
        got = 0
        for u in fam.sample_args(samples + 6, lam, f"gate|{D.key()}|{n}"):
            if got >= samples:
                break
            try:
                worst = max(worst, _eigen_residual(b, lam_D, xi, xi_shift, p, E, u))
                got += 1
            except PoleAtSample:
                continue
        if got < samples // 2:
            raise PoleAtSample("could not find enough pole-free gate samples")
    bundle.gates["eigen_residual"] = worst
    if worst > tolerance:
        raise PrefactorResidue(
            f"deformed eigenrelation residual {mp.nstr(worst, 5)} above tolerance for D={D}")
    bundle.gates["shape_invariance"] = _shape_invariance_defect(bundle)
    if bundle.gates["shape_invariance"] > tolerance:
        raise PrefactorResidue("shape invariance P_D,0 ~ Xi_D(lambda+delta) failed")
    return bundle


def _shape_invariance_defect(bundle: MiopBundle) -> mp.mpf:
    """Coefficient-wise defect of P_{D,0} proportional to Xi_D at lambda+delta."""
    sc = bundle.lam.scalars
    p0 = bundle.P[0].trim()
    xs = bundle.xi_shift.trim()
    if p0.degree != xs.degree:
        return mp.mpf("inf")
    ratio = p0.lead() / xs.lead()
    worst = mp.mpf(0)
    scale = _poly_scale(p0, sc) if sc.name != "exact" else None
    for c_p, c_x in zip(p0.coeffs, xs.coeffs):
        d = c_p - ratio * c_x
        if sc.name == "exact":
            if not sc.is_zero(d):
                return mp.mpf("inf")
        else:
            worst = max(worst, abs(d) / scale)
    return worst


# -- hermiticity and norm ratios -----------------------------------------------------


def hermiticity_check(lam: ParamSet, D: IndexSet, bundle: MiopBundle, bits: int = 256):
    """True iff Xi_D has no zero in the strip D_gamma; witness lists offenders."""
    from .zeros import find_zeros

    fam = lam.fam
    if bundle.xi.degree == 0:
        return True, []
    pol = TolerancePolicy(bits)
    zs = find_zeros(bundle.xi, pol)
    x1, x2 = fam.x_bounds(lam)
    half = abs(fam.gamma_value(lam)) / 2
    margin = mp.mpf(2) ** (-40)
    offenders = []
    for eta in zs.eta:
        # the principal preimage covers the strip: the others have Re x outside
        # [x1, x2] except on the shared Re x = boundary line
        x = fam.recover_x(eta)
        if x1 - margin <= mp.re(x) <= x2 + margin and abs(mp.im(x)) <= half + margin:
            offenders.append((eta, x))
    return (len(offenders) == 0), offenders


def h_ratio(lam: ParamSet, D: IndexSet, n: int, m: int):
    """h_{D,n} / h_{D,m}: base ratio times the virtual-energy factors (same D)."""
    fam = lam.fam
    out = fam.h_ratio_base(n, m, lam)
    En = fam.energy(n, lam)
    Em = fam.energy(m, lam)
    for d in D.d1:
        ev = fam.etilde("I", d, lam)
        out = out * (En - ev) / (Em - ev)
    for d in D.d2:
        ev = fam.etilde("II", d, lam)
        out = out * (En - ev) / (Em - ev)
    return out
