"""Acceptance criteria: every stated tolerance pinned, one printed line each.

The verification grid is families x {M <= 2, d_j <= 3} x N in {2,3,4}, run at
256 bits in both physical and generic-complex parameter modes.  Set
CASORATIA_ACCEPT_SCALE=small to subsample during development; the default is
the full grid.
"""

import json
import os
import random
import subprocess
import sys
import time
from fractions import Fraction

import mpmath as mp
import pytest

from casoratia.conjecture import compare, predicted_k, zeta_constant
from casoratia.dortho import DegenerateSpectrum, naive_weight_demo, verify_orthogonality
from casoratia.exact import QQi
from casoratia.families import FAMILIES, draw_params, params_from_values
from casoratia.identities import (check_prefactor_ratio_identity, check_eta_identity,
                                  check_chain_identity, classical_discrete_ortho,
                                  eta_identity_residual,
                                  partial_fraction_integral_check, chain_identity_exact)
from casoratia.miop import IndexSet, build_miop, hermiticity_check
from casoratia.numkernel import TolerancePolicy, workbits
from casoratia.zeros import (conjugation_closure_defect, find_zeros, interlace,
                             physical_interval_zeros)

TAGS = ["ch", "w", "aw"]
SMALL = os.environ.get("CASORATIA_ACCEPT_SCALE", "full") == "small"
DMAX = 2 if SMALL else 3
NS = (2, 3) if SMALL else (2, 3, 4)
DRAWS = 1 if SMALL else 3

EXACT_PARAMS = {
    "ch": dict(a_vals=[("5/2", "1/2"), ("9/4", "1/3"), ("5/2", "-1/2"), ("9/4", "-1/3")]),
    "w": dict(a_vals=[("5/2", "0"), ("11/4", "0"), ("9/4", "1/2"), ("9/4", "-1/2")]),
    "aw": dict(a_vals=[("1/10", "0"), ("2/15", "0"), ("1/8", "1/16"), ("1/8", "-1/16")],
               q_val="2/5"),
}

NAIVE_WITNESS = {"ch": [(2, "I")], "w": [(3, "I")], "aw": [(3, "I")]}
# documented zero pairs (j, k) where the partial-fraction integral visibly
# fails to vanish for the multi-indexed witness above (value instance-specific)
PF_WITNESS = {"ch": ([(2, "I")], 1, 2), "w": ([(3, "I")], 1, 2), "aw": ([(3, "I")], 2, 3)}


def grid_index_sets(dmax=DMAX, even_ell_only=False):
    out = []
    degs = list(range(dmax + 1))
    for d in degs:
        for t in ("I", "II"):
            D = IndexSet.make([(d, t)])
            if D.ell >= 1:
                out.append(D)
    for i in range(len(degs)):
        for j in range(i + 1, len(degs)):
            for t in ("I", "II"):
                D = IndexSet.make([(degs[i], t), (degs[j], t)])
                if D.ell >= 1:
                    out.append(D)
    for di in degs:
        for dj in degs:
            out.append(IndexSet.make([(di, "I"), (dj, "II")]))
    if even_ell_only:
        out = [D for D in out if D.ell % 2 == 0]
    return out


def _passline(num, name, detail):
    print(f"ACCEPTANCE {num:02d} {name}: PASS ({detail})")


@pytest.mark.acceptance
def test_criterion_01_eigenrelation_suite():
    """Deformed eigenrelation residual <= 2^-128 at 20 points, <= 10 min."""
    t0 = time.time()
    worst = mp.mpf(0)
    count = 0
    with workbits(288):
        for tag in TAGS:
            for draw in range(DRAWS):
                lam = draw_params(tag, "physical", seed=100 + draw)
                for D in grid_index_sets():
                    bun = build_miop(lam, D, n_max=4, samples=20)
                    worst = max(worst, bun.gates["eigen_residual"])
                    count += 1
    elapsed = time.time() - t0
    assert worst <= mp.mpf(2) ** -128
    assert elapsed <= 600
    _passline(1, "eigenrelation suite",
              f"{count} instances, worst residual {mp.nstr(worst, 3)}, {elapsed:.0f}s")


@pytest.mark.acceptance
def test_criterion_02_degree_laws_exact():
    """Exact backend: deg Xi_D = ell_D, deg P = ell_D + n, shape invariance."""
    checked = 0
    for tag in TAGS:
        cfg = EXACT_PARAMS[tag]
        lam = params_from_values(tag, cfg["a_vals"], cfg.get("q_val"),
                                 mode="physical", backend="exact")
        ds = grid_index_sets(dmax=2 if (SMALL or tag == "aw") else 3)
        for D in ds:
            bun = build_miop(lam, D, n_max=2 if SMALL else 3, check=False)
            assert bun.xi.degree == D.ell
            assert not bun.xi.lead().is_zero()
            for n, p in bun.P.items():
                assert p.degree == D.ell + n
                assert not p.lead().is_zero()
            ratio = bun.P[0].lead() / bun.xi_shift.lead()
            for c1, c2 in zip(bun.P[0].coeffs, bun.xi_shift.coeffs):
                assert (c1 - ratio * c2).is_zero()
            checked += 1
    _passline(2, "exact degree laws", f"{checked} exact index sets, all coefficient-exact")


def _grid_reports():
    """Shared verification-grid run: cached for criteria 3, 4, 5."""
    if _grid_reports.cache is not None:
        return _grid_reports.cache
    out = []
    with workbits(288):
        for tag in TAGS:
            for mode in ("physical", "generic"):
                seed = 1
                for D in grid_index_sets(even_ell_only=(tag == "ch" and mode == "physical")):
                    for N in NS:
                        for attempt in range(3):
                            lam = draw_params(tag, mode, seed=seed + 100 * attempt)
                            try:
                                rep = verify_orthogonality(lam, D, N, check_pa=False)
                                conj = compare(lam, D, N, rep)
                            except DegenerateSpectrum:
                                continue
                            out.append((tag, mode, lam, D, N, rep, conj))
                            break
                        else:
                            raise AssertionError(f"no admissible draw for {tag}/{mode} {D}")
    _grid_reports.cache = out
    return out


_grid_reports.cache = None


@pytest.mark.acceptance
def test_criterion_03_matrix_symmetry():
    worst = mp.mpf(0)
    for tag, mode, lam, D, N, rep, conj in _grid_reports():
        assert N + D.ell <= 12
        worst = max(worst, rep.symmetry_defect)
    assert worst <= mp.mpf("1e-30")
    _passline(3, "matrix symmetry", f"worst defect {mp.nstr(worst, 3)}")


@pytest.mark.acceptance
def test_criterion_04_discrete_orthogonality_grid():
    worst = mp.mpf(0)
    count = 0
    for tag, mode, lam, D, N, rep, conj in _grid_reports():
        worst = max(worst, rep.max_offdiag_rel)
        count += 1
    assert worst <= mp.mpf("1e-25")
    _passline(4, "discrete orthogonality",
              f"{count} instances (both modes), worst offdiag {mp.nstr(worst, 3)}")


@pytest.mark.acceptance
def test_criterion_05_conjecture_grid():
    worst = mp.mpf(0)
    zetas = {}
    for tag, mode, lam, D, N, rep, conj in _grid_reports():
        worst = max(worst, conj.max_rel_err)
        assert conj.reading == "j"
        if conj.zeta is not None:
            key = (tag, mode, lam.digest(), D.counts)
            zetas.setdefault(key, set()).add(mp.nstr(mp.mpc(conj.zeta), 40))
    for key, vals in zetas.items():
        assert len(vals) == 1, f"fitted constant drifted for {key}"
    # refit stability: an independent instance must reproduce the cached zeta
    with workbits(288):
        for tag in TAGS:
            lam = draw_params(tag, "physical", seed=1)
            z = mp.mpc(zeta_constant(lam, (1, 1)))
            D = IndexSet.make([(1, "I"), (2, "II")])
            rep = verify_orthogonality(lam, D, 2, check_pa=False)
            basis = rep.extras["basis"]
            from casoratia.identities import mixed_constant
            C = mixed_constant(lam, (0, 0))
            for a, entry in enumerate(basis.entries):
                if entry.case == 3:
                    raw = predicted_k(lam, D, 2, entry, mixed_C=C)
                    refit = rep.k[a] / raw
                    assert abs(refit - z) <= mp.mpf("1e-20") * abs(z)
    assert worst <= mp.mpf("1e-20")
    _passline(5, "conjecture", f"worst rel err {mp.nstr(worst, 3)}; "
              f"{len(zetas)} fitted count-pair constants, all stable")


@pytest.mark.acceptance
def test_criterion_06_chain_identities():
    tol = mp.mpf(2) ** -128
    same_cases = [
        (IndexSet.make([]), (0, "I"), (1, "I"), 1),
        (IndexSet.make([(1, "I")]), (0, "I"), (2, "I"), 2),
        (IndexSet.make([]), (1, "II"), (2, "II"), 1),
        (IndexSet.make([(0, "II")]), (1, "II"), (3, "II"), 0),
    ]
    mixed_cases = [
        (IndexSet.make([]), (0, "I"), (0, "II"), 1),
        (IndexSet.make([(1, "I")]), (2, "I"), (1, "II"), 1),
        (IndexSet.make([(1, "II")]), (1, "I"), (2, "II"), 2),
        (IndexSet.make([(0, "I"), (0, "II")]), (1, "I"), (1, "II"), 0),
    ]
    with workbits(288):
        for tag in TAGS:
            lam = draw_params(tag, "physical", seed=7)
            for D, dp, dpp, n in same_cases:
                r = check_chain_identity(lam, D, dp, dpp, n, samples=10)
                assert r["max_residual"] <= tol, f"{tag} same-type {D}"
            for D, dp, dpp, n in mixed_cases:
                r = check_chain_identity(lam, D, dp, dpp, n, samples=10)
                assert r["max_residual"] <= tol, f"{tag} mixed-type {D}"
    exact_pts = []
    for tag in TAGS:
        cfg = EXACT_PARAMS[tag]
        lam = params_from_values(tag, cfg["a_vals"], cfg.get("q_val"),
                                 mode="physical", backend="exact")
        r1 = chain_identity_exact(lam, IndexSet.make([]), (0, "I"), (1, "I"), 1)
        assert r1["exact"], f"{tag} same-type exact"
        r2 = chain_identity_exact(lam, IndexSet.make([]), (0, "I"), (0, "II"), 1)
        assert r2["exact"], f"{tag} mixed-type exact"
        exact_pts.append(r1["points"] + r2["points"])
    _passline(6, "forward/backward identities",
              f"4+4 float instances per family at 10 samples; "
              f"coefficient-exact instances verified at {exact_pts} points")


@pytest.mark.acceptance
def test_criterion_07_eta_lemma():
    rng = random.Random(2024)
    for _ in range(100):
        a, b, c = (QQi(Fraction(rng.randrange(-30, 30), rng.randrange(1, 12)),
                       Fraction(rng.randrange(-30, 30), rng.randrange(1, 12)))
                   for _ in range(3))
        assert check_eta_identity("ch", a, b, c).is_zero()
        assert check_eta_identity("w", a, b, c).is_zero()
    with workbits(256):
        worst = mp.mpf(0)
        for _ in range(100):
            a, b, c = (mp.mpc(rng.uniform(-2, 2), rng.uniform(-2, 2)) for _ in range(3))
            worst = max(worst, eta_identity_residual("aw", a, b, c))
        assert worst <= mp.mpf(2) ** -240
    _passline(7, "sinusoidal-coordinate lemma",
              f"exact zero for eta = x, x^2; cos residual {mp.nstr(worst, 3)}")


@pytest.mark.acceptance
def test_criterion_08_prefactor_ratio_identity():
    tol = mp.mpf(2) ** -128
    worst = mp.mpf(0)
    with workbits(288):
        for tag in TAGS:
            lam = draw_params(tag, "physical", seed=7)
            for D, dp, dpp in [(IndexSet.make([]), (0, "I"), (0, "II")),
                               (IndexSet.make([(1, "I")]), (2, "I"), (1, "II"))]:
                for u in lam.fam.sample_args(5, lam, f"pfr|{D.key()}"):
                    r = check_prefactor_ratio_identity(lam, D, dp, dpp, u)
                    worst = max(worst, r["signed_residual"])
                    assert r["signed_residual"] <= tol
    _passline(8, "prefactor-ratio intermediate identity",
              f"5 samples x 2 instances x 3 families, worst {mp.nstr(worst, 3)}")


@pytest.mark.acceptance
def test_criterion_09_classical_orthogonality():
    worst_off, worst_diag = mp.mpf(0), mp.mpf(0)
    with workbits(288):
        for tag in TAGS:
            lam = draw_params(tag, "physical", seed=3)
            r = classical_discrete_ortho(lam, 8)
            worst_off = max(worst_off, r["max_offdiag_rel"])
            worst_diag = max(worst_diag, r["diag_rel_err"])
    assert worst_off <= mp.mpf("1e-25")
    assert worst_diag <= mp.mpf("1e-20")
    _passline(9, "classical discrete orthogonality",
              f"N = 8, offdiag {mp.nstr(worst_off, 3)}, diagonal vs |C_N| h_n/h_N "
              f"{mp.nstr(worst_diag, 3)}")


@pytest.mark.acceptance
def test_criterion_10_negative_controls():
    details = []
    with workbits(288):
        for tag in TAGS:
            lam = draw_params(tag, "physical", seed=11)
            D = IndexSet.make(NAIVE_WITNESS[tag])
            naive = naive_weight_demo(lam, D, 3)
            assert naive >= mp.mpf("1e-3"), f"{tag} naive weight unexpectedly small"
            rep = verify_orthogonality(lam, D, 3, check_pa=False)
            assert rep.max_offdiag_rel <= mp.mpf("1e-25")
            details.append(f"{tag}:naive={mp.nstr(naive, 2)}")
    with workbits(192):
        for tag in TAGS:
            lam = draw_params(tag, "physical", seed=11, bits=192)
            r0 = partial_fraction_integral_check(lam, IndexSet.make([]), 3, 1, 2, bits=192)
            assert r0["rel"] <= mp.mpf("1e-8"), f"{tag} classical integral split"
            pairs, j, k = PF_WITNESS[tag]
            r1 = partial_fraction_integral_check(lam, IndexSet.make(pairs), 3, j, k, bits=192)
            assert r1["rel"] >= mp.mpf("1e-3"), f"{tag} multi-indexed integral split"
            details.append(f"{tag}:pf0={mp.nstr(r0['rel'], 2)},pf1={mp.nstr(r1['rel'], 2)}")
    _passline(10, "negative controls", "; ".join(details))


@pytest.mark.acceptance
def test_criterion_11_zero_structure():
    pol = TolerancePolicy(256)
    with workbits(288):
        for tag in TAGS:
            fam = FAMILIES[tag]
            lam, admissible = None, None
            for seed in (47, 48, 49, 50):
                cand = draw_params(tag, "physical", seed=seed)
                Ds = [IndexSet.make([(2, "I")]), IndexSet.make([(2, "II")])]
                bundles = [build_miop(cand, D, 4, check=False) for D in Ds]
                if all(hermiticity_check(cand, D, b)[0] for D, b in zip(Ds, bundles)):
                    lam, admissible = cand, list(zip(Ds, bundles))
                    break
            assert lam is not None, f"no admissible {tag} draw found"
            for D, bun in admissible:
                prev = None
                for n in range(1, 5):
                    zs = find_zeros(bun.P[n], pol, fam)
                    assert conjugation_closure_defect(zs) <= mp.mpf("1e-30")
                    phys = physical_interval_zeros(zs, fam, lam)
                    assert len(phys) == n
                    assert len(zs.eta) - len(phys) == D.ell
                    if prev is not None:
                        assert interlace(prev, phys)
                    prev = phys
    _passline(11, "zero structure", "conjugation closure, counts and interlacing on the grid")


@pytest.mark.acceptance
def test_criterion_12_determinism_and_precision(tmp_path):
    base = [sys.executable, "-m", "casoratia.cli", "verify", "--family", "w",
            "--dI", "2", "--N", "3"]
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        r = subprocess.run(base + ["--out", str(out)], capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    resid = {}
    for bits in (256, 512):
        with workbits(bits + 32):
            lam = draw_params("w", "physical", seed=11, bits=bits)
            rep = verify_orthogonality(lam, IndexSet.make([(2, "I")]), 3, bits=bits,
                                       check_pa=False)
            resid[bits] = max(rep.max_offdiag_rel,
                              mp.mpf(2) ** (-4 * bits))  # floor far below both
    shrink = resid[256] / resid[512]
    assert shrink >= mp.mpf(2) ** 64
    _passline(12, "determinism and precision monotonicity",
              f"byte-identical reports; residual shrink factor 2^{mp.nstr(mp.log(shrink, 2), 4)}")
