"""Command-line front end: verify, sweep, identities, roots, construct.

Exit codes: 0 all enabled checks passed, 2 a check failed (after one
precision escalation), 3 numerical degeneracy or a guard rejected the
instance.  Reports are canonical JSON certificates; sweeps emit a CSV
summary.  All randomness is seeded and worker merges are sorted, so repeated
runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone

import mpmath as mp

from . import cache as cache_mod
from .conjecture import FormulaSingular, compare
from .dortho import (DegenerateSpectrum, DenominatorCollision, WeightSingular,
                     naive_weight_demo, verify_orthogonality)
from .families import ParamSet, draw_params, params_from_values, validate_physical
from .identities import (check_prefactor_ratio_identity, check_chain_identity,
                         classical_discrete_ortho, eta_identity_residual,
                         partial_fraction_integral_check, chain_identity_exact)
from .miop import (DegenerateIndexSet, IndexSet, PoleAtSample, PrefactorResidue,
                   build_miop, hermiticity_check)
from .numkernel import DEFAULT_BITS, TolerancePolicy, workbits
from .polycore import SymmetryViolation
from .report import canonical_json, num_str, ortho_report_json, poly_json, real_str
from .zeros import MultipleRootSuspected, find_zeros

VERSION = "0.1.0"

EXIT_OK = 0
EXIT_CHECK_FAILED = 2
EXIT_DEGENERATE = 3

DEGENERACY_ERRORS = (DegenerateSpectrum, DegenerateIndexSet, WeightSingular,
                     DenominatorCollision, MultipleRootSuspected, PoleAtSample,
                     SymmetryViolation, PrefactorResidue, FormulaSingular)


def _tolerances(bits: int) -> dict:
    """Acceptance thresholds, stated at 256 bits and scaled with precision."""
    s = mp.mpf(bits) / 256
    return {
        "offdiag": mp.mpf(10) ** (-25 * s),
        "symmetry": mp.mpf(10) ** (-30 * s),
        "conjecture": mp.mpf(10) ** (-20 * s),
        "eigen": mp.mpf(2) ** (-int(128 * s)),
        "pairing": mp.mpf(10) ** (-30 * s),
    }


def _parse_degrees(text: str | None):
    if not text:
        return []
    return [int(t) for t in text.replace(",", " ").split()]


def _load_params(args) -> ParamSet:
    if args.params:
        with open(args.params) as fh:
            doc = json.load(fh)
        fam = doc["family"]
        if args.family and args.family != fam:
            raise SystemExit("--family disagrees with the params file")
        return params_from_values(fam, doc["a"], doc.get("q"), doc.get("mode", "physical"),
                                  backend=args.backend, bits=args.prec)
    if not args.family:
        raise SystemExit("need --family (or --params FILE)")
    if args.backend == "exact":
        raise SystemExit("exact backend needs --params with rational values")
    return draw_params(args.family, args.mode, args.seed, bits=args.prec)


def _index_set(args) -> IndexSet:
    D = IndexSet.make([(d, "I") for d in _parse_degrees(args.dI)]
                      + [(d, "II") for d in _parse_degrees(args.dII)])
    if D.M > 3:
        print("index sets with more than 3 entries are out of scope "
              "(verification is desk scale)", file=sys.stderr)
        raise SystemExit(EXIT_DEGENERATE)
    return D


def _manifest(args, lam: ParamSet, D: IndexSet | None, N: int | None, checks: dict) -> dict:
    return {
        "command": args.command,
        "family": lam.family,
        "params_digest": lam.digest(),
        "mode": lam.mode,
        "D": None if D is None else [[d, t] for d, t in D.entries],
        "N": N,
        "precision_ladder": [args.prec, 2 * args.prec],
        "backend": args.backend,
        "seed": args.seed,
        "version": VERSION,
        "timestamp": datetime.now(timezone.utc).isoformat() if args.timestamps else "",
        "checks": checks,
    }


def _emit(args, payload: dict) -> None:
    text = canonical_json(payload)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _verify_once(lam: ParamSet, D: IndexSet, N: int, bits: int, quadrature: bool):
    tol = _tolerances(bits)
    with workbits(bits + 32):
        rep = verify_orthogonality(lam, D, N, bits)
        conj = compare(lam, D, N, rep, bits)
        checks = {
            "orthogonality": bool(rep.max_offdiag_rel <= tol["offdiag"]),
            "matrix_symmetry": bool(rep.symmetry_defect <= tol["symmetry"]),
            "conjecture": bool(conj.max_rel_err <= tol["conjecture"]),
            "eigen_relation": bool(max(rep.eigen_residuals) <= tol["eigen"]),
            "pa_difference_equation": bool(rep.extras["pa_defect"] <= tol["eigen"]),
            "f_cross_form": bool(rep.f_cross_defect <= tol["eigen"]),
        }
        if lam.mode == "physical":
            # informational: hermiticity is sufficient for orthogonality of the
            # deformed system but the zero-grid relations hold without it
            ok, offenders = hermiticity_check(lam, D, rep.extras["bundle"], bits)
            rep.extras["hermitian"] = bool(ok)
            rep.extras["hermiticity_witness"] = len(offenders)
        if quadrature and N >= 2:
            naive = naive_weight_demo(lam, D, N, bits)
            pf = partial_fraction_integral_check(lam, D, N, 0, 1, bits=min(bits, 192))
            checks["naive_weight_fails"] = bool(naive >= mp.mpf("1e-3"))
            checks["partial_fraction_nonzero"] = bool(pf["rel"] >= mp.mpf("1e-3"))
        return rep, conj, checks


def cmd_verify(args) -> int:
    lam = _load_params(args)
    D = _index_set(args)
    N = args.N
    if lam.mode == "physical" and not validate_physical(lam):
        print("parameter set violates the physical-mode conjugation constraints", file=sys.stderr)
        return EXIT_DEGENERATE
    if D.M and D.ell < 1:
        print("index set has ell_D < 1 (trivial deformation)", file=sys.stderr)
        return EXIT_DEGENERATE
    if lam.family == "ch" and lam.mode == "physical" and D.ell % 2 == 1:
        print("continuous Hahn in physical mode needs even ell_D "
              "(deg Xi_D should be even)", file=sys.stderr)
        return EXIT_DEGENERATE
    if N + D.ell < 2:
        print("degree N-tilde = N + ell_D below 2: the relations state nothing here",
              file=sys.stderr)
        return EXIT_DEGENERATE
    attempts = []
    for bits in (args.prec, 2 * args.prec):
        try:
            rep, conj, checks = _verify_once(lam, D, N, bits, args.quadrature)
        except DEGENERACY_ERRORS as exc:
            print(f"degenerate instance: {exc}", file=sys.stderr)
            return EXIT_DEGENERATE
        attempts.append((bits, rep, conj, checks))
        if all(checks.values()):
            break
    bits, rep, conj, checks = attempts[-1]
    payload = ortho_report_json(rep, conj, _manifest(args, lam, D, N, checks))
    payload["attempts"] = [{"precision_bits": b, "checks": c} for b, _, _, c in attempts]
    _emit(args, payload)
    failed = [k for k, v in checks.items() if not v]
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _grid_index_sets(dmax: int, mmax: int, family: str, mode: str):
    out = []
    degs = list(range(dmax + 1))
    for d in degs:
        for t in ("I", "II"):
            D = IndexSet.make([(d, t)])
            if D.ell >= 1:
                out.append(D)
    if mmax >= 2:
        for i in range(len(degs)):
            for j in range(i + 1, len(degs)):
                for t in ("I", "II"):
                    D = IndexSet.make([(degs[i], t), (degs[j], t)])
                    if D.ell >= 1:
                        out.append(D)
        for di in degs:
            for dj in degs:
                D = IndexSet.make([(di, "I"), (dj, "II")])
                if D.ell >= 1:
                    out.append(D)
    if family == "ch" and mode == "physical":
        out = [D for D in out if D.ell % 2 == 0]
    return out


def cmd_sweep(args) -> int:
    families = args.families.split(",") if args.families else ["ch", "w", "aw"]
    modes = args.modes.split(",") if args.modes else ["physical", "generic"]
    jobs = []
    for fam in families:
        for mode in modes:
            for draw in range(args.draws):
                for D in _grid_index_sets(args.dmax, args.M, fam, mode):
                    for N in range(2, args.N_max + 1):
                        jobs.append((fam, mode, draw, D, N))
    jobs.sort(key=lambda j: (j[0], j[1], j[2], j[3].key(), j[4]))
    results = _run_jobs(jobs, args)
    rows, all_ok = [], True
    for (fam, mode, draw, D, N), res in zip(jobs, results):
        ok, offdiag, conj_err, note = res
        all_ok = all_ok and ok
        rows.append({
            "family": fam, "mode": mode, "draw": draw, "D": D.key(), "N": N,
            "pass": int(ok), "max_offdiag_rel": offdiag, "conjecture_rel_err": conj_err,
            "note": note,
        })
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["family", "mode", "draw", "D", "N", "pass",
                                        "max_offdiag_rel", "conjecture_rel_err", "note"])
    w.writeheader()
    for r in rows:
        w.writerow(r)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def _sweep_one(job_args):
    """One sweep instance; degenerate draws retry with shifted seeds."""
    fam, mode, draw, D, N, prec, quadrature = job_args
    last = None
    for attempt in range(3):
        lam = draw_params(fam, mode, draw + 1000 * attempt, bits=prec)
        for bits in (prec, 2 * prec):
            try:
                rep, conj, checks = _verify_once(lam, D, N, bits, quadrature)
            except DEGENERACY_ERRORS as exc:
                last = (False, "", "", f"degenerate: {exc}")
                rep = None
                break
            if all(checks.values()):
                return (True, real_str(rep.max_offdiag_rel, bits),
                        real_str(conj.max_rel_err, bits),
                        "" if attempt == 0 else f"redrawn:{attempt}")
        if rep is not None:
            failed = [k for k, v in checks.items() if not v]
            return (False, real_str(rep.max_offdiag_rel, bits),
                    real_str(conj.max_rel_err, bits), f"failed:{','.join(failed)}")
    return last


def _run_jobs(jobs, args):
    payloads = [(f, m, d, D, N, args.prec, args.quadrature) for (f, m, d, D, N) in jobs]
    if args.jobs <= 1:
        return [_sweep_one(p) for p in payloads]
    import multiprocessing as mproc
    with mproc.Pool(args.jobs) as pool:
        return pool.map(_sweep_one, payloads)


def cmd_identities(args) -> int:
    lam = _load_params(args)
    out = {"schema_version": 1, "identities": {}}
    ok = True
    with workbits(args.prec + 32):
        tol = _tolerances(args.prec)
        if args.lemma_eta:
            import random
            rng = random.Random(args.seed)
            worst = mp.mpf(0)
            for _ in range(args.samples):
                a, b, c = (mp.mpc(rng.uniform(-2, 2), rng.uniform(-2, 2)) for _ in range(3))
                worst = max(worst, eta_identity_residual(lam.family, a, b, c))
            out["identities"]["lemma_eta"] = real_str(worst, args.prec)
            ok = ok and worst <= mp.mpf(2) ** (-args.prec + 20)
        if args.classical:
            r = classical_discrete_ortho(lam, args.N, bits=args.prec)
            out["identities"]["classical"] = {
                "max_offdiag_rel": real_str(r["max_offdiag_rel"], args.prec),
                "diag_rel_err": real_str(r["diag_rel_err"], args.prec),
            }
            ok = ok and r["max_offdiag_rel"] <= tol["offdiag"] and r["diag_rel_err"] <= tol["conjecture"]
        if args.chain:
            D = _index_set(args)
            dp = (args.dprime, args.tprime)
            dpp = (args.dprime2, args.tprime2)
            if lam.scalars.name == "exact":
                r = chain_identity_exact(lam, D, dp, dpp, args.n)
                out["identities"]["chain_identity_exact"] = {"exact": r["exact"], "points": r["points"]}
                ok = ok and r["exact"]
            else:
                r = check_chain_identity(lam, D, dp, dpp, args.n, samples=args.samples, bits=args.prec)
                out["identities"]["chain"] = {
                    "case": r["case"], "max_residual": real_str(r["max_residual"], args.prec)}
                ok = ok and r["max_residual"] <= tol["eigen"]
        if args.prefactor_ratio:
            D = _index_set(args)
            us = lam.fam.sample_args(args.samples + 2, lam, "prefactor-cli")
            worst = mp.mpf(0)
            for u in us[: args.samples]:
                r = check_prefactor_ratio_identity(lam, D, (args.dprime, args.tprime),
                                            (args.dprime2, args.tprime2), u, bits=args.prec)
                worst = max(worst, r["signed_residual"])
            out["identities"]["prefactor_ratio"] = real_str(worst, args.prec)
            ok = ok and worst <= tol["eigen"]
    _emit(args, out)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_roots(args) -> int:
    lam = _load_params(args)
    D = _index_set(args)
    with workbits(args.prec + 32):
        try:
            bundle = build_miop(lam, D, args.N, args.prec)
            zs = find_zeros(bundle.P[args.N], TolerancePolicy(args.prec), lam.fam)
        except DEGENERACY_ERRORS as exc:
            print(f"degenerate instance: {exc}", file=sys.stderr)
            return EXIT_DEGENERATE
        payload = {
            "schema_version": 1,
            "eta": [num_str(e, args.prec) for e in zs.eta],
            "x": [num_str(x, args.prec) for x in zs.x],
            "min_pair_distance": real_str(zs.min_pair_distance, args.prec),
            "residual_bound": real_str(zs.residual_bound, args.prec),
            "manifest": _manifest(args, lam, D, args.N, {}),
        }
    _emit(args, payload)
    return EXIT_OK


def cmd_construct(args) -> int:
    lam = _load_params(args)
    D = _index_set(args)
    cdir = cache_mod.cache_dir(args.cache)
    key = cache_mod.cache_key(kind="bundle", family=lam.family, params=lam.digest(),
                              D=D.key(), n_max=args.N, prec=args.prec, backend=args.backend)
    hit = cache_mod.load(cdir, key)
    if hit is not None:
        _emit(args, hit)
        return EXIT_OK
    with workbits(args.prec + 32):
        try:
            bundle = build_miop(lam, D, args.N, args.prec)
        except DEGENERACY_ERRORS as exc:
            print(f"degenerate instance: {exc}", file=sys.stderr)
            return EXIT_DEGENERATE
        payload = {
            "schema_version": 1,
            "xi": poly_json(bundle.xi, args.prec),
            "xi_shifted_params": poly_json(bundle.xi_shift, args.prec),
            "P": {str(n): poly_json(p, args.prec) for n, p in bundle.P.items()},
            "gates": {k: real_str(v, args.prec) for k, v in bundle.gates.items()},
            "manifest": _manifest(args, lam, D, args.N, {}),
        }
    cache_mod.store(cdir, key, payload)
    _emit(args, payload)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="casoratia",
                                 description="multi-indexed cH/W/AW discrete-orthogonality verifier")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--family", choices=["ch", "w", "aw"])
        p.add_argument("--params", help="JSON parameter file")
        p.add_argument("--mode", choices=["physical", "generic"], default="physical")
        p.add_argument("--dI", help="type-I degrees, e.g. '1,2'")
        p.add_argument("--dII", help="type-II degrees")
        p.add_argument("--N", type=int, default=3)
        p.add_argument("--prec", type=int, default=DEFAULT_BITS)
        p.add_argument("--backend", choices=["float", "exact"], default="float")
        p.add_argument("--out")
        p.add_argument("--cache")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--quadrature", action="store_true")
        p.add_argument("--timestamps", action="store_true")

    p = sub.add_parser("verify", help="full discrete-orthogonality + conjecture run")
    common(p)
    p = sub.add_parser("sweep", help="grid of instances, aggregate CSV")
    common(p)
    p.add_argument("--families")
    p.add_argument("--modes")
    p.add_argument("--draws", type=int, default=1)
    p.add_argument("--dmax", type=int, default=3)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--N-max", dest="N_max", type=int, default=4)
    p = sub.add_parser("identities", help="supporting identity checks")
    common(p)
    p.add_argument("--lemma-eta", action="store_true")
    p.add_argument("--classical", action="store_true")
    p.add_argument("--chain", action="store_true")
    p.add_argument("--prefactor-ratio", action="store_true")
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--dprime", type=int, default=0)
    p.add_argument("--tprime", choices=["I", "II"], default="I")
    p.add_argument("--dprime2", type=int, default=2)
    p.add_argument("--tprime2", choices=["I", "II"], default="I")
    p = sub.add_parser("roots", help="zero set of P_{D,N}")
    common(p)
    p = sub.add_parser("construct", help="build and emit (and cache) a bundle")
    common(p)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    handlers = {
        "verify": cmd_verify,
        "sweep": cmd_sweep,
        "identities": cmd_identities,
        "roots": cmd_roots,
        "construct": cmd_construct,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
