"""Canonical JSON rendering: reports are diffable verification certificates.

All numerics are decimal strings tagged with the precision that produced
them; keys are sorted and the encoder is deterministic so repeated runs are
byte-identical.
"""

from __future__ import annotations

import json

import mpmath as mp

from .exact import QQi, SqrtExt

SCHEMA_VERSION = 1


def digits_for(bits: int) -> int:
    return int(bits * 0.30103) + 8


def num_str(x, bits: int) -> list:
    """Complex scalar as a [re, im] pair of decimal strings."""
    if isinstance(x, QQi):
        return [f"{x.re}", f"{x.im}"]
    if isinstance(x, SqrtExt):
        x = x.to_mpc()
    z = mp.mpc(x)
    d = digits_for(bits)
    return [mp.nstr(mp.re(z), d), mp.nstr(mp.im(z), d)]


def real_str(x, bits: int) -> str:
    return mp.nstr(mp.mpf(x), digits_for(bits))


def poly_json(p, bits: int) -> list:
    return [num_str(c, bits) for c in p.coeffs]


def matrix_json(m, bits: int) -> list:
    return [[num_str(x, bits) for x in row] for row in m]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True) + "\n"


def ortho_report_json(rep, conj=None, manifest=None) -> dict:
    bits = rep.precision_bits
    out = {
        "schema_version": SCHEMA_VERSION,
        "family": rep.family,
        "D": [[d, t] for d, t in rep.D.entries],
        "N": rep.N,
        "precision_bits": bits,
        "F": [num_str(f, bits) for f in rep.F],
        "symmetry_defect": real_str(rep.symmetry_defect, bits),
        "diag_defect": real_str(rep.diag_defect, bits),
        "f_cross_defect": real_str(rep.f_cross_defect, bits),
        "max_offdiag_rel": real_str(rep.max_offdiag_rel, bits),
        "k": [num_str(k, bits) for k in rep.k],
        "origins": list(rep.origins),
        "eigen_residuals": [real_str(r, bits) for r in rep.eigen_residuals],
        "pa_energies": [num_str(e, bits) for e in rep.pa_energy],
    }
    if "pa_defect" in rep.extras:
        out["pa_defect"] = real_str(rep.extras["pa_defect"], bits)
    if "hermitian" in rep.extras:
        out["hermitian"] = rep.extras["hermitian"]
        out["hermiticity_witness_count"] = rep.extras["hermiticity_witness"]
    if "Mtilde" in rep.extras:
        out["Mtilde"] = matrix_json(rep.extras["Mtilde"], bits)
        out["M"] = matrix_json(rep.extras["M"], bits)
    out["gram"] = matrix_json(rep.gram, bits)
    zs = rep.extras.get("zeros")
    if zs is not None:
        out["zeros"] = {
            "eta": [num_str(e, bits) for e in zs.eta],
            "x": [num_str(x, bits) for x in zs.x],
            "min_pair_distance": real_str(zs.min_pair_distance, bits),
            "min_deriv_magnitude": real_str(zs.min_deriv_magnitude, bits),
            "residual_bound": real_str(zs.residual_bound, bits),
        }
    if conj is not None:
        out["conjecture"] = {
            "max_rel_err": real_str(conj.max_rel_err, bits),
            "reading": conj.reading,
            "zeta": None if conj.zeta is None else num_str(conj.zeta, bits),
            "mixed_C": None if conj.mixed_C is None else num_str(conj.mixed_C, bits),
            "entries": [
                {
                    "origin": e.origin,
                    "case": e.case,
                    "predicted": num_str(e.predicted, bits),
                    "measured": num_str(e.measured, bits),
                    "rel_err": real_str(e.rel_err, bits),
                }
                for e in conj.entries
            ],
        }
    if manifest is not None:
        out["manifest"] = manifest
    return out
