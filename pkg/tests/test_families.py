"""Family data gates: eigenrelations, virtual states, energies, norms."""

from fractions import Fraction

import mpmath as mp
import pytest

from casoratia.families import (FAMILIES, calibrate_twist, draw_params,
                                params_from_values, validate_physical)
from casoratia.identities import recurrence_coeffs
from casoratia.numkernel import workbits

TAGS = ["ch", "w", "aw"]


def _eigen_residual(fam, lam, p, E, u):
    um = fam.shift_arg(u, -1, lam)
    up = fam.shift_arg(u, 1, lam)
    pu = p(fam.eta_at(u, lam))
    t1 = fam.v_at(lam.a, u, lam) * (p(fam.eta_at(um, lam)) - pu)
    t2 = fam.v_star_at(lam.a, u, lam) * (p(fam.eta_at(up, lam)) - pu)
    r = t1 + t2 - E * pu
    return abs(r) / (abs(t1) + abs(t2) + abs(E * pu) + 1)


@pytest.mark.parametrize("tag", TAGS)
@pytest.mark.parametrize("mode", ["physical", "generic"])
def test_base_eigenrelation_gate(tag, mode):
    with workbits(256):
        fam = FAMILIES[tag]
        lam = draw_params(tag, mode, seed=17)
        tol = mp.mpf(2) ** -128
        for n in range(9):
            p = fam.base_poly(n, lam)
            E = fam.energy(n, lam)
            for u in fam.sample_args(20, lam, f"t{n}"):
                assert _eigen_residual(fam, lam, p, E, u) <= tol
            assert p.degree == n


@pytest.mark.parametrize("tag", TAGS)
@pytest.mark.parametrize("vtype", ["I", "II"])
def test_virtual_gate(tag, vtype):
    with workbits(256):
        fam = FAMILIES[tag]
        lam = draw_params(tag, "physical", seed=23)
        ta = fam.twist_a(vtype, lam)
        tlam = lam.with_a(ta)
        tol = mp.mpf(2) ** -128
        for v in range(7):
            xi = fam.base_poly(v, lam, a=ta)
            assert xi.degree == v
            Ev = fam.energy(v, tlam)
            for u in fam.sample_args(8, lam, f"v{v}"):
                assert _eigen_residual(fam, tlam, xi, Ev, u) <= tol
            # physical-mode negativity holds within the draw's degree margin
            if v <= 3:
                ev = mp.mpc(fam.etilde(vtype, v, lam))
                assert mp.re(ev) < 0 and abs(mp.im(ev)) < 1e-20


@pytest.mark.parametrize("tag", TAGS)
def test_twist_calibration(tag):
    with workbits(256):
        lam = draw_params(tag, "generic", seed=5)
        for vtype in ("I", "II"):
            alpha, e0, worst = calibrate_twist(lam, vtype)
            assert worst <= mp.mpf(2) ** -100


def test_energy_examples():
    with workbits(192):
        for tag in TAGS:
            fam = FAMILIES[tag]
            lam = draw_params(tag, "physical", seed=2)
            assert abs(mp.mpc(fam.energy(0, lam))) == 0
            if tag in ("ch", "w"):
                assert abs(mp.mpc(fam.energy(1, lam)) - mp.mpc(lam.b1())) < mp.mpf(2) ** -150
            else:
                q = mp.mpc(lam.q)
                want = (1 / q - 1) * (1 - mp.mpc(lam.b4()))
                assert abs(mp.mpc(fam.energy(1, lam)) - want) < mp.mpf(2) ** -150


def test_ch_p1_closed_form():
    with workbits(192):
        lam = draw_params("ch", "physical", seed=9)
        a1, a2, a3, a4 = (mp.mpc(x) for x in lam.a)
        b1 = a1 + a2 + a3 + a4
        p1 = FAMILIES["ch"].base_poly(1, lam)
        for eta in (mp.mpc("0.3", "0.2"), mp.mpc(-1), mp.mpc(2, -1)):
            want = 1j * ((a1 + a3) * (a1 + a4) - b1 * (a1 + 1j * eta))
            assert abs(p1(eta) - want) < mp.mpf(2) ** -140


def test_virtual_energy_factorizations():
    with workbits(192):
        lam = draw_params("w", "physical", seed=4)
        fam = FAMILIES["w"]
        a1, a2, a3, a4 = (mp.mpc(x) for x in lam.a)
        for n in range(4):
            for v in range(4):
                lhs = mp.mpc(fam.energy(n, lam)) - mp.mpc(fam.etilde("I", v, lam))
                rhs = (n + a1 + a2 - v - 1) * (n + a3 + a4 + v)
                assert abs(lhs - rhs) < mp.mpf(2) ** -140
        lam = draw_params("aw", "physical", seed=4)
        fam = FAMILIES["aw"]
        a1, a2, a3, a4 = (mp.mpc(x) for x in lam.a)
        q = mp.mpc(lam.q)
        for n in range(4):
            for v in range(4):
                lhs = q ** n * (mp.mpc(fam.energy(n, lam)) - mp.mpc(fam.etilde("I", v, lam)))
                rhs = (1 - a1 * a2 * q ** (n - v - 1)) * (1 - a3 * a4 * q ** (n + v))
                assert abs(lhs - rhs) / abs(rhs) < mp.mpf(2) ** -140


def test_w_documented_virtual_energy():
    with workbits(128):
        lam = params_from_values("w", [("1.5", 0), ("1.5", 0), ("0.5", 0), ("0.5", 0)])
        got = mp.mpc(FAMILIES["w"].etilde("I", 0, lam))
        assert abs(got - (-2)) < 1e-30


@pytest.mark.parametrize("tag", TAGS)
def test_h_ratio_against_recurrence(tag):
    """h_{n+1}/h_n = A_n / C_{n+1}: transcription-free cross-check of the norms."""
    with workbits(256):
        lam = draw_params(tag, "physical", seed=8)
        fam = FAMILIES[tag]
        rec = recurrence_coeffs(lam, 6, bits=256)
        assert rec.residual < mp.mpf(2) ** -128
        for n in range(5):
            want = mp.mpc(rec.C[n + 1]) / mp.mpc(rec.A[n])
            got = mp.mpc(fam.h_ratio_base(n + 1, n, lam))
            assert abs(got - want) / abs(want) < mp.mpf(2) ** -120


def test_validate_physical():
    lam = draw_params("ch", "physical", seed=1)
    assert validate_physical(lam)
    lam = draw_params("w", "physical", seed=1)
    assert validate_physical(lam)
    lam_bad = lam.with_a((lam.a[0] + 1j, lam.a[1], lam.a[2], lam.a[3]))
    assert not validate_physical(lam_bad)


def test_params_file_roundtrip(tmp_path):
    lam = params_from_values("aw", [("0.85", "0"), ("0.8", "0"), ("0.6", "0.2"), ("0.6", "-0.2")],
                             q_val="0.4", mode="physical")
    assert validate_physical(lam)
    assert lam.digest() == params_from_values(
        "aw", [("0.85", "0"), ("0.8", "0"), ("0.6", "0.2"), ("0.6", "-0.2")],
        q_val="0.4", mode="physical").digest()
