import numpy as np
import pytest

from weylforge.congruence import CongruenceField, IneligibleCongruence, MonopoleSolution
from weylforge.families import (dirac_potential, flat_r3, geodesic_symmetry,
                                geodesic_symmetry_kappa_monopole, gibbons_hawking, tod_monopole, toda_cc)
from weylforge.jones_tod import (NotAMonopole, NotConformal, QuotientGeometry, csthm_selfduality,
                                 dsd_residual, j_from_congruence, lift, lift_w_minus,
                                 maxwell_from_monopole, quotient, quotient_structure, roundtrip_residual)
from weylforge.weyl import WeylGeometry, ew_residual, flat_structure

TN_W = "1 + 1/(2*r)"


@pytest.fixture(scope="module")
def taub_nut():
    return gibbons_hawking(TN_W, dirac_potential(1.0))


def test_taub_nut_is_ricci_flat_and_selfdual(taub_nut):
    pts = taub_nut.lifted.points4(taub_nut.base.chart.sample(40, 0))
    geo = WeylGeometry(flat_structure(taub_nut.chart4), pts, order=2)
    assert np.max(geo.norm(geo.ricci, ("down", "down"))) < 1e-7
    assert np.max(geo.norm(geo.w_minus(), ("down",) * 4)) < 1e-7
    # W+ is not zero: the check is not vacuous
    assert np.max(geo.norm(geo.w_plus(), ("down",) * 4)) > 1e-2


def test_conformal_lift_also_selfdual(taub_nut):
    assert np.max(lift_w_minus(taub_nut.lifted, taub_nut.base.chart.sample(20, 1))) < 1e-7


def test_non_monopole_control():
    base = flat_structure(flat_r3())
    L = lift(base, MonopoleSolution("x", ("0", "0", "0")))
    assert np.max(lift_w_minus(L, base.chart.sample(20, 0))) > 1e-3


def test_lift_rejects_bad_inputs():
    base = flat_structure(flat_r3())
    with pytest.raises(ValueError):
        lift(base, MonopoleSolution("1", ("0", "0")))
    with pytest.raises(ValueError):
        lift(base, MonopoleSolution("1", ("0", "0", "0")), gauge="other")


def _roundtrip_cases():
    flat = flat_structure(flat_r3())
    gs = geodesic_symmetry("2")
    td = toda_cc(1, 0, 1)
    return [
        ("flat", lift(flat, MonopoleSolution(TN_W, dirac_potential(1.0)))),
        ("gs", lift(gs.base, geodesic_symmetry_kappa_monopole(gs))),
        ("toda_cc", lift(td.base, tod_monopole(td, 1, 0).monopole)),
    ]


@pytest.mark.parametrize("name,L", _roundtrip_cases(), ids=lambda v: v if isinstance(v, str) else "")
def test_roundtrip(name, L):
    dg, dom, dw = roundtrip_residual(L, L.base.chart.sample(30, 2))
    assert max(dg.max(), dom.max(), dw.max()) < 1e-8


def test_quotient_gauge_form_independent_of_representative():
    gs = geodesic_symmetry("1+zeta/4")
    m = geodesic_symmetry_kappa_monopole(gs)
    pts = gs.base.chart.sample(10, 3)
    outs = []
    for gauge in ("conformal", "kahler", "unit"):
        L = lift(gs.base, m, gauge=gauge)
        q = QuotientGeometry(L.chart4, L.K, L.points4(pts), order=2)
        outs.append(q.omega_cl.value)
    assert np.allclose(outs[0], outs[1], atol=1e-12) and np.allclose(outs[0], outs[2], atol=1e-12)


def test_quotient_of_lift_is_einstein_weyl():
    gs = geodesic_symmetry("1+zeta/4")
    L = lift(gs.base, geodesic_symmetry_kappa_monopole(gs))
    q = quotient_structure(L.chart4)
    assert np.max(ew_residual(q, gs.base.chart.sample(10, 0))) < 1e-6


def test_quotient_data_matches_base(taub_nut):
    pts = taub_nut.base.chart.sample(5, 0)
    L = taub_nut.lifted
    d = quotient(L.chart4, L.K, L.points4(pts))
    g, om = L.base.fields(pts, 0)
    assert np.allclose(d.metric, g.value, atol=1e-12)
    assert np.allclose(d.omega, 0, atol=1e-12)


def test_dsd_is_selfdual_on_selfdual_lifts(taub_nut):
    L = taub_nut.lifted
    asd, tf = dsd_residual(L.chart4, L.K, L.points4(L.base.chart.sample(20, 0)))
    assert np.max(asd) < 1e-8 and np.max(tf) < 1e-8


def test_non_conformal_field_rejected(taub_nut):
    L = taub_nut.lifted
    with pytest.raises(NotConformal):
        dsd_residual(L.chart4, ("x", "0", "0", "1"), L.points4(L.base.chart.sample(5, 0)))


def _csthm_cases():
    gs = geodesic_symmetry("1+zeta/4")
    gs2 = geodesic_symmetry("2")
    td = toda_cc(1, 0, 1)
    tn = gibbons_hawking(TN_W, dirac_potential(1.0))
    return [
        ("gs", lift(gs.base, geodesic_symmetry_kappa_monopole(gs)), gs.congruence),
        ("gs2", lift(gs2.base, geodesic_symmetry_kappa_monopole(gs2)), gs2.congruence),
        ("toda_cc", lift(td.base, tod_monopole(td, 1, 0).monopole), td.congruence),
        ("taub_nut", tn.lifted, tn.congruence),
    ]


CSTHM = _csthm_cases()


@pytest.mark.parametrize("name,L,chi", CSTHM, ids=[c[0] for c in CSTHM])
def test_invariant_complex_structure(name, L, chi):
    pts = L.base.chart.sample(15, 0)
    d = j_from_congruence(L, chi, pts)
    assert np.max(d.dj) < 1e-7
    assert np.max(d.kw_gap) < 1e-7
    assert np.max(d.twist_gap) < 1e-7
    J = d.J
    assert np.allclose(np.einsum("nij,njk->nik", J, J), -np.eye(4), atol=1e-12)


@pytest.mark.parametrize("name,L,chi", CSTHM, ids=[c[0] for c in CSTHM])
def test_ricci_and_faraday_forms_selfdual(name, L, chi):
    rho_m, F_m = csthm_selfduality(L, chi, L.base.chart.sample(10, 0))
    assert np.max(rho_m) < 1e-7 and np.max(F_m) < 1e-7


def test_shear_perturbation_breaks_dj():
    L, chi = CSTHM[0][1], CSTHM[0][2]
    bent = CongruenceField(tuple("(%s) + %s" % (c, e) for c, e in zip(chi.components, ("0.01*x", "-0.01*y", "0"))),
                           normalize=True)
    pts = L.base.chart.sample(15, 0)
    with pytest.raises(IneligibleCongruence):
        j_from_congruence(L, bent, pts)
    assert np.max(j_from_congruence(L, bent, pts, check=False).dj) > 1e-4


def test_csthm_needs_conformal_gauge():
    gs = geodesic_symmetry("2")
    L = lift(gs.base, geodesic_symmetry_kappa_monopole(gs), gauge="kahler")
    with pytest.raises(ValueError):
        j_from_congruence(L, gs.congruence, gs.base.chart.sample(3, 0))


def test_maxwell_field_from_second_monopole(taub_nut):
    pts = taub_nut.base.chart.sample(15, 0)
    asd, sd = maxwell_from_monopole(taub_nut.lifted, MonopoleSolution("z", ("0", "x", "0")), pts)
    assert np.max(asd) < 1e-10 and np.max(sd) > 1e-3
    with pytest.raises(NotAMonopole):
        maxwell_from_monopole(taub_nut.lifted, MonopoleSolution("x", ("0", "0", "0")), pts)
