"""Acceptance criteria, one test and one PASS/FAIL line each (see the terminal summary)."""

import time

import numpy as np
import pytest

import oracles
from weylforge.chart import OrientedChart, diagonal_metric
from weylforge.congruence import CongruenceField, CongruenceGeometry, MonopoleSolution, hypercr_residual
from weylforge.families import (ct_toda, dirac_potential, einstein_tod, flat_r3, flat_r4, flat_r4_congruence,
                                geodesic_symmetry, geodesic_symmetry_kappa_monopole, gibbons_hawking,
                                killing_toda, tod_monopole, toda_cc, toda_residual, ward_toda)
from weylforge.forms import exterior_d, hodge_star
from weylforge.jets import Jet
from weylforge.jones_tod import (csthm_selfduality, j_from_congruence, lift, lift_w_minus,
                                 quotient_structure, roundtrip_residual)
from weylforge.weyl import (KahlerWeyl, WeylGeometry, WeylStructure, einstein_data, ew_residual,
                            flat_structure, weyl_connection, wform_routes)

N = 100


def _g(x):
    return "%.2e" % x


def test_criterion_01_einstein_scalar_curvature(criterion):
    parts, ok, worst_t = [], True, 0.0
    for abc, target in (((1, 0, 1), -6.0), ((0, 1, 1), 0.0), ((1, 0, 0), 0.0), ((1, 1, 0), 0.0)):
        t0 = time.perf_counter()
        fam = einstein_tod(*abc)
        scal, _ = einstein_data(flat_structure(fam.chart4), fam.chart4.sample(N, 0))
        dt = time.perf_counter() - t0
        worst_t = max(worst_t, dt)
        if target:
            err = np.max(np.abs(scal - target)) / abs(target)
            good = err < 1e-6
            parts.append("%s scal %.9f (rel %s)" % (abc, np.mean(scal), _g(err)))
        else:
            err = np.max(np.abs(scal))
            good = err < 1e-6
            parts.append("%s |scal| %s" % (abc, _g(err)))
        ok &= good and dt < 10
    criterion(1, ok, "; ".join(parts), worst_t)
    assert ok


def test_criterion_02_jones_tod_forward(criterion):
    t0 = time.perf_counter()
    tn = gibbons_hawking("1 + 1/(2*r)", dirac_potential(1.0))
    pts = tn.lifted.points4(tn.base.chart.sample(N, 0))
    geo = WeylGeometry(flat_structure(tn.chart4), pts, order=2)
    wm = np.max(geo.norm(geo.w_minus(), ("down",) * 4))
    ric = np.max(geo.norm(geo.ricci, ("down", "down")))
    base = flat_structure(flat_r3())
    ctrl = np.max(lift_w_minus(lift(base, MonopoleSolution("x", ("0", "0", "0"))), base.chart.sample(N, 0)))
    dt = time.perf_counter() - t0
    ok = wm < 1e-7 and ric < 1e-7 and ctrl > 1e-3 and dt < 20
    criterion(2, ok, "Taub-NUT W- %s, Ricci %s; control (w=x) W- %s" % (_g(wm), _g(ric), _g(ctrl)), dt)
    assert ok


def test_criterion_03_roundtrip(criterion):
    t0 = time.perf_counter()
    gs, td = geodesic_symmetry("2"), toda_cc(1, 0, 1)
    cases = {
        "flat": lift(flat_structure(flat_r3()), MonopoleSolution("1 + 1/(2*r)", dirac_potential(1.0))),
        "gs H=2": lift(gs.base, geodesic_symmetry_kappa_monopole(gs)),
        "toda_cc(1,0,1)": lift(td.base, tod_monopole(td, 1, 0).monopole),
    }
    worst = {}
    for name, L in cases.items():
        worst[name] = max(np.max(r) for r in roundtrip_residual(L, L.base.chart.sample(N, 1)))
    ok = max(worst.values()) < 1e-8
    criterion(3, ok, ", ".join("%s %s" % (k, _g(v)) for k, v in worst.items()), time.perf_counter() - t0)
    assert ok


def test_criterion_04_geodesic_symmetry(criterion):
    t0 = time.perf_counter()
    parts, ok = [], True
    for H in ("1", "i", "2", "1+zeta/4"):
        fam = geodesic_symmetry(H)
        c = fam.base.chart
        pts = c.sample(N, 2)
        ew = np.max(ew_residual(fam.base, pts))
        cg = CongruenceGeometry(fam.base, fam.congruence, pts, order=1)
        # (i/2)(H - Hbar) = -Im H and (H + Hbar)/4 = Re H / 2
        dtau = np.max(np.abs(cg.tau.value + c.scalar_jet("im(H)", pts, 0).value))
        dkap = np.max(np.abs(cg.kappa.value - c.scalar_jet("re(H)", pts, 0).value / 2))
        hcr = np.max(hypercr_residual(fam.base, "-(%s)" % fam.kappa, pts)[0])
        good = ew < 1e-6 and dtau < 1e-7 and dkap < 1e-7 and hcr < 1e-6
        ok &= good
        parts.append("H=%s ew %s tau %s kappa %s hyperCR(-kappa) %s" % (H, _g(ew), _g(dtau), _g(dkap), _g(hcr)))
    criterion(4, ok, "; ".join(parts), time.perf_counter() - t0)
    assert ok


def _ew_families():
    return {
        "gs 1+zeta/4": geodesic_symmetry("1+zeta/4"),
        "gs i": geodesic_symmetry("i"),
        "gibbons_hawking": gibbons_hawking("1 + 1/(2*r)", dirac_potential(1.0)),
        "ward eta": ward_toda("eta"),
        "ward eta^2-rho^2/2": ward_toda("eta^2 - rho^2/2"),
        "killing (1,1)": killing_toda("zeta", 1, 1),
        "toda_cc(1,0,1)": toda_cc(1, 0, 1),
        "toda_cc(0,1,1)": toda_cc(0, 1, 1),
        "ct_toda zeta/3": ct_toda("zeta/3"),
    }


def test_criterion_05_special_monopoles(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for fam in _ew_families().values():
        res = CongruenceGeometry(fam.base, fam.congruence, fam.base.chart.sample(N, 3)).special_monopole_residuals()
        worst = max(worst, max(np.max(r) for r in res))
    # flat metric, gauge form x dz: d/dz is shear free and geodesic but the space is not Einstein-Weyl
    r3 = flat_r3()
    ctrl_ws = WeylStructure(r3, ("0", "0", "x"))
    res = CongruenceGeometry(ctrl_ws, CongruenceField(("0", "0", "1")), r3.sample(N, 3)).special_monopole_residuals()
    ctrl = max(np.max(r) for r in res)
    ok = worst < 1e-6 and ctrl > 1e-3
    criterion(5, ok, "max over %d EW families %s; non-EW control %s" % (len(_ew_families()), _g(worst), _g(ctrl)),
              time.perf_counter() - t0)
    assert ok


def _lifts():
    gs, gs2, td = geodesic_symmetry("1+zeta/4"), geodesic_symmetry("2"), toda_cc(1, 0, 1)
    tn = gibbons_hawking("1 + 1/(2*r)", dirac_potential(1.0))
    return {
        "gs 1+zeta/4": (lift(gs.base, geodesic_symmetry_kappa_monopole(gs)), gs.congruence),
        "gs 2": (lift(gs2.base, geodesic_symmetry_kappa_monopole(gs2)), gs2.congruence),
        "toda_cc": (lift(td.base, tod_monopole(td, 1, 0).monopole), td.congruence),
        "taub-nut": (tn.lifted, tn.congruence),
    }


def test_criterion_06_complex_structure(criterion):
    t0 = time.perf_counter()
    lifts = _lifts()
    dj = {k: np.max(j_from_congruence(L, chi, L.base.chart.sample(N, 4)).dj) for k, (L, chi) in lifts.items()}
    L, chi = lifts["gs 1+zeta/4"]
    bent = CongruenceField(tuple("(%s) + %s" % (c, e) for c, e in zip(chi.components, ("0.01*x", "-0.01*y", "0"))),
                           normalize=True)
    pts = L.base.chart.sample(N, 4)
    shear = np.max(CongruenceGeometry(L.base, bent, pts, order=1).shear_norm())
    pert = np.max(j_from_congruence(L, bent, pts, check=False).dj)
    ok = max(dj.values()) < 1e-7 and pert > 1e-4
    criterion(6, ok, "DJ %s; sheared (|Sigma| %s) DJ %s" % (
        ", ".join("%s %s" % (k, _g(v)) for k, v in dj.items()), _g(shear), _g(pert)), time.perf_counter() - t0)
    assert ok


def _kw_chart(name, second, factor):
    metric = diagonal_metric([factor, "%s*sin(th)^2" % factor, factor, "%s*(%s)" % (factor, second)])
    return OrientedChart(name, ("th", "ph", "x", "y"), ((0.5, 2.5), (0, 1), (-1, 1), (0.3, 1)), metric)


KW_CHARTS = [
    (_kw_chart("s2xr2", "1", "exp(2*(0.3*x + 0.2*th*y))"),
     (("0", "-sin(th)", "0", "0"), ("1/sin(th)", "0", "0", "0"), ("0", "0", "0", "-1"), ("0", "0", "1", "0"))),
    # S^2 x H^2 with the hyperbolic factor dx^2 + e^x dy^2 (curvature -1/4, so not conformally flat)
    (_kw_chart("s2xh2", "exp(x)", "(1 + th*y^2/4)"),
     (("0", "-sin(th)", "0", "0"), ("1/sin(th)", "0", "0", "0"),
      ("0", "0", "0", "-exp(x/2)"), ("0", "0", "exp(-x/2)", "0"))),
]


def test_criterion_07_wform(criterion):
    t0 = time.perf_counter()
    gaps, sizes = [], []
    for chart, J in KW_CHARTS:
        kw = KahlerWeyl(chart, J)
        pts = chart.sample(N, 5)
        kw.check(pts)
        geo = WeylGeometry(kw.structure(), pts, order=2)
        w1, w2 = wform_routes(geo, kw.g_and_J(pts, 0)[1].value, kw.j_orientation(pts))
        gaps.append(np.max(np.abs(w1 - w2)))
        sizes.append(np.max(np.abs(w1)))
    sd = []
    for L, chi in _lifts().values():
        rho_m, F_m = csthm_selfduality(L, chi, L.base.chart.sample(N, 5))
        sd.append(max(np.max(rho_m), np.max(F_m)))
    ok = max(gaps) < 1e-8 and min(sizes) > 1e-2 and max(sd) < 1e-7
    criterion(7, ok, "two-route W- gap %s (|W-| >= %.2f); ASD parts of rho, F on lifts %s" % (
        _g(max(gaps)), min(sizes), _g(max(sd))), time.perf_counter() - t0)
    assert ok


def test_criterion_08_tod_prescription(criterion):
    t0 = time.perf_counter()
    fam = tod_monopole(toda_cc(1, 0, 1), 1, 0)
    pts = fam.lifted.points4(fam.base.chart.sample(N, 6))
    scal, tf = einstein_data(flat_structure(fam.chart4), pts)
    rel = np.max(np.abs(scal + 12.0)) / 12.0
    ok = np.max(tf) < 1e-6 and rel < 1e-6
    criterion(8, ok, "Einstein residual %s, scal %.9f (rel %s)" % (_g(np.max(tf)), np.mean(scal), _g(rel)),
              time.perf_counter() - t0)
    assert ok


def test_criterion_09_flat_r4_predictions(criterion):
    t0 = time.perf_counter()
    a, b, c = 1, 1, 0
    fam = flat_r4(a, b, c)
    pts = fam.chart4.sample(N, 7)[:, :3]
    q = quotient_structure(fam.chart4)
    meas = {}
    for which in ("minus", "tilde"):
        chi, _, _ = flat_r4_congruence(fam, pts, which)
        cg = CongruenceGeometry(q, None, pts, order=2, chi_jet=chi)
        cg.require_eligible()
        meas[which] = (cg.tau.value, cg.kappa.value)
    # K is unit in the chart gauge, so the predictions are b + c and a
    tau, kap = meas["minus"]
    dtau, dkap = np.max(np.abs(tau - (b + c))), np.max(np.abs(kap - a))
    ok = dtau < 1e-7 and dkap < 1e-7
    tt, kt = meas["tilde"]
    criterion(9, ok, "J-K: tau %.6f (err %s), kappa %.6f (err %s); info: J~-K gives tau %.6f, kappa %.6f" % (
        np.mean(tau), _g(dtau), np.mean(kap), _g(dkap), np.mean(tt), np.mean(kt)), time.perf_counter() - t0)
    assert ok


def test_criterion_10_toda_pde(criterion):
    t0 = time.perf_counter()
    cases = [(1, 0, 1), (1, 2, 1), (1, 3, 1), (0, 0, 1), (0, 1, 1), (-1, 0, 4)]
    worst = {abc: np.max(np.abs(toda_residual(toda_cc(*abc), toda_cc(*abc).base.chart.sample(N, 8))))
             for abc in cases}
    ok = max(worst.values()) < 1e-9
    criterion(10, ok, "max %s over %s" % (_g(max(worst.values())), " ".join(str(k) for k in cases)),
              time.perf_counter() - t0)
    assert ok


LUMPY = OrientedChart("lumpy", ("x", "y", "z"), ((0.2, 1), (0.2, 1), (0.2, 1)),
                      (("1 + x^2", "x*y/3", "0"), ("x*y/3", "2 + sin(z)", "y/5"), ("0", "y/5", "exp(x*z)")))


def _lumpy_metric(p):
    x, y, z = p
    return np.array([[1 + x * x, x * y / 3, 0], [x * y / 3, 2 + np.sin(z), y / 5], [0, y / 5, np.exp(x * z)]])


def _lumpy_omega(p):
    x, y, z = p
    return np.array([y * z, x * x / 2, np.sin(x * y)])


def test_criterion_11_oracle_gate(criterion):
    t0 = time.perf_counter()
    ws = WeylStructure(LUMPY, ("y*z", "x^2/2", "sin(x*y)"))
    pts = LUMPY.sample(10, 9)
    geo = WeylGeometry(ws, pts, order=2)
    rel_g, rel_r = 0.0, 0.0
    for i, p in enumerate(pts[:5]):
        gam = oracles.weyl_gamma(_lumpy_metric, _lumpy_omega, p)
        rel_g = max(rel_g, np.max(np.abs(geo.gamma.value[i] - gam)) / np.max(np.abs(gam)))
        R = oracles.riemann(_lumpy_metric, _lumpy_omega, p)
        rel_r = max(rel_r, np.max(np.abs(geo.R.value[i] - R)) / np.max(np.abs(R)))
    alpha = LUMPY.field_jet(["sin(y*z) + x^2", "exp(x - z)", "x*y*z + cos(x)"], pts, 3)
    dd = np.max(np.abs(exterior_d(exterior_d(alpha)).value))
    rng = np.random.default_rng(0)
    hodge = 0.0
    for k in range(4):
        m = rng.normal(size=(4, 4))
        G = Jet([(m @ m.T + 4 * np.eye(4))[None]], 4)
        t = rng.normal(size=(4,) * k) if k else np.array(1.3)
        if k >= 2:
            from weylforge.forms import antisymmetrize
            t = antisymmetrize(Jet([t[None]], 4)).value[0]
        a = Jet([t[None]], 4)
        diff = hodge_star(a, G, 1, "paper").value - (-1) ** (k * (k - 1) // 2) * hodge_star(a, G, 1, "tilde").value
        hodge = max(hodge, float(np.max(np.abs(diff))))
    reas = max(np.max(geo.reassembly_residual()),
               np.max(WeylGeometry(flat_structure(KW_CHARTS[1][0]), KW_CHARTS[1][0].sample(10, 9)).reassembly_residual()))
    ok = rel_g < 1e-5 and rel_r < 1e-5 and dd < 1e-10 and hodge == 0.0 and reas < 1e-8
    criterion(11, ok, "jet/FD rel: symbols %s, curvature %s; d(d) %s; Hodge relation %s; reassembly %s" % (
        _g(rel_g), _g(rel_r), _g(dd), _g(hodge), _g(reas)), time.perf_counter() - t0)
    assert ok
