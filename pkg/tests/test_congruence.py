import numpy as np
import pytest

import oracles
from weylforge.chart import OrientedChart, diagonal_metric
from weylforge.congruence import (CongruenceField, CongruenceGeometry, IneligibleCongruence,
                                  MonopoleSolution, TransportError, congruence_decompose,
                                  hypercr_residual, jacobi_transport_check, monopole_residual,
                                  weyl_invariance_check)
from weylforge.families import geodesic_symmetry, toda_cc, ward_toda
from weylforge.weyl import WeylStructure, flat_structure

R3 = OrientedChart("r3", ("x", "y", "z"), ((0.3, 1.2),) * 3, diagonal_metric(["1"] * 3))
FLAT = flat_structure(R3)
RADIAL = CongruenceField(("x", "y", "z"), normalize=True)
S3 = OrientedChart("s3", ("th", "ph", "ps"), ((0.4, 2.6), (0, 1), (0, 1)),
                   (("1/4", "0", "0"), ("0", "1/4", "cos(th)/4"), ("0", "cos(th)/4", "1/4")))


def _values(ws, chi, x):
    return CongruenceGeometry(ws, chi, np.atleast_2d(x), order=1).chi.value[0]


def _oracle(ws, chi, x):
    c = ws.chart
    met = lambda y: c.metric_jet(y[None], 0).value[0]
    om = lambda y: ws.fields(y[None], 0)[1].value[0]
    return oracles.congruence_fd(met, om, lambda y: _values(ws, chi, y), x, c.orientation)


def test_radial_congruence_in_flat_space():
    pts = R3.sample(20, 0)
    inv = congruence_decompose(FLAT, RADIAL, pts)
    r = np.linalg.norm(pts, axis=1)
    assert np.allclose(inv.tau, 1 / r, atol=1e-12)
    assert np.max(np.abs(inv.kappa)) < 1e-12
    assert np.max(np.abs(inv.Sigma)) < 1e-12
    tau, kap, sh, acc = _oracle(FLAT, RADIAL, pts[0])
    assert tau == pytest.approx(1 / r[0], rel=1e-8)
    assert abs(kap) < 1e-8 and sh < 1e-8 and acc < 1e-8


@pytest.mark.parametrize("fam", [geodesic_symmetry("1+zeta/4"), toda_cc(1, 0, 1), ward_toda("eta")],
                         ids=["gs", "toda_cc", "ward"])
def test_decomposition_matches_difference_oracle(fam):
    pts = fam.base.chart.sample(4, 5)
    cg = CongruenceGeometry(fam.base, fam.congruence, pts, order=1)
    for i, x in enumerate(pts):
        tau, kap, sh, acc = _oracle(fam.base, fam.congruence, x)
        assert cg.tau.value[i] == pytest.approx(tau, abs=1e-7)
        assert cg.kappa.value[i] == pytest.approx(kap, abs=1e-7)
        assert cg.shear_norm()[i] == pytest.approx(sh, abs=1e-7)
        assert cg.accel_norm()[i] == pytest.approx(acc, abs=1e-7)
    assert np.max(cg.reassembly_residual()) < 1e-8


def test_hopf_fibres_of_round_sphere():
    # d/dpsi has length 1/2; its fibres are the Hopf circles: geodesic, shear free, twisting
    chi = CongruenceField(("0", "0", "2"))
    cg = CongruenceGeometry(flat_structure(S3), chi, S3.sample(10, 0), order=1)
    assert np.max(cg.shear_norm()) < 1e-12 and np.max(cg.accel_norm()) < 1e-12
    assert np.max(np.abs(cg.tau.value)) < 1e-12
    assert np.allclose(np.abs(cg.kappa.value), 1.0)


def test_weighted_derivative_is_gauge_covariant():
    # shear and twist do not depend on the gauge form
    pts = R3.sample(8, 1)
    ds, dk = weyl_invariance_check(R3, RADIAL, pts, ("0", "0", "0"), ("y", "x*z", "1"))
    assert np.max(ds) < 1e-12 and np.max(dk) < 1e-12


def test_special_monopoles_on_einstein_weyl_families():
    for fam in (geodesic_symmetry("2"), toda_cc(1, 0, 1), ward_toda("eta")):
        pts = fam.base.chart.sample(20, 2)
        res = CongruenceGeometry(fam.base, fam.congruence, pts).special_monopole_residuals()
        assert max(np.max(r) for r in res) < 1e-6


def test_special_monopoles_detect_non_einstein_weyl():
    # flat metric with a non-closed gauge form: not Einstein-Weyl, d/dz still shear free and geodesic
    ws = WeylStructure(R3, ("0", "0", "x"))
    chi = CongruenceField(("0", "0", "1"))
    res = CongruenceGeometry(ws, chi, R3.sample(20, 3)).special_monopole_residuals()
    assert max(np.max(r) for r in res) > 1e-3


def test_ineligible_congruence_rejected():
    chi = CongruenceField(("1", "x", "0"), normalize=True)
    cg = CongruenceGeometry(FLAT, chi, R3.sample(5, 0))
    with pytest.raises(IneligibleCongruence):
        cg.special_monopole_residuals()


def test_monopole_residual():
    pts = R3.sample(20, 4)
    assert np.max(monopole_residual(FLAT, MonopoleSolution("1", ("0", "0", "0")), pts)) < 1e-14
    # w = z with A = x dy is a monopole on flat space; w = x with A = 0 is not
    assert np.max(monopole_residual(FLAT, MonopoleSolution("z", ("0", "x", "0")), pts)) < 1e-14
    assert np.max(monopole_residual(FLAT, MonopoleSolution("x", ("0", "0", "0")), pts)) > 0.9


def test_dirac_monopole_sign():
    r = "sqrt(x^2+y^2+z^2)"
    A = ("-(z/(2*%s))*y/(x^2+y^2)" % r, "(z/(2*%s))*x/(x^2+y^2)" % r, "0")
    pts = R3.sample(20, 5)
    assert np.max(monopole_residual(FLAT, MonopoleSolution("1/(2*%s)" % r, A), pts)) < 1e-12
    flipped = tuple("-(%s)" % a for a in A)
    assert np.max(monopole_residual(FLAT, MonopoleSolution("1/(2*%s)" % r, flipped), pts)) > 0.1


@pytest.mark.parametrize("sign", [1, -1])
def test_hypercr_round_sphere(sign):
    # round S^3 of radius 1 has scal 6, so kappa^2 = 1 and either sign gives a flat connection
    res = hypercr_residual(flat_structure(S3), str(sign), S3.sample(10, 0))
    assert max(np.max(r) for r in res) < 1e-10


def test_hypercr_flat_space():
    res = hypercr_residual(FLAT, "0", R3.sample(10, 0))
    assert max(np.max(r) for r in res) < 1e-12
    assert np.max(hypercr_residual(FLAT, "1", R3.sample(10, 0))[0]) > 0.5


def test_hypercr_geodesic_symmetry_measured_twist():
    fam = geodesic_symmetry("1+zeta/4")
    pts = fam.base.chart.sample(10, 0)
    flat, scalmon, gt, gap = hypercr_residual(fam.base, fam.kappa, pts)
    assert max(np.max(flat), np.max(scalmon), np.max(gap)) < 1e-8
    # the first order equation *D kappa = F/2 holds for the opposite sign of kappa
    assert np.max(gt) > 0.1
    assert np.max(hypercr_residual(fam.base, "-(%s)" % fam.kappa, pts)[2]) < 1e-8


def test_jacobi_transport_straight_lines():
    r = jacobi_transport_check(FLAT, (0.4, 0.4, 0.4), RADIAL, 0.8, steps=100)
    assert r.deviation < 1e-9
    end = np.linalg.norm(r.path[-1])
    assert end == pytest.approx(np.sqrt(3 * 0.16) + 0.8, rel=1e-12)
    assert r.transported[-1, 0] == pytest.approx(1 / end, rel=1e-9)


def test_jacobi_transport_geodesic_symmetry():
    fam = geodesic_symmetry("2")
    x0 = fam.base.chart.sample(1, 0)[0]
    r = jacobi_transport_check(fam.base, x0, fam.congruence, 0.3, steps=60)
    assert r.deviation < 1e-9


def test_jacobi_transport_leaves_domain():
    with pytest.raises(TransportError):
        jacobi_transport_check(FLAT, (1.0, 1.0, 1.0), RADIAL, 1.0, steps=20)
