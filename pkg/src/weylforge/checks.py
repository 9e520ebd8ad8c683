"""Registered residual suites per family, shared by the command line and the tests.

A check maps (family, sample points) to one residual per point; the suite
reports the maximum against a tolerance.  Checks are pure functions of the
family spec and the points, so point batches can be evaluated anywhere and
max-reduced afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .congruence import (CongruenceGeometry, hypercr_residual, monopole_residual)
from .families import (Family, flat_r4_congruence, geodesic_symmetry,
                       geodesic_symmetry_kappa_monopole, quotient_curvature_gap, toda_residual)
from .jones_tod import (QuotientGeometry, lift, lift_w_minus, quotient_structure,
                        roundtrip_residual)
from .weyl import WeylGeometry, ew_residual, flat_structure

TOL_IDENTITY = 1e-7
TOL_JET3 = 1e-6


@dataclass(frozen=True)
class Check:
    name: str
    fn: Callable  # (family, points, convention) -> residuals, or (residuals, measured)
    tolerance: float


@dataclass(frozen=True)
class CheckResult:
    name: str
    points: int
    max_residual: float
    tolerance: float
    passed: bool
    measured: Optional[float] = None

    def as_dict(self):
        d = {"name": self.name, "points": self.points, "max_residual": self.max_residual,
             "tolerance": self.tolerance, "pass": self.passed}
        if self.measured is not None:
            d["measured"] = self.measured
        return d


@dataclass(frozen=True)
class Suite:
    sample_chart: Callable  # family -> chart whose points feed the checks
    checks: tuple


# 3-dimensional Einstein-Weyl families


def _cg(fam, pts, order=3):
    return CongruenceGeometry(fam.base, fam.congruence, pts, order=order)


def _ew(fam, pts, conv):
    return ew_residual(fam.base, pts)


def _shear(fam, pts, conv):
    return _cg(fam, pts, 1).shear_norm()


def _accel(fam, pts, conv):
    return _cg(fam, pts, 1).accel_norm()


def _special(i):
    def fn(fam, pts, conv):
        return _cg(fam, pts).special_monopole_residuals()[i]
    return fn


def _closed_form(attr):
    def fn(fam, pts, conv):
        cg = _cg(fam, pts, 1)
        expected = fam.base.chart.scalar_jet(getattr(fam, attr), pts, 0).value
        got = cg.tau.value if attr == "tau" else cg.kappa.value
        return np.abs(got - expected)
    return fn


def _reassembly(fam, pts, conv):
    return _cg(fam, pts, 1).reassembly_residual()


def _hypercr_negated(fam, pts, conv):
    return hypercr_residual(fam.base, "-(%s)" % fam.kappa, pts)[0]


def _kappa_monopole(fam, pts, conv):
    return monopole_residual(fam.base, geodesic_symmetry_kappa_monopole(fam), pts)


def _kappa_lift_w_minus(fam, pts, conv):
    L = lift(fam.base, geodesic_symmetry_kappa_monopole(fam))
    return lift_w_minus(L, pts, convention=conv)


def _quotient_curvature(fam, pts, conv):
    return quotient_curvature_gap(fam, pts)


def _toda(fam, pts, conv):
    return np.abs(toda_residual(fam, pts))


SPECIAL_NAMES = ("short1", "short2", "creqn", "long1", "long2")


def _ew_checks(closed=("tau", "kappa")):
    out = [Check("ew_residual", _ew, TOL_JET3),
           Check("shear", _shear, TOL_IDENTITY),
           Check("acceleration", _accel, TOL_IDENTITY),
           Check("reassembly", _reassembly, 1e-8)]
    out += [Check("special_monopole_" + n, _special(i), TOL_JET3) for i, n in enumerate(SPECIAL_NAMES)]
    out += [Check(a + "_closed_form", _closed_form(a), TOL_IDENTITY) for a in closed]
    return out


def _base_chart(fam):
    return fam.base.chart


def _chart4(fam):
    return fam.chart4


# 4-dimensional checks


def _geo4(chart, pts):
    return WeylGeometry(flat_structure(chart), pts, order=2)


def _w_minus4(chart_of):
    def fn(fam, pts, conv):
        geo = _geo4(chart_of(fam), pts)
        return geo.norm(geo.w_minus(conv), ("down",) * 4)
    return fn


def _ricci4(chart_of):
    def fn(fam, pts, conv):
        geo = _geo4(chart_of(fam), pts)
        return geo.norm(geo.ricci, ("down", "down"))
    return fn


def _einstein4(chart_of):
    def fn(fam, pts, conv):
        geo = _geo4(chart_of(fam), pts)
        return geo.norm(geo.r0, ("down", "down"))
    return fn


def _scal4(chart_of):
    def fn(fam, pts, conv):
        scal = _geo4(chart_of(fam), pts).scal.value
        claim = fam.claims["scal"]
        return np.abs(scal - claim) / max(abs(claim), 1.0), scal
    return fn


def _lift_pts(fam, pts):
    return fam.lifted.points4(pts)


def _monopole(fam, pts, conv):
    return monopole_residual(fam.base, fam.monopole, pts)


def _lift_w_minus(fam, pts, conv):
    return lift_w_minus(fam.lifted, pts, convention=conv)


def _kahler_ricci(fam, pts, conv):
    return _ricci4(lambda f: f.chart4)(fam, _lift_pts(fam, pts), conv)


def _roundtrip(fam, pts, conv):
    dg, dom, dw = roundtrip_residual(fam.lifted, pts)
    return np.maximum(np.maximum(dg, dom), dw)


def _on_lift(fn):
    def wrapped(fam, pts, conv):
        return fn(fam, _lift_pts(fam, pts), conv)
    return wrapped


def _dilation_quotient(fam, pts, conv):
    q = quotient_structure(fam.chart4)
    ref = geodesic_symmetry("1/(%s)" % fam.spec.as_dict().get("h", "1"))
    base = pts[:, :3]
    a, b = WeylGeometry(q, base, 1), WeylGeometry(ref.base, base, 1)
    na = a.g0 / np.cbrt(np.linalg.det(a.g0))[:, None, None]
    nb = b.g0 / np.cbrt(np.linalg.det(b.g0))[:, None, None]
    dg = np.max(np.abs(na - nb), axis=(1, 2))
    dgam = np.max(np.abs(a.gamma.value - b.gamma.value).reshape(len(base), -1), axis=1)
    return np.maximum(dg, dgam)


def _conformal_killing(fam, pts, conv):
    return QuotientGeometry(fam.chart4, fam.K, pts, order=2).conformal_killing_residual()


def _r4_quotient_ew(fam, pts, conv):
    return ew_residual(quotient_structure(fam.chart4), pts[:, :3])


def _r4_congruence(which, attr):
    def fn(fam, pts, conv):
        base = pts[:, :3]
        q = quotient_structure(fam.chart4)
        chi, _, _ = flat_r4_congruence(fam, base, which)
        cg = CongruenceGeometry(q, None, base, order=2, chi_jet=chi)
        if attr == "eligible":
            return np.maximum(cg.shear_norm(), cg.accel_norm())
        claim = fam.claims["tau_minus" if attr == "tau" else "kappa_minus"]
        got = cg.tau.value if attr == "tau" else cg.kappa.value
        return np.abs(got - claim), got
    return fn


def _suite_geodesic_symmetry():
    return Suite(_base_chart, tuple(_ew_checks() + [
        Check("hypercr_residual", _hypercr_negated, TOL_JET3),
        Check("kappa_monopole", _kappa_monopole, TOL_IDENTITY),
        Check("kappa_lift_w_minus", _kappa_lift_w_minus, TOL_JET3),
        Check("quotient_curvature", _quotient_curvature, TOL_JET3),
    ]))


def _suite_toda():
    return Suite(_base_chart, tuple(_ew_checks() + [Check("toda_pde", _toda, 1e-9)]))


def _suite_lift(extra=()):
    return Suite(_base_chart, (
        Check("monopole", _monopole, TOL_IDENTITY),
        Check("lift_w_minus", _lift_w_minus, TOL_JET3),
        Check("roundtrip", _roundtrip, 1e-8),
    ) + tuple(extra))


SUITES = {
    "geodesic_symmetry": _suite_geodesic_symmetry,
    "ward_toda": lambda: Suite(_base_chart, tuple(_ew_checks(("kappa",)))),
    "killing_toda": lambda: Suite(_base_chart, tuple(_ew_checks(("kappa",)))),
    "ct_toda": lambda: Suite(_base_chart, tuple(_ew_checks(("kappa",)))),
    "toda_cc": _suite_toda,
    "gibbons_hawking": lambda: _suite_lift((
        Check("ricci_flat", _kahler_ricci, TOL_JET3),
        Check("w_minus", _on_lift(_w_minus4(lambda f: f.chart4)), TOL_JET3),
    )),
    "tod_monopole": lambda: _suite_lift((
        Check("einstein_residual", _on_lift(_einstein4(lambda f: f.chart4)), TOL_JET3),
        Check("measured_scal", _on_lift(_scal4(lambda f: f.chart4)), TOL_JET3),
        Check("w_minus", _on_lift(_w_minus4(lambda f: f.chart4)), TOL_JET3),
    )),
    "einstein_tod": lambda: Suite(_chart4, (
        Check("w_minus", _w_minus4(_chart4), TOL_JET3),
        Check("einstein_residual", _einstein4(_chart4), TOL_JET3),
        Check("measured_scal", _scal4(_chart4), TOL_JET3),
    )),
    "dilation_gh": lambda: Suite(_chart4, (
        Check("w_minus", _w_minus4(_chart4), TOL_JET3),
        Check("ricci_flat", _ricci4(_chart4), TOL_JET3),
        Check("quotient_vs_geodesic_symmetry", _dilation_quotient, TOL_JET3),
    )),
    "flat_r4": lambda: Suite(_chart4, (
        Check("w_minus", _w_minus4(_chart4), TOL_JET3),
        Check("conformal_killing", _conformal_killing, TOL_IDENTITY),
        Check("quotient_ew_residual", _r4_quotient_ew, TOL_JET3),
        Check("congruence_minus_eligible", _r4_congruence("minus", "eligible"), TOL_IDENTITY),
        Check("tau_minus", _r4_congruence("minus", "tau"), TOL_IDENTITY),
        Check("kappa_minus", _r4_congruence("minus", "kappa"), TOL_IDENTITY),
    )),
}


def suite_for(fam: Family) -> Suite:
    return SUITES[fam.spec.tag]()


def evaluate(fam: Family, points, convention="paper", names=None):
    """Per-check (residual array, measured array or None) on one batch of points."""
    suite = suite_for(fam)
    out = {}
    for chk in suite.checks:
        if names is not None and chk.name not in names:
            continue
        r = chk.fn(fam, points, convention)
        if isinstance(r, tuple):
            res, meas = r
        else:
            res, meas = r, None
        out[chk.name] = (np.asarray(res, dtype=float), None if meas is None else np.asarray(meas, float))
    return out


def reduce_results(fam: Family, parts, npoints, overrides=None):
    """Max-reduce per-batch outputs into :class:`CheckResult` objects, in registry order."""
    overrides = overrides or {}
    results = []
    for chk in suite_for(fam).checks:
        res = np.concatenate([p[chk.name][0] for p in parts])
        meas = [p[chk.name][1] for p in parts]
        tol = float(overrides.get(chk.name, chk.tolerance))
        worst = float(np.max(res)) if np.all(np.isfinite(res)) else float("inf")
        measured = None
        if meas[0] is not None:
            measured = float(np.mean(np.concatenate(meas)))
        results.append(CheckResult(chk.name, npoints, worst, tol, worst < tol, measured))
    return results
