"""Selfdual spaces with a conformal vector field and their Einstein-Weyl quotients.

Lift: a Weyl 3-space (g_B, omega_B) with a monopole (w, A) gives the 4-metric

    g_M = g_B + w^-2 (dt + A)^2     (coordinates: base coordinates, then t)

with K = d/dt; other representatives are w g_M and w^2 g_M.  The orientation
of the lift is the base orientation followed by t, which realises
*(xi ∧ alpha) = *_B alpha for xi = K/|K|.

Quotient: for a conformal field K on a 4-chart the Weyl structure of the
quotient is D^|K| + omega_CL with

    omega_CL = -(*dK♭)(K, .) / <K, K>,

which does not depend on the representative metric.  In the gauge of the
horizontal part of the chart metric the gauge form is omega_CL - d log|K|.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chart import OrientedChart
from .congruence import (CongruenceGeometry, MonopoleSolution, monopole_residual)
from .forms import (exterior_d, frame_norm, hodge_star, sd_asd_split, two_form_inner, wedge)
from .jets import MAX_ORDER, Jet, contract, inverse
from .weyl import (JetWeylStructure, WeylGeometry, WeylStructure, dj_residual, kw_omega,
                   levi_civita_symbols, weyl_symbols)

GAUGES = {"conformal": 0, "kahler": 1, "unit": 2}
CONFORMAL_TOL = 1e-7


class NotAMonopole(ValueError):
    """A pair (w, A) failed the monopole equation."""


class NotConformal(ValueError):
    """The vector field is not conformal, or vanishes, at some sample point."""


@dataclass(frozen=True)
class LiftedChart:
    chart4: OrientedChart
    base: WeylStructure
    monopole: MonopoleSolution
    gauge: str = "conformal"

    @property
    def K(self):
        return ("0",) * 3 + ("1",)

    def points4(self, base_points, t=None):
        base_points = np.atleast_2d(base_points)
        lo, hi = self.chart4.box[3]
        t = 0.5 * (lo + hi) if t is None else t
        return np.column_stack([base_points, np.full(len(base_points), t)])

    def structure(self) -> WeylStructure:
        return WeylStructure(self.chart4, ("0",) * 4)


def lift(base: WeylStructure, m: MonopoleSolution, gauge="conformal", t_box=(0.0, 1.0)):
    """The 4-chart over ``base`` determined by the monopole ``m``."""
    if base.dim != 3:
        raise ValueError("lifts start from a 3-dimensional Weyl structure")
    if gauge not in GAUGES:
        raise ValueError("gauge must be one of %s" % ", ".join(GAUGES))
    c = base.chart
    if len(m.A) != 3:
        raise ValueError("the potential needs three components")
    w, A = "(%s)" % m.w, ["(%s)" % a for a in m.A]
    scale = {"conformal": "", "kahler": "%s*" % w, "unit": "%s^2*" % w}[gauge]
    inv = {"conformal": "/%s^2" % w, "kahler": "/%s" % w, "unit": ""}[gauge]
    metric = [[None] * 4 for _ in range(4)]
    for i in range(3):
        for j in range(3):
            metric[i][j] = "%s(%s) + %s*%s%s" % (scale, c.metric[min(i, j)][max(i, j)],
                                                A[min(i, j)], A[max(i, j)], inv)
        metric[i][3] = metric[3][i] = "%s%s" % (A[i], inv or "*1")
    metric[3][3] = "1%s" % inv
    chart4 = OrientedChart(
        name=c.name + "+t", coords=tuple(c.coords) + ("t",), box=tuple(c.box) + (tuple(t_box),),
        metric=tuple(tuple(r) for r in metric), orientation=c.orientation,
        guards=tuple(c.guards) + ("%s^2" % w,), macros=c.macros,
        notes={"lift_of": c.name, "gauge": gauge})
    return LiftedChart(chart4, base, m, gauge)


# quotients


def _k_jet(chart, K, points, order):
    if isinstance(K, Jet):
        return K
    return chart.field_jet(list(K), points, order)


class QuotientGeometry:
    """Pointwise quotient data of a 4-chart by a conformal vector field K."""

    def __init__(self, chart: OrientedChart, K, points, order=3, metric_fn=None):
        self.chart = chart
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        if metric_fn is None:
            self.g = chart.metric_jet(self.points, order)
        else:
            self.g = metric_fn(self.points, order)
        self.K = _k_jet(chart, K, self.points, order)
        self.orientation = chart.orientation
        kk = self.K_flat.truncate(0)
        norm2 = contract("i,i->", kk, self.K.truncate(0)).value
        if np.any(norm2 <= 0) or not np.all(np.isfinite(norm2)):
            raise NotConformal("K vanishes at a sample point")

    @cached_property
    def ginv(self):
        return inverse(self.g)

    @cached_property
    def K_flat(self):
        return contract("ij,j->i", self.g, self.K)

    @cached_property
    def norm2(self):
        return contract("i,i->", self.K_flat, self.K)

    @cached_property
    def dK(self):
        return exterior_d(self.K_flat)

    @cached_property
    def omega_cl(self):
        """-(*dK♭)(K, .)/<K,K> as a jet one order below dK."""
        dK = self.dK
        o = dK.order
        s = hodge_star(dK, self.g.truncate(o), self.orientation, "paper", self.ginv.truncate(o))
        return contract("i,ij->j", self.K.truncate(o), s) * (self.norm2.truncate(o).reciprocal() * -1.0)

    @cached_property
    def log_norm(self):
        return self.norm2.log() * 0.5

    @cached_property
    def omega(self):
        """Gauge form of D^B relative to the chart metric."""
        dl = self.log_norm.grad()
        o = min(dl.order, self.omega_cl.order)
        return self.omega_cl.truncate(o) - dl.truncate(o)

    @cached_property
    def horizontal_metric(self):
        kb = self.K_flat
        return self.g - contract("i,j->ij", kb, kb) * self.norm2.reciprocal()

    @cached_property
    def w(self):
        return self.log_norm.exp().reciprocal()

    def conformal_killing_residual(self):
        """Trace-free symmetric part of D^g K♭, measured in the gauge where |K| = 1."""
        gam = levi_civita_symbols(self.g, self.ginv)
        dk = self.K_flat.grad()  # [j, i] = d_i K_j
        o = dk.order
        nab = dk.transpose(1, 0) - contract("kij,k->ij", gam.truncate(o), self.K_flat.truncate(o))
        sym = (nab + nab.transpose(1, 0)) * 0.5
        n = self.g.shape[-1]
        tr = contract("ij,ij->", self.ginv.truncate(o), sym) * (1.0 / n)
        tf = sym - self.g.truncate(o) * tr
        return frame_norm(tf.value, ("down", "down"), self.g.value) / self.norm2.value

    def require_conformal(self, tol=CONFORMAL_TOL):
        res = np.max(self.conformal_killing_residual())
        if res > tol:
            raise NotConformal("K is not a conformal vector field (residual %.2e)" % res)

    def dsd_form(self):
        """<D^sd_X K, Y> as a 2-tensor, with D^sd = D^|K| + omega_CL / 2."""
        o = min(self.omega_cl.order, self.log_norm.order - 1)
        gam_form = self.omega_cl.truncate(o) * 0.5 - self.log_norm.grad().truncate(o)
        g, ginv = self.g.truncate(o), self.ginv.truncate(o)
        gam = weyl_symbols(g, ginv, gam_form)
        dK = self.K.grad().truncate(o)  # [k, i] = d_i K^k
        DK = dK + contract("kij,j->ki", gam, self.K.truncate(o))
        return contract("kj,ki->ij", g, DK)


@dataclass(frozen=True)
class QuotientData:
    metric: np.ndarray
    omega: np.ndarray
    w: np.ndarray
    omega_K: np.ndarray


def quotient(chart: OrientedChart, K, points) -> QuotientData:
    """Quotient metric (horizontal part of the chart metric), gauge form and |K|^-1 at ``points``.

    For ``K = d/dt`` (last coordinate) the metric and form are returned in the
    base coordinates; otherwise they are 4-dimensional horizontal tensors.
    """
    q = QuotientGeometry(chart, K, points, order=2)
    q.require_conformal()
    h, om = q.horizontal_metric.value, q.omega.value
    omK = np.einsum("ni,ni->n", om, q.K.value)
    if _is_last_coordinate(K, chart.dim):
        h, om = h[:, :3, :3], om[:, :3]
    return QuotientData(h, om, q.w.value, omK)


def _is_last_coordinate(K, n):
    if isinstance(K, Jet):
        return False
    return all(str(k).strip() == ("1" if i == n - 1 else "0") for i, k in enumerate(K))


def quotient_structure(chart: OrientedChart, t0=None, name=None) -> JetWeylStructure:
    """The quotient Weyl structure by d/dt as a structure on the base coordinates at ``t = t0``."""
    if chart.dim != 4:
        raise ValueError("quotients start from a 4-chart")
    lo, hi = chart.box[3]
    t0 = 0.5 * (lo + hi) if t0 is None else t0
    t_name = chart.coords[3]
    K = ("0", "0", "0", "1")
    base = OrientedChart(
        name=name or chart.name + "/K", coords=chart.coords[:3], box=chart.box[:3],
        metric=_horizontal_metric_text(chart), orientation=chart.orientation,
        guards=chart.guards, macros=((t_name, repr(float(t0))),) + tuple(chart.macros))

    def fn(points, order):
        pts4 = np.column_stack([points, np.full(len(points), t0)])
        q = QuotientGeometry(chart, K, pts4, order=min(order + 1, MAX_ORDER))
        h = q.horizontal_metric.truncate(order)[:3, :3].restrict([0, 1, 2])
        om = q.omega[:3].restrict([0, 1, 2])
        return h, om

    return JetWeylStructure(base, fn)


def _horizontal_metric_text(chart):
    g = chart.metric
    out = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i, 3):
            out[i][j] = out[j][i] = "(%s) - (%s)*(%s)/(%s)" % (g[i][j], g[i][3], g[j][3], g[3][3])
    return tuple(tuple(r) for r in out)


def dsd_residual(chart: OrientedChart, K, points):
    """Max-norm of the antiselfdual part of <D^sd K, .> divided by |K|."""
    q = QuotientGeometry(chart, K, points, order=2)
    q.require_conformal()
    T = q.dsd_form()
    skew = (T - T.transpose(1, 0)) * 0.5
    sym = (T + T.transpose(1, 0)) * 0.5
    g0 = q.g.value
    _, asd = sd_asd_split(skew.value, g0, chart.orientation, "paper")
    n = np.sqrt(q.norm2.value)
    return (frame_norm(asd.value, ("down", "down"), g0) / n,
            frame_norm(sym.value - g0 * (np.einsum("nij,nij->n", np.linalg.inv(g0), sym.value) / 4)[:, None, None],
                       ("down", "down"), g0) / n)


def roundtrip_residual(L: LiftedChart, base_points, t=None):
    """(metric, omega, w) differences between the base data and the quotient of its lift."""
    pts4 = L.points4(base_points, t)
    if L.gauge != "conformal":
        raise ValueError("round trips compare against the conformal lift")
    q = quotient(L.chart4, L.K, pts4)
    g, om = L.base.fields(np.atleast_2d(base_points), 0)
    w = L.base.chart.scalar_jet(L.monopole.w, np.atleast_2d(base_points), 0).value
    dg = np.max(np.abs(q.metric - g.value), axis=(1, 2))
    dom = np.max(np.abs(q.omega - om.value), axis=1)
    dw = np.abs(q.w - np.abs(w))
    return dg, dom, dw


# invariant complex structures from congruences


@dataclass(frozen=True)
class ComplexStructureData:
    J: np.ndarray
    omega: np.ndarray
    dj: np.ndarray
    kw_gap: np.ndarray
    faraday_K: np.ndarray
    twist_gap: np.ndarray


def _csthm_fields(L: LiftedChart, chi, base_points, t=None, check=True):
    """(g4, ginv4, J, gauge form, kappa, w, xi♭) on the conformal lift, as jets."""
    if L.gauge != "conformal":
        raise ValueError("complex structures are built on the conformal lift")
    base_points = np.atleast_2d(base_points)
    pts4 = L.points4(base_points, t)
    cg = CongruenceGeometry(L.base, chi, base_points, order=3)
    if check:
        cg.require_eligible()
    up = [0, 1, 2]

    def ext(j):
        return j.embed(4, up)

    g4 = L.chart4.metric_jet(pts4, 3)
    ginv4 = inverse(g4)
    tau, kappa = ext(cg.tau), ext(cg.kappa)
    o = tau.order
    chi3 = cg.chi
    ev = L.base.chart.evaluator(base_points, 3)
    w = ext(L.base.chart.scalar_jet(L.monopole.w, base_points, 3, ev))
    om_b = ext(cg.geo.omega)
    A3 = L.base.chart.field_jet(list(L.monopole.A), base_points, 3, ev)
    chi_up = Jet.array([ext(chi3[i]) for i in range(3)] + [ext(contract("i,i->", chi3, A3) * -1.0)])
    chi_flat = contract("ij,j->i", g4, chi_up)
    kt = g4[:, 3]
    xi_flat = kt * g4[3, 3].sqrt().reciprocal()
    e = wedge(xi_flat, chi_flat)
    Om = e - hodge_star(e, g4, L.chart4.orientation, "paper", ginv4)
    J = contract("lk,jk->lj", ginv4, Om)
    om4 = Jet.array([om_b[i] for i in range(3)] + [om_b[0] * 0.0])
    gauge = (om4.truncate(o) + w.log().grad().truncate(o)) * 0.5
    gauge = gauge - xi_flat.truncate(o) * kappa - chi_flat.truncate(o) * tau
    return g4, ginv4, J, gauge, kappa, w


def j_from_congruence(L: LiftedChart, chi, base_points, t=None, check=True):
    """Invariant complex structure J = xi∧chi - *(xi∧chi) and the connection D^sd - kappa xi - tau chi.

    Returns J, the gauge form of D, the DJ residual, the gap to the
    Kähler-Weyl form computed from (g, J), |F^D(K, .)| and
    |F^D(K, .) - d(kappa |K|)|.
    """
    g4, ginv4, J, gauge, kappa, w = _csthm_fields(L, chi, base_points, t, check)
    o = gauge.order
    gam = weyl_symbols(g4.truncate(o), ginv4.truncate(o), gauge)
    dj = dj_residual(g4, J, gam)
    kw = kw_omega(g4, J)
    oo = min(kw.order, gauge.order)
    kw_gap = frame_norm((kw.truncate(oo) - gauge.truncate(oo)).value, ("down",), g4.value)
    F = exterior_d(gauge)
    FK = F[3]  # F(K, .) with K = d/dt
    tw0 = kappa * w.reciprocal().truncate(kappa.order)
    gap = FK - tw0.grad().truncate(FK.order)
    return ComplexStructureData(J.value, gauge.value, dj, kw_gap,
                                frame_norm(FK.value, ("down",), g4.value),
                                frame_norm(gap.value, ("down",), g4.value))


def csthm_structure(L: LiftedChart, chi, check=True) -> JetWeylStructure:
    """The Weyl structure D^sd - kappa xi - tau chi on the conformal lift (metric is t-independent)."""
    def fn(points4, order):
        g4, _, _, gauge, _, _ = _csthm_fields(L, chi, np.atleast_2d(points4)[:, :3], check=check)
        o = min(order, gauge.order)
        return g4.truncate(o), gauge.truncate(o)
    return JetWeylStructure(L.chart4, fn)


def csthm_selfduality(L: LiftedChart, chi, base_points, t=None):
    """Norms of the antiselfdual parts of the Ricci form rho^D and of F^D, per point."""
    pts4 = L.points4(base_points, t)
    geo = WeylGeometry(csthm_structure(L, chi), pts4, order=2)
    _, _, J, _, _, _ = _csthm_fields(L, chi, base_points, t, check=False)
    g0, ginv0 = geo.g0, geo.ginv.value
    rho = -0.5 * np.einsum("nlm,nlkij,nmp,npk->nij", g0, geo.R.value, J.value, ginv0)
    o = L.chart4.orientation
    _, rho_m = sd_asd_split(rho, g0, o, "paper")
    _, F_m = sd_asd_split(geo.F.value, g0, o, "paper")
    return (frame_norm(rho_m.value, ("down", "down"), g0),
            frame_norm(F_m.value, ("down", "down"), g0))


def maxwell_from_monopole(L: LiftedChart, m1: MonopoleSolution, base_points, t=None, tol=1e-6):
    """(ASD, SD) norms of dÃ1 for Ã1 = A1 - (w1/w)(dt + A)."""
    base_points = np.atleast_2d(base_points)
    res = monopole_residual(L.base, m1, base_points)
    if np.max(res) > tol:
        raise NotAMonopole("second pair is not a monopole (residual %.2e)" % np.max(res))
    pts4 = L.points4(base_points, t)
    c = L.base.chart
    ev = c.evaluator(base_points, 2)
    up = [0, 1, 2]
    A = c.field_jet(list(L.monopole.A), base_points, 2, ev).embed(4, up)
    A1 = c.field_jet(list(m1.A), base_points, 2, ev).embed(4, up)
    ratio = (c.scalar_jet(m1.w, base_points, 2, ev) / c.scalar_jet(L.monopole.w, base_points, 2, ev)).embed(4, up)
    conn = Jet.array([A[i] for i in range(3)] + [A[0] * 0.0 + 1.0])
    At = Jet.array([A1[i] for i in range(3)] + [A1[0] * 0.0]) - conn * ratio
    F = exterior_d(At)
    g4 = L.chart4.metric_jet(pts4, 1).truncate(0)
    sd, asd = sd_asd_split(F.value, g4.value, L.chart4.orientation, "paper")
    return (frame_norm(asd.value, ("down", "down"), g4.value),
            frame_norm(sd.value, ("down", "down"), g4.value))


def asd_congruence(chart: OrientedChart, base_points, t0=None, order=2, sign=1):
    """Unit field J^- xi on the quotient, J^- the normalised antiselfdual part of dK♭, K = d/dt.

    Returns the field as a jet in the base coordinates (order ``order``).
    """
    lo, hi = chart.box[3]
    t0 = 0.5 * (lo + hi) if t0 is None else t0
    base_points = np.atleast_2d(base_points)
    pts4 = np.column_stack([base_points, np.full(len(base_points), t0)])
    q = QuotientGeometry(chart, ("0", "0", "0", "1"), pts4, order=min(order + 1, MAX_ORDER))
    dK = q.dK
    o = dK.order
    g, ginv = q.g.truncate(o), q.ginv.truncate(o)
    _, asd = sd_asd_split(dK, g, chart.orientation, "paper", ginv)
    size = two_form_inner(asd, asd, ginv) * 0.5  # |e12 + e34|^2 = 2
    if np.any(size.value < 1e-20):
        raise NotConformal("antiselfdual part of dK vanishes")
    Om = asd * size.sqrt().reciprocal()
    J = contract("ac,cb->ab", ginv, Om)
    xi = q.K.truncate(o) * q.norm2.truncate(o).sqrt().reciprocal()
    chi = contract("ab,b->a", J, xi) * float(sign)
    return Jet.array([chi[i] for i in range(3)]).restrict([0, 1, 2])


def lift_w_minus(L: LiftedChart, base_points, t=None, convention="paper"):
    geo = WeylGeometry(L.structure(), L.points4(base_points, t), order=2)
    return geo.norm(geo.w_minus(convention), ("down",) * 4)


__all__ = [
    "LiftedChart", "lift", "QuotientGeometry", "QuotientData", "quotient", "quotient_structure",
    "dsd_residual", "roundtrip_residual", "j_from_congruence", "maxwell_from_monopole",
    "lift_w_minus", "asd_congruence", "csthm_structure", "csthm_selfduality", "NotAMonopole", "NotConformal",
]
