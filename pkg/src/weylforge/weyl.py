"""Weyl structures: connection, curvature decomposition, selfduality and Kähler-Weyl data.

A Weyl structure is stored in a gauge: a representative metric g and a 1-form
omega with D = D^g + omega on densities of weight 1.  The induced torsion-free
connection on TM is

    Gamma^k_ij = LC^k_ij + delta^k_i omega_j + delta^k_j omega_i - g_ij omega^k

and its curvature R[l,k,i,j] = (R_{d_i,d_j} d_k)^l splits as

    R = W + F id - r(X) ^ Y + r(Y) ^ X,    gamma ^ X (Y) = gamma(Y) X - <X,Y> gamma^#,

with r = r0 + scal/(2n(n-1)) g - F/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .chart import OrientedChart
from .forms import (as_jet, asd_projector, exterior_d, frame_components, frame_norm,
                    hodge_star, orthonormal_frame, project_pairs, sd_asd_split)
from .jets import MAX_ORDER, Jet, contract, einsum1, inverse

# Orientation sign applied when labelling SD/ASD with a given star convention.
# The paper star on 2-forms in dimension 4 is minus the tilde star, so the
# same eigenspace is selected by flipping the orientation under "tilde".
LABEL_ORIENTATION = {"paper": 1, "tilde": -1}


@dataclass(frozen=True)
class WeylStructure:
    """Chart plus gauge 1-form given as component expressions."""

    chart: OrientedChart
    omega: tuple

    def __post_init__(self):
        if len(self.omega) != self.chart.dim:
            raise ValueError("omega needs one component per coordinate")

    @property
    def dim(self):
        return self.chart.dim

    @property
    def orientation(self):
        return self.chart.orientation

    def fields(self, points, order=3, ev=None):
        ev = ev or self.chart.evaluator(points, order)
        g = self.chart.metric_jet(points, order, ev)
        om = Jet.array([ev.real(self.chart.parse_expr(t)) for t in self.omega])
        return g, om

    def sample(self, npts, seed=0):
        return self.chart.sample(npts, seed)


@dataclass(frozen=True)
class JetWeylStructure:
    """Weyl structure whose metric and gauge form come from a jet-valued callable."""

    chart: OrientedChart
    field_fn: Callable

    @property
    def dim(self):
        return self.chart.dim

    @property
    def orientation(self):
        return self.chart.orientation

    def fields(self, points, order=3, ev=None):
        return self.field_fn(np.atleast_2d(points), order)

    def sample(self, npts, seed=0):
        return self.chart.sample(npts, seed)


def flat_structure(chart: OrientedChart) -> WeylStructure:
    return WeylStructure(chart, ("0",) * chart.dim)


def levi_civita_symbols(g: Jet, ginv: Jet) -> Jet:
    dg = g.grad()  # dg[a,b,c] = d_c g_ab
    low = (einsum1("kji->kij", dg) + dg - einsum1("ijk->kij", dg)) * 0.5
    return contract("km,mij->kij", ginv, low)


def weyl_symbols(g: Jet, ginv: Jet, om: Jet) -> Jet:
    n = g.shape[-1]
    eye = np.eye(n)
    lc = levi_civita_symbols(g, ginv)
    om_up = contract("km,m->k", ginv, om)
    corr = (contract("ki,j->kij", eye, om) + contract("kj,i->kij", eye, om)
            - contract("ij,k->kij", g, om_up))
    return lc + corr


def curvature_from_symbols(gam: Jet) -> Jet:
    """R[l,k,i,j] = (R_{d_i,d_j} d_k)^l for connection symbols gam[k,i,j] (coefficient of D_{d_i} d_j)."""
    dgam = gam.grad()  # dgam[l,j,k,i] = d_i gam[l,j,k]
    lin = einsum1("ljki->lkij", dgam) - einsum1("likj->lkij", dgam)
    quad = contract("lim,mjk->lkij", gam, gam) - contract("ljm,mik->lkij", gam, gam)
    return lin + quad


def assemble_curvature(g: Jet, ginv: Jet, W: Jet, r: Jet, F: Jet, w: int = 1) -> Jet:
    """Right-hand side of the curvature decomposition at weight ``w``."""
    n = g.shape[-1]
    eye = np.eye(n)
    r_up = contract("lm,im->il", ginv, r)  # r_i^l
    out = W + contract("ij,lk->lkij", F, eye) * float(w)
    out = out - contract("ik,lj->lkij", r, eye) + contract("jk,il->lkij", g, r_up)
    out = out + contract("jk,li->lkij", r, eye) - contract("ik,jl->lkij", g, r_up)
    return out


class WeylGeometry:
    """All connection and curvature data of a Weyl structure at a batch of points."""

    def __init__(self, ws, points, order=3):
        self.ws = ws
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.g, self.omega = ws.fields(self.points, order)
        self.n = self.g.shape[-1]
        self.orientation = ws.orientation

    @cached_property
    def ginv(self):
        return inverse(self.g)

    @cached_property
    def g0(self):
        return self.g.value

    @cached_property
    def gamma_lc(self):
        return levi_civita_symbols(self.g, self.ginv)

    @cached_property
    def gamma(self):
        return weyl_symbols(self.g, self.ginv, self.omega)

    @cached_property
    def R(self):
        return curvature_from_symbols(self.gamma)

    @cached_property
    def F(self):
        return einsum1("kkij->ij", self.R) * (1.0 / self.n)

    @cached_property
    def F_domega(self):
        return exterior_d(self.omega)

    @cached_property
    def ricci(self):
        return einsum1("ikij->jk", self.R)

    @cached_property
    def scal(self):
        return contract("jk,jk->", self.ginv.truncate(self.ricci.order), self.ricci)

    @cached_property
    def r(self):
        n = self.n
        trr = self.scal * (1.0 / (2 * (n - 1)))
        return (self.ricci - self.F.transpose(1, 0) - trr * self.g) * (1.0 / (n - 2))

    @cached_property
    def r0(self):
        n = self.n
        sym = (self.r + self.r.transpose(1, 0)) * 0.5
        return sym - self.scal * self.g * (1.0 / (2 * n * (n - 1)))

    @cached_property
    def r_rebuilt(self):
        n = self.n
        return self.r0 + self.scal * self.g * (1.0 / (2 * n * (n - 1))) - self.F * 0.5

    @cached_property
    def W(self):
        return self.R - assemble_curvature(self.g, self.ginv, 0.0 * self.R, self.r, self.F)

    @cached_property
    def W_lower(self):
        return contract("lm,mkij->lkij", self.g, self.W)

    def reassembly_residual(self):
        rebuilt = assemble_curvature(self.g, self.ginv, self.W, self.r_rebuilt, self.F_domega)
        return frame_norm((self.R - rebuilt).value, ("up", "down", "down", "down"), self.g0)

    def metricity_residual(self):
        """Components of D g with the weight correction, which vanish for a Weyl connection."""
        dg = self.g.grad()  # [i,j,k] = d_k g_ij
        gam = self.gamma
        res = (einsum1("ijk->kij", dg) - contract("mki,mj->kij", gam, self.g)
               - contract("mkj,im->kij", gam, self.g) + contract("k,ij->kij", self.omega, self.g) * 2.0)
        return frame_norm(res.value, ("down",) * 3, self.g0)

    def w_minus(self, convention="paper"):
        """Antiselfdual Weyl tensor, lowered, projected on both 2-form slots."""
        if self.n != 4:
            raise ValueError("W- needs dimension 4")
        o = self.orientation * LABEL_ORIENTATION[convention]
        P = asd_projector(as_jet(self.g0), o, convention, as_jet(self.ginv.value))
        return project_pairs(as_jet(self.W_lower.value), P)

    def w_plus(self, convention="paper"):
        o = self.orientation * LABEL_ORIENTATION[convention]
        P = asd_projector(as_jet(self.g0), o, convention, as_jet(self.ginv.value), sign=1)
        return project_pairs(as_jet(self.W_lower.value), P)

    def norm(self, t, variance):
        t = t.value if isinstance(t, Jet) else t
        return frame_norm(t, variance, self.g0)


@dataclass(frozen=True)
class ConnectionJet:
    gamma: np.ndarray
    dgamma: np.ndarray


@dataclass(frozen=True)
class CurvatureDecomposition:
    W: np.ndarray
    r0: np.ndarray
    scal: np.ndarray
    F: np.ndarray


def weyl_connection(ws, points) -> ConnectionJet:
    geo = WeylGeometry(ws, points, order=2)
    gam = geo.gamma
    return ConnectionJet(gam.value, np.moveaxis(gam.c[1], 1, -1))


def curvature_decompose(ws, points) -> CurvatureDecomposition:
    geo = WeylGeometry(ws, points, order=2)
    return CurvatureDecomposition(geo.W.value, geo.r0.value, geo.scal.value, geo.F.value)


def ew_residual(ws, points) -> np.ndarray:
    """Max-norm of r0 in a g-orthonormal frame, per point."""
    geo = WeylGeometry(ws, points, order=2)
    return geo.norm(geo.r0, ("down", "down"))


def w_minus_residual(ws, points, convention="paper") -> np.ndarray:
    geo = WeylGeometry(ws, points, order=2)
    return geo.norm(geo.w_minus(convention), ("down",) * 4)


def einstein_data(ws, points):
    """(scal, max-norm of Ric - scal/n g) for the Levi-Civita part of ``ws`` (omega ignored)."""
    zero = WeylStructure(ws.chart, ("0",) * ws.dim) if isinstance(ws, WeylStructure) else ws
    geo = WeylGeometry(zero, points, order=2)
    tf = geo.ricci - geo.scal * geo.g * (1.0 / geo.n)
    return geo.scal.value, geo.norm(tf, ("down", "down"))


# Kähler-Weyl structures


def _j_checks(J0, g0):
    n = J0.shape[-1]
    sq = np.einsum("nij,njk->nik", J0, J0) + np.eye(n)
    orth = np.einsum("nki,nkl,nlj->nij", J0, g0, J0) - g0
    return np.max(np.abs(sq)), np.max(np.abs(orth))


def kahler_form(g: Jet, J: Jet) -> Jet:
    """Omega_jk = g(J d_j, d_k)."""
    return contract("ik,ij->jk", g, J)


def kw_omega(g: Jet, J: Jet) -> Jet:
    """Gauge form of the Kähler-Weyl derivative, from d Omega = -2 omega ∧ Omega."""
    n = g.shape[-1]
    Om = kahler_form(g, J)
    dOm = exterior_d(Om)
    Ominv = inverse(Om.truncate(dOm.order))
    tr = contract("abc,ba->c", dOm, Ominv)
    return tr * (-1.0 / (2 * (n - 2)))


class KahlerWeyl:
    """Hermitian structure (g, J) on a chart and its Kähler-Weyl derivative."""

    def __init__(self, chart: OrientedChart, J, metric_fn=None):
        self.chart = chart
        self.J_exprs = J
        self.metric_fn = metric_fn

    def g_and_J(self, points, order):
        ev = self.chart.evaluator(points, order)
        if self.metric_fn is not None:
            g, J = self.metric_fn(points, order)
            return g, J
        g = self.chart.metric_jet(points, order, ev)
        J = self.chart.field_jet(self.J_exprs, points, order, ev)
        return g, J

    def check(self, points, tol=1e-10):
        g, J = self.g_and_J(points, 0)
        sq, orth = _j_checks(J.value, g.value)
        if sq > tol or orth > tol:
            raise ValueError("J is not an orthogonal almost complex structure (%.2e, %.2e)" % (sq, orth))

    def structure(self) -> JetWeylStructure:
        def fn(points, order):
            g, J = self.g_and_J(points, min(order + 1, MAX_ORDER))
            return g.truncate(order), kw_omega(g, J)
        return JetWeylStructure(self.chart, fn)

    def j_orientation(self, points):
        """Orientation (relative to the coordinate volume) in which Omega_J is antiselfdual."""
        g, J = self.g_and_J(points, 0)
        Om = kahler_form(g, J)
        _, asd = sd_asd_split(Om, g, 1, "paper")
        frac = np.sum(asd.value ** 2, axis=(1, 2)) / np.sum(Om.value ** 2, axis=(1, 2))
        if np.all(frac > 0.999):
            return 1
        if np.all(frac < 1e-3):
            return -1
        raise ValueError("Omega_J is not of constant type on the sample")


def dj_residual(g: Jet, J: Jet, gam: Jet) -> np.ndarray:
    """Max-norm of the covariant derivative of J under the connection ``gam``."""
    dJ = J.grad()  # [i,j,k] = d_k J^i_j
    order = dJ.order
    gam = gam.truncate(order)
    J = J.truncate(order)
    res = (einsum1("ijk->kij", dJ) + contract("ikm,mj->kij", gam, J)
           - contract("mkj,im->kij", gam, J))
    return frame_norm(res.value, ("down", "up", "down"), g.value)


def kahler_weyl_from_J(chart: OrientedChart, J, points):
    """(omega values, DJ residual) for the Kähler-Weyl derivative of (chart metric, J)."""
    kw = KahlerWeyl(chart, J)
    kw.check(points)
    g, Jj = kw.g_and_J(points, 3)
    om = kw_omega(g, Jj)
    gam = weyl_symbols(g.truncate(om.order), inverse(g.truncate(om.order)), om)
    return om.value, dj_residual(g, Jj, gam)


def ricci_form_routes(geo: WeylGeometry, J0: np.ndarray, j_orient: int):
    """Imaginary part of the Ricci form, by direct trace and by the (r0, scal, F-) formula.

    Both are returned as 2-form components in the coordinate basis.
    """
    g0, ginv0 = geo.g0, geo.ginv.value
    R = geo.R.value
    # -1/2 sum_k <R_{X,Y} e_k, J e_k>
    direct = -0.5 * np.einsum("nlm,nlkij,nmp,npk->nij", g0, R, J0, ginv0)
    F = geo.F.value
    _, Fm = sd_asd_split(F, g0, j_orient, "paper", as_jet(ginv0))
    Fm = Fm.value
    r0 = geo.r0.value
    scal = geo.scal.value
    # a(JX, Y) with (JX)^m = J^m_i X^i
    rJ = np.einsum("nmi,nmj->nij", J0, r0)
    gJ = np.einsum("nmi,nmj->nij", J0, g0)
    FJ = np.einsum("nmi,nmj->nij", J0, Fm)
    formula = 2 * rJ + 0.25 * scal[:, None, None] * gJ + 2 * FJ
    return direct, formula


def wform_routes(geo: WeylGeometry, J0: np.ndarray, j_orient: int):
    """W- by projection of the curvature and by the Kähler-Weyl formula, in an orthonormal frame.

    Returns two arrays indexed (i,j,k,l) = W-(e_i∧e_j)(e_k∧e_l).
    """
    g0 = geo.g0
    E = orthonormal_frame(g0)
    Einv = np.linalg.inv(E)
    n = 4
    Wl = frame_components(geo.W_lower.value, ("down",) * 4, g0)  # [l,k,i,j] = <W_{ij} e_k, e_l>
    eye = np.broadcast_to(np.eye(n), (len(g0), n, n))
    P = asd_projector(as_jet(np.array(eye)), j_orient, "paper").value  # frame projector
    Wm = np.einsum("nabkl,nklij->nabij", P, Wl)
    Wm = np.einsum("nabkl,nijkl->nijab", P, Wm)
    route1 = np.einsum("nlkij->nijkl", Wm)
    Jf = np.einsum("nia,nab,nbj->nij", Einv, J0, E)  # J in the frame
    Omf = np.swapaxes(Jf, 1, 2)  # Omega(e_j,e_k) = <J e_j, e_k> = Jf[k,j]
    Ff = frame_components(geo.F.value, ("down", "down"), g0)
    _, Fm = sd_asd_split(Ff, np.array(eye), j_orient, "paper")
    Fm = Fm.value
    JFm = np.einsum("nmi,nmj->nij", Jf, Fm)  # F-(JX, Y)
    scal = geo.scal.value
    iden = 2 * np.einsum("nklij->nijkl", P)
    route2 = (0.25 * scal[:, None, None, None, None]
              * (iden / 3.0 - 0.5 * np.einsum("nij,nkl->nijkl", Omf, Omf))
              - 0.5 * (np.einsum("nij,nkl->nijkl", JFm, Omf) + np.einsum("nij,nkl->nijkl", Omf, JFm)))
    return route1, route2
