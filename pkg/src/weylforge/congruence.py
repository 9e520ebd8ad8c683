"""Congruences on three dimensional Weyl spaces.

For a unit vector field chi the weightless derivative D^B chi splits as

    D^B chi = tau (id - chi ⊗ chi) + kappa *chi + Sigma  (+ chi ⊗ acceleration)

and the Einstein-Weyl condition can be restated through special monopole
equations for tau and kappa.  tau and kappa are sections of L^-1, so in a
gauge D^B tau = d tau - omega tau.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .forms import exterior_d, frame_norm, hodge_star, volume_tensor
from .jets import Jet, contract, inverse
from .weyl import WeylGeometry, WeylStructure, curvature_from_symbols, weyl_symbols

ELIGIBILITY_TOL = 1e-7


class IneligibleCongruence(ValueError):
    """The congruence is not shear-free and geodesic to the required tolerance."""


@dataclass(frozen=True)
class CongruenceField:
    """Direction field given by component expressions on a chart.

    ``kind`` is 'vector' or 'covector'; with ``normalize`` the field is divided
    by its length, otherwise it must already be unit.
    """

    components: tuple
    kind: str = "vector"
    normalize: bool = False

    def jet(self, chart, points, order, g, ginv, ev=None):
        v = chart.field_jet(list(self.components), points, order, ev)
        if self.kind == "covector":
            v = contract("ij,j->i", ginv.truncate(order), v)
        elif self.kind != "vector":
            raise ValueError("kind must be 'vector' or 'covector'")
        if self.normalize:
            v = v * _quad(g.truncate(order), v).sqrt().reciprocal()
        return v


def _quad(g, v):
    gv = contract("ij,j->i", g, v)
    return contract("i,i->", gv, v)


@dataclass(frozen=True)
class CongruenceInvariants:
    tau: np.ndarray
    kappa: np.ndarray
    Sigma: np.ndarray
    accel: np.ndarray


class CongruenceGeometry:
    """Weyl geometry plus a unit direction field chi, as jets at a batch of points."""

    def __init__(self, ws, chi, points, order=3, chi_jet=None):
        self.geo = WeylGeometry(ws, points, order)
        if ws.dim != 3:
            raise ValueError("congruences are handled in dimension 3")
        g, ginv = self.geo.g, self.geo.ginv
        if chi_jet is None:
            chi_jet = chi.jet(ws.chart, self.geo.points, order, g, ginv)
        self.chi = chi_jet
        unit = np.abs(_quad(g, chi_jet).value - 1.0)
        if np.max(unit) > 1e-10:
            raise ValueError("congruence is not unit (|chi|-1 up to %.2e)" % np.max(unit))
        self.orientation = ws.orientation

    @property
    def g(self):
        return self.geo.g

    @property
    def g0(self):
        return self.geo.g0

    @cached_property
    def chi_flat(self):
        return contract("ij,j->i", self.g, self.chi)

    @cached_property
    def star_chi(self):
        """The 2-form *chi (paper star, chart orientation)."""
        return hodge_star(self.chi_flat, self.g, self.orientation, "paper", self.geo.ginv)

    @cached_property
    def Dchi(self):
        """(D^B chi)^k_i = derivative of chi along d_i, weightless."""
        dchi = self.chi.grad()  # [k,i] = d_i chi^k
        gam = self.geo.gamma
        o = dchi.order
        return (dchi + contract("kij,j->ki", gam.truncate(o), self.chi.truncate(o))
                - contract("i,k->ki", self.geo.omega.truncate(o), self.chi.truncate(o)))

    @cached_property
    def bilinear(self):
        """B(X, Y) = <D_X chi, Y>."""
        o = self.Dchi.order
        return contract("kj,ki->ij", self.g.truncate(o), self.Dchi)

    @cached_property
    def accel(self):
        o = self.Dchi.order
        return contract("ki,i->k", self.Dchi, self.chi.truncate(o))

    @cached_property
    def accel_flat(self):
        o = self.accel.order
        return contract("ij,j->i", self.g.truncate(o), self.accel)

    @cached_property
    def proj(self):
        """P^i_j = delta^i_j - chi^i chi_j."""
        return contract("i,j->ij", self.chi, self.chi_flat) * -1.0 + np.eye(3)

    @cached_property
    def horizontal(self):
        o = self.Dchi.order
        B = self.bilinear - contract("i,j->ij", self.chi_flat.truncate(o), self.accel_flat)
        P = self.proj.truncate(o)
        return contract("ai,aj->ij", P, contract("ab,bj->aj", B, P))

    @cached_property
    def tau(self):
        o = self.horizontal.order
        return contract("ij,ij->", self.geo.ginv.truncate(o), self.horizontal) * 0.5

    @cached_property
    def kappa(self):
        h = self.horizontal
        o = h.order
        ginv = self.geo.ginv.truncate(o)
        A = (h - h.transpose(1, 0)) * 0.5
        sc = contract("ia,aj->ij", ginv, contract("ab,jb->aj", self.star_chi.truncate(o), ginv))
        return contract("ij,ij->", A, sc) * 0.5

    @cached_property
    def Sigma(self):
        h = self.horizontal
        o = h.order
        gh = self.g.truncate(o) - contract("i,j->ij", self.chi_flat.truncate(o), self.chi_flat.truncate(o))
        return (h + h.transpose(1, 0)) * 0.5 - self.tau * gh

    def reassembly_residual(self):
        """|B - (tau P + kappa *chi + Sigma + chi ⊗ accel)| per point."""
        o = self.Sigma.order
        gh = self.g.truncate(o) - contract("i,j->ij", self.chi_flat.truncate(o), self.chi_flat.truncate(o))
        rebuilt = (self.tau * gh + self.kappa * self.star_chi.truncate(o) + self.Sigma
                   + contract("i,j->ij", self.chi_flat.truncate(o), self.accel_flat.truncate(o)))
        return frame_norm((self.bilinear.truncate(o) - rebuilt).value, ("down", "down"), self.g0)

    def invariants(self) -> CongruenceInvariants:
        return CongruenceInvariants(self.tau.value, self.kappa.value, self.Sigma.value,
                                    self.accel.value)

    def shear_norm(self):
        return frame_norm(self.Sigma.value, ("down", "down"), self.g0)

    def accel_norm(self):
        return frame_norm(self.accel.value, ("up",), self.g0)

    def require_eligible(self, tol=ELIGIBILITY_TOL):
        s, a = np.max(self.shear_norm()), np.max(self.accel_norm())
        if s > tol or a > tol:
            raise IneligibleCongruence(
                "congruence is not shear-free and geodesic (shear %.2e, acceleration %.2e)" % (s, a))

    # weighted derivatives of the monopoles

    def weighted_d(self, f: Jet, weight: int = -1) -> Jet:
        df = f.grad()
        return df + self.geo.omega.truncate(df.order) * (f.truncate(df.order) * float(weight))

    def special_monopole_residuals(self, check=True):
        """Residuals of short1, short2, CReqn, long1, long2 (in that order), per point."""
        if check:
            self.require_eligible()
        geo = self.geo
        tau, kappa = self.tau, self.kappa
        Dtau, Dkap = self.weighted_d(tau), self.weighted_d(kappa)
        o = Dtau.order  # 1
        chi, chib = self.chi.truncate(o), self.chi_flat.truncate(o)
        g, ginv = self.g.truncate(o), geo.ginv.truncate(o)
        F, scal = geo.F.truncate(o), geo.scal.truncate(o)
        t, k = tau.truncate(o), kappa.truncate(o)
        starF = hodge_star(F, g, self.orientation, "paper", ginv)
        starchi = self.star_chi.truncate(o)
        dir_tau = contract("i,i->", Dtau, chi)
        dir_kap = contract("i,i->", Dkap, chi)
        short1 = dir_tau + t * t - k * k + scal * (1.0 / 6)
        short2 = dir_kap + t * k * 2.0 + contract("i,i->", starF, chi) * 0.5
        # (D kappa o J)(X) = D kappa(J X), J X = iota_X *chi raised
        J = contract("xa,ab->bx", starchi, ginv)  # J[b, x] = (J d_x)^b
        DkJ = contract("bx,b->x", J, Dkap)
        iF = contract("i,ij->j", chi, F)
        cr = Dtau - DkJ + iF * 0.5
        P = self.proj.truncate(o)
        cr = contract("ij,i->j", P, cr)
        lhs1 = hodge_star(Dtau, g, self.orientation, "paper", ginv)
        kchi = (kappa * self.chi_flat.truncate(kappa.order))
        tchi = (tau * self.chi_flat.truncate(tau.order))
        rhs1 = (hodge_star(iF, g, self.orientation, "paper", ginv) * -0.5
                - scal * starchi * (1.0 / 6) - (t * t + k * k) * starchi + exterior_d(kchi))
        lhs2 = hodge_star(Dkap, g, self.orientation, "paper", ginv)
        rhs2 = F * 0.5 - exterior_d(tchi)
        g0 = self.g0
        return (np.abs(short1.value), np.abs(short2.value),
                frame_norm(cr.value, ("down",), g0),
                frame_norm((lhs1 - rhs1).value, ("down", "down"), g0),
                frame_norm((lhs2 - rhs2).value, ("down", "down"), g0))


def congruence_decompose(ws, chi, points) -> CongruenceInvariants:
    return CongruenceGeometry(ws, chi, points, order=1).invariants()


def weyl_invariance_check(chart, chi, points, omega1, omega2):
    """Max differences of shear and twist computed with two gauge forms on the same metric."""
    a = CongruenceGeometry(WeylStructure(chart, tuple(omega1)), chi, points, order=1)
    b = CongruenceGeometry(WeylStructure(chart, tuple(omega2)), chi, points, order=1)
    ds = frame_norm((a.Sigma - b.Sigma).value, ("down", "down"), a.g0)
    dk = np.abs(a.kappa.value - b.kappa.value)
    return ds, dk


def ew_residual(ws, points):
    geo = WeylGeometry(ws, points, order=2)
    return geo.norm(geo.r0, ("down", "down"))


@dataclass(frozen=True)
class MonopoleSolution:
    """Weight -1 scalar w and potential 1-form A, as expressions on the base chart."""

    w: str
    A: tuple


def monopole_residual(ws, m: MonopoleSolution, points, w_jet=None, A_jet=None):
    """Max-norm of *D^B w - dA in a g-orthonormal frame, per point."""
    if ws.dim != 3:
        raise ValueError("the monopole equation lives in dimension 3")
    pts = np.atleast_2d(points)
    g, om = ws.fields(pts, 2)
    ev = ws.chart.evaluator(pts, 2)
    w = w_jet if w_jet is not None else ev.real(ws.chart.parse_expr(m.w))
    A = A_jet if A_jet is not None else ws.chart.field_jet(list(m.A), pts, 2, ev)
    Dw = w.grad() - om.truncate(1) * w.truncate(1)
    g1 = g.truncate(1)
    res = hodge_star(Dw, g1, ws.orientation, "paper") - exterior_d(A)
    return frame_norm(res.value, ("down", "down"), g.value)


def hypercr_symbols(geo: WeylGeometry, kappa: Jet) -> Jet:
    """Connection symbols of D^B - kappa *1 acting on weightless vectors."""
    o = min(geo.gamma.order, kappa.order)
    g, ginv = geo.g.truncate(o), geo.ginv.truncate(o)
    vol = volume_tensor(g, geo.orientation)
    vol_up = contract("ijm,mk->kij", vol, ginv)
    return (geo.gamma.truncate(o) - contract("i,kj->kij", geo.omega.truncate(o), np.eye(3))
            - kappa.truncate(o) * vol_up)


def hypercr_residual(ws, kappa_expr, points):
    """(curvature norm of D^B - kappa *1, scalmon residual, GTeqn residual, formula-route gap)."""
    pts = np.atleast_2d(points)
    geo = WeylGeometry(ws, pts, order=3)
    if isinstance(kappa_expr, Jet):
        kappa = kappa_expr
    else:
        kappa = ws.chart.scalar_jet(kappa_expr, pts, 3)
    C = hypercr_symbols(geo, kappa)
    Rk = curvature_from_symbols(C)
    var = ("up", "down", "down", "down")
    direct = frame_norm(Rk.value, var, geo.g0)
    o = Rk.order
    g, ginv = geo.g.truncate(o), geo.ginv.truncate(o)
    k = kappa.truncate(o)
    scalmon = np.abs((k * k - geo.scal.truncate(o) * (1.0 / 6)).value)
    Dk = kappa.grad() - geo.omega.truncate(kappa.order - 1) * kappa.truncate(kappa.order - 1)
    Dk = Dk.truncate(o)
    gt = hodge_star(Dk, g, ws.orientation, "paper", ginv) - geo.F.truncate(o) * 0.5
    gt = frame_norm(gt.value, ("down", "down"), geo.g0)
    formula = _hypercr_formula(geo, k, Dk, o)
    gap = frame_norm((Rk - formula).value, var, geo.g0)
    return direct, scalmon, gt, gap


def _hypercr_formula(geo, k, Dk, o):
    """Curvature of D^B - kappa *1 assembled from r0, scal, F and D kappa."""
    g, ginv = geo.g.truncate(o), geo.ginv.truncate(o)
    r0, scal, F = geo.r0.truncate(o), geo.scal.truncate(o), geo.F.truncate(o)
    eye = np.eye(3)
    vol = volume_tensor(g, geo.orientation)

    def wedge_terms(a):
        # a(X) ^ Y - a(Y) ^ X for X = d_i, Y = d_j, indexed [l, k, i, j]
        aup = contract("lm,im->il", ginv, a)
        t = contract("ik,lj->lkij", a, eye) - contract("jk,il->lkij", g, aup)
        return t - t.transpose(0, 1, 3, 2)

    out = wedge_terms(r0) * -1.0
    out = out - wedge_terms(g * scal) * (1.0 / 12)
    out = out + wedge_terms(F) * 0.5
    out = out + wedge_terms(g * (k * k)) * 0.5
    # *Y for Y = d_j acts as d_k -> vol_jkm g^ml d_l
    star_endo = contract("jkm,ml->jkl", vol, ginv)
    term = contract("i,jkl->lkij", Dk, star_endo)
    return out - term + term.transpose(0, 1, 3, 2)


# Jacobi transport along a geodesic of the congruence


class TransportError(RuntimeError):
    """The geodesic left the chart domain or the integrator produced non-finite values."""


@dataclass(frozen=True)
class TransportResult:
    deviation: float
    s: np.ndarray
    path: np.ndarray
    transported: np.ndarray  # columns tau, kappa, Sigma_11, Sigma_12
    pointwise: np.ndarray


def _frame_sigma(S, e1, e2, g):
    a = np.einsum("i,ij,j->", e1, S, e1)
    b = np.einsum("i,ij,j->", e1, S, e2)
    return a, b


def _pointwise_fields(ws, x):
    geo = WeylGeometry(ws, x[None, :], order=2)
    g = geo.g0[0]
    ginv = geo.ginv.value[0]
    starF = hodge_star(geo.F.value, g[None], ws.orientation, "paper", geo.ginv.truncate(0)).value[0]
    return dict(g=g, ginv=ginv, gamma=geo.gamma.value[0], omega=geo.omega.value[0],
                r0=geo.r0.value[0], scal=float(geo.scal.value[0]), starF=starF)


def _jacobi_rhs(ws, state):
    x, v, e1, e2 = state[0:3], state[3:6], state[6:9], state[9:12]
    tau, kap, s11, s12 = state[12:16]
    f = _pointwise_fields(ws, x)
    gam, om = f["gamma"], f["omega"]
    ov = om @ v
    dv = -np.einsum("kij,i,j->k", gam, v, v) + ov * v
    de1 = -np.einsum("kij,i,j->k", gam, v, e1) + ov * e1
    de2 = -np.einsum("kij,i,j->k", gam, v, e2) + ov * e2
    r0 = f["r0"]
    rs = 0.5 * (r0 + r0.T)
    r11, r22, r12 = e1 @ rs @ e1, e2 @ rs @ e2, e1 @ rs @ e2
    sig2 = 2.0 * (s11 * s11 + s12 * s12)  # |Sigma|^2 for the frame matrix [[s11, s12], [s12, -s11]]
    dtau = ov * tau - (tau * tau - kap * kap + 0.5 * sig2 + 0.5 * (v @ rs @ v) + f["scal"] / 6.0)
    dkap = ov * kap - (2.0 * tau * kap + 0.5 * (f["starF"] @ v))
    ds11 = ov * s11 - (2.0 * tau * s11 + 0.5 * (r11 - r22))
    ds12 = ov * s12 - (2.0 * tau * s12 + r12)
    return np.concatenate([v, dv, de1, de2, [dtau, dkap, ds11, ds12]])


def _inside(ws, x):
    lo = np.array([b[0] for b in ws.chart.box])
    hi = np.array([b[1] for b in ws.chart.box])
    return bool(np.all(x >= lo) and np.all(x <= hi) and ws.chart.admissible(x[None, :])[0])


def jacobi_transport_check(ws, start, chi, t_max, steps=10_000) -> TransportResult:
    """Integrate a geodesic of the congruence and transport (tau, kappa, Sigma) along it.

    Fourth-order Runge-Kutta in the g-arclength of the chart gauge: the
    geodesic, a weightless parallel frame (e1, e2) of the normal plane and
    the evolution equations of tau, kappa and the frame components of Sigma.
    The deviation is the max difference to the pointwise decomposition.
    """
    x0 = np.asarray(start, dtype=float)
    if not _inside(ws, x0):
        raise TransportError("start point is outside the domain")
    cg = CongruenceGeometry(ws, chi, x0[None, :], order=1)
    cg.require_eligible()
    g0 = cg.g0[0]
    v0 = cg.chi.value[0]
    # orthonormal normal frame, positively oriented with v0
    trial = np.eye(3)[np.argmin(np.abs(v0))]
    e1 = trial - (trial @ g0 @ v0) * v0
    e1 /= np.sqrt(e1 @ g0 @ e1)
    e2 = np.linalg.solve(g0, np.cross(v0, e1)) * np.sqrt(np.linalg.det(g0)) * ws.orientation
    e2 -= (e2 @ g0 @ v0) * v0 + (e2 @ g0 @ e1) * e1
    e2 /= np.sqrt(e2 @ g0 @ e2)
    S = cg.Sigma.value[0]
    s11, s12 = _frame_sigma(S, e1, e2, g0)
    state = np.concatenate([x0, v0, e1, e2, [cg.tau.value[0], cg.kappa.value[0], s11, s12]])
    h = float(t_max) / int(steps)
    states = [state]
    for _ in range(int(steps)):
        k1 = _jacobi_rhs(ws, state)
        k2 = _jacobi_rhs(ws, state + 0.5 * h * k1)
        k3 = _jacobi_rhs(ws, state + 0.5 * h * k2)
        k4 = _jacobi_rhs(ws, state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise TransportError("integrator produced non-finite values")
        if not _inside(ws, state[:3]):
            raise TransportError("geodesic left the domain at %r" % (tuple(state[:3]),))
        states.append(state)
    states = np.array(states)
    path = states[:, :3]
    cgp = CongruenceGeometry(ws, chi, path, order=1)
    ref = np.zeros((len(path), 4))
    ref[:, 0] = cgp.tau.value
    ref[:, 1] = cgp.kappa.value
    Sig = cgp.Sigma.value
    ref[:, 2] = np.einsum("ni,nij,nj->n", states[:, 6:9], Sig, states[:, 6:9])
    ref[:, 3] = np.einsum("ni,nij,nj->n", states[:, 6:9], Sig, states[:, 9:12])
    dev = float(np.max(np.abs(states[:, 12:16] - ref)))
    return TransportResult(dev, np.linspace(0.0, float(t_max), len(path)), path, states[:, 12:16], ref)
