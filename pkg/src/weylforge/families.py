"""Explicit Einstein-Weyl spaces, monopoles and selfdual 4-manifolds.

Every constructor returns a :class:`Family` whose fields are wired for the
verification modules.  Parameter values are plain floats or expression
strings in the chart grammar.  Default domains are small boxes on which all
guards hold; they can be overridden through the ``box`` argument.

Stereographic conventions on S^2: zeta = x + i y and
sigma_1^2 + sigma_2^2 = 4 |d zeta|^2 / (1 + |zeta|^2)^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chart import OrientedChart, diagonal_metric, metric_from_coframe
from .congruence import CongruenceField, MonopoleSolution, monopole_residual
from .jones_tod import LiftedChart, lift
from .forms import frame_norm, sd_asd_split
from .jets import Jet, contract, inverse
from .weyl import WeylStructure, flat_structure, levi_civita_symbols

TAGS = ("geodesic_symmetry", "gibbons_hawking", "ward_toda", "killing_toda", "toda_cc",
        "einstein_tod", "tod_monopole", "ct_toda", "dilation_gh", "flat_r4")

HARMONIC_TOL = 1e-8


class PreconditionError(ValueError):
    """Family parameters outside their documented validity range."""


@dataclass(frozen=True)
class FamilySpec:
    """Family tag plus parameters, kept as sorted (name, value) pairs."""

    tag: str
    params: tuple = ()

    def __post_init__(self):
        if self.tag not in TAGS:
            raise PreconditionError("unknown family %r" % self.tag)

    @classmethod
    def make(cls, tag, **params):
        return cls(tag, tuple(sorted(params.items())))

    def as_dict(self):
        return dict(self.params)

    def to_text(self):
        lines = ["family=%s" % self.tag]
        lines += ["%s=%s" % (k, v) for k, v in self.params]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        tag, params = None, {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise PreconditionError("expected key=value, got %r" % raw)
            k, v = (s.strip() for s in line.split("=", 1))
            if k == "family":
                tag = v
            else:
                params[k] = _coerce(v)
        if tag is None:
            raise PreconditionError("missing family=... line")
        return cls.make(tag, **params)


def _coerce(v):
    try:
        return float(v)
    except ValueError:
        return v.strip().strip('"')


@dataclass
class Family:
    """A constructed geometry and the data its checks need."""

    spec: FamilySpec
    base: Optional[WeylStructure] = None
    chart4: Optional[OrientedChart] = None
    congruence: Optional[CongruenceField] = None
    tau: Optional[str] = None
    kappa: Optional[str] = None
    monopole: Optional[MonopoleSolution] = None
    lifted: Optional[LiftedChart] = None
    K: Optional[tuple] = None
    claims: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def _num(x, name):
    try:
        return float(x)
    except (TypeError, ValueError):
        raise PreconditionError("parameter %s must be a number, got %r" % (name, x))


def _fmt(x):
    return repr(float(x))


def _check_nonempty(chart, npts=8):
    return chart.sample(npts)


# geodesic symmetry


GS_BOX = ((0.3, 0.8), (0.2, 0.7), (0.0, 1.0))


def _sphere_macros(H):
    """Macros for |H|^-2 (sigma_1^2 + sigma_2^2) + beta^2 with the explicit beta primitive."""
    return (
        ("zeta", "x + i*y"),
        ("H", H),
        ("S", "1 + x^2 + y^2"),
        ("c", "1/(zeta*H)"),
        ("bx", "-2*im(c)/S"),
        ("by", "-2*re(c)/S"),
        ("q", "4/(re(H)^2 + im(H)^2)/S^2"),
    )


def geodesic_symmetry(H="1", box=GS_BOX) -> Family:
    """Einstein-Weyl space with geodesic symmetry generated by the holomorphic function H(zeta).

    Coordinates (x, y, psi); beta = dpsi + bx dx + by dy, omega = -Im(H) beta,
    chi = d/dpsi, tau = -Im H and kappa = Re(H)/2 in the gauge g.
    """
    chart = OrientedChart(
        name="geodesic_symmetry", coords=("x", "y", "psi"), box=tuple(box),
        metric=metric_from_coframe([("bx", "by", "1"), ("1", "0", "0"), ("0", "1", "0")],
                                   ["1", "q", "q"]),
        guards=("re(H)^2 + im(H)^2", "x^2 + y^2"), macros=_sphere_macros(H))
    _check_nonempty(chart)
    ws = WeylStructure(chart, ("-im(H)*bx", "-im(H)*by", "-im(H)"))
    return Family(FamilySpec.make("geodesic_symmetry", H=H), base=ws,
                  congruence=CongruenceField(("0", "0", "1")), tau="-im(H)", kappa="re(H)/2",
                  claims={"einstein_weyl": True, "shear_free": True, "hypercr": True})


def geodesic_symmetry_kappa_monopole(fam: Family) -> MonopoleSolution:
    """The twist monopole with its potential: *D^B kappa = dA with A = -omega/2."""
    om = fam.base.omega
    return MonopoleSolution(fam.kappa, tuple("-(%s)/2" % o for o in om))


def quotient_curvature_gap(fam: Family, points):
    """|scal^C - 2|H|^2| / (2|H|^2) for the 2-metric |H|^-2 (sigma_1^2 + sigma_2^2)."""
    chart = fam.base.chart
    c2 = OrientedChart("gs_quotient", ("x", "y"), chart.box[:2],
                       diagonal_metric(["q", "q"]), macros=chart.macros, guards=chart.guards)
    from .weyl import WeylGeometry
    pts = np.atleast_2d(points)[:, :2]
    geo = WeylGeometry(WeylStructure(c2, ("0", "0")), pts, order=2)
    H2 = c2.scalar_jet("re(H)^2 + im(H)^2", pts, 0).value
    return np.abs(geo.scal.value - 2 * H2) / (2 * H2)


# Gibbons-Hawking


GH_BOX = ((0.2, 1.0), (0.2, 1.0), (-0.5, 0.5))
DIRAC = ("-(z/(2*r))*y/(x^2 + y^2)", "(z/(2*r))*x/(x^2 + y^2)", "0")


def flat_r3(box=GH_BOX, name="flat_r3") -> OrientedChart:
    return OrientedChart(name, ("x", "y", "z"), tuple(box), diagonal_metric(["1", "1", "1"]),
                         guards=("x^2 + y^2",), macros=(("r", "sqrt(x^2 + y^2 + z^2)"),))


def dirac_potential(strength=1.0):
    """Potential A with dA = *d(strength/(2r)) on flat R^3."""
    return tuple("(%s)*(%s)" % (_fmt(strength), a) if a != "0" else "0" for a in DIRAC)


def gibbons_hawking(W="1", A=("0", "0", "0"), box=GH_BOX, check=True) -> Family:
    """Gibbons-Hawking metric W g_flat + W^-1 (dt + A)^2 over flat R^3."""
    base = flat_structure(flat_r3(box))
    m = MonopoleSolution(W, tuple(A))
    pts = _check_nonempty(base.chart, 16)
    wv = base.chart.scalar_jet(W, pts, 0).value
    if np.any(wv <= 0):
        raise PreconditionError("W must be positive on the domain")
    if check:
        res = np.max(monopole_residual(base, m, pts))
        if res > 1e-6:
            raise PreconditionError("(W, A) is not a monopole (residual %.2e)" % res)
    L = lift(base, m, gauge="conformal")
    Lk = lift(base, m, gauge="kahler")
    return Family(FamilySpec.make("gibbons_hawking", W=W, A=";".join(A)), base=base,
                  chart4=Lk.chart4, monopole=m, lifted=L, K=("0", "0", "0", "1"),
                  congruence=CongruenceField(("0", "0", "1")), tau="0", kappa="0",
                  claims={"selfdual": True, "ricci_flat": True, "einstein_weyl": True})


# LeBrun-Ward geometries


WARD_BOX = ((0.5, 1.5), (0.5, 1.5), (0.0, 1.0))


def _harmonic_residual(chart, V, points, inv_f=None):
    """rho^-1 (rho V_rho)_rho + F^-1 V_second, per point."""
    j = chart.scalar_jet(V, points, 2)
    d1, d2 = j.d1, j.d2
    rho = points[:, 0]
    f = 1.0 if inv_f is None else inv_f(rho)
    return d2[:, 0, 0] + d1[:, 0] / rho + f * d2[:, 1, 1]


def ward_toda(V="eta", box=WARD_BOX) -> Family:
    """Toda Einstein-Weyl space from an axially symmetric harmonic function V(rho, eta).

    Coordinates (rho, eta, psi); LeBrun-Ward gauge
    g = rho^2 (V_eta^2 + V_rho^2)(drho^2 + deta^2) + rho^2 dpsi^2.
    """
    probe = OrientedChart("ward_probe", ("rho", "eta", "psi"), tuple(box),
                          diagonal_metric(["1", "1", "1"]), macros=(("V", V),))
    res = np.max(np.abs(_harmonic_residual(probe, "V", probe.sample(16))))
    if res > HARMONIC_TOL:
        raise PreconditionError("V is not harmonic (axially symmetric Laplacian %.2e)" % res)
    Vr = probe.derivative_text("V", "rho")
    Ve = probe.derivative_text("V", "eta")
    macros = (("V", V), ("Vr", Vr), ("Ve", Ve), ("N", "Ve^2 + Vr^2"))
    chart = OrientedChart(
        name="ward_toda", coords=("rho", "eta", "psi"), box=tuple(box),
        metric=diagonal_metric(["rho^2*N", "rho^2*N", "rho^2"]),
        guards=("Ve^2",), macros=macros)
    _check_nonempty(chart)
    ws = WeylStructure(chart, ("-2*Ve^2/(rho*N)", "2*Ve*Vr/(rho*N)", "0"))
    chi = CongruenceField(("-rho*Ve", "rho*Vr", "0"), kind="covector")
    return Family(FamilySpec.make("ward_toda", V=V), base=ws, congruence=chi, kappa="0",
                  claims={"einstein_weyl": True, "shear_free": True, "twist_free": True})


def killing_toda(V="zeta", b=1.0, c=1.0, box=WARD_BOX) -> Family:
    """Toda Einstein-Weyl space from a harmonic function invariant under b d/dphi + c d/deta.

    Coordinates (rho, zeta, psi).
    """
    b, c = _num(b, "b"), _num(c, "c")
    if b == 0 and c == 0:
        raise PreconditionError("(b, c) must not both vanish")
    s2 = b * b + c * c
    probe = OrientedChart("killing_probe", ("rho", "zeta", "psi"), tuple(box),
                          diagonal_metric(["1", "1", "1"]), macros=(("V", V),))
    res = np.max(np.abs(_harmonic_residual(
        probe, "V", probe.sample(16), inv_f=lambda r: (b * b * r * r + c * c) / (s2 * r * r))))
    if res > HARMONIC_TOL:
        raise PreconditionError("V is not harmonic for the adapted Laplacian (%.2e)" % res)
    Vr = probe.derivative_text("V", "rho")
    Vz = probe.derivative_text("V", "zeta")
    B, C, S2 = _fmt(b), _fmt(c), _fmt(s2)
    macros = (
        ("V", V), ("Vr", Vr), ("Vz", Vz),
        ("F", "%s*rho^2/(%s*rho^2 + %s)" % (S2, _fmt(b * b), _fmt(c * c))),
        ("G", "((%s*rho^2 + %s)*Vz^2 + %s*rho^2*Vr^2)/%s" % (_fmt(b * b), _fmt(c * c), S2, S2)),
        ("m", "%s*%s*(1 - rho^2)/(%s*rho^2 + %s)" % (B, C, _fmt(b * b), _fmt(c * c))),
    )
    # theta = rho Vr dzeta - F^-1 rho Vz drho;  beta = dpsi - m theta
    theta = ("-rho*Vz/F", "rho*Vr", "0")
    beta = ("-m*(%s)" % theta[0], "-m*(%s)" % theta[1], "1")
    chart = OrientedChart(
        name="killing_toda", coords=("rho", "zeta", "psi"), box=tuple(box),
        metric=metric_from_coframe([("1", "0", "0"), ("0", "1", "0"), beta],
                                   ["G", "G*F", "rho^2/F"]),
        guards=("G",), macros=macros)
    _check_nonempty(chart)
    k = "2*%s*Vz/(%s*G)" % (B, S2)
    om = tuple("(%s)*(%s*(%s) - %s*%s)" % (k, B, t, C, d) for t, d in zip(theta, ("0", "0", "1")))
    chi = CongruenceField(tuple("%s*(%s) - %s*%s" % (B, t, C, d) for t, d in zip(theta, ("0", "0", "1"))),
                          kind="covector", normalize=True)
    return Family(FamilySpec.make("killing_toda", V=V, b=b, c=c), base=WeylStructure(chart, om),
                  congruence=chi, kappa="0",
                  claims={"einstein_weyl": True, "shear_free": True, "twist_free": True})


TODA_BOX = ((-0.5, 0.5), (-0.5, 0.5), (0.5, 1.5))


def toda_cc(a=0.0, b=0.0, c=1.0, box=TODA_BOX) -> Family:
    """Constant curvature Toda solution e^u = 4(a z^2 + b z + c)/(1 + a(x^2 + y^2))^2.

    g = e^u (dx^2 + dy^2) + dz^2, omega = -u_z dz, chi = d/dz.
    """
    a, b, c = _num(a, "a"), _num(b, "b"), _num(c, "c")
    A, B, C = _fmt(a), _fmt(b), _fmt(c)
    macros = (
        ("P", "%s*z^2 + %s*z + %s" % (A, B, C)),
        ("Q", "1 + %s*(x^2 + y^2)" % A),
        ("eu", "4*P/Q^2"),
        ("u", "log(4*P) - 2*log(Q)"),
        ("uz", "(2*%s*z + %s)/P" % (A, B)),
    )
    chart = OrientedChart("toda_cc", ("x", "y", "z"), tuple(box),
                          diagonal_metric(["eu", "eu", "1"]), guards=("P", "Q"), macros=macros)
    lo, hi = box[2]
    zz = np.linspace(lo, hi, 33)
    if np.any(a * zz ** 2 + b * zz + c <= 0):
        raise PreconditionError("a z^2 + b z + c must be positive on the z-interval")
    _check_nonempty(chart)
    ws = WeylStructure(chart, ("0", "0", "-uz"))
    return Family(FamilySpec.make("toda_cc", a=a, b=b, c=c), base=ws,
                  congruence=CongruenceField(("0", "0", "1")), tau="-uz/2", kappa="0",
                  claims={"einstein_weyl": True, "shear_free": True, "twist_free": True},
                  extra={"u": "u", "discriminant": b * b - 4 * a * c})


def toda_residual(fam: Family, points):
    """u_xx + u_yy + (e^u)_zz per point."""
    ch = fam.base.chart
    u = ch.scalar_jet("u", points, 2)
    eu = ch.scalar_jet("eu", points, 2)
    return u.d2[:, 0, 0] + u.d2[:, 1, 1] + eu.d2[:, 2, 2]


def tod_monopole(toda: Family, a=1.0, b=0.0) -> Family:
    """Monopole w = a(1 - z u_z/2) + b u_z/2 on a constant curvature Toda space, with its potential."""
    if toda.spec.tag != "toda_cc":
        raise PreconditionError("tod_monopole is built on a toda_cc family")
    a, b = _num(a, "a"), _num(b, "b")
    p = toda.spec.as_dict()
    al, be = p["a"], p["b"]
    w = "%s*(1 - z*uz/2) + %s*uz/2" % (_fmt(a), _fmt(b))
    k = 0.5 * a * be + b * al
    A = ("-2*%s*y/Q" % _fmt(k), "2*%s*x/Q" % _fmt(k), "0")
    m = MonopoleSolution(w, A)
    pts = _check_nonempty(toda.base.chart, 16)
    wv = toda.base.chart.scalar_jet(w, pts, 0).value
    if np.any(np.abs(wv) < 1e-6) or (np.any(wv > 0) and np.any(wv < 0)):
        raise PreconditionError("w vanishes on the domain")
    L = lift(toda.base, m)
    Lk = lift(toda.base, m, gauge="kahler")
    zb = "(%s*z - %s)" % (_fmt(a), _fmt(b))
    einstein = OrientedChart(
        name="tod_einstein", coords=Lk.chart4.coords, box=Lk.chart4.box,
        metric=tuple(tuple("(%s)/%s^2" % (e, zb) for e in row) for row in Lk.chart4.metric),
        orientation=Lk.chart4.orientation, guards=Lk.chart4.guards + ("%s^2" % zb,),
        macros=Lk.chart4.macros)
    spec = FamilySpec.make("tod_monopole", a=a, b=b, toda_a=al, toda_b=be, toda_c=p["c"])
    return Family(spec, base=toda.base, chart4=einstein, monopole=m, lifted=L,
                  congruence=toda.congruence, tau=toda.tau, kappa="0", K=("0", "0", "0", "1"),
                  claims={"einstein": True, "selfdual": True, "scal": -12.0 * a},
                  extra={"kahler_chart": Lk.chart4})


def ct_toda(h="1", box=TODA_BOX) -> Family:
    """LeBrun-Ward geometry g = |z + h|^2 (sigma_1^2 + sigma_2^2) + dz^2 for holomorphic h(zeta)."""
    macros = (
        ("zeta", "x + i*y"), ("h", h), ("S", "1 + x^2 + y^2"),
        ("m2", "(z + re(h))^2 + im(h)^2"),
    )
    chart = OrientedChart("ct_toda", ("x", "y", "z"), tuple(box),
                          diagonal_metric(["4*m2/S^2", "4*m2/S^2", "1"]),
                          guards=("re(h)^2 + im(h)^2", "m2"), macros=macros)
    _check_nonempty(chart)
    ws = WeylStructure(chart, ("0", "0", "-(2*z + 2*re(h))/m2"))
    return Family(FamilySpec.make("ct_toda", h=h), base=ws,
                  congruence=CongruenceField(("0", "0", "1")), kappa="0",
                  claims={"einstein_weyl": True, "shear_free": True, "twist_free": True})


# Einstein metrics


EINSTEIN_BOX = ((0.5, 1.5), (0.5, 2.5), (0.0, 1.0), (0.0, 1.0))


def einstein_tod(a=1.0, b=0.0, c=1.0, box=EINSTEIN_BOX) -> Family:
    """Selfdual Einstein metric of scalar curvature -12ac/(a^2 + c^2), coordinates (z, theta, phi, t)."""
    a, b, c = _num(a, "a"), _num(b, "b"), _num(c, "c")
    if a * a + c * c == 0:
        raise PreconditionError("a^2 + c^2 must be positive")
    A, B, C = _fmt(a), _fmt(b), _fmt(c)
    macros = (
        ("pre", "%s/(%s*z - %s)^2" % (_fmt(a * a + c * c), A, _fmt(b * c))),
        ("p", "(%s + %s*z)/(z^2 + %s)" % (A, B, C)),
        ("Az", "-%s*cos(theta)" % B),
    )
    metric = (
        ("pre*p", "0", "0", "0"),
        ("0", "pre*p*(z^2 + %s)" % C, "0", "0"),
        ("0", "0", "pre*(p*(z^2 + %s)*sin(theta)^2 + Az^2/p)" % C, "pre*Az/p"),
        ("0", "0", "pre*Az/p", "pre/p"),
    )
    chart = OrientedChart("einstein_tod", ("z", "theta", "phi", "t"), tuple(box), metric,
                          guards=("z^2 + %s" % C, "%s + %s*z" % (A, B),
                                  "(%s*z - %s)^2" % (A, _fmt(b * c))),
                          macros=macros)
    _check_nonempty(chart)
    scal = -12.0 * a * c / (a * a + c * c)
    return Family(FamilySpec.make("einstein_tod", a=a, b=b, c=c), chart4=chart,
                  K=("0", "0", "0", "1"),
                  claims={"einstein": True, "selfdual": True, "scal": scal})


# R^4 and dilations


def dilation_gh(h="1", box=GS_BOX + ((-0.5, 0.5),)) -> Family:
    """HyperKähler metric with a holomorphic dilation r d/dr, from the holomorphic function h.

    Coordinates (x, y, psi, s) with r = e^s.  The quotient by d/ds is the
    geodesic-symmetry space with H = 1/h.
    """
    macros = _sphere_macros("1/(%s)" % h) + (
        ("hh", h), ("W", "re(hh)"), ("Y", "im(hh)"), ("m2", "re(hh)^2 + im(hh)^2"),
        ("r", "exp(s)"), ("k", "-Y/m2"),
    )
    # r [ (W/m2)(m2 sigma^2 + beta^2) + (m2/W)(ds + k beta)^2 ]
    beta = ("bx", "by", "1", "0")
    metric = metric_from_coframe(
        [beta, ("1", "0", "0", "0"), ("0", "1", "0", "0"),
         ("k*bx", "k*by", "k", "1")],
        ["r*W/m2", "r*W*4/S^2", "r*W*4/S^2", "r*m2/W"])
    chart = OrientedChart("dilation_gh", ("x", "y", "psi", "s"), tuple(box), metric,
                          guards=("W", "x^2 + y^2", "m2"), macros=macros)
    probe = OrientedChart("dilation_probe", ("x", "y"), tuple(box[:2]),
                          diagonal_metric(["1", "1"]), macros=(("zeta", "x + i*y"), ("hh", h)))
    pts = probe.sample(32)
    if np.any(probe.scalar_jet("re(hh)", pts, 0).value <= 0):
        raise PreconditionError("Re h must be positive on the domain")
    _check_nonempty(chart)
    return Family(FamilySpec.make("dilation_gh", h=h), chart4=chart, K=("0", "0", "0", "1"),
                  claims={"selfdual": True, "ricci_flat": True},
                  extra={"expected_quotient": FamilySpec.make("geodesic_symmetry", H="1/(%s)" % h)})


R4_BOX = ((-0.5, 0.5), (0.6, 2.4), (0.0, 1.0), (-0.5, 0.5))


def flat_r4(a=1.0, b=0.0, c=0.0, box=R4_BOX) -> Family:
    """Flat R^4 in coordinates adapted to K = a r d/dr - (b+c) d/dphi - (b-c) d/dpsi.

    With s = log r the flat metric is e^{2s}(ds^2 + (dtheta^2 + sin^2 theta dphi^2
    + (dpsi + cos theta dphi)^2)/4).  Coordinates (u, theta, v, t) are linear in
    (s, theta, phi, psi) with K = d/dt; the chart metric is the flat metric
    divided by |K|^2, so that K is a unit Killing field.
    """
    a, b, c = _num(a, "a"), _num(b, "b"), _num(c, "c")
    if a == 0 and b == 0 and c == 0:
        raise PreconditionError("K vanishes identically")
    k = np.array([a, -(b + c), -(b - c)])  # components along (s, phi, psi)
    drop = int(np.argmax(np.abs(k)))
    keep = [i for i in range(3) if i != drop]
    # columns of L: d/du, d/dv are the kept standard directions, d/dt = K
    L = np.zeros((3, 3))
    L[keep[0], 0] = 1.0
    L[keep[1], 1] = 1.0
    L[:, 2] = k
    # flat metric / e^{2s} in (s, phi, psi) plus dtheta^2/4, divided by N(theta)
    G = [["1", "0", "0"],
         ["0", "(sin(theta)^2 + cos(theta)^2)/4", "cos(theta)/4"],
         ["0", "cos(theta)/4", "1/4"]]
    n_theta = "(%s + ((%s)^2*sin(theta)^2 + (%s + %s*cos(theta))^2)/4)" % (
        _fmt(a * a), _fmt(b + c), _fmt(b - c), _fmt(b + c))
    names = ("u", "v", "t")

    def pulled(i, j):
        terms = []
        for p in range(3):
            for q in range(3):
                coef = L[p, i] * L[q, j]
                if coef != 0 and G[p][q] != "0":
                    terms.append("%s*(%s)" % (_fmt(coef), G[p][q]))
        return "(%s)/N" % (" + ".join(terms) if terms else "0")

    idx = {"u": 0, "v": 1, "t": 2}
    coords = ("u", "theta", "v", "t")
    metric = [["0"] * 4 for _ in range(4)]
    for ci, a_name in enumerate(coords):
        for cj, b_name in enumerate(coords):
            if a_name == "theta" or b_name == "theta":
                metric[ci][cj] = "1/(4*N)" if a_name == b_name else "0"
            else:
                metric[ci][cj] = pulled(idx[a_name], idx[b_name])
    # orient (s, theta, phi, psi) negatively, so that rotations along d/dpsi are antiselfdual
    full = np.zeros((4, 4))
    order = [0, 2, 3]  # positions of s, phi, psi in (s, theta, phi, psi)
    cols = [0, 2, 3]   # positions of u, v, t in (u, theta, v, t)
    for r_, p in enumerate(order):
        for c_, q in enumerate(cols):
            full[p, q] = L[r_, c_]
    full[1, 1] = 1.0
    orient = -int(np.sign(np.linalg.det(full)))

    macros = (("N", n_theta),
              ("s", " + ".join("%s*%s" % (_fmt(L[0, k]), names[k]) for k in range(3))))
    chart = OrientedChart("flat_r4", coords, tuple(box), tuple(tuple(r) for r in metric),
                          orientation=orient, guards=("sin(theta)^2", "N"), macros=macros)
    _check_nonempty(chart)
    euclid = {}
    for label, sgn in (("minus", 2), ("tilde", -2)):
        euclid[label] = OrientedChart(
            "flat_r4_" + label, coords, tuple(box),
            tuple(tuple("exp(%d*s)*N*(%s)" % (sgn, e) for e in row) for row in metric),
            orientation=orient, guards=chart.guards, macros=macros)
    # J^- = -2 D^g(d/dpsi) and J~^- = -2 D^g~(d/dphi), with g~ = r^-4 g
    rot = {}
    for label, axis in (("minus", 2), ("tilde", 1)):
        e = np.zeros(3)
        e[axis] = 1.0
        v = np.linalg.solve(L, e)
        rot[label] = (_fmt(v[0]), "0", _fmt(v[1]), _fmt(v[2]))
    return Family(FamilySpec.make("flat_r4", a=a, b=b, c=c), chart4=chart, K=("0", "0", "0", "1"),
                  claims={"selfdual": True, "flat": True, "tau_minus": b + c, "kappa_minus": a},
                  extra={"linear_map": L, "euclidean": euclid, "rotation": rot})


def flat_r4_congruence(fam: Family, base_points, which="minus", order=2):
    """Unit field J K/|K| on the quotient by K, in the base coordinates.

    ``which='minus'`` uses the antiselfdual complex structure parallel for the
    Euclidean metric g, ``'tilde'`` the one parallel for g~ = r^-4 g.  Returns
    (chi jet, max |J^2 + 1|, max selfdual part of g(J., .)).
    """
    if which not in ("minus", "tilde"):
        raise ValueError("which must be 'minus' or 'tilde'")
    flat = fam.extra["euclidean"][which]
    chart = fam.chart4
    base_points = np.atleast_2d(base_points)
    lo, hi = chart.box[3]
    pts = np.column_stack([base_points, np.full(len(base_points), 0.5 * (lo + hi))])
    g = flat.metric_jet(pts, order + 1)
    X = flat.field_jet(list(fam.extra["rotation"][which]), pts, order + 1)
    gam = levi_civita_symbols(g, inverse(g))
    dX = X.grad()
    o = dX.order
    J = (dX + contract("kij,j->ki", gam.truncate(o), X.truncate(o))) * -2.0
    sq = np.max(np.abs(np.einsum("nij,njk->nik", J.value, J.value) + np.eye(4)), axis=(1, 2))
    sd, _ = sd_asd_split(contract("ik,kj->ij", g.truncate(o), J).value, g.value,
                         flat.orientation, "paper")
    K = chart.field_jet(list(fam.K), pts, o)
    h = chart.metric_jet(pts, o)
    v = contract("ij,j->i", J, K)
    v = v * contract("i,i->", contract("ij,j->i", h, v), v).sqrt().reciprocal()
    chi = Jet.array([v[i] for i in range(3)]).restrict([0, 1, 2])
    return chi, sq, frame_norm(sd.value, ("down", "down"), g.value)


def build(spec: FamilySpec) -> Family:
    """Construct a family from its spec (used by the command line)."""
    p = spec.as_dict()
    if spec.tag == "geodesic_symmetry":
        return geodesic_symmetry(str(p.get("H", "1")))
    if spec.tag == "gibbons_hawking":
        W = str(p.get("W", "1"))
        A = p.get("A")
        if A is None:
            A = dirac_potential(_num(p.get("dirac", 0.0), "dirac"))
        else:
            A = tuple(s.strip() for s in str(A).split(";"))
        return gibbons_hawking(W, A)
    if spec.tag == "ward_toda":
        return ward_toda(str(p.get("V", "eta")))
    if spec.tag == "killing_toda":
        return killing_toda(str(p.get("V", "zeta")), p.get("b", 1.0), p.get("c", 1.0))
    if spec.tag == "toda_cc":
        return toda_cc(p.get("a", 0.0), p.get("b", 0.0), p.get("c", 1.0))
    if spec.tag == "einstein_tod":
        return einstein_tod(p.get("a", 1.0), p.get("b", 0.0), p.get("c", 1.0))
    if spec.tag == "tod_monopole":
        toda = toda_cc(p.get("toda_a", 1.0), p.get("toda_b", 0.0), p.get("toda_c", 1.0))
        return tod_monopole(toda, p.get("a", 1.0), p.get("b", 0.0))
    if spec.tag == "ct_toda":
        return ct_toda(str(p.get("h", "1")))
    if spec.tag == "dilation_gh":
        return dilation_gh(str(p.get("h", "1")))
    if spec.tag == "flat_r4":
        return flat_r4(p.get("a", 1.0), p.get("b", 0.0), p.get("c", 0.0))
    raise PreconditionError("unknown family %r" % spec.tag)


__all__ = [
    "TAGS", "PreconditionError", "FamilySpec", "Family", "build", "geodesic_symmetry",
    "geodesic_symmetry_kappa_monopole", "quotient_curvature_gap", "flat_r3", "dirac_potential",
    "gibbons_hawking", "ward_toda", "killing_toda", "toda_cc", "toda_residual", "tod_monopole",
    "ct_toda", "einstein_tod", "dilation_gh", "flat_r4", "flat_r4_congruence",
]
