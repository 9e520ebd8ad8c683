"""Oriented coordinate charts with symbolic metrics, guards and deterministic sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .expr import EvalError, Evaluator, ExprError, diff, implicit_guards, parse, to_text
from .jets import Jet

EPS_GUARD = 1e-6


class GuardError(EvalError):
    """No admissible sample points, or a point violates a guard."""


@dataclass(frozen=True)
class Point:
    chart_id: str
    coords: tuple


@dataclass(frozen=True)
class OrientedChart:
    """Coordinate domain with metric component expressions.

    ``macros`` is an ordered sequence of ``(name, text)`` pairs; each macro may
    use coordinates and earlier macros.  ``orientation`` multiplies the
    coordinate volume form ``dx^1 ∧ ... ∧ dx^n``.
    """

    name: str
    coords: tuple
    box: tuple
    metric: tuple
    orientation: int = 1
    guards: tuple = ()
    macros: tuple = ()
    notes: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        n = len(self.coords)
        if n not in (2, 3, 4):
            raise ValueError("charts have dimension 2, 3 or 4")
        if len(self.box) != n or len(self.metric) != n or any(len(r) != n for r in self.metric):
            raise ValueError("box and metric must match the number of coordinates")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError("empty coordinate interval (%r, %r)" % (lo, hi))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @cached_property
    def macro_asts(self) -> dict:
        env = {}
        for name, text in self.macros:
            if name in self.coords:
                raise ExprError("macro %r shadows a coordinate" % name)
            env[name] = parse(text, self.coords, env)
        return env

    def parse_expr(self, text):
        """Parse ``text`` against this chart's symbol table (coordinates and macros)."""
        if not isinstance(text, str):
            text = repr(float(text))
        return parse(text, self.coords, self.macro_asts)

    def derivative_text(self, text, coord):
        """Text of the partial derivative of ``text`` along the coordinate ``coord``."""
        if coord not in self.coords:
            raise ExprError("unknown coordinate %r" % coord)
        return to_text(diff(self.parse_expr(text), coord))

    @cached_property
    def metric_asts(self):
        n = self.dim
        out = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                a, b = self.metric[i][j], self.metric[j][i]
                if str(a).replace(" ", "") != str(b).replace(" ", ""):
                    raise ValueError("metric expressions must be symmetric (%d,%d)" % (i, j))
                out[i][j] = self.parse_expr(a) if j >= i else out[j][i]
        return out

    @cached_property
    def guard_asts(self):
        explicit = [("positive", self.parse_expr(g)) for g in self.guards]
        implicit = []
        for row in self.metric_asts:
            for ast in row:
                implicit.extend(implicit_guards(ast))
        return explicit + implicit

    def evaluator(self, points, order, extra=None) -> Evaluator:
        return Evaluator(points, self.coords, order, extra)

    def metric_jet(self, points, order=3, ev=None) -> Jet:
        ev = ev or self.evaluator(points, order)
        return Jet.array([[ev.real(a) for a in row] for row in self.metric_asts])

    def field_jet(self, exprs, points, order=3, ev=None) -> Jet:
        """Evaluate a (nested) list of expression strings to a tensor jet."""
        ev = ev or self.evaluator(points, order)
        return Jet.array(_map_nested(lambda t: ev.real(self.parse_expr(t)), exprs))

    def scalar_jet(self, text, points, order=3, ev=None) -> Jet:
        ev = ev or self.evaluator(points, order)
        return ev.real(self.parse_expr(text))

    # admissibility

    def guard_margins(self, points, extra_guards=()):
        """Minimum guard margin per point (positive means admissible)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        margin = np.min(np.minimum(points - lo, hi - points), axis=1)
        ev = self.evaluator(points, 0)
        guards = list(self.guard_asts) + [("positive", self.parse_expr(g)) for g in extra_guards]
        with np.errstate(all="ignore"):
            for kind, ast in guards:
                try:
                    re, im = _eval_loose(ev, ast)
                except EvalError:
                    return np.full(len(points), -np.inf)
                if kind == "positive":
                    m = re
                else:
                    m = np.abs(re) if im is None else np.hypot(re, im)
                margin = np.minimum(margin, np.where(np.isfinite(m), m, -np.inf))
        return margin - EPS_GUARD

    def admissible(self, points, extra_guards=()):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        ok = self.guard_margins(points, extra_guards) > 0
        if np.any(ok):
            idx = np.nonzero(ok)[0]
            try:
                g = self.metric_jet(points[idx], 0).value
                eig = np.linalg.eigvalsh(g)
                pd = np.all(eig > 0, axis=1) & np.all(np.isfinite(eig), axis=1)
            except (EvalError, np.linalg.LinAlgError):
                pd = np.zeros(len(idx), dtype=bool)
            ok[idx] = pd
        return ok

    def sample(self, npts: int, seed: int = 0, extra_guards: Sequence[str] = ()):
        """Deterministic admissible sample points from a scrambled Halton sequence."""
        if npts <= 0:
            raise ValueError("need at least one sample point")
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        engine = qmc.Halton(d=self.dim, scramble=True, seed=seed)
        found = []
        drawn = 0
        while sum(len(f) for f in found) < npts and drawn < 50 * npts + 1000:
            batch = engine.random(max(npts, 64))
            drawn += len(batch)
            pts = qmc.scale(batch, lo, hi)
            found.append(pts[self.admissible(pts, extra_guards)])
        pts = np.concatenate(found) if found else np.zeros((0, self.dim))
        if len(pts) < npts:
            raise GuardError("chart %s: only %d admissible points found" % (self.name, len(pts)))
        return pts[:npts]

    def point(self, coords) -> Point:
        coords = tuple(float(c) for c in coords)
        if not self.admissible(np.array([coords]))[0]:
            raise GuardError("point %r is not admissible on chart %s" % (coords, self.name))
        return Point(self.name, coords)


def _eval_loose(ev, ast):
    re, im = ev.complex(ast)
    return re.value, (None if im is None else im.value)


def _map_nested(fn, obj):
    if isinstance(obj, (list, tuple)):
        return [_map_nested(fn, x) for x in obj]
    return fn(obj)


def diagonal_metric(entries) -> tuple:
    n = len(entries)
    return tuple(tuple(entries[i] if i == j else "0" for j in range(n)) for i in range(n))


def metric_from_coframe(coframe, weights=None) -> tuple:
    """Metric text ``sum_a weight_a * theta_a ⊗ theta_a`` for 1-forms given as component strings."""
    n = len(coframe[0])
    weights = weights or ["1"] * len(coframe)
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            terms = []
            for w, th in zip(weights, coframe):
                a, b = th[i], th[j]
                if _is_zero(a) or _is_zero(b):
                    continue
                terms.append("(%s)*(%s)*(%s)" % (w, a, b))
            out[i][j] = out[j][i] = " + ".join(terms) if terms else "0"
    return tuple(tuple(r) for r in out)


def _is_zero(text):
    return str(text).strip() in ("0", "0.0", "(0)")
