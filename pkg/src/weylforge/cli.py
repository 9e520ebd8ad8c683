"""weylforge command line: verify, scan, emit-congruence.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or precondition
error, 3 numerical breakdown (no admissible points, singular metric, ...).
The worker count comes from WEYLFORGE_WORKERS (default 1).
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import checks
from .congruence import CongruenceField, CongruenceGeometry, IneligibleCongruence
from .expr import EvalError, ExprError
from .families import Family, FamilySpec, PreconditionError, build, flat_r4_congruence
from .jones_tod import NotAMonopole, NotConformal, quotient_structure

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
USAGE_ERRORS = (PreconditionError, ExprError, NotAMonopole, NotConformal, IneligibleCongruence)
NUMERIC_ERRORS = (EvalError, np.linalg.LinAlgError, FloatingPointError)


class Abort(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _parse_params(pairs):
    params = {}
    for item in pairs:
        if "=" not in item:
            raise Abort(EXIT_USAGE, "expected k=v, got %r" % item)
        k, v = (s.strip() for s in item.split("=", 1))
        try:
            params[k] = float(v)
        except ValueError:
            params[k] = v.strip('"')
    return params


def _parse_tols(pairs):
    out = {}
    for k, v in _parse_params(pairs).items():
        if not isinstance(v, float):
            raise Abort(EXIT_USAGE, "tolerance for %s must be a number" % k)
        out[k] = v
    return out


def _workers():
    raw = os.environ.get("WEYLFORGE_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise Abort(EXIT_USAGE, "WEYLFORGE_WORKERS must be an integer, got %r" % raw)
    return max(1, n)


def _make_family(spec):
    try:
        return build(spec)
    except USAGE_ERRORS as exc:
        raise Abort(EXIT_USAGE, str(exc))
    except NUMERIC_ERRORS as exc:
        raise Abort(EXIT_NUMERIC, str(exc))


def _batch(args):
    spec, pts, convention = args
    return checks.evaluate(build(spec), pts, convention)


def run_checks(spec: FamilySpec, npoints: int, seed: int, convention: str, overrides=None):
    """Build the family, sample points and run its registered suite."""
    fam = _make_family(spec)
    suite = checks.suite_for(fam)
    unknown = set(overrides or {}) - {c.name for c in suite.checks}
    if unknown:
        raise Abort(EXIT_USAGE, "unknown check(s) in --tol: %s" % ", ".join(sorted(unknown)))
    try:
        pts = suite.sample_chart(fam).sample(npoints, seed)
        nw = min(_workers(), npoints)
        if nw > 1:
            chunks = np.array_split(pts, nw)
            with ProcessPoolExecutor(nw) as pool:
                parts = list(pool.map(_batch, [(spec, c, convention) for c in chunks]))
        else:
            parts = [checks.evaluate(fam, pts, convention)]
    except USAGE_ERRORS as exc:
        raise Abort(EXIT_USAGE, str(exc))
    except NUMERIC_ERRORS as exc:
        raise Abort(EXIT_NUMERIC, str(exc))
    return fam, checks.reduce_results(fam, parts, npoints, overrides)


def _report(spec, results, convention, seed, wall_ms=None):
    rep = {
        "family": {"tag": spec.tag, "params": {k: v for k, v in spec.params}},
        "checks": [r.as_dict() for r in results],
        "convention": convention,
        "seed": seed,
        "pass": all(r.passed for r in results),
    }
    if wall_ms is not None:
        rep["wall_time_ms"] = wall_ms
    return json.dumps(rep, indent=2, sort_keys=True) + "\n"


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Abort as exc:
            click.echo("error: %s" % exc, err=True)
            sys.exit(exc.code)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


CONVENTION = click.option("--convention", type=click.Choice(["paper", "tilde"]), default="paper",
                          show_default=True, help="Hodge star convention for selfduality labels.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Numerical verification of Einstein-Weyl, monopole and selfdual geometries."""


@main.command()
@click.option("--family", "tag", required=True, type=click.Choice(sorted(checks.SUITES)))
@click.option("--param", "params", multiple=True, help="Family parameter k=v (repeatable).")
@click.option("--points", default=100, show_default=True, type=click.IntRange(min=1))
@click.option("--tol", "tols", multiple=True, help="Tolerance override check=value (repeatable).")
@CONVENTION
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--report", type=click.Path(dir_okay=False), help="Write the report here (default stdout).")
@click.option("--timing", is_flag=True, help="Include wall_time_ms (makes reports run-dependent).")
@_guarded
def verify(tag, params, points, tols, convention, seed, report, timing):
    """Run a family's check suite and write a JSON report."""
    t0 = time.perf_counter()
    spec = FamilySpec.make(tag, **_parse_params(params))
    _, results = run_checks(spec, points, seed, convention, _parse_tols(tols))
    wall = round((time.perf_counter() - t0) * 1000.0, 1) if timing else None
    text = _report(spec, results, convention, seed, wall)
    if report:
        with open(report, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)
    for r in results:
        if not r.passed:
            click.echo("FAIL %s: %.3e >= %.1e" % (r.name, r.max_residual, r.tolerance), err=True)
    sys.exit(EXIT_OK if all(r.passed for r in results) else EXIT_FAIL)


def _parse_grid(items):
    axes = []
    for item in items:
        if "=" not in item:
            raise Abort(EXIT_USAGE, "grid axis must be name=start:stop:steps, got %r" % item)
        name, rng = item.split("=", 1)
        parts = rng.split(":")
        if len(parts) != 3:
            raise Abort(EXIT_USAGE, "grid axis must be name=start:stop:steps, got %r" % item)
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise Abort(EXIT_USAGE, "bad grid axis %r" % item)
        if n < 1:
            raise Abort(EXIT_USAGE, "grid axis %s is empty" % name.strip())
        axes.append((name.strip(), np.linspace(lo, hi, n) if n > 1 else np.array([lo])))
    if not axes:
        raise Abort(EXIT_USAGE, "empty grid")
    return axes


@main.command()
@click.option("--family", "tag", required=True, type=click.Choice(sorted(checks.SUITES)))
@click.option("--grid", "grid", multiple=True, help="Axis name=start:stop:steps (repeatable).")
@click.option("--param", "params", multiple=True, help="Fixed parameter k=v (repeatable).")
@click.option("--points", default=20, show_default=True, type=click.IntRange(min=1))
@CONVENTION
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", type=click.Path(dir_okay=False), help="CSV path (default stdout).")
@_guarded
def scan(tag, grid, params, points, convention, seed, out):
    """Run the check suite over a parameter grid; one CSV row per cell."""
    axes = _parse_grid(grid)
    fixed = _parse_params(params)
    names = [n for n, _ in axes]
    param_cols = sorted(set(names) | set(fixed))
    check_names = None
    rows = []
    any_fail = False
    for combo in itertools.product(*[vals for _, vals in axes]):
        p = dict(fixed)
        p.update({n: float(v) for n, v in zip(names, combo)})
        spec = FamilySpec.make(tag, **p)
        row = {k: p[k] for k in param_cols}
        try:
            _, results = run_checks(spec, points, seed, convention)
            row["status"] = "ok"
            for r in results:
                row[r.name] = repr(r.max_residual)
                row[r.name + "_pass"] = int(r.passed)
                if r.measured is not None:
                    row[r.name + "_value"] = repr(r.measured)
            any_fail |= not all(r.passed for r in results)
            if check_names is None:
                check_names = [c for r in results for c in
                               ([r.name, r.name + "_pass"] + ([r.name + "_value"] if r.measured is not None else []))]
        except Abort as exc:
            row["status"] = "error: %s" % str(exc).replace("\n", " ")
            any_fail = True
        rows.append(row)
    header = param_cols + ["status"] + (check_names or [])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, restval="", extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    if out:
        with open(out, "w") as fh:
            fh.write(buf.getvalue())
    else:
        click.echo(buf.getvalue(), nl=False)
    sys.exit(EXIT_FAIL if any_fail else EXIT_OK)


def _congruence_geometry(fam: Family, selector, pts):
    if fam.spec.tag == "flat_r4":
        which = "minus" if selector == "canonical" else selector
        if which not in ("minus", "tilde"):
            raise Abort(EXIT_USAGE, "flat_r4 congruences are 'minus' or 'tilde'")
        q = quotient_structure(fam.chart4)
        chi, _, _ = flat_r4_congruence(fam, pts, which)
        return CongruenceGeometry(q, None, pts, order=1, chi_jet=chi)
    if fam.base is None:
        raise Abort(EXIT_USAGE, "family %s has no three dimensional base" % fam.spec.tag)
    if selector == "canonical":
        chi = fam.congruence
    elif selector == "radial":
        chi = CongruenceField(tuple(fam.base.chart.coords), normalize=True)
    else:
        raise Abort(EXIT_USAGE, "unknown congruence %r" % selector)
    return CongruenceGeometry(fam.base, chi, pts, order=1)


@main.command("emit-congruence")
@click.option("--family", "tag", required=True, type=click.Choice(sorted(checks.SUITES)))
@click.option("--param", "params", multiple=True, help="Family parameter k=v (repeatable).")
@click.option("--congruence", "selector", default="canonical", show_default=True,
              help="canonical, radial (Cartesian charts), or minus/tilde for flat_r4.")
@click.option("--samples", default=50, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", type=click.Path(dir_okay=False), help="CSV path (default stdout).")
@_guarded
def emit_congruence(tag, params, selector, samples, seed, out):
    """Write sample points with the congruence direction, tau and kappa as CSV."""
    fam = _make_family(FamilySpec.make(tag, **_parse_params(params)))
    chart = fam.base.chart if fam.base is not None else fam.chart4
    try:
        pts = chart.sample(samples, seed)
        if fam.base is None:
            pts = pts[:, :3]
            coords = chart.coords[:3]
        else:
            coords = chart.coords
        cg = _congruence_geometry(fam, selector, pts)
        cg.require_eligible()
    except USAGE_ERRORS as exc:
        raise Abort(EXIT_USAGE, str(exc))
    except NUMERIC_ERRORS as exc:
        raise Abort(EXIT_NUMERIC, str(exc))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(coords) + ["chi_%s" % c for c in coords] + ["tau", "kappa"])
    chi, tau, kap = cg.chi.value, cg.tau.value, cg.kappa.value
    for i in range(len(pts)):
        w.writerow([repr(float(x)) for x in pts[i]] + [repr(float(x)) for x in chi[i]]
                   + [repr(float(tau[i])), repr(float(kap[i]))])
    if out:
        with open(out, "w") as fh:
            fh.write(buf.getvalue())
    else:
        click.echo(buf.getvalue(), nl=False)


if __name__ == "__main__":
    main()
