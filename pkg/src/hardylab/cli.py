"""Command-line front end: solves, scans and verification campaigns.

Every subcommand maps to an operation ``op(params) -> Outcome`` that is
also used by campaigns, so a campaign job and the equivalent command line
produce the same bytes.  Exit status: 0 success, 1 verification failure,
2 usage error (bad flags, parameters outside an operation's domain), 3
numerical failure (divergence or non-convergence).
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import estimates, hardy, levelset, radial, spectrum, surfaces
from .errors import BeyondExtremalError, ConvergenceError, DivergenceError, PreconditionError
from .nonlinearity import NonlinearitySpec
from .reports import to_json, write_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
JOBS_ENV = "HARDYLAB_JOBS"

HEADERS = {
    "solve": ["r", "u", "uprime"],
    "branch": ["lambda", "u0", "mu1"],
    "hardy": ["variant", "n", "alpha", "lhs", "rhs", "slack"],
    "estimate": ["estimate", "n", "lambda", "alpha", "lhs", "rhs", "ratio"],
    "alpha-scan": ["n", "condition", "lower", "upper"],
    "geometry": ["check", "m", "h", "lhs", "rhs", "defect", "eps_disc", "holds"],
}


@dataclass
class Outcome:
    """Rows for a CSV table or records for JSON lines, plus the verdict."""

    header: list | None = None
    rows: list = field(default_factory=list)
    records: list = field(default_factory=list)
    ok: bool = True

    def render(self):
        if self.header is not None:
            return write_csv(self.rows, self.header)
        return "".join(to_json(r) + "\n" for r in self.records)


# parameter helpers ---------------------------------------------------------------------

def _spec(p):
    return NonlinearitySpec.parse(str(p.get("f", "exp")))


def _solution(p):
    return radial.solve_minimal(int(p["n"]), _spec(p), float(p["lambda"]), steps=int(p.get("steps", 2000)))


def _phi(kind):
    """Named axisymmetric test functions on the unit ball."""
    if kind == "radial":
        return hardy.radial_test(lambda r: 1 - r * r)
    if kind == "mode":
        return hardy.mode_test(lambda r: r * (1 - r))
    if kind == "mixed":
        return hardy.mixed_test(lambda r: 1 - r * r, lambda r: 0.5 * r * (1 - r))
    raise PreconditionError(f"unknown test function {kind!r}")


# operations ----------------------------------------------------------------------------

def op_solve(p):
    sol = _solution(p)
    rows = list(zip(sol.grid, sol.u, sol.uprime))
    return Outcome(HEADERS["solve"], rows)


def op_branch(p):
    br = radial.trace_branch(int(p["n"]), _spec(p), float(p.get("lambda_cap", np.inf)),
                             steps=int(p.get("steps", 400)), m0_max=float(p.get("m0_max", 12.0)))
    rows = [(pt.lam, pt.u0, pt.mu1) for pt in br.points]
    return Outcome(HEADERS["branch"], rows)


def op_stability(p):
    sol = _solution(p)
    rep = spectrum.principal_eigenvalue(sol, modes=int(p.get("modes", 1)))
    rec = {"n": sol.n, "lambda": sol.lam, "u0": sol.center_value, **rep.as_dict(),
           "eigenvalues": list(rep.eigenvalues)}
    return Outcome(records=[rec])


def op_hardy(p):
    alpha = float(p.get("alpha", 2.0))
    surface = p.get("surface")
    rows = []
    if surface:
        n = int(p["n"])
        level = int(p.get("level", 3))
        if surface == "sphere":
            surf = surfaces.quadrature_sphere(n, float(p.get("radius", 1.0)))
        elif surface == "icosphere":
            surf = surfaces.icosphere(level, float(p.get("radius", 1.0)))
        elif surface == "circle":
            surf = surfaces.polygon_circle(int(p.get("points", 256)), float(p.get("radius", 1.0)))
        else:
            raise PreconditionError(f"unknown surface {surface!r}")
        reps = list(surfaces_hardy(surf).values())
    else:
        sol = _solution(p)
        y = float(p.get("y", 0.0))
        variants = ("foliated", "manifold") + (("radial",) if y == 0.0 else ())
        reps = hardy.foliated_hardy(sol, _phi(p.get("phi", "mixed")), alpha, y or None, variants)
    for r in reps:
        rows.append((r.variant, r.n, r.alpha, r.lhs, r.rhs, r.slack))
    return Outcome(HEADERS["hardy"], rows, ok=all(r.holds for r in reps))


def surfaces_hardy(surf):
    return hardy.surface_hardy(surf, lambda x: np.ones(len(x)), grad=lambda x: np.zeros_like(x))


def op_geometry(p):
    m = int(p.get("m", 65))
    example = p.get("example", "annulus")
    if example == "annulus":
        fld, phi, psi = levelset.annulus_example(m)
        reps = [("ibp", levelset.ibp_defect(fld, phi, psi, 0)), ("coarea", levelset.coarea_check(fld))]
    elif example == "shell":
        fld = levelset.radial_field(3, m, 0.5, 1.0)
        reps = [("coarea", levelset.coarea_check(fld))]
    else:
        raise PreconditionError(f"unknown example {example!r}")
    rows = [(name, m, fld.h, r.lhs, r.rhs, abs(r.rhs - r.lhs) if r.defect is None else r.defect,
             r.eps_disc, bool(r.holds)) for name, r in reps]
    return Outcome(HEADERS["geometry"], rows, ok=all(r.holds for _, r in reps))


def op_estimate(p):
    kind = p.get("kind", "weighted")
    sol = _solution(p)
    n, lam = sol.n, sol.lam
    alpha = float(p.get("alpha", 0.0))
    delta = float(p.get("delta", 0.5))
    y = float(p.get("y", 0.0)) or None
    rows, ok = [], True
    if kind == "sz":
        r = estimates.sz_defect(sol, lambda t: 1 - t * t, lambda t: -2 * t)
        rows.append(("sternberg_zumbrun", n, lam, "", r.lhs, r.rhs, r.lhs / r.rhs))
        ok = bool(r.holds)
    elif kind == "weighted":
        r = estimates.weighted_dirichlet(sol, alpha, y, delta, override=bool(p.get("override", False)))
        rows.append((r.name, n, lam, alpha, r.lhs, r.rhs, r.empirical_constant))
    elif kind == "pipeline":
        for r in estimates.pipeline_slack(sol, alpha, y, delta, float(p.get("epsilon", 0.1))):
            rows.append((r.name, n, lam, alpha, r.lhs, r.rhs, r.lhs / r.rhs if r.rhs else float("inf")))
            ok &= bool(r.holds)
    elif kind == "potential":
        r = estimates.potential_bound(sol, y, delta)
        rows.append((r.name, n, lam, "", r.lhs, r.rhs, r.empirical_constant))
        ok = bool(r.extras["gt_holds"])
    elif kind == "linfty":
        r = estimates.linfty_ratio(sol, delta)
        rows.append((r.name, n, lam, "", r.lhs, r.rhs, r.empirical_constant))
    elif kind == "morrey":
        pp, ll = float(p.get("p", 2.0)), float(p.get("lam_m", 2.5))
        rows.append((f"morrey_{pp:g}_{ll:g}", n, lam, "", estimates.morrey_norm(sol, pp, ll), "", ""))
    elif kind == "lp":
        pp = float(p.get("p", 10.0))
        rows.append((f"lp_{pp:g}", n, lam, "", estimates.lp_norm(sol, pp), "", ""))
    else:
        raise PreconditionError(f"unknown estimate {kind!r}")
    return Outcome(HEADERS["estimate"], rows, ok=ok)


def op_alpha_scan(p):
    rows = []
    for n, gen, rad in estimates.alpha_scan(int(p.get("n_min", 2)), int(p.get("n_max", 15))):
        for name, res in (("general", gen), ("radial", rad)):
            if not res.empty:
                rows.append((n, name, res.interval[0], res.interval[1]))
    return Outcome(HEADERS["alpha-scan"], rows)


def op_singular(p):
    rep = estimates.singular_solution_check(int(p["n"]), h=float(p.get("h", 1e-2)))
    rec = rep.as_dict()
    rec.pop("s_values")
    rec.pop("q_values")
    rec["min_q"] = min(rep.q_values)
    return Outcome(records=[rec], ok=rep.passed)


OPERATIONS = {
    "solve": op_solve,
    "branch": op_branch,
    "stability": op_stability,
    "hardy": op_hardy,
    "geometry": op_geometry,
    "estimate": op_estimate,
    "alpha-scan": op_alpha_scan,
    "singular": op_singular,
}


# campaigns -------------------------------------------------------------------------------

@dataclass
class Job:
    name: str
    op: str
    params: dict
    output: str


def load_campaign(path):
    """Parse an INI campaign: a [campaign] section and one [job:<name>] per job.

    Each job section has ``op`` (a subcommand name), ``output`` (a path
    relative to the config file) and the operation's parameters.  Keys in
    [campaign] other than ``jobs`` are defaults for every job.
    """
    cp = configparser.ConfigParser(interpolation=None)
    with open(path) as fh:
        cp.read_file(fh)
    base = os.path.dirname(os.path.abspath(path))
    defaults = dict(cp["campaign"]) if cp.has_section("campaign") else {}
    jobs_cap = defaults.pop("jobs", None)
    jobs = []
    for sec in cp.sections():
        if not sec.startswith("job:"):
            continue
        params = {**defaults, **dict(cp[sec])}
        op = params.pop("op", None)
        out = params.pop("output", None)
        if op not in OPERATIONS:
            raise PreconditionError(f"job {sec!r}: unknown operation {op!r}")
        if not out:
            raise PreconditionError(f"job {sec!r}: missing output")
        _validate(op, params)
        jobs.append(Job(sec[4:], op, params, os.path.join(base, out)))
    if not jobs:
        raise PreconditionError("campaign defines no jobs")
    return jobs, (int(jobs_cap) if jobs_cap else None)


_INT_KEYS = {"n", "steps", "n_min", "n_max", "m", "level", "points", "modes"}
_FLOAT_KEYS = {"lambda", "alpha", "y", "delta", "epsilon", "p", "lam_m", "h", "radius", "lambda_cap", "m0_max"}


def _validate(op, params):
    for k, v in params.items():
        try:
            if k in _INT_KEYS:
                int(v)
            elif k in _FLOAT_KEYS:
                float(v)
        except ValueError:
            raise PreconditionError(f"{op}: parameter {k} = {v!r} has the wrong type") from None
    if "f" in params:
        NonlinearitySpec.parse(params["f"])


def _run_job(job):
    out = OPERATIONS[job.op](job.params)
    return job.name, out.render(), out.ok


def default_jobs():
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def run_campaign(path, jobs=None):
    """Run every job; outputs are written here, in config order, after all finish."""
    job_list, cap = load_campaign(path)
    workers = jobs or cap or default_jobs()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, job_list))
    else:
        results = [_run_job(j) for j in job_list]
    summary = []
    for job, (name, text, ok) in zip(job_list, results):
        os.makedirs(os.path.dirname(job.output) or ".", exist_ok=True)
        with open(job.output, "w", newline="") as fh:
            fh.write(text)
        summary.append({"job": name, "op": job.op, "output": os.path.relpath(job.output, os.path.dirname(
            os.path.abspath(path))), "ok": ok})
    return summary


# argument parsing --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_problem(sp, lam=True):
    sp.add_argument("--n", type=int, required=True, help="dimension")
    sp.add_argument("--f", default="exp", help="nonlinearity, e.g. exp, exp:16,1, power:1,3, csv:table.csv")
    if lam:
        sp.add_argument("--lambda", dest="lambda_", type=float, required=True, help="parameter lambda")
    sp.add_argument("--steps", type=int, default=2000, help="radial grid intervals")


def build_parser():
    ap = _Parser(prog="hardylab", description=__doc__.splitlines()[0])
    ap.add_argument("-o", "--output", help="write the result here instead of stdout")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _add_problem(sub.add_parser("solve", help="minimal radial solution as CSV r,u,uprime"))

    sp = sub.add_parser("branch", help="trace the radial branch, CSV lambda,u0,mu1")
    _add_problem(sp, lam=False)
    sp.set_defaults(steps=400)
    sp.add_argument("--lambda-cap", type=float, default=np.inf)
    sp.add_argument("--m0-max", type=float, default=12.0)

    sp = sub.add_parser("stability", help="principal eigenvalue of the linearised operator")
    _add_problem(sp)
    sp.add_argument("--modes", type=int, default=1)

    sp = sub.add_parser("hardy", help="foliated or single-surface Hardy inequalities")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--f", default="exp")
    sp.add_argument("--lambda", dest="lambda_", type=float)
    sp.add_argument("--steps", type=int, default=2000)
    sp.add_argument("--alpha", type=float, default=1.5)
    sp.add_argument("--y", type=float, default=0.0, help="|y| of the centre y = |y| e_1")
    sp.add_argument("--phi", choices=("radial", "mode", "mixed"), default="mixed")
    sp.add_argument("--surface", choices=("sphere", "icosphere", "circle"))
    sp.add_argument("--level", type=int, default=3, help="icosphere subdivisions")
    sp.add_argument("--points", type=int, default=256, help="polygon vertices")
    sp.add_argument("--radius", type=float, default=1.0)

    sp = sub.add_parser("geometry", help="integration by parts and coarea on analytic fields")
    sp.add_argument("--example", choices=("annulus", "shell"), default="annulus")
    sp.add_argument("--m", type=int, default=65, help="nodes per axis")

    sp = sub.add_parser("estimate", help="stability-driven estimates for one solution")
    _add_problem(sp)
    sp.add_argument("--kind", choices=("sz", "weighted", "pipeline", "potential", "linfty", "morrey", "lp"),
                    default="weighted")
    sp.add_argument("--alpha", type=float, default=1.5)
    sp.add_argument("--y", type=float, default=0.0)
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--lam-m", type=float, default=2.5, help="Morrey exponent lambda")
    sp.add_argument("--override", action="store_true", help="allow alpha outside the admissible set")

    sp = sub.add_parser("alpha-scan", help="admissible alpha intervals for a range of n")
    sp.add_argument("--n-min", type=int, default=2)
    sp.add_argument("--n-max", type=int, default=15)

    sp = sub.add_parser("singular", help="checks on u = -2 log r with f = 2(n-2) e^u")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--h", type=float, default=1e-2, help="inner radius of the sampled profile")

    sp = sub.add_parser("campaign", help="run the jobs of an INI campaign file")
    sp.add_argument("config")
    sp.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV} or 1)")
    return ap


def _params(args):
    p = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "output")}
    if "lambda_" in p:
        p["lambda"] = p.pop("lambda_")
    return p


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "campaign":
            summary = run_campaign(args.config, args.jobs)
            text = "".join(to_json(s) + "\n" for s in summary)
            ok = all(s["ok"] for s in summary)
        else:
            p = _params(args)
            if args.command == "hardy" and not args.surface and args.lambda_ is None:
                ap.error("hardy needs --lambda unless --surface is given")
            out = OPERATIONS[args.command](p)
            text, ok = out.render(), out.ok
    except (ValueError, BeyondExtremalError, OSError, configparser.Error) as exc:
        print(f"hardylab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, ConvergenceError) as exc:
        print(f"hardylab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
