"""Command-line front end.

Subcommands::

    varbound bound     -V EXPR [-d D] [-l L] [-n N] [-p P -t T -s S] [-k K] [--optimize MODE]
    varbound reproduce TABLE [--only KEY=VALUE] [--tol TOL]
    varbound scan      -V EXPR --scan AXIS:LO:HI:COUNT [--log] ...
    varbound oracle    -V EXPR [-d D] [-l L] [-k K] [--exact]

Exit codes: 0 success, 1 usage or parse error, 2 numerical failure,
3 a reproduced value outside its tolerance.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .eigen import upper_bounds
from .elements import build_bundle
from .errors import DomainError, PotentialSyntaxError, VarboundError
from .fixtures import FLAG_NOTES, load_fixtures, run_row, table_ids
from .optimize import minimize_full, minimize_scale, suggest_initial
from .potential import BasisSpec, Channel, Potential, PowerTerm, parse_potential
from .reference import anharmonic_exact, coulomb_determinant, gk_energy, integrate_radial

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_REPRODUCE = 0, 1, 2, 3

CSV_BOUND_HEADER = ["k", "eigenvalue"]
CSV_REPRODUCE_HEADER = ["table", "cite", "n", "k", "published", "computed", "oracle", "status", "flags"]


class UsageError(Exception):
    """Bad command-line input; the message names the offending flag."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x) -> str:
    """Human-readable number with at least 9 significant digits."""
    if x is None:
        return "-"
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return f"{x:#.12g}"


# --- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Everything a bound computation depends on.

    ``params`` holds the (p, t, s) given on the command line, any of which may
    be None.  With no parameters at all and ``optimize="none"`` the basis is
    automatic, which means a full optimization seeded by suggest_initial.
    """

    expression: str
    kinetic_factor: float
    dimension: int
    angular_momentum: int
    n: int
    k: int
    params: tuple
    optimize: str

    @property
    def potential(self) -> Potential:
        try:
            return parse_potential(self.expression, self.kinetic_factor)
        except PotentialSyntaxError as exc:
            raise UsageError(f"-V/--potential: {exc}") from None

    @property
    def channel(self) -> Channel:
        try:
            return Channel(self.dimension, self.angular_momentum)
        except DomainError as exc:
            raise UsageError(f"-d/-l: {exc}") from None

    @property
    def auto_basis(self) -> bool:
        return all(v is None for v in self.params)

    @property
    def effective_optimize(self) -> str:
        return "full" if self.auto_basis and self.optimize == "none" else self.optimize

    def to_json(self) -> dict:
        p, t, s = self.params
        return {
            "potential": self.expression,
            "kinetic_factor": self.kinetic_factor,
            "d": self.dimension,
            "l": self.angular_momentum,
            "n": self.n,
            "k": self.k,
            "p": p,
            "t": t,
            "s": s,
            "optimize": self.optimize,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        return cls(
            data["potential"],
            float(data.get("kinetic_factor", 1.0)),
            int(data.get("d", 3)),
            int(data.get("l", 0)),
            int(data.get("n", 1)),
            int(data.get("k", 0)),
            (data.get("p"), data.get("t"), data.get("s")),
            data.get("optimize", "none"),
        )


def _config(args) -> RunConfig:
    if getattr(args, "from_json", None):
        try:
            with open(args.from_json, encoding="utf-8") as fh:
                data = json.load(fh)
            return RunConfig.from_json(data.get("inputs", data))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"--from-json: cannot read {args.from_json}: {exc}") from None
    if args.potential is None:
        raise UsageError("-V/--potential is required")
    if args.n < 1:
        raise UsageError(f"-n: basis size must be >= 1, got {args.n}")
    if not 0 <= args.k < args.n:
        raise UsageError(f"-k: level {args.k} out of range for basis size {args.n}")
    for flag, value in (("-p", args.p), ("-t", args.t), ("-s", args.s)):
        if value is not None and not (math.isfinite(value) and value > 0):
            raise UsageError(f"{flag}: must be a positive finite number, got {value}")
    return RunConfig(
        args.potential,
        args.kinetic_factor,
        args.d,
        args.l,
        args.n,
        args.k,
        (args.p, args.t, args.s),
        args.optimize,
    )


def _fill_params(config, potential, channel):
    seed = suggest_initial(potential, channel)
    return tuple(seed[i] if v is None else float(v) for i, v in enumerate(config.params))


# --- bound --------------------------------------------------------------------


def compute_bound(config: RunConfig, potential: Potential | None = None) -> dict:
    """Run one bound computation and return the JSON-ready report.

    ``potential`` replaces the parsed expression when given (used by scans).
    """
    potential = config.potential if potential is None else potential
    channel = config.channel
    mode = config.effective_optimize
    diagnostics = {"optimize": mode}
    if mode == "full":
        init = None if config.auto_basis else _fill_params(config, potential, channel)
        try:
            opt = minimize_full(potential, channel, config.n, config.k, init=init)
        except DomainError as exc:
            raise UsageError(f"-p/-t/-s: {exc}") from None
        params = opt.best_params
        diagnostics.update(evaluations=opt.evaluations, converged=opt.converged)
    elif mode == "scale":
        p, t, s = _fill_params(config, potential, channel)
        bundle = _bundle(potential, BasisSpec(config.n, p, t, s), channel)
        opt = minimize_scale(bundle, config.k, s)
        params = opt.best_params
        diagnostics.update(evaluations=opt.evaluations, converged=opt.converged)
    else:
        params = _fill_params(config, potential, channel)
    basis = _basis(config.n, params, potential)
    estimate = upper_bounds(potential, basis, channel)
    diagnostics["conditioning"] = estimate.conditioning
    p, t, s = basis.params
    return {
        "inputs": config.to_json(),
        "params": {"n": basis.size, "p": p, "t": t, "s": s},
        "eigenvalues": list(estimate.eigenvalues),
        "diagnostics": diagnostics,
    }


def _basis(n, params, potential):
    try:
        basis = BasisSpec(n, *params)
        basis.check(potential)
    except DomainError as exc:
        raise UsageError(f"-n/-p/-t/-s: {exc}") from None
    return basis


def _bundle(potential, basis, channel):
    _basis(basis.size, basis.params, potential)
    return build_bundle(potential, basis, channel)


def _print_bound(report, output, out):
    if output == "json":
        json.dump(report, out, indent=2)
        out.write("\n")
        return
    values = report["eigenvalues"]
    if output == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_BOUND_HEADER)
        for k, v in enumerate(values):
            w.writerow([k, repr(v)])
        return
    inp, par, diag = report["inputs"], report["params"], report["diagnostics"]
    out.write(f"potential     {inp['potential']}   (kinetic factor {inp['kinetic_factor']:g})\n")
    out.write(f"channel       d={inp['d']} l={inp['l']}\n")
    out.write(f"basis         n={par['n']} p={fmt(par['p'])} t={fmt(par['t'])} s={fmt(par['s'])}\n")
    out.write(f"optimize      {diag['optimize']}")
    if "evaluations" in diag:
        out.write(f" ({diag['evaluations']} evaluations)")
    out.write(f"\nconditioning  {diag['conditioning']:.3e}\n")
    for k, v in enumerate(values):
        mark = "  <- target" if k == inp["k"] and diag["optimize"] != "none" else ""
        out.write(f"E[{k}]  {fmt(v)}{mark}\n")


def cmd_bound(args, out) -> int:
    report = compute_bound(_config(args))
    _print_bound(report, args.output, out)
    return EXIT_OK


# --- reproduce ----------------------------------------------------------------


def cmd_reproduce(args, out) -> int:
    table = args.table_id or args.table
    if table is None:
        raise UsageError("reproduce: a table id is required (positional or --table)")
    if table != "all" and table not in table_ids():
        raise UsageError(f"--table: unknown table id {table!r}; known: all, {', '.join(table_ids())}")
    rows = load_fixtures(None if table == "all" else table)
    for item in args.only or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--only: expected KEY=VALUE, got {item!r}")
        rows = [r for r in rows if r.matches(key.strip(), value.strip())]
    if not rows:
        raise UsageError("--only: no fixture rows match")

    results = [run_row(r, tol=args.tol) for r in rows]
    failed = [r for r in results if not r.passed and not r.flagged]

    if args.output == "json":
        payload = [
            {
                "table": r.row.table_id,
                "cite": r.row.cite,
                "inputs": r.row.inputs,
                "published": r.row.published,
                "computed": r.computed,
                "oracle": r.oracle,
                "params": list(r.optimization.best_params) if r.optimization else None,
                "passed": r.passed,
                "flags": list(r.row.flags),
                "problems": r.problems,
            }
            for r in results
        ]
        json.dump(payload, out, indent=2)
        out.write("\n")
    elif args.output == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_REPRODUCE_HEADER)
        for r in results:
            w.writerow([
                r.row.table_id, r.row.cite, r.row.n, r.row.k, repr(r.row.published),
                repr(r.computed), "" if r.oracle is None else repr(r.oracle),
                "pass" if r.passed else "fail", " ".join(r.row.flags),
            ])
    else:
        out.write(f"{'row':<48} {'n':>3} {'published':>16} {'computed':>16} {'oracle':>16} {'diff':>10}  status\n")
        for r in results:
            status = "pass" if r.passed else "FAIL"
            if r.flagged:
                status += " [" + ",".join(r.row.flags) + "]"
            out.write(
                f"{r.row.cite[:48]:<48} {r.row.n:>3} {fmt(r.row.published):>16} {fmt(r.computed):>16} "
                f"{fmt(r.oracle):>16} {r.computed - r.row.published:>10.2e}  {status}\n"
            )
            for problem in r.problems:
                out.write(f"    {problem}\n")
        for flag in sorted({f for r in results for f in r.row.flags}):
            out.write(f"[{flag}] {FLAG_NOTES.get(flag, '')}\n")
        out.write(f"{len(results) - len(failed)}/{len(results)} rows ok\n")
    return EXIT_REPRODUCE if failed else EXIT_OK


# --- scan ---------------------------------------------------------------------

_COEF_AXIS = re.compile(r"^a\(\s*([-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s*\)$")


def parse_scan(spec: str, log: bool = False):
    """Parse ``axis:lo:hi:count`` into (axis, grid).

    The axis is ``s``, ``t``, ``p`` or ``a(q)`` for the coefficient of r^q.
    The grid is linear, or geometric with ``log=True``.
    """
    parts = spec.split(":")
    if len(parts) != 4:
        raise UsageError(f"--scan: expected AXIS:LO:HI:COUNT, got {spec!r}")
    axis, lo, hi, count = (x.strip() for x in parts)
    if axis not in ("s", "t", "p") and not _COEF_AXIS.match(axis):
        raise UsageError(f"--scan: axis must be s, t, p or a(q), got {axis!r}")
    try:
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise UsageError(f"--scan: bad numbers in {spec!r}") from None
    if count < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise UsageError(f"--scan: need finite LO <= HI and COUNT >= 1, got {spec!r}")
    if count == 1 and hi != lo:
        raise UsageError("--scan: COUNT = 1 requires LO = HI")
    if (log or axis in ("s", "p")) and lo <= 0:
        raise UsageError(f"--scan: axis {axis} needs LO > 0 (and so does --log)")
    grid = np.geomspace(lo, hi, count) if log else np.linspace(lo, hi, count)
    return axis, [float(x) for x in grid]


def _with_coefficient(potential, q, value):
    terms = [t for t in potential.terms if t.exponent != q]
    terms.append(PowerTerm(value, q))
    return Potential(tuple(terms), potential.kinetic_factor)


def cmd_scan(args, out) -> int:
    config = _config(args)
    if not args.scan:
        raise UsageError("scan: --scan AXIS:LO:HI:COUNT is required")
    axis, grid = parse_scan(args.scan, args.log)
    potential, channel = config.potential, config.channel
    if axis == "s" and config.optimize != "none":
        raise UsageError("--optimize: a scan over s cannot also optimize")
    base = _fill_params(config, potential, channel)

    w = csv.writer(out, lineterminator="\n")
    w.writerow([axis] + [f"E{k}" for k in range(config.n)] + ["basis_p", "basis_t", "basis_s"])
    failures = 0
    bundle = None
    for x in grid:
        p, t, s = base
        pot = potential
        if axis == "s":
            s = x
        elif axis == "t":
            t = x
        elif axis == "p":
            p = x
        else:
            pot = _with_coefficient(potential, float(_COEF_AXIS.match(axis).group(1)), x)
        try:
            if axis == "s":
                bundle = bundle or _bundle(pot, BasisSpec(config.n, p, t, s), channel)
                values = bundle.eigenvalues(s)
            else:
                point = RunConfig(
                    config.expression, config.kinetic_factor, config.dimension,
                    config.angular_momentum, config.n, config.k, (p, t, s), config.optimize,
                )
                report = compute_bound(point, pot)
                values = report["eigenvalues"]
                pr = report["params"]
                p, t, s = pr["p"], pr["t"], pr["s"]
        except (VarboundError, ArithmeticError) as exc:
            if isinstance(exc, DomainError):
                raise UsageError(f"--scan: {exc}") from None
            failures += 1
            values = [math.nan] * config.n
        w.writerow([repr(x)] + [repr(float(v)) for v in values] + [repr(p), repr(t), repr(s)])
    return EXIT_NUMERICAL if failures else EXIT_OK


# --- oracle -------------------------------------------------------------------


def exact_energy(potential: Potential, channel: Channel, k: int = 0):
    """Closed-form level for the recognized exactly solvable families.

    Returns (family, energy).  Raises UsageError when the potential is in no
    family and DomainError when a family's solvability constraint fails.
    The Hamiltonian is divided by the kinetic factor first, so families are
    recognized for either factor.
    """
    kappa = potential.kinetic_factor
    coef = {t.exponent: t.coefficient / kappa for t in potential.terms}
    qs = set(coef)
    nu = channel.nu
    if qs <= {2.0, -2.0} and coef.get(2.0) == 1.0:
        a_eff = coef.get(-2.0, 0.0) + channel.centrifugal
        if a_eff >= 0:
            return "goldman-krivchenkov", kappa * gk_energy(a_eff, k)
    if qs <= {2.0, -4.0, -6.0} and coef.get(2.0, 0) > 0 and coef.get(-6.0, 0) > 0:
        if nu != 3 or k != 0:
            raise UsageError("--exact: the anharmonic family is known only for d+2l = 3 and k = 0")
        rep = anharmonic_exact(coef[2.0], coef.get(-4.0, 0.0), coef[-6.0])
        if not rep.satisfied:
            raise DomainError(f"anharmonic constraint not satisfied (residual {rep.residual:.3e})")
        return "singular-anharmonic", kappa * rep.energy
    if qs <= {-1.0, 1.0, 2.0} and coef.get(2.0, 0) > 0 and -1.0 in qs:
        if nu % 2 == 0 or k != 0:
            raise UsageError("--exact: the Coulomb family needs odd d+2l and k = 0")
        l_eff = (nu - 3) // 2
        rep = coulomb_determinant(-coef[-1.0], coef.get(1.0, 0.0), coef[2.0], l_eff, 0)
        if not rep.satisfied:
            raise DomainError(f"Coulomb constraint not satisfied (residual {rep.residual:.3e})")
        return "perturbed-coulomb", kappa * rep.energy
    raise UsageError("--exact: potential is not in a recognized exactly solvable family")


def cmd_oracle(args, out) -> int:
    potential = RunConfig(args.potential or "", args.kinetic_factor, args.d, args.l, 1, 0, (None,) * 3, "none")
    if args.potential is None:
        raise UsageError("-V/--potential is required")
    pot, channel = potential.potential, potential.channel
    if args.k < 0:
        raise UsageError(f"-k: must be >= 0, got {args.k}")
    if args.exact:
        try:
            method, energy = exact_energy(pot, channel, args.k)
        except DomainError as exc:
            raise UsageError(f"--exact: {exc}") from None
    else:
        method = "numerov"
        energy = integrate_radial(pot, channel, args.k, r_max=args.r_max, mesh=args.mesh)
    report = {"inputs": potential.to_json() | {"k": args.k}, "method": method, "energy": energy}
    if args.output == "json":
        json.dump(report, out, indent=2)
        out.write("\n")
    elif args.output == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["method", "k", "energy"])
        w.writerow([method, args.k, repr(energy)])
    else:
        out.write(f"E[{args.k}]  {fmt(energy)}   ({method})\n")
    return EXIT_OK


# --- entry point --------------------------------------------------------------


def _common(parser, with_basis=True):
    parser.add_argument("-V", "--potential", help="potential, e.g. 'r^2 + 0.1/r^2.5'")
    parser.add_argument("-d", type=int, default=3, help="spatial dimension (default 3)")
    parser.add_argument("-l", type=int, default=0, help="angular momentum (default 0)")
    parser.add_argument("-k", type=int, default=0, help="target level, 0 = ground (default 0)")
    parser.add_argument("--kinetic-factor", type=float, choices=(1.0, 0.5), default=1.0)
    parser.add_argument("--output", choices=("human", "json", "csv"), default="human")
    if with_basis:
        parser.add_argument("-n", type=int, default=1, help="basis size (default 1)")
        parser.add_argument("-p", type=float, help="basis power p")
        parser.add_argument("-t", type=float, help="basis exponent shift t")
        parser.add_argument("-s", type=float, help="scale s")
        parser.add_argument("--optimize", choices=("none", "scale", "full"), default="none")
        parser.add_argument("--from-json", metavar="FILE", help="rerun the inputs of a JSON report")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="varbound", description="Variational upper bounds for radial Schrodinger operators.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bound", help="eigenvalue bounds for one basis, optionally optimized")
    _common(b)
    b.set_defaults(func=cmd_bound)

    r = sub.add_parser("reproduce", help="recompute a published table from the embedded fixtures")
    r.add_argument("table_id", nargs="?", help=f"one of: all, {', '.join(table_ids())}")
    r.add_argument("--table", help="same as the positional table id")
    r.add_argument("--only", action="append", metavar="KEY=VALUE", help="keep rows whose input KEY equals VALUE")
    r.add_argument("--tol", type=float, help="override every row's tolerance")
    r.add_argument("--output", choices=("human", "json", "csv"), default="human")
    r.set_defaults(func=cmd_reproduce)

    s = sub.add_parser("scan", help="eigenvalues along a grid in one parameter (CSV)")
    _common(s)
    s.add_argument("--scan", metavar="AXIS:LO:HI:COUNT", help="axis s, t, p or a(q)")
    s.add_argument("--log", action="store_true", help="geometric grid")
    s.set_defaults(func=cmd_scan)

    o = sub.add_parser("oracle", help="reference level from the integrator or an exact formula")
    _common(o, with_basis=False)
    o.add_argument("--exact", action="store_true", help="use a closed form when the family is recognized")
    o.add_argument("--r-max", type=float, help="integration box (default: automatic)")
    o.add_argument("--mesh", type=int, default=200_000, help="Numerov mesh points")
    o.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"varbound: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PotentialSyntaxError, DomainError) as exc:
        print(f"varbound: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VarboundError, ArithmeticError) as exc:
        print(f"varbound: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
