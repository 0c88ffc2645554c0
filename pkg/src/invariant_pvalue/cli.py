"""Command-line interface.

Every subcommand writes into ``--out`` (default ``.``):

* ``report.json``: the P-value report with the resolved run configuration;
* ``density.csv``: estimated plain and corrected densities, for Monte-Carlo runs;
* ``contour.csv``: ``curve_id,t3,t4`` rows, for ``contour``;
* ``convergence.csv``: ``width,p_discrete,p_continuous,gap``, for ``discretize-demo``.

Exit status is 0 on success, 1 for invalid input or configuration and 2
when a numerical routine fails.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from scipy import stats

from . import closed_forms, discrete, discretization, loc_scale, normality_check
from .core import (DEFAULT_CHUNK_SIZE, DEFAULT_GRID_SIZE, DEFAULT_N_SIM, MonteCarloConfig,
                   NumericalError, PValueReport, Sample, ValidationError, dumps, validate_sample)
from .estimate import GRID_2D, DensityCurve

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def ingest_csv(path: str | Path) -> Sample:
    """Read one number per line; a non-numeric first line is taken as a header.

    Blank lines are ignored.  Parsing uses ``float`` and is therefore
    independent of the locale; a Unicode minus sign is accepted.

    Raises
    ------
    ValidationError
        On a missing or empty file, or a line that is not a finite number
        (the message carries the 1-based line number).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    values = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip().replace("−", "-")
        if not line:
            continue
        try:
            v = float(line)
        except ValueError:
            if lineno == 1:
                continue
            raise ValidationError(f"{path}: line {lineno}: not a number: {raw!r}") from None
        if not math.isfinite(v):
            raise ValidationError(f"{path}: line {lineno}: non-finite value {raw!r}")
        values.append(v)
    if not values:
        raise ValidationError(f"{path}: no data")
    return validate_sample(values)


def _fmt(v) -> str:
    return repr(float(v))


def write_density_csv(curve: DensityCurve, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if curve.dim == 1:
            w.writerow(["t", "f_plain", "f_star"])
            for row in zip(curve.grid, curve.f_plain, curve.f_star):
                w.writerow([_fmt(v) for v in row])
        else:
            g1, g2 = curve.grid
            w.writerow(["t1", "t2", "f_plain", "f_star"])
            for i, a in enumerate(g1):
                for j, b in enumerate(g2):
                    w.writerow([_fmt(a), _fmt(b), _fmt(curve.f_plain[i, j]), _fmt(curve.f_star[i, j])])


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _write_report(report: PValueReport, out: Path) -> None:
    (out / "report.json").write_text(report.to_json())


class _Parser(argparse.ArgumentParser):
    # Usage errors are input errors: exit 1, keeping 2 for numerical failures.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _mc_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("Monte-Carlo settings")
    g.add_argument("--n-sim", type=int, default=None,
                   help=f"replicates (default {DEFAULT_N_SIM}; {loc_scale.DEFAULT_N_SIM} for loc-scale-check)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)
    g.add_argument("--bandwidth", type=float, default=None, help="KDE bandwidth override")
    g.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    g.add_argument("--workers", type=int, default=1, help="threads; never changes the output")


def _command(sub, name: str, help: str) -> argparse.ArgumentParser:
    p = sub.add_parser(name, help=help)
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="invariant-pvalue",
                     description="Invariant P-values for model checking.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = _command(sub, "check-normal", "check normality of a data file")
    p.add_argument("input", help="CSV file, one value per line")
    p.add_argument("--stat", choices=sorted(normality_check.STATISTICS), default="jb")
    _mc_flags(p)

    p = _command(sub, "pvalue", "closed-form P-values")
    p.add_argument("--dist", choices=["chisq", "normal-mean", "jb-asymptotic"], required=True)
    p.add_argument("--k", type=int, default=1, help="chi-square degrees of freedom")
    p.add_argument("--t0", type=float, required=True, help="observed statistic (the mean for normal-mean)")
    p.add_argument("--n", type=int, default=1, help="sample size for normal-mean")

    p = _command(sub, "discrete", "P-value of an outcome under a finite pmf")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pmf", help="CSV file with value,probability rows")
    src.add_argument("--poisson", type=float, metavar="LAMBDA")
    src.add_argument("--binomial", nargs=2, metavar=("N", "P"))
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--max-value", type=int, default=None,
                   help="upper truncation for poisson (default: mass beyond < 1e-12)")

    p = _command(sub, "discretize-demo", "partition P-values approaching the density P-value")
    p.add_argument("--density", choices=sorted(discretization.BUILTIN), default="normal")
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--base-width", type=float, default=1.0)
    p.add_argument("--levels", type=int, default=12, help="number of halvings")
    p.add_argument("--anchor", type=float, default=0.0)

    p = _command(sub, "loc-scale-check", "location-scale model check of a data file")
    p.add_argument("input")
    p.add_argument("--model", choices=["normal", "student_t", "laplace", "logistic"], default="normal")
    p.add_argument("--df", type=float, default=None, help="degrees of freedom for student_t")
    _mc_flags(p)

    p = _command(sub, "contour", "level-alpha contours of the joint (T3, T4) check")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    _mc_flags(p)
    return parser


def _mc_config(args, default_n_sim: int) -> MonteCarloConfig:
    return MonteCarloConfig(
        n_sim=default_n_sim if args.n_sim is None else args.n_sim,
        seed=args.seed, chunk_size=args.chunk_size, bandwidth=args.bandwidth,
        grid_size=args.grid_size, workers=args.workers)


def _resolved(args, mc: Optional[MonteCarloConfig] = None) -> dict:
    """Run configuration for the report echo.

    ``workers`` and ``out`` are left out: neither changes any result.
    """
    out = {k: v for k, v in vars(args).items()
           if k not in ("n_sim", "seed", "chunk_size", "bandwidth", "grid_size", "workers", "out")}
    if mc is not None:
        out.update(mc.echo())
    return out


def _with_config(report: PValueReport, config: dict) -> PValueReport:
    return PValueReport.from_dict({**report.to_dict(), "config": config})


def _run_check_normal(args, out: Path) -> None:
    mc = _mc_config(args, DEFAULT_N_SIM)
    req = normality_check.NormalCheckRequest(ingest_csv(args.input), args.stat, mc)
    report, curve = normality_check.check_normal(req)
    _write_report(_with_config(report, _resolved(args, mc)), out)
    size = mc.grid_size if curve.dim == 1 else GRID_2D
    write_density_csv(curve.resample(size), out / "density.csv")


def _run_pvalue(args, out: Path) -> None:
    t0 = args.t0
    if args.dist == "chisq":
        report = PValueReport(
            statistic_name=f"chisq({args.k})", t_observed=t0,
            p_invariant=closed_forms.chisq_invariant_pvalue(args.k, t0),
            p_plain=closed_forms.chisq_measured_pvalue(args.k, t0),
            p_tail=float(stats.chi2.sf(t0, args.k)),
            method="closed form: chi-square level sets")
    elif args.dist == "normal-mean":
        p = closed_forms.mean_stat_pvalue(t0, args.n)
        report = PValueReport(statistic_name="normal_mean", t_observed=t0, p_invariant=p,
                              p_plain=p, n=args.n, method="closed form: two-sided normal")
    else:
        p = closed_forms.jb_asymptotic_pvalue(t0)
        report = PValueReport(statistic_name="jb", t_observed=t0, p_invariant=p, p_tail=p,
                              p_asymptotic=p, method="chi-square(2) approximation")
    _write_report(_with_config(report, _resolved(args)), out)


def _read_pmf(path: str) -> discrete.FinitePmf:
    mapping = {}
    try:
        rows = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(rows, start=1):
        if not raw.strip():
            continue
        parts = [s.strip() for s in raw.split(",")]
        try:
            if len(parts) != 2:
                raise ValueError
            value, prob = float(parts[0]), float(parts[1])
        except ValueError:
            if lineno == 1:
                continue
            raise ValidationError(f"{path}: line {lineno}: expected value,probability") from None
        if value in mapping:
            raise ValidationError(f"{path}: line {lineno}: duplicate value {parts[0]}")
        mapping[value] = prob
    return discrete.FinitePmf.from_mapping(mapping)


def _run_discrete(args, out: Path) -> None:
    if args.pmf is not None:
        pmf, name = _read_pmf(args.pmf), "pmf"
    elif args.poisson is not None:
        lam = args.poisson
        if not lam > 0:
            raise ValidationError("poisson mean must be positive")
        top = args.max_value if args.max_value is not None else int(stats.poisson.isf(1e-12, lam)) + 1
        dist = stats.poisson(lam)
        mass = float(dist.cdf(top))
        pmf = discrete.truncated(range(top + 1), lambda k: float(dist.pmf(k)) / mass)
        name = f"poisson({lam:g})"
    else:
        try:
            size, prob = int(args.binomial[0]), float(args.binomial[1])
        except ValueError:
            raise ValidationError("--binomial expects an integer N and a probability P") from None
        if size < 0 or not 0 <= prob <= 1:
            raise ValidationError("--binomial needs N >= 0 and 0 <= P <= 1")
        dist = stats.binom(size, prob)
        pmf = discrete.truncated(range(size + 1), lambda k: float(dist.pmf(k)))
        name = f"binomial({size},{prob:g})"
    t0 = args.t0
    if t0 not in pmf:
        raise ValidationError(f"t0={t0:g} is not in the support")
    report = PValueReport(statistic_name=name, t_observed=t0,
                          p_invariant=discrete.discrete_pvalue(pmf, t0),
                          p_tail=discrete.tail_pvalue(pmf, t0),
                          method="exact enumeration")
    _write_report(_with_config(report, _resolved(args)), out)


def _run_discretize_demo(args, out: Path) -> None:
    if args.levels < 1 or not args.base_width > 0:
        raise ValidationError("need --levels >= 1 and a positive --base-width")
    f = discretization.BUILTIN[args.density]()
    widths = [args.base_width * 2.0 ** -k for k in range(args.levels + 1)]
    rows = discretization.convergence_sweep(f, args.x0, widths, args.anchor)
    _write_rows(out / "convergence.csv", ["width", "p_discrete", "p_continuous", "gap"], rows)
    report = PValueReport(statistic_name=f"identity[{f.name}]", t_observed=args.x0,
                          p_invariant=rows[-1][2], p_plain=rows[-1][2],
                          method=f"density level set; finest partition P-value {rows[-1][1]!r}")
    _write_report(_with_config(report, _resolved(args)), out)


def _run_loc_scale(args, out: Path) -> None:
    mc = _mc_config(args, loc_scale.DEFAULT_N_SIM)
    model = loc_scale.LocScaleModel(args.model, args.df)
    report = loc_scale.loc_scale_pvalue(ingest_csv(args.input), model, mc)
    _write_report(_with_config(report, _resolved(args, mc)), out)


def _run_contour(args, out: Path) -> None:
    mc = _mc_config(args, DEFAULT_N_SIM)
    cs = normality_check.alpha_contour_t3t4(args.n, args.alpha, mc)
    _write_rows(out / "contour.csv", ["curve_id", "t3", "t4"], cs.rows())
    write_density_csv(cs.curve, out / "density.csv")
    (out / "config.json").write_text(dumps(_resolved(args, mc)))


_RUNNERS = {
    "check-normal": _run_check_normal,
    "pvalue": _run_pvalue,
    "discrete": _run_discrete,
    "discretize-demo": _run_discretize_demo,
    "loc-scale-check": _run_loc_scale,
    "contour": _run_contour,
}


def run(args: argparse.Namespace) -> int:
    """Execute a parsed command line; returns the exit status."""
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _RUNNERS[args.subcommand](args, out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
