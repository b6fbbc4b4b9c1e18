"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 numeric non-convergence,
3 input, schema or usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import mixture as mx
from .errors import ConvergenceError, SchurMixError
from .model import Case, load_model
from .montecarlo import SimConfig, run_sim
from .specfun import SeriesControl
from .validation import validate

EXIT_OK, EXIT_FAIL, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # let "--theta -0.5,0.1" through as a value rather than an option
        self._negative_number_matcher = re.compile(r"^-\.?\d")

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    return repr(float(x))


def _grid(text: str) -> np.ndarray:
    try:
        start, stop, count = text.split(":")
        start, stop, count = float(start), float(stop), int(count)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:count, got {text!r}") from exc
    if count < 1 or not (math.isfinite(start) and math.isfinite(stop)):
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}")
    return np.linspace(start, stop, count)


def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _default_workers() -> int:
    workers = os.cpu_count() or 1
    cap = os.environ.get("SCHURMIX_THREADS")
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            pass
    return workers


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _meta(args, **extra) -> dict:
    out = {"tool": "schurmix", "version": __version__, "tol": args.tol,
           "rel_tol": args.rel_tol, "max_terms": args.max_terms}
    out.update(extra)
    return out


def _write_csv(args, header, rows, meta):
    for row in rows:
        for v in row:
            if isinstance(v, float) and not math.isfinite(v):
                raise ConvergenceError(f"non-finite value {v} in output", partial_sum=v)
    with _output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")


def _write_json(args, doc):
    with _output(args.out) as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ctl(args) -> SeriesControl:
    return SeriesControl(args.rel_tol, args.max_terms)


def cmd_params(args) -> int:
    model = load_model(args.spec)
    doc = {"kind": "params", **model.params.to_json(), "metadata": _meta(args)}
    _write_json(args, doc)
    return EXIT_OK


def cmd_weights(args) -> int:
    model = load_model(args.spec)
    mix = mx.weights(model.params, args.tol, _ctl(args))
    rows = [(k, float(b)) for k, b in enumerate(mix.betas)]
    _write_csv(args, ["k", "beta_k"], rows,
               _meta(args, kind="weights", K=mix.K, tail_mass=mix.tail_mass,
                     case=model.params.case.value))
    return EXIT_OK


def cmd_pdf(args) -> int:
    model = load_model(args.spec)
    law = mx.RhoLaw(model.params, args.tol, _ctl(args))
    values = law.pdf_w11dot2(args.grid) if args.unscaled else law.pdf(args.grid)
    s112 = model.params.sigma112 if args.unscaled else 1.0
    bound = float(np.max(law.pdf_bound(args.grid / s112))) / s112 if np.all(args.grid > 0) else None
    rows = [(float(w), float(v)) for w, v in zip(args.grid, np.atleast_1d(values))]
    _write_csv(args, ["w", "value"], rows,
               _meta(args, kind="grid", quantity="pdf_w11dot2" if args.unscaled else "pdf_rho",
                     tail_mass=law.mix.tail_mass, truncation_bound=bound))
    return EXIT_OK


def cmd_cdf(args) -> int:
    model = load_model(args.spec)
    law = mx.RhoLaw(model.params, args.tol, _ctl(args))
    grid = args.grid / model.params.sigma112 if args.unscaled else args.grid
    lower, upper = law.cdf_interval(grid)
    lower, upper = np.atleast_1d(lower), np.atleast_1d(upper)
    meta = _meta(args, kind="grid", quantity="cdf_w11dot2" if args.unscaled else "cdf_rho",
                 tail_mass=law.mix.tail_mass)
    if law.mix.tail_mass > args.tol / 10.0:
        rows = [(float(w), float(lo), float(hi)) for w, lo, hi in zip(args.grid, lower, upper)]
        _write_csv(args, ["w", "lower", "upper"], rows, meta)
    else:
        rows = [(float(w), float(lo)) for w, lo in zip(args.grid, lower)]
        _write_csv(args, ["w", "value"], rows, meta)
    return EXIT_OK


def cmd_mgf(args) -> int:
    bad = [t for t in args.theta if not t < 0.5]
    if bad:
        raise UsageError(f"MGF needs theta < 0.5, got {bad}")
    model = load_model(args.spec)
    rows = [(t, mx.mgf(model.params, t, _ctl(args))) for t in args.theta]
    _write_csv(args, ["theta", "value"], rows, _meta(args, kind="grid", quantity="mgf"))
    return EXIT_OK


def cmd_pgf(args) -> int:
    model = load_model(args.spec)
    rows = [(s, mx.pgf(model.params, s, _ctl(args))) for s in args.s]
    _write_csv(args, ["s", "value"], rows, _meta(args, kind="grid", quantity="pgf"))
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = load_model(args.spec)
    workers = args.workers or _default_workers()
    sims = run_sim(model.gaussian, SimConfig(args.samples, args.seed, workers))
    if args.format == "json":
        _write_json(args, sims.to_json())
    else:
        with _output(args.out) as fh:
            sims.to_csv(fh)
    return EXIT_OK


def cmd_validate(args) -> int:
    model = load_model(args.spec)
    workers = args.workers or _default_workers()
    report = validate(model, args.samples, args.seed, args.alpha, workers, args.tol, _ctl(args))
    report["metadata"].update(tool="schurmix", version=__version__)
    _write_json(args, report)
    if not report["passed"]:
        print(f"validation failed: {', '.join(report['failed'])}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="schurmix",
                     description="Chi-square mixture law of the scalar Schur complement "
                                 "of a noncentral Wishart matrix.")
    parser.add_argument("--version", action="version", version=f"schurmix {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("spec", type=Path, help="JSON model document")
    common.add_argument("--tol", type=float, default=mx.DEFAULT_TOL,
                        help="allowed neglected weight mass (default %(default)g)")
    common.add_argument("--rel-tol", type=float, default=1e-14,
                        help="series truncation tolerance (default %(default)g)")
    common.add_argument("--max-terms", type=int, default=10_000,
                        help="cap on terms per series index (default %(default)d)")
    common.add_argument("--out", type=Path, default=None, help="write here instead of stdout")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("params", parents=[common], help="derived parameters as JSON").set_defaults(func=cmd_params)
    sub.add_parser("weights", parents=[common], help="mixture weights CSV").set_defaults(func=cmd_weights)
    for name, func, what in (("pdf", cmd_pdf, "density"), ("cdf", cmd_cdf, "distribution function")):
        p = sub.add_parser(name, parents=[common], help=f"{what} on a grid")
        p.add_argument("--grid", type=_grid, required=True, help="start:stop:count")
        p.add_argument("--unscaled", action="store_true",
                       help="evaluate for w11dot2 = sigma112 * rho instead of rho")
        p.set_defaults(func=func)
    p = sub.add_parser("mgf", parents=[common], help="moment generating function")
    p.add_argument("--theta", type=_floats, required=True, help="comma-separated values < 0.5")
    p.set_defaults(func=cmd_mgf)
    p = sub.add_parser("pgf", parents=[common], help="probability generating function of the weights")
    p.add_argument("--s", type=_floats, required=True, help="comma-separated values")
    p.set_defaults(func=cmd_pgf)

    workers_help = "worker threads (default: CPU count, capped by SCHURMIX_THREADS)"
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo draws")
    p.add_argument("--samples", type=int, default=100_000, help="number of draws (default 100000)")
    p.add_argument("--seed", type=int, default=42, help="RNG seed (default 42)")
    p.add_argument("--workers", type=int, default=None, help=workers_help)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", parents=[common], help="analytic vs Monte Carlo report")
    p.add_argument("--samples", type=int, default=200_000, help="number of draws (default 200000)")
    p.add_argument("--seed", type=int, default=42, help="RNG seed (default 42)")
    p.add_argument("--alpha", type=float, default=0.01, help="KS significance level (default 0.01)")
    p.add_argument("--workers", type=int, default=None, help=workers_help)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"schurmix: usage error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"schurmix: no convergence: {exc} (partial sum {exc.partial_sum!r}, "
              f"bound {exc.bound!r})", file=sys.stderr)
        return EXIT_NUMERIC
    except (SchurMixError, OSError) as exc:
        print(f"schurmix: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
