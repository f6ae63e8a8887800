"""Command-line interface.

Every subcommand reads CSV datasets (see :mod:`ambirot.io`) and writes a
JSON report, except ``gen`` (CSV) and ``plot`` (SVG). Exit codes are 0
on success, 1 when the data are statistically degenerate and 2 for
usage or input errors.
"""

import argparse
import sys
import warnings

import numpy as np

from ._config import DEFAULT_BAND_LIMIT, DEFAULT_REPLICATES
from .distributions import DistributionSpec, cardioid_moment_estimates, fit_watson, sample
from .exceptions import DegenerateSampleError, GroupMismatchError, OutsideNeighbourhoodError
from .inference import (
    dispersion,
    gine_TG,
    independence_test,
    one_sample_hotelling,
    one_sample_location_randomization,
    summarize,
    two_sample_hotelling,
    two_sample_test,
    uniformity_S,
)
from .io import DatasetError, dumps_json, format_dataset, parse_dataset, read_dataset
from .regression import fit_regression, mean_misorientation_alt, misorientation, residual_chi2_inference
from .rotations import AmbiguousRotation, matrix_to_quaternion, quaternion_to_matrix
from .stereonet import render_stereonet
from .validation import check_group

__all__ = ["main", "build_parser"]

COMMANDS = (
    "gen", "mean", "disp", "test-uniformity", "test-location", "test-two-sample",
    "test-independence", "fit", "regress", "misorient", "plot",
)


class UsageError(Exception):
    """Invalid flags or arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _quaternion_arg(text):
    try:
        q = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'w,x,y,z', got {text!r}") from None
    if q.shape != (4,) or not np.all(np.isfinite(q)) or np.linalg.norm(q) == 0:
        raise argparse.ArgumentTypeError(f"expected four numbers 'w,x,y,z', got {text!r}")
    return q


def _common():
    p = _Parser(add_help=False)
    p.add_argument("--group", help="symmetry group tag, e.g. C2, D3, T, O, Y; 'C2,O' for paired data")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--replicates", "-B", type=int, default=DEFAULT_REPLICATES,
                   help=f"randomization/permutation replicates (default {DEFAULT_REPLICATES})")
    p.add_argument("--format", choices=("quaternion", "matrix"), help="dataset row format")
    p.add_argument("--out", help="output file (default: standard output)")
    return p


def build_parser():
    """The argument parser for all subcommands."""
    common = _common()
    parser = _Parser(prog="ambirot", description="Statistics for ambiguous rotations.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--family", choices=("uniform", "watson", "dlvp", "cardioid"), default="uniform")
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--mode", type=_quaternion_arg, default=np.array([1.0, 0, 0, 0]),
                   help="mode quaternion 'w,x,y,z' (default identity)")
    p.add_argument("-n", type=int, default=100, help="sample size")

    for name, helptext in (("mean", "sample mean"), ("disp", "dispersion")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("file", nargs="?", default="-")

    p = sub.add_parser("test-uniformity", parents=[common], help="test of uniformity")
    p.add_argument("file", nargs="?", default="-")
    p.add_argument("--mode", choices=("asymptotic", "randomization"), default="asymptotic")
    p.add_argument("--statistic", choices=("S", "TG"), default="S")

    p = sub.add_parser("test-location", parents=[common], help="one-sample test of location")
    p.add_argument("file", nargs="?", default="-")
    p.add_argument("--m0", type=_quaternion_arg, required=True, help="hypothesised mean quaternion 'w,x,y,z'")
    p.add_argument("--method", choices=("randomization", "hotelling"), default="randomization")

    p = sub.add_parser("test-two-sample", parents=[common], help="two-sample test of location")
    p.add_argument("file1")
    p.add_argument("file2")
    p.add_argument("--method", choices=("permutation", "hotelling"), default="permutation")

    p = sub.add_parser("test-independence", parents=[common], help="test of independence of paired data")
    p.add_argument("file")
    p.add_argument("file2", nargs="?")
    p.add_argument("--band-limit", type=int, default=DEFAULT_BAND_LIMIT)

    p = sub.add_parser("fit", parents=[common], help="fit a parametric family")
    p.add_argument("file", nargs="?", default="-")
    p.add_argument("--family", choices=("watson", "cardioid"), default="watson")

    p = sub.add_parser("regress", parents=[common], help="regression of paired data")
    p.add_argument("file")
    p.add_argument("file2", nargs="?")
    p.add_argument("--band-limit", type=int, default=DEFAULT_BAND_LIMIT)
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("misorient", parents=[common], help="misorientations of paired data")
    p.add_argument("file")
    p.add_argument("file2", nargs="?")
    p.add_argument("--band-limit", type=int, default=DEFAULT_BAND_LIMIT)
    p.add_argument("--alt", action="store_true", help="also compute the alternative mean misorientation")

    p = sub.add_parser("plot", parents=[common], help="C2 stereonet as SVG")
    p.add_argument("file", nargs="?", default="-")
    p.add_argument("--no-mean", action="store_true", help="omit the sample mean")
    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(path, args):
    return read_dataset(path, args.format, args.group)


def _one(args, path):
    ds = _load(path, args)
    if ds.paired:
        raise UsageError(f"{path}: expected a single sample, found paired data")
    return ds.samples[0]


def _paired(args):
    if args.file2 is None:
        ds = read_dataset(args.file, args.format, args.group)
        if not ds.paired:
            raise UsageError(f"{args.file}: expected paired data (two column blocks) or two files")
        return ds.samples[0], ds.samples[1]
    groups = (args.group.split(",") if args.group else [None, None])
    if len(groups) != 2:
        raise UsageError("--group for two files must name two groups, e.g. 'C2,O'")
    a = read_dataset(args.file, args.format, groups[0]).samples
    b = read_dataset(args.file2, args.format, groups[1]).samples
    if len(a) != 1 or len(b) != 1:
        raise UsageError("each file must hold a single sample")
    return a[0], b[0]


def _config(args, **extra):
    cfg = {"command": args.command, "seed": args.seed, "replicates": args.replicates}
    cfg.update(extra)
    return cfg


def _report(rep, args, **extra):
    d = rep.to_dict()
    d.setdefault("config", {}).update(_config(args, **extra))
    return d


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_gen(args):
    if not args.group:
        raise UsageError("gen: --group is required")
    g = check_group(args.group)
    q = args.mode / np.linalg.norm(args.mode)
    mode = AmbiguousRotation(quaternion_to_matrix(q), g)
    family = "watson" if args.family == "uniform" else args.family
    kappa = 0.0 if args.family == "uniform" else args.kappa
    if args.n < 1:
        raise UsageError("gen: -n must be positive")
    spec = DistributionSpec(family, mode, kappa)
    s = sample(spec, args.n, np.random.default_rng(args.seed))
    meta = {"family": args.family, "kappa": repr(float(kappa)),
            "mode": ",".join("%.17g" % x for x in q), "seed": args.seed, "n": args.n}
    text = format_dataset(s, args.format or "quaternion", meta)
    _emit(text, args.out)
    return parse_dataset(text)


def cmd_mean(args):
    s = _one(args, args.file)
    d = summarize(s).to_dict()
    d["config"] = _config(args)
    _emit(dumps_json(d) + "\n", args.out)


def cmd_disp(args):
    s = _one(args, args.file)
    d = {"n": len(s), "group": s.group.name, "dispersion": dispersion(s), "config": _config(args)}
    _emit(dumps_json(d) + "\n", args.out)


def cmd_test_uniformity(args):
    s = _one(args, args.file)
    if args.statistic == "TG":
        rep = gine_TG(s, args.replicates, args.seed)
    else:
        rep = uniformity_S(s, args.mode, args.replicates, args.seed)
    _emit(dumps_json(_report(rep, args, group=s.group.name)) + "\n", args.out)


def cmd_test_location(args):
    s = _one(args, args.file)
    m0 = AmbiguousRotation(quaternion_to_matrix(args.m0), s.group)
    if args.method == "hotelling":
        rep = one_sample_hotelling(s, m0)
    else:
        rep = one_sample_location_randomization(s, m0, args.replicates, args.seed)
    _emit(dumps_json(_report(rep, args, group=s.group.name)) + "\n", args.out)


def cmd_test_two_sample(args):
    a, b = _one(args, args.file1), _one(args, args.file2)
    if args.method == "hotelling":
        rep = two_sample_hotelling(a, b)
    else:
        rep = two_sample_test(a, b, args.replicates, args.seed)
    _emit(dumps_json(_report(rep, args, group=a.group.name)) + "\n", args.out)


def cmd_test_independence(args):
    a, b = _paired(args)
    rep = independence_test(a, b, args.replicates, args.seed, args.band_limit)
    _emit(dumps_json(_report(rep, args, groups=[a.group.name, b.group.name])) + "\n", args.out)


def cmd_fit(args):
    s = _one(args, args.file)
    if args.family == "watson":
        f = fit_watson(s)
        d = {"family": "watson", "kappa": f.kappa, "mean_stat": f.mean_stat, "kappa_method": f.method}
    else:
        f = cardioid_moment_estimates(s)
        d = {"family": "cardioid", "kappa": f.kappa, "clamped": f.clamped}
    d.update({"mode_quaternion": matrix_to_quaternion(f.mode.rep), "n": len(s), "group": s.group.name,
              "config": _config(args)})
    _emit(dumps_json(d) + "\n", args.out)


def cmd_regress(args):
    a, b = _paired(args)
    fit = fit_regression((a, b), band_limit=args.band_limit)
    d = fit.to_dict()
    if fit.n >= 2:
        try:
            inf = residual_chi2_inference((a, b), fit)
            d["confidence_region"] = {"alpha": args.alpha, "kappa_hat": inf.kappa_hat,
                                      "statistic": "2 kappa_hat * excess(A) < chi2_3 quantile"}
        except DegenerateSampleError as exc:
            d["confidence_region"] = {"error": str(exc)}
    d["config"].update(_config(args))
    _emit(dumps_json(d) + "\n", args.out)


def cmd_misorient(args):
    a, b = _paired(args)
    rows = []
    for u, v in zip(a, b):
        m = misorientation(u, v)
        rows.append({"angle_deg": np.degrees(m.angle), "axis": m.axis, "p": matrix_to_quaternion(m.p)})
    fit = fit_regression((a, b), band_limit=args.band_limit)
    d = {"groups": [a.group.name, b.group.name], "pairs": rows,
         "mean_misorientation": matrix_to_quaternion(fit.a_hat), "config": _config(args)}
    if args.alt:
        a1, a2 = mean_misorientation_alt((a, b), band_limit=args.band_limit)
        d["alternative"] = {"a1": matrix_to_quaternion(a1), "a2_class_rep": matrix_to_quaternion(a2.rep)}
    _emit(dumps_json(d) + "\n", args.out)


def cmd_plot(args):
    s = _one(args, args.file)
    mean = None
    if not args.no_mean:
        from .inference import sample_mean

        mean = sample_mean(s)
    _emit(render_stereonet(s, mean), args.out)


_DISPATCH = {
    "gen": cmd_gen, "mean": cmd_mean, "disp": cmd_disp, "test-uniformity": cmd_test_uniformity,
    "test-location": cmd_test_location, "test-two-sample": cmd_test_two_sample,
    "test-independence": cmd_test_independence, "fit": cmd_fit, "regress": cmd_regress,
    "misorient": cmd_misorient, "plot": cmd_plot,
}


def main(argv=None):
    """Run the command line; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    caught = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("default")
            _DISPATCH[args.command](args)
    except (DegenerateSampleError, OutsideNeighbourhoodError) as exc:
        code, message = 1, str(exc)
    except (UsageError, DatasetError, GroupMismatchError, ValueError, OSError) as exc:
        code, message = 2, str(exc)
    else:
        code, message = 0, None
    for w in caught:
        print(f"ambirot {args.command}: warning: {w.message}", file=sys.stderr)
    if message is not None:
        print(f"ambirot {args.command}: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
