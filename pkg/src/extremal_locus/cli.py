"""Command-line entry point.

Every subcommand writes one JSON report (``schema: 1``) holding the parsed
configuration, the results and a provenance block naming the modules,
methods and step sizes involved.  Floats are written with 17 significant
digits so reports round-trip exactly and identical configurations give
identical bytes.

Exit status: 0 on success, 1 on a computational failure, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import ast
import csv
import io
import math
import sys

import numpy as np

from . import __version__
from .ball_spectrum import SolverError, ball_constants
from .curvature import H_LAPLACE, H_METRIC, CurvatureError, invariants_at
from .h_operator import h_eigenvalue, h_eigenvalue_closed
from .localization import (
    expansion_constants,
    find_critical_points,
    k_constants,
    k_constants_assembled,
    r_function,
    r_two_path,
)
from .metric_dsl import MetricDomainError, MetricSyntaxError, load_metric
from .parallel import thread_count

SCHEMA = 1


class UsageError(Exception):
    """Bad arguments detected after parsing."""


# ------------------------------------------------------------ serialisation


def _plain(obj):
    """Convert numpy containers and scalars to plain Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _encode(obj, indent=0):
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        text = format(obj, ".17g")
        # keep floats recognisable as floats after a round trip
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, str):
        import json

        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _encode(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [inner + _encode(str(k)) + ": " + _encode(v, indent + 1) for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(report) -> str:
    """JSON text with floats at 17 significant digits."""
    return _encode(_plain(report)) + "\n"


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in _plain(row)])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


# ------------------------------------------------------------ arguments


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _window(text):
    try:
        lo, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError(f"window needs 0 < lo < hi, got {text!r}")
    return lo, hi


def _region(text):
    out = []
    for part in text.split(","):
        try:
            out.append(_window_any(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected lo:hi,lo:hi,..., got {text!r}") from None
    return out


def _window_any(text):
    lo, hi = (float(t) for t in text.split(":"))
    if not lo < hi:
        raise ValueError(text)
    return lo, hi


def _param(text):
    key, sep, value = text.partition("=")
    if not sep or not key.isidentifier():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        value = ast.literal_eval(value)
    except (ValueError, SyntaxError):
        pass  # keep as a string, e.g. chart=stereographic
    return key, value


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _add_output(p):
    p.add_argument("--report", metavar="PATH", help="write the JSON report here (default: stdout)")
    p.add_argument("--csv", metavar="PATH", help="also write the main table as CSV")
    p.add_argument("--seed", type=int, default=0, help="random seed recorded in the config")


def _add_metric(p, point=True):
    p.add_argument("--metric", required=True, help="builtin name or path to a metric document")
    p.add_argument(
        "--param",
        action="append",
        type=_param,
        default=[],
        metavar="KEY=VALUE",
        help="builtin parameter, e.g. --param a=2 --param n=3 (repeatable)",
    )
    if point:
        p.add_argument("--point", required=True, type=_float_list, help="chart point x1,...,xn")
    p.add_argument("--h", type=float, default=H_METRIC, help="metric differencing step")
    p.add_argument("--h-lap", type=float, default=H_LAPLACE, help="step for the Laplacian of R")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extremal-locus", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("constants", help="unit-ball constants and K1..K4")
    p.add_argument("--dim", type=_positive_int, required=True)
    _add_output(p)

    p = sub.add_parser("h-spectrum", help="eigenvalues alpha_j of the operator H")
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--degree", type=_positive_int, default=10, help="largest degree j")
    _add_output(p)

    p = sub.add_parser("invariants", help="curvature invariants at a point")
    _add_metric(p)
    p.add_argument("--numeric", action="store_true", help="skip closed forms for builtins")
    _add_output(p)

    p = sub.add_parser("phi", help="localization function at a point")
    _add_metric(p)
    p.add_argument("--eps", type=_float_list, required=True, help="radius or comma list of radii")
    p.add_argument("--order", type=int, choices=(0, 2), default=2)
    _add_output(p)

    p = sub.add_parser("critical-points", help="critical points of the localization function")
    _add_metric(p, point=False)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--order", type=int, choices=(0, 2), default=2)
    p.add_argument("--region", type=_region, help="search box lo:hi,lo:hi,... (default: chart bounds)")
    p.add_argument("--grid", type=_positive_int, default=21)
    p.add_argument("--gtol", type=float, default=1e-8)
    p.add_argument("--newton-step", type=float, default=2e-2, help="differencing step for Newton")
    _add_output(p)

    p = sub.add_parser("verify", help="numerical verification runs")
    vsub = p.add_subparsers(dest="target", metavar="TARGET")
    vsub.required = True

    q = vsub.add_parser("expansion", help="small-ball expansions on a space form")
    q.add_argument("--dim", type=_positive_int, required=True)
    q.add_argument("--kappa", type=float, required=True)
    q.add_argument("--window", type=_window, default=(0.02, 0.2), help="eps window lo:hi")
    q.add_argument("--samples", type=_positive_int, default=8)
    q.add_argument("--quantity", choices=("eigenvalue", "volume", "both"), default="both")
    _add_output(q)

    q = vsub.add_parser("shape-derivative", help="eigenvalue shape derivatives on perturbed disks")
    q.add_argument("--mode", choices=("first", "second", "henry"), required=True)
    q.add_argument("--degree", type=_positive_int, default=2, help="perturbation cos(k theta)")
    q.add_argument("--t0", type=float, default=0.05, help="base parameter for first/henry")
    q.add_argument("--volume-preserving", action="store_true")
    _add_output(q)
    return parser


# ------------------------------------------------------------ commands


def _metric(args):
    params = dict(args.param)
    try:
        return load_metric(args.metric, **params)
    except FileNotFoundError:
        raise UsageError(f"metric {args.metric!r} is neither a builtin nor a readable file") from None
    except OSError as exc:
        raise UsageError(f"cannot read metric file {args.metric!r}: {exc.strerror}") from None
    except TypeError as exc:
        raise UsageError(f"bad parameters for builtin {args.metric!r}: {exc}") from None


def _point(spec, values):
    x = np.asarray(values, dtype=float)
    if x.shape != (spec.dim,):
        raise UsageError(f"--point needs {spec.dim} coordinates, got {len(values)}")
    if not spec.in_bounds(x):
        raise UsageError(f"point {x.tolist()} lies outside the chart bounds {list(spec.bounds)}")
    return x


def _metric_provenance(spec, args):
    return {
        "metric": spec.name,
        "params": dict(args.param),
        "dimension": spec.dim,
        "curvature_method": "analytic" if spec.has_analytic_curvature and not getattr(args, "numeric", False) else "finite-difference",
        "h_metric": args.h,
        "h_laplace": args.h_lap,
    }


def cmd_constants(args):
    n = args.dim
    if n < 2:
        raise UsageError("--dim must be at least 2")
    b = ball_constants(n)
    K = k_constants(n)
    Ka = k_constants_assembled(n)
    results = {
        "lambda1": b.lambda1,
        "omega_n": b.omega_n,
        "c1": b.c1,
        "c2": b.c2,
        "c_sq": b.c_sq,
        "c1_numeric": b.c1_numeric,
        "c_sq_numeric": b.c_sq_numeric,
        "alpha2": h_eigenvalue(n, 2),
        "alpha2_closed": h_eigenvalue_closed(n, 2),
        "K": {"K1": K.K1, "K2": K.K2, "K3": K.K3, "K4": K.K4},
        "K_assembled": {"K1": Ka.K1, "K2": Ka.K2, "K3": Ka.K3, "K4": Ka.K4},
    }
    prov = {
        "lambda1": "ball_spectrum: radial shooting (DOP853) + brentq",
        "c1, c_sq": "ball_spectrum: closed forms, cross-checked against eigenfunction quadrature",
        "alpha2": "h_operator: shooting end state",
        "K": "localization: closed forms",
        "K_assembled": "localization: assembled from volume and eigenvalue coefficients",
    }
    rows = [(k, float(v)) for k, v in results.items() if not isinstance(v, dict)]
    rows += [(k, float(v)) for k, v in results["K"].items()]
    return results, prov, (["name", "value"], rows)


def cmd_h_spectrum(args):
    n = args.dim
    if n < 2:
        raise UsageError("--dim must be at least 2")
    rows = []
    for j in range(1, args.degree + 1):
        closed = h_eigenvalue_closed(n, j) if j <= 2 else None
        rows.append({"j": j, "alpha": h_eigenvalue(n, j), "closed_form": closed})
    prov = {"alpha_j": "h_operator: regular radial mode b_j by Frobenius start + DOP853, alpha_j = b_j'(1) + c2"}
    table = (["j", "alpha", "closed_form"], [(r["j"], r["alpha"], r["closed_form"]) for r in rows])
    return {"dimension": n, "modes": rows}, prov, table


def _invariants(spec, x, args):
    if getattr(args, "numeric", False) or not spec.has_analytic_curvature:
        return invariants_at(spec, x, h=args.h, h_lap=args.h_lap, force_numeric=True)
    return invariants_at(spec, x, h=args.h, h_lap=args.h_lap)


def cmd_invariants(args):
    spec = _metric(args)
    x = _point(spec, args.point)
    inv = _invariants(spec, x, args)
    res = {"point": x, "invariants": inv.as_dict()}
    table = (["name", "value"], [(k, float(v)) for k, v in inv.as_dict().items() if np.isscalar(v) and not isinstance(v, str)])
    return res, _metric_provenance(spec, args), table


def cmd_phi(args):
    spec = _metric(args)
    x = _point(spec, args.point)
    if any(e <= 0 for e in args.eps):
        raise UsageError("--eps values must be positive")
    inv = _invariants(spec, x, args)
    n = spec.dim
    r = r_function(n, inv)
    r2 = r_two_path(n, inv)
    rows = []
    for e in args.eps:
        val = inv.R + (e * e * r if args.order == 2 else 0.0)
        rows.append({"eps": e, "phi": val, "eps_sq_phi": e * e * val})
    res = {
        "point": x,
        "order": args.order,
        "values": rows,
        "r": r,
        "r_two_path": r2,
        "invariants": inv.as_dict(),
        "constants": expansion_constants(n, inv).as_dict(),
    }
    prov = _metric_provenance(spec, args)
    prov["phi"] = "R + eps^2 (K1 |Riem|^2 + K2 |Ric|^2 + K3 R^2 + K4 Lap R)"
    prov["units"] = "phi in 1/length^2, eps in chart length; eps_sq_phi is dimensionless"
    table = (["eps", "phi", "eps_sq_phi"], [(w["eps"], w["phi"], w["eps_sq_phi"]) for w in rows])
    return res, prov, table


def cmd_critical_points(args):
    spec = _metric(args)
    if args.eps <= 0:
        raise UsageError("--eps must be positive")
    region = args.region
    if region is not None and len(region) != spec.dim:
        raise UsageError(f"--region needs {spec.dim} intervals")
    steps = {"h": args.h, "h_lap": args.h_lap}
    try:
        search = find_critical_points(
            spec, args.eps, args.order, region=region, grid=args.grid, h=args.newton_step, gtol=args.gtol, steps=steps
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    points = [c.as_dict() for c in search.points]
    for c in points:
        c["eps_sq_value"] = args.eps**2 * c["value"]
    res = {
        "eps": search.eps,
        "order": search.order,
        "region": search.region,
        "grid": search.grid,
        "constant": search.constant,
        "message": search.message,
        "points": points,
    }
    prov = _metric_provenance(spec, args)
    prov["search"] = "grid scan, seeds at local minima of |grad Phi|, Newton on differenced gradient/Hessian"
    prov["settings"] = search.settings
    header = ["kind"] + [f"x{i + 1}" for i in range(spec.dim)] + ["phi", "grad_norm"]
    rows = [[c["kind"]] + c["point"] + [c["value"], c["grad_norm"]] for c in points]
    return res, prov, (header, rows)


def cmd_verify_expansion(args):
    from .spaceform import default_window, verify_eigenvalue_expansion, verify_volume_expansion

    if args.dim < 2:
        raise UsageError("--dim must be at least 2")
    if args.kappa > 0 and args.window[1] * math.sqrt(args.kappa) >= math.pi / 2:
        raise UsageError("window reaches past the injectivity region; lower the upper end")
    eps = default_window(args.window[0], args.window[1], args.samples)
    res = {}
    rows = []
    if args.quantity in ("eigenvalue", "both"):
        rep = verify_eigenvalue_expansion(args.dim, args.kappa, eps)
        res["eigenvalue"] = rep.as_dict()
        rows += [("eigenvalue", e, v) for e, v in zip(rep.eps, rep.values)]
    if args.quantity in ("volume", "both"):
        rep = verify_volume_expansion(args.dim, args.kappa, eps)
        res["volume"] = rep.as_dict()
        rows += [("volume", e, v) for e, v in zip(rep.eps, rep.values)]
    prov = {
        "eigenvalue": "spaceform: radial shooting on the geodesic ball, least squares in eps^2, eps^4",
        "volume": "spaceform: Gauss-Kronrod quadrature of sn_kappa^(n-1), least squares in eps^2, eps^4",
        "threads": thread_count(),
    }
    return res, prov, (["quantity", "eps", "scaled_value"], rows)


def cmd_verify_shape(args):
    from .shape_lab import (
        FourierSeries,
        first_derivative_check,
        henry_formula_check,
        second_derivative_check,
    )

    k = args.degree
    vbar = FourierSeries.from_dict(cos={k: 1.0})
    if args.mode == "second":
        chk = second_derivative_check(k)
        res = chk.as_dict()
        res["relative_error"] = chk.relative_error
        prov = {"predicted": "-2 c1 alpha_k int vbar^2", "fd": "5-point central differences, step chosen by sweep"}
    elif args.mode == "first":
        chk = first_derivative_check(vbar, volume_preserving=args.volume_preserving, t0=args.t0)
        res = chk.as_dict()
        prov = {"predicted": "-int |grad u|^2 <V, N> over the boundary", "fd": "5-point central differences, step chosen by sweep"}
    else:
        f = lambda p: p[..., 0] ** 2
        grad = lambda p: np.stack([2 * p[..., 0], np.zeros(p.shape[:-1])], axis=-1)
        chk = henry_formula_check(f, grad, vbar, t0=args.t0, volume_preserving=args.volume_preserving)
        res = chk.as_dict()
        res["integrand"] = "x1^2"
        prov = {"formula": "Hadamard formulas for domain and boundary integrals", "fd": "5-point central differences"}
    res["mode"] = args.mode
    res["degree"] = k
    prov["solver"] = "shape_lab: folded Chebyshev x Fourier collocation, shift-invert ARPACK"
    table = (["name", "value"], [(key, v) for key, v in res.items() if isinstance(v, float)])
    return res, prov, table


COMMANDS = {
    "constants": cmd_constants,
    "h-spectrum": cmd_h_spectrum,
    "invariants": cmd_invariants,
    "phi": cmd_phi,
    "critical-points": cmd_critical_points,
    ("verify", "expansion"): cmd_verify_expansion,
    ("verify", "shape-derivative"): cmd_verify_shape,
}


def _config(args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("report", "csv")}
    if "param" in cfg:
        cfg["param"] = {k: v for k, v in cfg["param"]}
    return cfg


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    key = ("verify", args.target) if args.command == "verify" else args.command
    try:
        results, prov, table = COMMANDS[key](args)
    except UsageError as exc:
        print(f"extremal-locus: error: {exc}", file=stderr)
        return 2
    except (MetricSyntaxError, MetricDomainError) as exc:
        print(f"extremal-locus: error: {exc}", file=stderr)
        return 2
    except (SolverError, CurvatureError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"extremal-locus: computation failed: {exc}", file=stderr)
        return 1
    report = {
        "schema": SCHEMA,
        "command": " ".join(key) if isinstance(key, tuple) else key,
        "config": _config(args),
        "results": results,
        "provenance": prov,
        "metadata": {"package": "extremal_locus", "version": __version__},
    }
    text = dumps(report)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if args.csv:
        _write_csv(args.csv, *table)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
