"""``rkhsreg`` command line: estimate, risk, bandwidth, bench, figure, selftest.

Every command reads a JSON config (a file or a bundled preset name), writes
CSV or JSON to ``--out`` or stdout, and reports failures as a JSON object on
stderr with a nonzero exit status (2 for usage and config problems, 1 for
numerical failures).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import config as cfg
from .covariance import GeneralizedWiener, OrnsteinUhlenbeck, covariance_from_json, gram
from .designs import DesignGrid, design_from_spec
from .estimators import CLI_METHODS, MethodError, resolve_method, weight_matrix
from .kernels import BoundaryMode, kernel_from_name
from .risk import (
    asymptotic_constants,
    fmt,
    optimal_bandwidth_closed,
    optimal_bandwidth_exact,
    risk_report,
    x_grid,
)
from .simulation import Scenario, curve_from_name, make_dataset, monte_carlo_mise

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures through the JSON error channel
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file or preset name (table1, table2, figure1, figure2)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--grid", type=int, help="number of x-grid points")
    common.add_argument("--boundary", help="kernel edge rule: none or renorm")
    common.add_argument("--hopt-variant", default="derived", help="closed-form bandwidth variant: derived or paper")
    common.add_argument("--method", help=f"one of {', '.join(CLI_METHODS)}")
    common.add_argument("--h", help="bandwidth, or 'optimal-exact'")

    parser = _Parser(prog="rkhsreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (
        ("estimate", "estimate the regression curve on the x-grid"),
        ("risk", "exact bias, variance and MSE on the x-grid"),
        ("bandwidth", "exact-IMSE and asymptotic optimal bandwidths"),
        ("bench", "IMSE tables for GM and projection estimators"),
        ("figure", "Monte Carlo mean curves for several m"),
        ("selftest", "closed-form versus dense-solve oracle checks"),
    ):
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


# -- helpers -------------------------------------------------------------------


def _method(name: Optional[str], model=None) -> str:
    name = name or "pro"
    if name not in CLI_METHODS:
        raise UsageError(f"unknown method {name!r}; valid methods: {', '.join(CLI_METHODS)}")
    resolve_method(name, model)
    return name


def _boundary(args, conf: dict) -> BoundaryMode:
    value = args.boundary or conf.get("boundary", "renorm")
    if value not in ("none", "renorm"):
        raise UsageError(f"--boundary must be 'none' or 'renorm', got {value!r}")
    return BoundaryMode(value)


def _grid(args, conf: dict) -> int:
    grid = args.grid if args.grid is not None else conf.get("grid", 201)
    if grid < 3:
        raise UsageError("--grid must be at least 3")
    return grid


def _seed(args, conf: dict) -> int:
    seed = args.seed if args.seed is not None else conf.get("seed", DEFAULT_SEED)
    if not 0 <= seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    return seed


def _bandwidth(args, conf: dict):
    raw = args.h if args.h is not None else conf.get("h", "optimal-exact")
    if raw == "optimal-exact":
        return raw
    try:
        h = float(raw)
    except ValueError:
        raise UsageError(f"--h must be a number in (0, 1) or 'optimal-exact', got {raw!r}") from None
    if not 0.0 < h < 1.0:
        raise UsageError(f"--h must lie in (0, 1), got {h}")
    return h


def _interval(conf: dict, n: int):
    return tuple(conf["interval"]) if "interval" in conf else None


def _csv(rows, header=None, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    out = csv.writer(buf, lineterminator="\n")
    if header:
        out.writerow(header)
    out.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


class _Setup:
    """Objects shared by the scenario commands."""

    def __init__(self, args, conf: dict):
        self.conf = conf
        self.model = covariance_from_json(conf["covariance"])
        self.curve = curve_from_name(conf["curve"])
        self.kernel = kernel_from_name(conf.get("kernel", "quartic"))
        self.design_kind = conf.get("design", "midpoint")
        self.design = design_from_spec(self.design_kind, conf["n"])
        self.boundary = _boundary(args, conf)
        self.grid = _grid(args, conf)
        self.seed = _seed(args, conf)
        self.method = _method(args.method or conf.get("method"), self.model)
        self.h_spec = _bandwidth(args, conf)

    def bandwidth(self, m: int) -> float:
        if self.h_spec != "optimal-exact":
            return self.h_spec
        h, _ = optimal_bandwidth_exact(
            self.method, self.model, self.curve, self.kernel, self.design, m,
            interval=_interval(self.conf, self.design.n), grid=self.grid, boundary=self.boundary,
        )
        return h


def _read_csv_data(path: str) -> tuple[DesignGrid, np.ndarray]:
    try:
        rows = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except (OSError, ValueError) as exc:
        raise cfg.ConfigError(f"cannot read data CSV: {exc}", "$.data.csv") from None
    if rows.shape[0] < 2:
        raise cfg.ConfigError("data CSV needs a design row and at least one unit row", "$.data.csv")
    return DesignGrid(rows[0]), rows[1:].mean(axis=0)


# -- commands ------------------------------------------------------------------


def cmd_estimate(args, conf: dict) -> str:
    st = _Setup(args, conf)
    data = conf.get("data", {})
    design = st.design
    if "csv" in data:
        design, ybar = _read_csv_data(data["csv"])
    elif "ybar" in data:
        ybar = np.asarray(data["ybar"], dtype=float)
        if ybar.size != design.n:
            raise cfg.ConfigError(f"expected {design.n} values, got {ybar.size}", "$.data.ybar")
    elif data.get("noiseless"):
        ybar = st.curve(design.points)
    else:
        scen = Scenario(st.curve, st.model, conf["n"], conf["m"], st.design_kind, st.kernel.name, 0.5, 1, st.seed)
        ybar = make_dataset(scen).ybar
    st.design = design
    h = st.bandwidth(conf["m"])
    xs = x_grid(st.grid)
    W = weight_matrix(st.method, st.model, st.kernel, design, h, xs, st.boundary)
    est = W @ ybar
    rows = [[fmt(x), fmt(v)] for x, v in zip(xs, est)]
    return _csv(rows, ["x", "ghat"], [f"seed={st.seed}", f"method={st.method}", f"h={fmt(h)}"])


def cmd_risk(args, conf: dict) -> str:
    st = _Setup(args, conf)
    h = st.bandwidth(conf["m"])
    rep = risk_report(st.method, st.model, st.curve, st.kernel, st.design, h, conf["m"], grid=st.grid,
                      boundary=st.boundary)
    summary = {k: (fmt(v) if isinstance(v, float) else v) for k, v in rep.summary().items()}
    return "# " + json.dumps(summary, sort_keys=True) + "\n" + rep.to_csv()


def cmd_bandwidth(args, conf: dict) -> str:
    st = _Setup(args, conf)
    variant = args.hopt_variant
    if variant not in ("derived", "paper"):
        raise UsageError(f"--hopt-variant must be 'derived' or 'paper', got {variant!r}")
    m = conf["m"]
    h_opt, imse_min = optimal_bandwidth_exact(
        st.method, st.model, st.curve, st.kernel, st.design, m,
        interval=_interval(conf, st.design.n), grid=st.grid, boundary=st.boundary,
    )
    consts = asymptotic_constants(st.model, st.curve.gpp, st.kernel)
    h_closed = optimal_bandwidth_closed(consts, m, variant)
    return _dumps({
        "method": st.method,
        "m": m,
        "h_opt": fmt(h_opt),
        "imse_min": fmt(imse_min),
        "h_closed": fmt(h_closed),
        "hopt_variant": variant,
        "seed": st.seed,
    })


def bench_rows(conf: dict, grid: Optional[int] = None, boundary: Optional[BoundaryMode] = None,
               threads: int = 1) -> list[dict]:
    """One dict per (block, method, m) in config order."""
    jobs = []
    for block in conf["blocks"]:
        model = covariance_from_json(block["covariance"])
        curve = curve_from_name(block["curve"])
        kernel = kernel_from_name(block.get("kernel", "quartic"))
        design = design_from_spec(block.get("design", "midpoint"), block["n"])
        g_size = grid or block.get("grid", 201)
        bmode = boundary or BoundaryMode(block.get("boundary", "renorm"))
        interval = tuple(block["interval"]) if "interval" in block else None
        for method in block["methods"]:
            resolve_method(method, model)
            for m in block["m"]:
                jobs.append((block["name"], method, m, model, curve, kernel, design, g_size, bmode, interval))

    def run(job) -> dict:
        name, method, m, model, curve, kernel, design, g_size, bmode, interval = job
        h, _ = optimal_bandwidth_exact(method, model, curve, kernel, design, m, interval=interval, grid=g_size,
                                       boundary=bmode)
        rep = risk_report(method, model, curve, kernel, design, h, m, grid=g_size, boundary=bmode)
        return {"block": name, "method": method, "m": m, "Ibias2": rep.Ibias2, "Ivar": rep.Ivar,
                "IMSE": rep.IMSE, "h_opt": h}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]


def cmd_bench(args, conf: dict) -> str:
    boundary = BoundaryMode(args.boundary) if args.boundary else None
    if args.boundary and args.boundary not in ("none", "renorm"):
        raise UsageError(f"--boundary must be 'none' or 'renorm', got {args.boundary!r}")
    if args.grid is not None and args.grid < 3:
        raise UsageError("--grid must be at least 3")
    rows = bench_rows(conf, args.grid, boundary, max(1, args.threads))
    keys = ["block", "method", "m", "Ibias2", "Ivar", "IMSE", "h_opt"]
    return _csv([[r[k] if isinstance(r[k], (str, int)) else fmt(r[k]) for k in keys] for r in rows], keys)


def cmd_figure(args, conf: dict) -> str:
    st = _Setup(args, conf)
    reps = conf.get("replications", 100)
    columns, hs = [], []
    for m in conf["m"]:
        h = st.bandwidth(m)
        scen = Scenario(st.curve, st.model, conf["n"], m, st.design_kind, st.kernel.name, h, reps, st.seed, st.boundary)
        res = monte_carlo_mise(scen, st.method, grid=st.grid, threads=max(1, args.threads))
        columns.append(res.mean_curve)
        hs.append(f"m{m}:h={fmt(h)}:mise={fmt(res.empirical_mise)}")
    xs = x_grid(st.grid)
    gx = st.curve(xs)
    rows = [[fmt(x), fmt(gv)] + [fmt(c[i]) for c in columns] for i, (x, gv) in enumerate(zip(xs, gx))]
    header = ["x", "g"] + [f"mean_m{m}" for m in conf["m"]]
    return _csv(rows, header, [f"seed={st.seed}", f"method={st.method}", f"replications={reps}", " ".join(hs)])


def selftest_checks(seed: int = 0) -> list[dict]:
    """Closed-form paths against the dense Gram solve, and quartic kernel constants."""
    from .estimators import ou_closed_weights, projection_weights, wiener_closed_weights
    from .kernels import ScaledKernel, quartic_kernel

    rng = np.random.default_rng(seed)
    k = quartic_kernel()
    results = []

    def worst_gap(model, closed) -> float:
        worst = 0.0
        for _ in range(20):
            n = int(rng.integers(2, 120))
            design = DesignGrid(np.sort(rng.uniform(0.0, 1.0, n)))
            sk = ScaledKernel(float(rng.uniform()), float(rng.uniform(0.05, 0.6)), k)
            y = rng.normal(size=n)
            dense = projection_weights(model, sk, design).weights @ y
            worst = max(worst, abs(dense - closed(sk, design) @ y))
        return worst

    for beta in (0.0, 1.0, 2.0):
        gap = worst_gap(GeneralizedWiener(beta), lambda sk, d, b=beta: wiener_closed_weights(b, sk, d))
        results.append({"check": f"wiener-closed-beta{beta:g}", "max_abs_diff": gap, "pass": gap < 1e-8})
    for lam in (0.5, 1.0, 2.0):
        gap = worst_gap(OrnsteinUhlenbeck(lam), lambda sk, d, a=lam: ou_closed_weights(a, sk, d))
        results.append({"check": f"ou-closed-lambda{lam:g}", "max_abs_diff": gap, "pass": gap < 1e-8})
    for model in (GeneralizedWiener(0.0), OrnsteinUhlenbeck(1.0)):
        design = DesignGrid(np.sort(rng.uniform(0.0, 1.0, 50)))
        g = gram(model, design)
        rhs = rng.normal(size=50)
        gap = float(np.max(np.abs(g.solve(rhs, fast_path=True) - g.solve(rhs))))
        results.append({"check": f"fast-solve-{model.kind}", "max_abs_diff": gap, "pass": gap < 1e-9 * max(1.0, float(np.max(np.abs(g.solve(rhs)))))})
    mom = k.moments
    gap = max(abs(mom.B - 1 / 7), abs(mom.A - 5 / 7), abs(mom.mass - 1.0))
    results.append({"check": "quartic-moments", "max_abs_diff": gap, "pass": gap < 1e-10})
    return results


def cmd_selftest(args, conf: Optional[dict]) -> tuple[str, int]:
    checks = selftest_checks(_seed(args, conf or {}))
    text = _dumps([{**c, "max_abs_diff": fmt(c["max_abs_diff"]), "pass": bool(c["pass"])} for c in checks])
    return text, 0 if all(c["pass"] for c in checks) else 1


COMMANDS = {
    "estimate": ("scenario", cmd_estimate),
    "risk": ("scenario", cmd_risk),
    "bandwidth": ("scenario", cmd_bandwidth),
    "bench": ("bench", cmd_bench),
    "figure": ("figure", cmd_figure),
}


def _fail(kind: str, message: str, code: int, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if args.method is not None:
            _method(args.method)
        if args.command == "selftest":
            conf = cfg.load(args.config) if args.config else None
            text, code = cmd_selftest(args, conf)
            _emit(text, args.out)
            return code
        kind, fn = COMMANDS[args.command]
        if not args.config:
            raise UsageError(f"'{args.command}' needs --config")
        conf = cfg.load(args.config, kind)
        _emit(fn(args, conf), args.out)
        return 0
    except UsageError as exc:
        extra = {"valid_methods": list(CLI_METHODS)} if "method" in str(exc) else {}
        return _fail("usage", str(exc), 2, **extra)
    except MethodError as exc:
        return _fail("usage", str(exc), 2, valid_methods=list(CLI_METHODS))
    except cfg.ConfigError as exc:
        return _fail("config", exc.detail, 2, path=exc.path)
    except (ValueError, np.linalg.LinAlgError, RuntimeError) as exc:
        return _fail("numerical", str(exc), 1)
    except OSError as exc:
        return _fail("io", str(exc), 1)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
