"""Command-line front end.

Every subcommand resolves its parameters from built-in defaults, then the
matching section of ``--config``, then explicit flags, and writes a JSON
report holding that resolved configuration. Exit status is 0 on success,
2 on invalid input and 3 when a numerical procedure diverges.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import boltzmann as bm
from . import exp_family as ef
from . import monge_ampere as ma
from . import webs
from .expr import ExprSyntaxError, parse

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 2, 3

logger = logging.getLogger("dualflat")


class UsageError(ValueError):
    pass


# --- output -------------------------------------------------------------------

def format_float(x: float) -> str:
    s = format(float(x), ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float at 17 significant digits; NaN/inf become null."""
    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return format_float(o) if math.isfinite(o) else "null"
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list)) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")
    return enc(_plain(obj), 0) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# --- parameter parsing ------------------------------------------------------------

def _json_value(value, name):
    if isinstance(value, str):
        try:
            return json.loads(value)
        except json.JSONDecodeError as err:
            raise UsageError(f"{name}: cannot parse {value!r} as JSON ({err.msg} at offset {err.pos})")
    return value


def _vector(value, name) -> np.ndarray:
    v = _json_value(value, name)
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise UsageError(f"{name} must be a number or a list of numbers")
    if arr.ndim > 1 or not np.all(np.isfinite(arr)):
        raise UsageError(f"{name} must be a flat list of finite numbers")
    return arr.reshape(-1)


def _matrix(value, name) -> np.ndarray:
    v = _json_value(value, name)
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise UsageError(f"{name} must be a list of rows")
    if arr.ndim != 2 or not np.all(np.isfinite(arr)):
        raise UsageError(f"{name} must be a rectangular matrix of finite numbers")
    return arr


def _interval(value, name):
    arr = _vector(value, name)
    if arr.size != 2 or not arr[0] < arr[1]:
        raise UsageError(f"{name} must be [lo, hi] with lo < hi")
    return arr


def _file_or_inline(value, name):
    """A JSON value given inline or as a path to a JSON file."""
    if isinstance(value, str):
        p = Path(value)
        if not value.lstrip().startswith(("[", "{")) and p.exists():
            try:
                return json.loads(p.read_text())
            except json.JSONDecodeError as err:
                raise UsageError(f"{name}: {p} is not valid JSON ({err.msg} at offset {err.pos})")
        if not value.lstrip().startswith(("[", "{")):
            raise UsageError(f"{name}: no such file {value!r}")
    return _json_value(value, name)


def _expression(text, name):
    try:
        return parse(str(text))
    except ExprSyntaxError as err:
        raise UsageError(f"{name}: {err}") from err


# --- commands --------------------------------------------------------------------------

def cmd_manifold_report(cfg, rng):
    n = cfg["n"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise UsageError("n must be an integer")
    space = ef.StateSpace.from_kind(n, cfg["basis"])
    if cfg["theta"] == "random":
        theta = rng.uniform(-1.0, 1.0, space.dim)
    else:
        theta = _vector(cfg["theta"], "theta")
        if theta.size == 1 and space.dim != 1:
            theta = np.full(space.dim, theta[0])
        if theta.size != space.dim:
            raise UsageError(f"theta has {theta.size} entries, the basis needs {space.dim}")
    psi = ef.log_partition(space, theta)
    eta = ef.to_eta(space, theta)
    g = ef.fisher_metric(space, theta)
    back = ef.to_theta(space, eta).coords
    psi_star = float(back @ eta.coords) - ef.log_partition(space, back)
    try:
        report = ma.ma_report(space, theta).to_json()
    except (ma.SingularHessianError, ValueError) as err:
        report = {"error": str(err)}
    return {
        "basis": [list(s) for s in space.basis],
        "theta": theta,
        "psi": psi,
        "eta": eta.coords,
        "fisher": g.matrix,
        "det_fisher": g.det(),
        "min_eigenvalue": float(g.eigenvalues().min()),
        "legendre_roundtrip_residual": float(np.max(np.abs(back - theta))),
        "legendre_identity_residual": abs(psi + psi_star - float(theta @ eta.coords)),
        "monge_ampere": report,
    }, None


def _load_target(cfg):
    if cfg.get("target") is not None:
        q = _vector(_file_or_inline(cfg["target"], "target"), "target")
        return bm.check_distribution(q, cfg.get("n"))
    if cfg.get("target_weights") is not None:
        W = bm.WeightMatrix(_matrix(_file_or_inline(cfg["target_weights"], "target_weights"),
                                    "target_weights"))
        if cfg.get("n") is not None and W.n != cfg["n"]:
            raise UsageError("target_weights size does not match n")
        return bm.stationary_distribution(W)
    raise UsageError("boltzmann-train needs --target or --target-weights")


def cmd_boltzmann_train(cfg, rng):
    q = _load_target(cfg)
    n = q.shape[0].bit_length() - 1
    c = float(cfg["c"])
    if not c > 0:
        raise UsageError("c must be positive")
    W0 = bm.WeightMatrix.zeros(n, bool(cfg["biases"]))
    status = EXIT_OK
    try:
        trace = bm.train(W0, q, c, max_iters=int(cfg["iters"]), tol=float(cfg["tol"]),
                         natural=bool(cfg["natural"]))
        diverged = False
    except bm.DivergenceError as err:
        logger.error("%s", err)
        trace, diverged, status = err.trace, True, EXIT_DIVERGED
    final = trace.final
    summary = {
        "n": n,
        "iterations": trace.iterations,
        "converged": trace.converged,
        "diverged": diverged,
        "final_kl": float(trace.kl[-1]),
        "final_moment_gap": float(trace.moment_gap[-1]),
        "final_weights": final.matrix,
        "final_biases": final.bias if final.has_bias else None,
    }
    table = (trace.csv_header(), list(trace.csv_rows()))
    return summary, table, status


def cmd_web_check(cfg, rng):
    u, v, w = (_expression(cfg[k], k) for k in ("u", "v", "w"))
    domain = _matrix(cfg["domain"], "domain")
    if domain.shape != (2, 2):
        raise UsageError("domain must be [[x0, x1], [y0, y1]]")
    step = float(cfg["step"])
    if not step > 0:
        raise UsageError("step must be positive")
    web = webs.PlanarThreeWeb(u, v, w, domain=tuple(map(tuple, domain)))
    grid = cfg["grid"]
    grid = int(grid) if isinstance(grid, (int, float)) or str(grid).isdigit() \
        else [tuple(p) for p in _matrix(grid, "grid")]
    rep = webs.hexagonality_certificate(web, grid, step)
    rows = []
    for i, row in enumerate(rep.points):
        _, path = webs.hexagon_closure(web, row["point"], step, return_path=True)
        rows.extend([i, k, float(x), float(y)] for k, (x, y) in enumerate(path))
    out = {"web": web.to_json(), **rep.to_json()}
    return out, (["point", "vertex", "x", "y"], rows)


def cmd_wdvv_check(cfg, rng):
    phi = _expression(cfg["phi"], "phi")
    g = _matrix(_file_or_inline(cfg["metric"], "metric"), "metric")
    if g.shape[0] != g.shape[1]:
        raise UsageError("metric must be square")
    if not np.allclose(g, g.T, rtol=0, atol=1e-12):
        raise UsageError("metric must be symmetric")
    try:
        pot = webs.FrobeniusPotential(phi, g)
    except np.linalg.LinAlgError as err:
        raise UsageError(str(err)) from err
    if cfg.get("points") is not None:
        pts = _matrix(_file_or_inline(cfg["points"], "points"), "points")
    else:
        pts = rng.uniform(-1.0, 1.0, (int(cfg["n_points"]), pot.n))
    if pts.shape[1] != pot.n:
        raise UsageError(f"points must have {pot.n} coordinates")
    res = [webs.wdvv_residual(pot, p) for p in pts]
    worst = max(res)
    return {
        "n": pot.n,
        "metric_condition": pot.condition,
        "points": pts,
        "residuals": res,
        "max_residual": worst,
        "tolerance": webs.WDVV_TOL,
        "pass": bool(worst < webs.WDVV_TOL),
    }, None


def cmd_transport_1d(cfg, rng):
    src = _expression(cfg["source"], "source")
    tgt = _expression(cfg["target"], "target")
    try:
        tr = ma.brenier_1d(src, tgt, _interval(cfg["source_interval"], "source_interval"),
                           _interval(cfg["target_interval"], "target_interval"),
                           grid_size=int(cfg["grid"]))
    except ma.MassMismatchError as err:
        raise UsageError(str(err)) from err
    header = ["x", "T", "y", "V", "detD2V", "r"]
    return tr.to_json(), (header, [list(map(float, r)) for r in tr.csv_rows()])


def cmd_ceva_check(cfg, rng):
    tri = _matrix(cfg["triangle"], "triangle")
    if tri.shape != (3, 2):
        raise UsageError("triangle must be three planar points")
    if abs(np.linalg.det(np.vstack([tri[1] - tri[0], tri[2] - tri[0]]))) < 1e-12:
        raise UsageError("triangle is degenerate")
    if cfg.get("points") is not None:
        pts = _matrix(cfg["points"], "points")
        if pts.shape[1] != 2:
            raise UsageError("points must be planar")
    else:
        lam = rng.dirichlet(np.ones(3), int(cfg["n_points"]))
        pts = lam @ tri
    perturb = float(cfg["perturb"])
    rows = []
    for p in pts:
        lam = np.linalg.solve(np.vstack([tri.T, np.ones(3)]), np.append(p, 1.0))
        if np.any(lam <= 0):
            raise UsageError(f"point {p.tolist()} is not strictly inside the triangle")
        feet = webs.cevian_feet(tri, point=p)
        prod = webs.ceva_product(tri, feet)
        H = webs.concurrent_to_parallel(tri, p)
        frame = webs.cevian_frame(lam / lam.sum())
        row = {
            "point": p,
            "product": prod,
            "residual": abs(prod + 1.0),
            "det_H": float(np.linalg.det(H)),
            "slope_spread": webs.parallel_slope_spread(H, tri, p),
            "frame_sum": float(np.max(np.abs(frame.x.sum(axis=0)))),
        }
        if perturb:
            side = tri[2] - tri[1]
            moved = [feet[0] + perturb * side / np.linalg.norm(side), feet[1], feet[2]]
            row["perturbed_product"] = webs.ceva_product(tri, moved)
        rows.append(row)
    return {
        "triangle": tri,
        "checks": rows,
        "max_residual": max(r["residual"] for r in rows),
        "concurrent": bool(max(r["residual"] for r in rows) < 1e-10),
    }, None


COMMANDS = {
    "manifold-report": (cmd_manifold_report, {"n": 2, "basis": "pairwise", "theta": "0"}),
    "boltzmann-train": (cmd_boltzmann_train, {
        "n": None, "target": None, "target_weights": None, "c": 0.5, "iters": 10000,
        "tol": 1e-8, "natural": False, "biases": False, "csv": None}),
    "web-check": (cmd_web_check, {
        "u": "x", "v": "y", "w": "x+y", "domain": "[[0, 2], [0, 2]]", "grid": 3,
        "step": 0.1, "csv": None}),
    "wdvv-check": (cmd_wdvv_check, {"phi": None, "metric": None, "points": None, "n_points": 5}),
    "transport-1d": (cmd_transport_1d, {
        "source": "1", "target": "1", "source_interval": "[0, 1]",
        "target_interval": "[0, 1]", "grid": 1024, "csv": None}),
    "ceva-check": (cmd_ceva_check, {
        "triangle": "[[0, 0], [1, 0], [0, 1]]", "points": None, "n_points": 10, "perturb": 0.0}),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualflat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--out", default=S, help="JSON report path (default: standard output)")
        p.add_argument("--seed", type=int, default=S, help="seed for random sampling (default 0)")
        p.add_argument("--config", default=None, help="JSON file with one section per command")
        return p

    p = common(sub.add_parser("manifold-report", help="potentials, metric and duality residuals"))
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--basis", choices=["pairwise", "ising", "full"], default=S)
    p.add_argument("--theta", default=S, help="number, JSON list, or 'random'")

    p = common(sub.add_parser("boltzmann-train", help="AHS learning towards a target law"))
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--target", default=S, help="JSON list or file of 2^n probabilities")
    p.add_argument("--target-weights", dest="target_weights", default=S,
                   help="JSON matrix or file; the target is its stationary law")
    p.add_argument("--c", type=float, default=S)
    p.add_argument("--iters", type=int, default=S)
    p.add_argument("--tol", type=float, default=S)
    p.add_argument("--natural", action="store_true", default=S)
    p.add_argument("--biases", action="store_true", default=S)
    p.add_argument("--csv", default=S, help="trace path (default: next to --out)")

    p = common(sub.add_parser("web-check", help="hexagonality certificate of a planar 3-web"))
    for name in ("u", "v", "w"):
        p.add_argument(f"--{name}", default=S)
    p.add_argument("--domain", default=S, help="[[x0, x1], [y0, y1]]")
    p.add_argument("--grid", default=S, help="points per axis, or JSON list of points")
    p.add_argument("--step", type=float, default=S)
    p.add_argument("--csv", default=S, help="hexagon paths (default: next to --out)")

    p = common(sub.add_parser("wdvv-check", help="associativity residual of a potential"))
    p.add_argument("--phi", default=S)
    p.add_argument("--metric", default=S, help="JSON matrix or file")
    p.add_argument("--points", default=S, help="JSON list of points or file")
    p.add_argument("--n-points", dest="n_points", type=int, default=S)

    p = common(sub.add_parser("transport-1d", help="monotone transport between densities"))
    p.add_argument("--source", default=S)
    p.add_argument("--target", default=S)
    p.add_argument("--source-interval", dest="source_interval", default=S)
    p.add_argument("--target-interval", dest="target_interval", default=S)
    p.add_argument("--grid", type=int, default=S)
    p.add_argument("--csv", default=S, help="grid table (default: next to --out)")

    p = common(sub.add_parser("ceva-check", help="Ceva products and parallelizing maps"))
    p.add_argument("--triangle", default=S)
    p.add_argument("--points", default=S, help="JSON list of interior points")
    p.add_argument("--n-points", dest="n_points", type=int, default=S)
    p.add_argument("--perturb", type=float, default=S, help="shift of the first foot along its side")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    _, defaults = COMMANDS[command]
    cfg = {"out": None, "seed": 0, **defaults}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as err:
            raise UsageError(f"cannot read config: {err}") from err
        except json.JSONDecodeError as err:
            raise UsageError(f"config is not valid JSON ({err.msg} at offset {err.pos})") from err
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        section = data.get(command, {})
        if not isinstance(section, dict):
            raise UsageError(f"config section {command!r} must be an object")
        for key, value in section.items():
            key = key.replace("-", "_")
            if key not in cfg:
                raise UsageError(f"unknown key {key!r} in config section {command!r}")
            cfg[key] = value
    for key, value in vars(args).items():
        if key in cfg:
            cfg[key] = value
    return cfg


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        cfg = resolve_config(command, args)
        if not isinstance(cfg["seed"], int):
            raise UsageError("seed must be an integer")
        rng = np.random.default_rng(cfg["seed"])
        fn = COMMANDS[command][0]
        result = fn(cfg, rng)
    except (UsageError, ExprSyntaxError, ValueError, TypeError, KeyError, OSError,
            np.linalg.LinAlgError) as err:
        print(f"dualflat {command}: error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, ef.ConvergenceError) as err:
        print(f"dualflat {command}: diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    report, table = result[0], result[1]
    status = result[2] if len(result) > 2 else EXIT_OK
    text = dumps({"command": command, "config": cfg, "result": report})
    if cfg["out"]:
        _write(cfg["out"], text)
    else:
        sys.stdout.write(text)
    if table is not None:
        path = cfg.get("csv") or (Path(cfg["out"]).with_suffix(".csv") if cfg["out"] else None)
        if path:
            _write(path, _csv_text(*table))
    return status


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
