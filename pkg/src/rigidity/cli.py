"""Command-line entry point: ``rigidity <subcommand> [--config FILE] [flags]``.

Every subcommand accepts a flat ``key = value`` config file; explicit flags
override config entries.  Exit status: 0 success, 1 failed check, 2 bad
configuration.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, RigidityError

# option tables: (name, parser, default, help)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected comma-separated integers, got {text!r}")
    return [int(v) for v in vals]


def _int(text) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _float(text) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _str(text) -> str:
    return str(text)


COMMON = [
    ("output", _str, None, "write the JSON report here instead of stdout"),
    ("csv", _str, None, "write the tabular data of the run as CSV"),
]

OPTIONS = {
    "hessian": [
        ("profile", _str, None, "profile name"),
        ("point", _floats, None, "ambient point, comma-separated"),
        ("theta", _floats, None, "spherical angles theta1,theta2 (n = 3)"),
        ("tau", _float, 1e-8, "zero threshold for the classification"),
    ],
    "surface": [
        ("profile", _str, None, "profile name"),
        ("point", _floats, None, "sample the surface at this direction"),
        ("grid", _int, None, "dump the whole surface on an N x N/2 grid"),
        ("nu", _floats, None, "probe the supporting plane with this normal"),
        ("probe_grid", _int, 128, "grid resolution for the supporting-plane probe"),
        ("tau", _float, 1e-8, "singular threshold"),
    ],
    "scan": [
        ("profile", _str, None, "profile name"),
        ("grid", _int, 64, "grid resolution N"),
        ("tau", _float, None, "zero threshold (default scales with the Hessians)"),
        ("refinements", _int, 3, "levels of the singular-set refinement study"),
    ],
    "verify-lo": [
        ("grid", _int, 32, "angular resolution of the S^3 grid"),
        ("max_points", _int, 10_000, "subsample the grid to at most this many points"),
        ("tol", _float, 1e-6, "residual tolerance"),
        ("perturb", _float, 0.0, "add eps * x1^2/|x| to the first component"),
    ],
    "synthesize": [
        ("profile", _str, None, "profile name"),
        ("grid", _int, 64, "grid resolution N"),
        ("max_points", _int, None, "cap on S^3 grid points"),
        ("kappa_max", _float, 1e6, "condition-number cap"),
        ("tau", _float, None, "sign threshold"),
        ("trace_tol", _float, 1e-10, "tolerance on tr(A D^2u) at feasible points"),
        ("field_json", _str, None, "write the synthesized matrices as JSON"),
    ],
    "reduce": [
        ("profile", _str, None, "profile whose residual is checked"),
        ("field", _str, "identity", "identity, random:SEED or synthesized"),
        ("target", _str, "chart", "chart or sphere"),
        ("point", _floats, None, "chart point p or angles theta"),
        ("sign", _int, 1, "chart sign (x3 = +1 or -1)"),
    ],
    "search": [
        ("field", _str, "identity", "identity or random:SEED"),
        ("lam", _float, 0.5, "ellipticity of random fields"),
        ("grid", _int, 64, "grid resolution N"),
        ("scheme", _str, "spectral", "fd4, spectral-theta1 or spectral"),
        ("seeds", _ints, [0], "initial-profile seeds"),
        ("max_iter", _int, 10_000, "iteration budget"),
        ("tol", _float, 1e-10, "residual tolerance"),
        ("nonlinearity_tol", _float, 1e-2, "check: nonlinearity below this fraction of |g|"),
    ],
    "obstruction": [
        ("profile", _str, None, "profile name"),
        ("resolutions", _ints, [16, 32, 64], "grid resolutions"),
        ("max_points", _int, None, "cap on S^3 grid points"),
        ("kappa_max", _float, 1e6, "condition-number cap"),
        ("tau", _float, None, "sign threshold"),
    ],
    "list-profiles": [],
}


def read_config(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes equal underscores."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{n}: empty key")
        out[key.replace("-", "_")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rigidity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key = value file")
        for key, _, default, text in COMMON + opts:
            hint = f" (default {default})" if default is not None else ""
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=text + hint)
    return parser


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (flags win) and convert types."""
    opts = COMMON + OPTIONS[command]
    raw = {k: d for k, _, d, _ in opts}
    given = {}
    if args.config:
        cfg = read_config(args.config)
        cfg.pop("command", None)
        known = {k for table in OPTIONS.values() for k, *_ in table} | set(raw)
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        # keys of other subcommands are ignored so one file can drive several runs
        given.update({k: v for k, v in cfg.items() if k in raw})
    for k in raw:
        v = getattr(args, k, None)
        if v is not None:
            given[k] = v
    conv = {k: f for k, f, _, _ in opts}
    out = dict(raw)
    for k, v in given.items():
        out[k] = conv[k](v)
    return out


# ---------------------------------------------------------------------------
# validation helpers


def _need_profile(cfg, dim=None):
    from .profiles import homogeneous

    if not cfg.get("profile"):
        raise ConfigError("a profile name is required (--profile)")
    try:
        u = homogeneous(cfg["profile"])
    except KeyError:
        raise ConfigError(f"unknown profile {cfg['profile']!r}") from None
    if dim is not None and u.dim != dim:
        raise ConfigError(f"profile {u.name} lives in R^{u.dim}; this command needs R^{dim}")
    return u


def _positive(cfg, *keys):
    for k in keys:
        v = cfg.get(k)
        vals = v if isinstance(v, list) else [v]
        if v is not None and any(x <= 0 for x in vals):
            raise ConfigError(f"{k} must be positive")


def _field(spec: str, lam: float = 0.5, u=None):
    from .coefficients import CoefficientField, random_elliptic_field

    if spec == "identity":
        return CoefficientField.identity()
    if spec.startswith("random:"):
        try:
            seed = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad random field seed in {spec!r}") from None
        if not 0 < lam <= 1:
            raise ConfigError("lam must lie in (0, 1]")
        return random_elliptic_field(seed, lam)
    if spec == "synthesized":
        if u is None:
            raise ConfigError("the synthesized field needs a profile")
        return CoefficientField.synthesized(u)
    raise ConfigError(f"unknown coefficient field {spec!r}")


# ---------------------------------------------------------------------------
# subcommands: each returns (result dict, ok flag, csv (header, rows) or None)


def cmd_hessian(cfg):
    from .calculus import classify_hessian, hessian_spherical
    from .grids import sphere_point

    u = _need_profile(cfg)
    _positive(cfg, "tau")
    if cfg["theta"] is not None:
        if u.dim != 3 or len(cfg["theta"]) != 2:
            raise ConfigError("--theta takes two angles and a profile in R^3")
        x = sphere_point(*cfg["theta"])
        H = hessian_spherical(u.profile, cfg["theta"]) if u.profile.spherical else u.hessian(x)
    elif cfg["point"] is not None:
        x = np.asarray(cfg["point"], float)
        if x.shape != (u.dim,) or not np.linalg.norm(x) > 0:
            raise ConfigError(f"--point needs {u.dim} coordinates, not all zero")
        H = u.hessian(x)
    else:
        raise ConfigError("give --point or --theta")
    s = classify_hessian(H, x, cfg["tau"])
    result = s.to_dict()
    result["gradient"] = u.gradient(x).tolist()
    result["value"] = float(u.eval(x))
    rows = [[i, j, H[i, j]] for i in range(len(H)) for j in range(len(H))]
    return result, True, (["i", "j", "value"], rows)


def cmd_surface(cfg):
    from .grids import S2Grid
    from .surface import SURFACE_HEADER, supporting_plane_probe, surface_rows, surface_sample

    u = _need_profile(cfg, 3)
    _positive(cfg, "grid", "probe_grid", "tau")
    result, table = {}, None
    if cfg["point"] is not None:
        if len(cfg["point"]) != 3:
            raise ConfigError("--point needs three coordinates")
        result["sample"] = surface_sample(u, cfg["point"], cfg["tau"]).to_dict()
    if cfg["nu"] is not None:
        if len(cfg["nu"]) != 3:
            raise ConfigError("--nu needs three coordinates")
        result["contact"] = supporting_plane_probe(u, cfg["nu"], S2Grid.square(cfg["probe_grid"])).to_dict()
    if cfg["grid"] is not None:
        grid = S2Grid.square(cfg["grid"])
        rows = surface_rows(u, grid)
        result["grid"] = grid.describe()
        result["singular_samples"] = sum(1 for r in rows if np.isnan(r[6]))
        table = (list(SURFACE_HEADER), rows)
    if not result:
        raise ConfigError("give --point, --nu or --grid")
    return result, True, table


def cmd_scan(cfg):
    from .grids import sphere_grid
    from .surface import saddle_scan, singular_set_scan

    u = _need_profile(cfg)
    _positive(cfg, "grid", "tau", "refinements")
    grid = sphere_grid(u.dim, cfg["grid"])
    sc = saddle_scan(u, grid, cfg["tau"])
    result = {"saddle": sc.to_dict()}
    if u.dim == 3:
        result["singular_set"] = singular_set_scan(
            u, cfg["grid"], 1e-8 if cfg["tau"] is None else cfg["tau"], cfg["refinements"]
        ).to_dict()
    rows = [[k, v] for k, v in sc.counts.items()]
    return result, True, (["class", "count"], rows)


def cmd_verify_lo(cfg):
    from .grids import S3Grid
    from .lawson_osserman import LO_MAP, minimal_residual

    _positive(cfg, "grid", "max_points", "tol")
    cone = LO_MAP.perturbed(cfg["perturb"]) if cfg["perturb"] else LO_MAP
    rep = minimal_residual(S3Grid(cfg["grid"], cfg["max_points"]), cone)
    result = {
        "residual_max": rep.residual_max,
        "component_max": rep.component_max,
        "grid": rep.grid,
        "lambda_certificate": rep.lambda_certificate,
        "tol": cfg["tol"],
        "passed": rep.residual_max < cfg["tol"],
    }
    rows = [[k + 1, v] for k, v in enumerate(rep.component_max)]
    return result, result["passed"], (["component", "residual_max"], rows)


def cmd_synthesize(cfg):
    from .coefficients import synthesize_field
    from .grids import sphere_grid
    from .io import write_json

    u = _need_profile(cfg)
    _positive(cfg, "grid", "max_points", "kappa_max", "tau", "trace_tol")
    rep = synthesize_field(u, sphere_grid(u.dim, cfg["grid"], cfg["max_points"]), cfg["kappa_max"], cfg["tau"])
    if cfg["field_json"]:
        write_json(cfg["field_json"], rep.field_json())
    result = rep.summary()
    ok = rep.max_trace_residual < cfg["trace_tol"]
    result["trace_check_passed"] = ok
    return result, ok, (rep.feasibility_header(), list(rep.feasibility_rows()))


def cmd_reduce(cfg):
    from .coefficients import divergence_coefficients, reduce_to_chart, reduce_to_sphere
    from .grids import sphere_point
    from .io import matrix_to_json

    u = _need_profile(cfg, 3)
    if cfg["point"] is None or len(cfg["point"]) != 2:
        raise ConfigError("--point needs two values (chart point or angles)")
    if cfg["sign"] not in (1, -1):
        raise ConfigError("--sign must be 1 or -1")
    a = _field(cfg["field"], u=u)
    p = np.asarray(cfg["point"], float)
    if cfg["target"] == "chart":
        red = reduce_to_chart(a, cfg["sign"])
        A = red.matrix(p)
        x = np.append(p, float(cfg["sign"]))
        lhs = float(np.sum(a(x)[0] * u.hessian(x)))
        rhs = float(red.apply(u.profile, p)[0])
        result = {
            "A": matrix_to_json(A),
            "local_lambda": float(red.ellipticity(p)),
            "divergence_B": matrix_to_json(divergence_coefficients(A)),
            "trace_ambient": lhs,
            "trace_reduced": rhs,
        }
        rows = [[i, j, A[i, j]] for i in range(2) for j in range(2)]
    elif cfg["target"] == "sphere":
        op = reduce_to_sphere(a)
        A, B, C = op.coefficients(p)
        x = sphere_point(*p)
        lhs = float(np.sum(a(x)[0] * u.hessian(x)))
        rhs = float(op.apply(u.profile, p)[0])
        result = {
            "A": matrix_to_json(A[0]),
            "B": B[0].tolist(),
            "C": float(C[0]),
            "trace_ambient": lhs,
            "trace_reduced": rhs,
        }
        rows = [["A11", A[0, 0, 0]], ["A12", A[0, 0, 1]], ["A22", A[0, 1, 1]], ["B1", B[0, 0]], ["B2", B[0, 1]], ["C", C[0]]]
        rows = [list(r) for r in rows]
    else:
        raise ConfigError("--target must be chart or sphere")
    ok = abs(lhs - rhs) < 1e-8 * (1 + abs(lhs))
    result["identity_passed"] = ok
    return result, ok, (["entry", "value"] if cfg["target"] == "sphere" else ["i", "j", "value"], rows)


def cmd_search(cfg):
    from .coefficients import SphericalOperator
    from .experiments import SCHEMES, DiscretizedProfile, SearchOptions, discretize_operator, minimize_residual
    from .grids import S2Grid

    _positive(cfg, "grid", "max_iter", "tol", "nonlinearity_tol", "lam")
    if cfg["scheme"] not in SCHEMES:
        raise ConfigError(f"--scheme must be one of {', '.join(SCHEMES)}")
    if cfg["grid"] % 2:
        raise ConfigError("--grid must be even")
    grid = S2Grid.square(cfg["grid"])
    a = _field(cfg["field"], cfg["lam"])
    dop = discretize_operator(SphericalOperator(a), grid, cfg["scheme"])
    runs, ok, rows = [], True, []
    for seed in cfg["seeds"]:
        t0 = time.perf_counter()
        init = DiscretizedProfile.random(grid, seed, cfg["scheme"])
        res = minimize_residual(dop, init, SearchOptions(max_iter=cfg["max_iter"], tol=cfg["tol"]))
        d = res.to_dict()
        d["seed"] = seed
        d["seconds"] = time.perf_counter() - t0
        d["linear"] = res.nonlinearity < cfg["nonlinearity_tol"] * res.profile.norm()
        ok &= d["linear"]
        runs.append(d)
        rows.extend([seed, h["iteration"], h["R"], h["nonlinearity"]] for h in res.history)
    result = {"field": a.name, "grid": grid.describe(), "scheme": cfg["scheme"], "runs": runs, "all_linear": ok}
    return result, ok, (["seed", "iteration", "R", "nonlinearity"], rows)


def cmd_obstruction(cfg):
    from .experiments import ObstructionCurve, obstruction_study

    u = _need_profile(cfg)
    _positive(cfg, "resolutions", "max_points", "kappa_max", "tau")
    curve = obstruction_study(u, cfg["resolutions"], cfg["kappa_max"], cfg["tau"], max_points=cfg["max_points"])
    return curve.to_dict(), True, (list(ObstructionCurve.HEADER), curve.rows())


def cmd_list_profiles(cfg):
    from .profiles import list_profiles

    items = list_profiles()
    rows = [[p["name"], p["dim"], p["formula"], p["citation"]] for p in items]
    return {"profiles": items}, True, (["name", "dim", "formula", "citation"], rows)


COMMANDS = {
    "hessian": cmd_hessian,
    "surface": cmd_surface,
    "scan": cmd_scan,
    "verify-lo": cmd_verify_lo,
    "synthesize": cmd_synthesize,
    "reduce": cmd_reduce,
    "search": cmd_search,
    "obstruction": cmd_obstruction,
    "list-profiles": cmd_list_profiles,
}


def run(command: str, cfg: dict) -> tuple[dict, int, tuple | None]:
    """Run a resolved configuration; returns (report, exit code, csv table)."""
    t0 = time.perf_counter()
    result, ok, table = COMMANDS[command](cfg)
    if command == "list-profiles":
        # a registry listing, not an experiment: kept byte-identical across runs
        return {"version": __version__, "command": command, "result": result}, 0, table
    report = {
        "version": __version__,
        "command": command,
        "config": cfg,
        "result": result,
        "wall_time": time.perf_counter() - t0,
    }
    return report, 0 if ok else 1, table


def main(argv=None) -> int:
    from .io import dumps, write_csv

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        cfg = resolve(args.command, args)
        report, code, table = run(args.command, cfg)
    except ConfigError as exc:
        print(f"rigidity: config error: {exc}", file=sys.stderr)
        return 2
    except RigidityError as exc:
        print(f"rigidity: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text = dumps(report)
    if cfg.get("output"):
        Path(cfg["output"]).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")
    if cfg.get("csv") and table is not None:
        write_csv(cfg["csv"], *table)
    return code


if __name__ == "__main__":
    sys.exit(main())
