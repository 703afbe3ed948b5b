"""Command-line interface: ``drivenrabi {gfun,spectrum,cones,landscape}``.

Ranges use ``a:b:step`` with both ends included; when the last step would
overshoot ``b`` by less than ``step/2`` the final point is clamped to ``b``.
A single number is a one-point range.  ``--config FILE`` reads ``key=value``
lines (``#`` starts a comment); explicit flags override the file.

Exit codes: 0 success, 1 usage error, 2 computational failure.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import re
import sys

import numpy as np

from . import __version__
from .landscape import export_grid, find_cones, grid_to_csv, reflect, sweep
from .model import (
    InvalidParams,
    ModelParams,
    PoleProximity,
    RabiError,
    SeriesConfig,
    evaluate_G,
    nearest_pole_distance,
    pole_positions,
)
from .oracle import DEFAULT_M, oracle_energies
from .spectrum import compute_spectrum

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_range(text: str) -> np.ndarray:
    """``a:b:step`` (inclusive) or a single number."""
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected a:b:step or a number") from None
    if len(vals) == 1:
        return np.array(vals)
    if len(vals) != 3:
        raise UsageError(f"bad range {text!r}; expected a:b:step")
    a, b, step = vals
    if not step > 0 or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"bad range {text!r}; step must be positive and values finite")
    if b < a:
        return np.array([])
    span = (b - a) / step
    n = int(math.floor(span + 1e-9))
    pts = [a + i * step for i in range(n + 1)]
    if abs(span - n) <= 1e-9:
        pts[-1] = b
    elif (n + 1) * step - (b - a) < step / 2:
        pts.append(b)
    return np.array(pts)


def read_config(path) -> dict:
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {v!r}")


def _common(p: argparse.ArgumentParser, g_default="0.0"):
    p.add_argument("--omega", type=float, default=1.0, help="boson frequency (> 0)")
    p.add_argument("--g", default=g_default, help="coupling g (>= 0)")
    p.add_argument("--delta", type=float, default=0.7, help="level splitting Delta (>= 0)")
    p.add_argument("--epsilon", default="0.0", help="bias epsilon")
    p.add_argument("--max-terms", type=int, default=SeriesConfig.max_terms)
    p.add_argument("--rel-tol", type=float, default=SeriesConfig.rel_tol)
    p.add_argument("--consecutive-small", type=int, default=SeriesConfig.consecutive_small)
    p.add_argument("--pole-guard", type=float, default=SeriesConfig.pole_guard)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--config", help="key=value file supplying defaults for these flags")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes for sweeps (default: CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drivenrabi", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gfun", help="tabulate G(x) with pole gaps")
    _common(p, g_default="0.4")
    p.add_argument("--x", required=False, default="0:3:0.01", help="x range a:b:step")
    p.set_defaults(func=cmd_gfun)

    p = sub.add_parser("spectrum", help="lowest levels at a point or along a sweep")
    _common(p)
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--sweep", help="PARAM=a:b:step with PARAM in {g, epsilon, delta}")
    p.add_argument("--verify-oracle", action="store_true",
                   help="compare against truncated diagonalization")
    p.add_argument("--M", type=int, default=DEFAULT_M, help="boson cutoff for the oracle")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("cones", help="conical intersection inventory (JSON)")
    _common(p)
    p.add_argument("--plane", type=int, default=0, help="plane index n (epsilon = n omega/2)")
    p.add_argument("--all-planes", type=int, default=None, metavar="N_MAX",
                   help="scan planes -N_MAX..N_MAX instead of --plane")
    p.add_argument("--gmax", type=float, default=1.5)
    p.add_argument("--sheets", type=int, default=3, help="largest sheet label N to report")
    p.add_argument("--gstep", type=float, default=0.01, help="g scan step")
    p.set_defaults(func=cmd_cones)

    p = sub.add_parser("landscape", help="(g, epsilon) grid of the lowest sheets")
    _common(p)
    p.add_argument("--sheets", type=int, default=6)
    p.add_argument("--shifted", action="store_true", help="store E + g^2/omega")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_landscape, g="0:1:0.05", epsilon="-1:1:0.05")
    return parser


def _series_config(args) -> SeriesConfig:
    return SeriesConfig(args.max_terms, args.rel_tol, args.consecutive_small, args.pole_guard)


def _scalar(text, name) -> float:
    r = parse_range(str(text))
    if r.size != 1:
        raise UsageError(f"--{name} expects a single number here, got {text!r}")
    return float(r[0])


def _params(args, **override) -> ModelParams:
    vals = {"omega": args.omega, "delta": args.delta}
    vals["g"] = override.get("g", None)
    if vals["g"] is None:
        vals["g"] = _scalar(args.g, "g")
    vals["epsilon"] = override.get("epsilon", None)
    if vals["epsilon"] is None:
        vals["epsilon"] = _scalar(args.epsilon, "epsilon")
    if "delta" in override:
        vals["delta"] = override["delta"]
    return ModelParams(**vals)


def _meta_lines(meta: dict) -> str:
    return "".join(f"# {k}={v!r}\n" if isinstance(v, float) else f"# {k}={v}\n"
                   for k, v in meta.items())


def _base_meta(args, params: ModelParams | None = None) -> dict:
    meta = {"version": __version__, "command": args.command}
    if params is not None:
        meta.update(omega=params.omega, g=params.g, delta=params.delta, epsilon=params.epsilon)
    meta.update(max_terms=args.max_terms, rel_tol=float(args.rel_tol),
                consecutive_small=args.consecutive_small, pole_guard=float(args.pole_guard))
    return meta


def _emit(args, text: str):
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out!r}: {exc}") from None
    else:
        sys.stdout.write(text)


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


# -- subcommands -------------------------------------------------------------

def cmd_gfun(args) -> int:
    params = _params(args)
    if params.g == 0:
        raise UsageError("gfun needs g > 0 (the series does not exist at g = 0)")
    cfg = _series_config(args)
    xs = parse_range(args.x)
    meta = _base_meta(args, params)
    if xs.size:
        poles = pole_positions(params, float(xs[-1]), float(xs[0]))
        meta["x_range"] = args.x
        meta["poles"] = " ".join(repr(p) for p in poles)
    buf = io.StringIO()
    buf.write(_meta_lines(meta))
    buf.write("x,G\n")
    failures = 0
    for x in xs:
        x = float(x)
        if nearest_pole_distance(params, x, cfg) < cfg.pole_guard * params.omega:
            buf.write(f"{x!r},nan\n")
            continue
        try:
            val = evaluate_G(params, x, cfg).value
        except PoleProximity:
            buf.write(f"{x!r},nan\n")
            continue
        except RabiError:
            failures += 1
            buf.write(f"{x!r},error\n")
            continue
        buf.write(f"{x!r},{val!r}\n")
    _emit(args, buf.getvalue())
    return EXIT_COMPUTE if xs.size and failures == xs.size else EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _series_config(args)
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    if args.sweep:
        name, sep, rng = args.sweep.partition("=")
        if not sep or name not in ("g", "epsilon", "delta"):
            raise UsageError("--sweep expects g=a:b:step, epsilon=a:b:step or delta=a:b:step")
        values = parse_range(rng)
        points = [_params(args, **{name: float(v)}) for v in values]
    else:
        name, values = None, None
        points = [_params(args)]

    rows, failures = [], 0
    max_diff = 0.0
    for params in points:
        try:
            spec = compute_spectrum(params, args.count, cfg)
            rows.append((params, spec, None))
            if args.verify_oracle:
                ref = oracle_energies(params, args.count, args.M)
                max_diff = max(max_diff, float(np.max(np.abs(spec.energies - ref))))
        except RabiError as exc:
            failures += 1
            rows.append((params, None, f"{type(exc).__name__}: {exc}"))

    meta = _base_meta(args, points[0] if not args.sweep else None)
    meta["count"] = args.count
    if args.sweep:
        meta.update(omega=args.omega, sweep=args.sweep)
        for k in ("g", "epsilon", "delta"):
            if k != name:
                meta[k] = getattr(points[0], k)
    if args.verify_oracle:
        meta["oracle_M"] = args.M
        meta["max_abs_diff"] = max_diff
    verify_ok = not args.verify_oracle or max_diff < 1e-8

    if args.format == "json":
        doc = {"meta": meta, "points": []}
        for params, spec, err in rows:
            entry = {"omega": params.omega, "g": params.g, "delta": params.delta,
                     "epsilon": params.epsilon}
            if spec is None:
                entry["error"] = err
            else:
                entry["levels"] = [{"N": lv.index, "energy": lv.energy, "x": lv.root_x,
                                    "source": lv.source} for lv in spec.levels]
            doc["points"].append(entry)
        text = json.dumps(doc, indent=1) + "\n"
    else:
        buf = io.StringIO()
        buf.write(_meta_lines(meta))
        if not args.sweep:
            params, spec, err = rows[0]
            buf.write("N,E,x,source\n")
            if spec is not None:
                for lv in spec.levels:
                    buf.write(f"{lv.index},{lv.energy!r},{lv.root_x!r},{lv.source}\n")
            else:
                buf.write(f"# error: {err}\n")
        else:
            cols = [f"E{i}" for i in range(args.count)]
            buf.write(",".join([name] + cols + ["status"]) + "\n")
            for params, spec, err in rows:
                v = getattr(params, name)
                if spec is None:
                    buf.write(",".join([repr(v)] + ["nan"] * args.count + ["error"]) + "\n")
                else:
                    buf.write(",".join([repr(v)] + [repr(e) for e in spec.energies.tolist()]
                                       + ["ok"]) + "\n")
        text = buf.getvalue()
    _emit(args, text)
    if args.verify_oracle:
        print(f"max |dE| vs oracle (M={args.M}): {max_diff:.3e}", file=sys.stderr)
    if failures == len(rows) or not verify_ok:
        return EXIT_COMPUTE
    return EXIT_OK


def cmd_cones(args) -> int:
    cfg = _series_config(args)
    params = _params(args, g=0.0, epsilon=0.0)
    if args.gmax <= 0 or args.sheets < 1:
        raise UsageError("--gmax must be > 0 and --sheets >= 1")
    if args.all_planes is not None:
        if args.all_planes < 0:
            raise UsageError("--all-planes expects a nonnegative integer")
        planes = list(range(0, args.all_planes + 1))
    else:
        planes = [args.plane]
    results = []
    for n in planes:
        found = find_cones(params, n, args.gmax, args.sheets, cfg, g_step=args.gstep)
        results.append((n, found))
        if args.all_planes is not None and n > 0:
            results.append((-n, reflect(found, -n)))
    meta = _base_meta(args)
    meta.update(omega=params.omega, delta=params.delta, gmax=args.gmax, sheets=args.sheets,
                gstep=args.gstep)
    doc = {"meta": meta, "planes": []}
    for n, found in sorted(results, key=lambda r: (abs(r[0]), r[0] < 0)):
        counts = {str(N): found.counts().get(N, 0) for N in range(1, args.sheets + 1)}
        doc["planes"].append({"plane_n": n, "epsilon": n * params.omega / 2,
                              "counts": counts,
                              "cones": [c.as_dict() for c in found.cones],
                              "anomalies": [c.as_dict() for c in found.anomalies]})
    _emit(args, json.dumps(doc, indent=1) + "\n")
    return EXIT_OK


def cmd_landscape(args) -> int:
    cfg = _series_config(args)
    g_axis = parse_range(str(args.g))
    eps_axis = parse_range(str(args.epsilon))
    if g_axis.size == 0 or eps_axis.size == 0:
        raise UsageError("both --g and --epsilon ranges must be nonempty")
    if args.sheets < 1:
        raise UsageError("--sheets must be >= 1")
    template = ModelParams(args.omega, 0.0, args.delta, 0.0)
    grid = sweep(template, g_axis, eps_axis, args.sheets, bool(args.shifted), cfg,
                 workers=_threads(args))
    grid.meta.update(g_range=str(args.g), epsilon_range=str(args.epsilon))
    if grid.error_mask.all():
        status = EXIT_COMPUTE
    else:
        status = EXIT_OK
    if args.out:
        try:
            export_grid(grid, args.format, args.out)
        except OSError as exc:
            raise UsageError(str(exc)) from None
    else:
        text = grid_to_csv(grid) if args.format == "csv" else json.dumps(grid.to_dict(), indent=1) + "\n"
        sys.stdout.write(text)
    return status


# -- entry point ------------------------------------------------------------

def _apply_config(parser, argv):
    """Load ``--config`` values as subcommand defaults so explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config(known.config)
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub_action.choices.values():
        dests = {a.dest: a for a in sp._actions}
        defaults = {}
        for k, v in values.items():
            if k not in dests:
                continue
            action = dests[k]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[k] = _bool(v)
            elif action.type is not None:
                try:
                    defaults[k] = action.type(v)
                except ValueError:
                    raise UsageError(f"config value for {k!r} is invalid: {v!r}") from None
            else:
                defaults[k] = v
        sp.set_defaults(**defaults)


def _glue_negative_values(argv):
    """``--epsilon -1:1:0.05`` -> ``--epsilon=-1:1:0.05`` so argparse does not read a flag."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and re.match(r"-[0-9.]", argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    argv = _glue_negative_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except UsageError as exc:
        print(f"drivenrabi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, InvalidParams) as exc:
        print(f"drivenrabi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RabiError as exc:
        print(f"drivenrabi: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
