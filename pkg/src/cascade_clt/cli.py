"""Command line entry point: ``cascade-clt {theory,simulate,verify,sweep,graph}``.

Settings come from built-in defaults, then an optional JSON config file,
then command line flags, each layer overriding the previous one.
Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import checks, mc, theory
from .cascade import run_continuous, write_trajectory_csv
from .cgm import SimpleGraphNotFound, build_multigraph, is_simple, to_simple, write_edge_list
from .dist import (
    EXAMPLE,
    DegenerateDistribution,
    DegreeThresholdDistribution,
    InvalidDistribution,
    load_distribution,
    parse_atoms,
    realize_rounded,
    realize_sampled,
    require_valid,
)
from .io import atomic_open, fmt, write_json
from .quadrature import QuadratureConfig, QuadratureError
from .rng import mix
from .rules import DEFAULT_RULE, RULES

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("theory", "simulate", "verify", "sweep", "graph")


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    distribution: DegreeThresholdDistribution = EXAMPLE
    n: int = 10_000
    trials: int = 500
    root_seed: int = 0
    eval_time: float | None = None
    snapshots: int = 64
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    out_dir: str = "out"
    rule: str = DEFAULT_RULE
    workers: int | None = None
    scale: float = 1.0
    n_list: tuple[int, ...] = (1_000, 10_000, 100_000)
    t_max: float = theory.T_MAX
    t_points: int = 41
    t_end: float | None = None
    realize: str = "sampled"
    simple: str = "none"


# ---------------------------------------------------------------- validation

def _int(lo=None):
    def conv(v):
        if isinstance(v, bool):
            raise ValueError(f"expected an integer, got {v!r}")
        if isinstance(v, str):
            v = v.strip()
            try:
                v = int(v)
            except ValueError:
                raise ValueError(f"expected an integer, got {v!r}") from None
        if not isinstance(v, int):
            raise ValueError(f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            raise ValueError(f"must be >= {lo}, got {v}")
        return v
    return conv


def _float(lo=None, strict=False, optional=False):
    def conv(v):
        if optional and (v is None or v == "none"):
            return None
        if isinstance(v, bool):
            raise ValueError(f"expected a number, got {v!r}")
        try:
            x = float(v)
        except (TypeError, ValueError):
            raise ValueError(f"expected a number, got {v!r}") from None
        if math.isnan(x):
            raise ValueError("NaN is not allowed")
        if lo is not None and (x <= lo if strict else x < lo):
            raise ValueError(f"must be {'>' if strict else '>='} {lo}, got {x}")
        return x
    return conv


def _choice(options):
    def conv(v):
        if v not in options:
            raise ValueError(f"expected one of {list(options)}, got {v!r}")
        return v
    return conv


def _n_list(v):
    if isinstance(v, str):
        v = [s for s in v.split(",") if s.strip()]
    if not isinstance(v, (list, tuple)) or not v:
        raise ValueError("expected a nonempty list of integers")
    out = tuple(_int(1)(x) for x in v)
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ValueError("must be strictly increasing")
    return out


def _distribution(v):
    if isinstance(v, str):
        text = v.strip()
        if text.startswith("["):
            try:
                payload = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ValueError(f"inline JSON: {exc}") from None
            dist = parse_atoms(payload)
        else:
            if not Path(text).is_file():
                raise ValueError(f"file not found: {text}")
            try:
                dist = load_distribution(text)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{text}: line {exc.lineno}: {exc.msg}") from None
    else:
        dist = parse_atoms(v)
    require_valid(dist)
    return dist


_QUAD_FIELDS = {
    "abs_tol": _float(0.0, strict=True),
    "max_depth": _int(1),
    "root_tol": _float(0.0, strict=True),
    "scan_step": _float(0.0, strict=True),
}

_FIELDS = {
    "distribution": _distribution,
    "n": _int(1),
    "trials": _int(1),
    "root_seed": _int(0),
    "eval_time": _float(0.0, optional=True),
    "snapshots": _int(0),
    "quadrature": None,
    "out_dir": str,
    "rule": _choice(RULES),
    "workers": _int(1),
    "scale": _float(0.0, strict=True),
    "n_list": _n_list,
    "t_max": _float(0.0, strict=True),
    "t_points": _int(2),
    "t_end": _float(0.0, strict=True, optional=True),
    "realize": _choice(("sampled", "rounded")),
    "simple": _choice(("none", "reject", "erase")),
}


def _read_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"config: file not found: {path}"])
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["config: top level must be a JSON object"])
    return data


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, the JSON file at ``path`` and ``overrides``; collect every error."""
    raw = _read_config_file(path) if path else {}
    errors = [f"{k}: unknown key" for k in sorted(set(raw) - set(_FIELDS))]
    quad = raw.get("quadrature", {})
    if not isinstance(quad, dict):
        errors.append("quadrature: expected an object")
        quad = {}
    quad = dict(quad)
    merged = {k: v for k, v in raw.items() if k in _FIELDS and k != "quadrature"}
    for k, v in (overrides or {}).items():
        if k in _QUAD_FIELDS:
            quad[k] = v
        elif k in _FIELDS:
            merged[k] = v
        else:
            errors.append(f"{k}: unknown key")
    values = {}
    for k, v in merged.items():
        try:
            values[k] = _FIELDS[k](v)
        except (ValueError, InvalidDistribution) as exc:
            errors.append(f"{k}: {exc}")
    qvals = {}
    for k, v in quad.items():
        if k not in _QUAD_FIELDS:
            errors.append(f"quadrature.{k}: unknown key")
            continue
        try:
            qvals[k] = _QUAD_FIELDS[k](v)
        except ValueError as exc:
            errors.append(f"quadrature.{k}: {exc}")
    if errors:
        raise ConfigError(errors)
    return replace(RunConfig(), quadrature=QuadratureConfig(**qvals), **values)


def resolve_workers(cfg: RunConfig) -> int:
    if cfg.workers is not None:
        return cfg.workers
    try:
        return mc.default_workers()
    except ValueError:
        raise ConfigError(["CASCADE_CLT_WORKERS: expected a positive integer"]) from None


# ---------------------------------------------------------------- commands

def _out(cfg: RunConfig, name: str) -> Path:
    return Path(cfg.out_dir) / name


def _say(msg: str) -> None:
    print(msg, flush=True)


def cmd_theory(cfg: RunConfig, hooks: dict) -> int:
    res = theory.solve(cfg.distribution, cfg.quadrature, cfg.rule, cfg.t_max)
    payload = res.to_json()
    payload["distribution"] = cfg.distribution.to_json()
    write_json(_out(cfg, "theory.json"), payload)
    if cfg.t_end is not None:
        t_end = cfg.t_end
    elif math.isfinite(res.t_star) and res.t_star > 0:
        t_end = max(2.0 * res.t_star, 1.0)
    else:
        t_end = cfg.t_max
    with atomic_open(_out(cfg, "theory_curve.csv")) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "a_hat", "sigma2_A"])
        for t in np.linspace(0.0, t_end, cfg.t_points):
            t = float(t)
            w.writerow([fmt(t), fmt(theory.a_hat(cfg.distribution, t, cfg.rule)),
                        fmt(theory.sigma2_A(cfg.distribution, t, cfg.quadrature, cfg.rule))])
    _say(f"z_hat={res.z_hat:.12g} t_star={res.t_star:.12g} a_hat_star={res.a_hat_star:.12g} "
         f"sigma2_star={res.sigma2_star:.6g}")
    if res.tangency:
        _say("warning: phi touches zero at z_hat without crossing; the CLT variance is unsupported")
    _say(f"wrote {_out(cfg, 'theory.json')} and {_out(cfg, 'theory_curve.csv')}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, hooks: dict) -> int:
    seed = mix(cfg.root_seed, 0)
    seq = (realize_sampled(cfg.distribution, cfg.n, mix(seed, 0)) if cfg.realize == "sampled"
           else realize_rounded(cfg.distribution, cfg.n))
    mg = build_multigraph(seq, mix(seed, 1))
    traj, _ = run_continuous(mg, seq.thresholds, mix(seed, 2), cfg.snapshots, cfg.rule)
    write_trajectory_csv(traj, _out(cfg, "trajectory.csv"))
    if cfg.snapshots:
        with atomic_open(_out(cfg, "occupancy.csv")) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "d", "theta", "ell", "count"])
            for g, t in enumerate(traj.snapshot_times):
                for (d, th, ell), col in sorted(traj.occupancy.items()):
                    w.writerow([fmt(float(t)), d, th, ell, int(col[g])])
    write_json(_out(cfg, "simulate.json"), {
        "n": seq.n, "seed": seed, "tau": traj.tau, "final_size": traj.final_size,
        "n_events": traj.n_events, "rule": cfg.rule, "realize": cfg.realize,
    })
    _say(f"n={seq.n} tau={traj.tau:.6g} final_size={traj.final_size} events={traj.n_events}")
    _say(f"wrote {_out(cfg, 'trajectory.csv')}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, hooks: dict) -> int:
    workers = resolve_workers(cfg)
    results, records = checks.run_suite(cfg.scale, cfg.root_seed, workers, cfg.rule,
                                        sigma2=hooks.get("sigma2"), progress=_say)
    for stem, recs in records.items():
        mc.write_results_csv(recs, _out(cfg, f"{stem}.csv"))
    ok = all(r.passed for r in results)
    write_json(_out(cfg, "summary.json"), {
        "root_seed": cfg.root_seed, "scale": cfg.scale, "rule": cfg.rule,
        "checks": [r.to_json() for r in results], "all_passed": ok,
    })
    for r in results:
        _say(r.line())
    _say(f"wrote {_out(cfg, 'summary.json')}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_sweep(cfg: RunConfig, hooks: dict) -> int:
    rows = mc.convergence_sweep(cfg.distribution, cfg.n_list, cfg.trials, cfg.root_seed,
                                cfg.eval_time, resolve_workers(cfg), cfg.rule)
    mc.write_sweep_csv(rows, _out(cfg, "sweep.csv"))
    for r in rows:
        _say(f"n={r.n} mean_final_fraction={r.mean_final_fraction:.6g} var_xi={r.var_xi} "
             f"mean_tau={r.mean_tau:.6g}")
    _say(f"wrote {_out(cfg, 'sweep.csv')}")
    return EXIT_OK


def cmd_graph(cfg: RunConfig, hooks: dict) -> int:
    seed = mix(cfg.root_seed, 0)
    seq = (realize_sampled(cfg.distribution, cfg.n, mix(seed, 0)) if cfg.realize == "sampled"
           else realize_rounded(cfg.distribution, cfg.n))
    mg = build_multigraph(seq, mix(seed, 1))
    attempts = 1
    if cfg.simple != "none":
        mg, attempts = to_simple(mg, cfg.simple, seed=mix(seed, 3))
    write_edge_list(mg, _out(cfg, "edges.csv"))
    with atomic_open(_out(cfg, "nodes.csv")) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "degree", "theta"])
        for i, (d, th) in enumerate(zip(mg.degrees.tolist(), seq.thresholds.tolist())):
            w.writerow([i, d, th])
    write_json(_out(cfg, "graph.json"), {
        "n": mg.n, "m": mg.m, "simple": is_simple(mg), "attempts": attempts, "seed": seed,
    })
    _say(f"n={mg.n} m={mg.m} simple={is_simple(mg)}")
    _say(f"wrote {_out(cfg, 'edges.csv')}")
    return EXIT_OK


HANDLERS = {
    "theory": cmd_theory,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "graph": cmd_graph,
}


def dispatch(command: str, cfg: RunConfig, hooks: dict | None = None) -> int:
    """Run one subcommand and map failures onto exit codes.

    ``hooks`` lets tests inject values; ``{"sigma2": x}`` replaces the
    theoretical variance used by the CLT check.
    """
    try:
        return HANDLERS[command](cfg, hooks or {})
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateDistribution, InvalidDistribution) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, SimpleGraphNotFound, FloatingPointError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


# ---------------------------------------------------------------- argparse

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


_S = argparse.SUPPRESS


def _common(p: argparse.ArgumentParser, with_dist: bool = True) -> None:
    d = RunConfig()
    p.add_argument("--config", metavar="PATH",
                   help="JSON config file; flags override its values (default: none)")
    if with_dist:
        p.add_argument("--dist", dest="distribution", metavar="ATOMS", default=_S,
                       help='atoms as a file path or inline JSON \'[{"d":3,"theta":0,"p":0.1}, ...]\' '
                            "(default: {(3,0,0.1),(3,2,0.9)})")
    p.add_argument("--rule", default=_S, choices=RULES,
                   help=f"activation convention (default: {d.rule})")
    p.add_argument("--root-seed", dest="root_seed", default=_S, metavar="INT",
                   help=f"root of every random stream (default: {d.root_seed})")
    p.add_argument("--out", dest="out_dir", default=_S, metavar="DIR",
                   help=f"output directory (default: {d.out_dir})")


def _quad(p: argparse.ArgumentParser) -> None:
    q = QuadratureConfig()
    p.add_argument("--abs-tol", dest="abs_tol", default=_S, metavar="X",
                   help=f"quadrature absolute tolerance (default: {q.abs_tol:g})")
    p.add_argument("--max-depth", dest="max_depth", default=_S, metavar="INT",
                   help=f"quadrature recursion cap (default: {q.max_depth})")
    p.add_argument("--root-tol", dest="root_tol", default=_S, metavar="X",
                   help=f"root tolerance for z_hat (default: {q.root_tol:g})")
    p.add_argument("--scan-step", dest="scan_step", default=_S, metavar="X",
                   help=f"grid step of the downward root scan (default: {q.scan_step:g})")


def _workers(p):
    p.add_argument("--workers", default=_S, metavar="INT",
                   help="worker processes (default: $CASCADE_CLT_WORKERS, else CPU count)")


def build_parser() -> argparse.ArgumentParser:
    d = RunConfig()
    parser = _Parser(prog="cascade-clt",
                     description="Threshold cascades on configuration-model graphs: "
                                 "limit theory, simulation and Monte Carlo checks.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("theory", help="z_hat, t*, a_hat(t*) and the CLT variance; writes JSON and a curve CSV")
    _common(p)
    _quad(p)
    p.add_argument("--t-max", dest="t_max", default=_S, metavar="X",
                   help=f"evaluation horizon when z_hat = 0 (default: {d.t_max:g})")
    p.add_argument("--t-points", dest="t_points", default=_S, metavar="INT",
                   help=f"points on the curve grid (default: {d.t_points})")
    p.add_argument("--t-end", dest="t_end", default=_S, metavar="X",
                   help="end of the curve grid (default: max(2 t*, 1), or the horizon when t* is infinite)")

    p = sub.add_parser("simulate", help="one continuous-time trajectory as CSV")
    _common(p)
    p.add_argument("--n", default=_S, metavar="INT", help=f"number of nodes (default: {d.n})")
    p.add_argument("--snapshots", default=_S, metavar="INT",
                   help=f"occupancy snapshot points on [0, tau], 0 to skip (default: {d.snapshots})")
    p.add_argument("--realize", default=_S, choices=("sampled", "rounded"),
                   help=f"how node types are drawn (default: {d.realize})")

    p = sub.add_parser("verify", help="run the statistical verification suite on the reference law "
                                      "{(3,0,0.1),(3,2,0.9)}")
    _common(p, with_dist=False)
    _workers(p)
    p.add_argument("--scale", default=_S, metavar="X",
                   help=f"multiplier on trial and repetition counts (default: {d.scale:g})")

    p = sub.add_parser("sweep", help="finite-size convergence table")
    _common(p)
    _workers(p)
    p.add_argument("--n-list", dest="n_list", default=_S, metavar="N1,N2,...",
                   help=f"increasing system sizes (default: {','.join(map(str, d.n_list))})")
    p.add_argument("--trials", default=_S, metavar="INT", help=f"trials per size (default: {d.trials})")
    p.add_argument("--eval-time", dest="eval_time", default=_S, metavar="X",
                   help="time at which the centred count is read (default: t* + 1)")

    p = sub.add_parser("graph", help="dump a sampled configuration-model graph")
    _common(p)
    p.add_argument("--n", default=_S, metavar="INT", help=f"number of nodes (default: {d.n})")
    p.add_argument("--realize", default=_S, choices=("sampled", "rounded"),
                   help=f"how node types are drawn (default: {d.realize})")
    p.add_argument("--simple", default=_S, choices=("none", "reject", "erase"),
                   help=f"keep the multigraph, resample until simple, or erase loops and "
                        f"multi-edges (default: {d.simple})")
    return parser


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    path = args.pop("config", None)
    try:
        cfg = parse_config(path, args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(command, cfg)


if __name__ == "__main__":
    sys.exit(main())
