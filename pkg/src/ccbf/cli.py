"""ccbf command line: simulate, field and audit.

    ccbf simulate --scenario planar --mode cbf --out runs/planar
    ccbf field --scenario planar --resolution 121 --out runs/grid
    ccbf audit --scenario my_scenario.json --override controller.schedule.beta_intercept=1.2
"""
from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audit import run_audit
from .controller import ConfigError, Mode
from .scenarios import BUILTIN, Scenario, builtin
from .sim import Status, field_grid, run
from .svg import render_field

EXIT = {Status.REACHED_GOAL: 0, Status.STUCK: 2, Status.TIMEOUT: 3, Status.ERROR: 1}

# config location of the parameter each named check depends on
CHECK_PATHS = {
    "alpha_negative": "controller.schedule.alpha_gain",
    "beta0_positive": "controller.schedule.beta_intercept",
    "beta_decreasing": "controller.schedule.beta_slope",
    "beta0_lt_r": "controller.schedule.beta_intercept",
    "polytope_contains_ball": "controller.polytope.b",
    "fallback_gain_interval": "controller.fallback_gain",
    "omega_valid": "controller.circulation.omega",
    "goal_dimension": "controller.potential.goal",
    "beta_goal_negative": "controller.potential.goal",
    "goal_on_manifold": "controller.potential.goal",
    "margin_rule": "field.delta",
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    scenario: str
    mode: str | None = None
    overrides: list = field(default_factory=list)
    out: Path = Path(".")
    seed: int = 0


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, item: str) -> None:
    """Set ``a.b.c=value`` inside a nested config; bare sim keys such as ``dt`` are allowed."""
    if "=" not in item:
        raise UsageError(f"override {item!r}: expected key=value")
    path, text = item.split("=", 1)
    keys = path.strip().split(".")
    if len(keys) == 1 and keys[0] not in cfg and keys[0] in cfg.get("sim", {}):
        keys = ["sim"] + keys
    node = cfg
    for depth, key in enumerate(keys):
        where = ".".join(keys[:depth + 1])
        last = depth == len(keys) - 1
        if isinstance(node, list):
            try:
                key = int(key)
                node[key]
            except (ValueError, IndexError):
                raise UsageError(f"override {where}: no such list entry") from None
        elif not isinstance(node, dict) or key not in node:
            raise UsageError(f"override {where}: unknown config key")
        if last:
            node[key] = parse_value(text)
        else:
            node = node[key]


def load_config(source: str) -> dict:
    if source in BUILTIN:
        return builtin(source).to_config()
    path = Path(source)
    if not path.exists():
        raise UsageError(f"scenario {source!r} is neither a built-in ({', '.join(sorted(BUILTIN))}) "
                         "nor an existing file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def build_scenario(rc: RunConfig, validate: bool = True) -> Scenario:
    cfg = copy.deepcopy(load_config(rc.scenario))
    if rc.mode is not None:
        cfg.setdefault("controller", {})["mode"] = rc.mode
    for item in rc.overrides:
        apply_override(cfg, item)
    try:
        return Scenario.from_config(cfg, validate=validate)
    except ConfigError as exc:
        paths = ", ".join(f"{CHECK_PATHS.get(name, '?')} ({name})" for name in exc.failed)
        raise UsageError(f"validation failed: {paths}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None


def _g(v) -> str:
    return format(float(v), ".17g")


def write_trace(path: Path, trace) -> None:
    n = trace.n
    header = (["t"] + [f"q{i}" for i in range(1, n + 1)] + [f"u{i}" for i in range(1, n + 1)]
              + ["D", "beta", "fallback"])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for t, q, u, D, beta, fb in zip(trace.t, trace.q, trace.u, trace.D, trace.beta, trace.fallback):
            row = [_g(t)] + [_g(v) for v in q] + [_g(v) for v in u] + [_g(D), _g(beta), str(int(fb))]
            fh.write(",".join(row) + "\n")


def cmd_simulate(rc: RunConfig, start: int = 0) -> int:
    sc = build_scenario(rc)
    if not 0 <= start < len(sc.initial_states):
        raise UsageError(f"--start {start}: scenario has {len(sc.initial_states)} initial states")
    t0 = time.perf_counter()
    trace = run(sc.controller, sc.field, sc.initial_states[start], sc.sim)
    wall = time.perf_counter() - t0
    rc.out.mkdir(parents=True, exist_ok=True)
    write_trace(rc.out / "trace.csv", trace)
    goal = sc.controller.goal
    final_q = trace.error_q if trace.status is Status.ERROR else trace.final_q
    summary = {
        "scenario": sc.name,
        "mode": sc.controller.mode.value,
        "status": trace.status.value,
        "min_D": trace.min_D if len(trace) else None,
        "steps": len(trace),
        "t_end": trace.t[-1] if trace.t else 0.0,
        "wall_time": wall,
        "final_q": np.asarray(final_q).tolist(),
        "goal_error": float(np.linalg.norm(np.asarray(final_q) - goal)),
        "fallback_count": trace.fallback_count,
        "error": trace.error,
        "error_t": trace.error_t,
    }
    (rc.out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    code = EXIT[trace.status]
    print(f"{sc.name} [{summary['mode']}]: {trace.status.value} after {len(trace)} steps, "
          f"min D = {trace.min_D:.6g}")
    if trace.error:
        print(trace.error, file=sys.stderr)
    if len(trace) and not trace.min_D > 0:
        print("safety violated: min D <= 0", file=sys.stderr)
        code = code or 1
    return code


def cmd_field(rc: RunConfig, region=None, resolution=(101, 101), axes=(1, 2)) -> int:
    sc = build_scenario(rc)
    ax = tuple(a - 1 for a in axes)
    if any(not 0 <= a < sc.n for a in ax) or ax[0] == ax[1]:
        raise UsageError(f"--axes {axes[0]} {axes[1]}: need two distinct coordinates in 1..{sc.n}")
    if region is None:
        if sc.plot_region is None:
            raise UsageError(f"scenario {sc.name} has no plot region; pass --region")
        region = sc.plot_region
    nx, ny = resolution
    if region[0] >= region[1] or region[2] >= region[3]:
        nx = ny = 0
    grid = field_grid(sc.controller, sc.field, region, (nx, ny), axes=ax)
    rc.out.mkdir(parents=True, exist_ok=True)
    n = sc.n
    with open(rc.out / "field.csv", "w", newline="") as fh:
        fh.write(",".join([f"q{i}" for i in range(1, n + 1)] + [f"u{i}" for i in range(1, n + 1)]
                          + ["D", "valid", "equilibrium"]) + "\n")
        for iy in range(len(grid.ys)):
            for ix in range(len(grid.xs)):
                row = ([_g(v) for v in grid.q[iy, ix]] + [_g(v) for v in grid.u[iy, ix]]
                       + [_g(grid.D[iy, ix]), str(int(grid.valid[iy, ix])),
                          str(int(grid.is_equilibrium[iy, ix]))])
                fh.write(",".join(row) + "\n")
    (rc.out / "field.svg").write_text(render_field(grid, sc.controller.goal,
                                                   title=f"{sc.name} ({sc.controller.mode.value})"))
    flagged = int(grid.is_equilibrium.sum())
    print(f"{sc.name} [{sc.controller.mode.value}]: {grid.valid.sum()} valid nodes, "
          f"{flagged} flagged equilibrium nodes, {len(grid.equilibria)} equilibria located")
    return 0


def cmd_audit(rc: RunConfig, samples: int = 200) -> int:
    sc = build_scenario(rc, validate=False)
    report = run_audit(sc, seed=rc.seed, samples=samples)
    report["failed_paths"] = {name: CHECK_PATHS.get(name) for name in report["failed_checks"]}
    rc.out.mkdir(parents=True, exist_ok=True)
    (rc.out / "audit.json").write_text(json.dumps(report, indent=2) + "\n")
    for name in report["failed_checks"]:
        print(f"validation failed: {name} ({CHECK_PATHS.get(name)})")
    for name, suite in report["suites"].items():
        mark = "pass" if suite["passed"] else "FAIL"
        print(f"{mark} {name}: {suite['checked']} checked, worst {suite['worst']:.3g}")
        for f in suite["failures"]:
            print(f"    {f}")
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True,
                        help=f"built-in name ({', '.join(sorted(BUILTIN))}) or path to a JSON config")
    common.add_argument("--mode", choices=[m.value for m in Mode], help="override the controller mode")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set a config entry by dot path, e.g. sim.dt=0.005 (repeatable)")

    parser = argparse.ArgumentParser(prog="ccbf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", parents=[common], help="run one closed-loop trajectory")
    sim.add_argument("--start", type=int, default=0, help="index into initial_states")
    fld = sub.add_parser("field", parents=[common], help="evaluate the controller on a 2-D grid")
    fld.add_argument("--region", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    fld.add_argument("--resolution", type=int, nargs="+", default=[101], metavar="N",
                     help="nodes per axis (one value, or NX NY)")
    fld.add_argument("--axes", type=int, nargs=2, default=[1, 2], metavar=("I", "J"),
                     help="1-based coordinates spanned by the grid")
    aud = sub.add_parser("audit", parents=[common], help="check invariants, write audit.json")
    aud.add_argument("--samples", type=int, default=200)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return 1
    rc = RunConfig(args.scenario, args.mode, args.override, args.out, args.seed)
    try:
        if args.command == "simulate":
            return cmd_simulate(rc, args.start)
        if args.command == "field":
            res = args.resolution
            if len(res) not in (1, 2) or min(res) < 0:
                raise UsageError("--resolution takes one or two non-negative integers")
            return cmd_field(rc, args.region, (res[0], res[-1]), tuple(args.axes))
        return cmd_audit(rc, args.samples)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
