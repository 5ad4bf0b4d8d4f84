"""Command-line front end: ``locs {catalog,gramian,ellipsoid,steer,locs}``.

Exit codes: 0 reached / success, 1 numerical failure, 2 max_steps,
3 stuck, 64 configuration or argument error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import (
    ConfigError,
    RunConfig,
    RunRecord,
    dumps_config,
    load_config,
    write_json,
    write_table,
)
from .dynamics import ValidRegion, builtin_models, ellipsoid_within_region, linearize
from .integrate import simulate
from .linsys import (
    InvalidHorizonError,
    InvalidInputError,
    UncontrollableHorizonError,
    energy_ellipsoid,
    gramian,
    steer,
    zero_input_trajectory,
)
from .planner import MAX_STEPS, REACHED, STUCK, fitness, locs_run, plan_to_dict

log = logging.getLogger("locs")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_MAX_STEPS = 2
EXIT_STUCK = 3
EXIT_CONFIG = 64
STATUS_EXIT = {REACHED: EXIT_OK, MAX_STEPS: EXIT_MAX_STEPS, STUCK: EXIT_STUCK}


def _state_cols(n: int, prefix: str = "x", unit: str = "state") -> list:
    return [f"{prefix}{i + 1}[{unit}]" for i in range(n)]


def cmd_catalog() -> list:
    out = []
    for name, m in builtin_models().items():
        out.append({"name": name, "n_states": m.n_states, "n_inputs": m.n_inputs, "parameters": m.parameters})
    return out


def cmd_gramian(cfg: RunConfig, times: Sequence[float], out_dir: Path) -> Path:
    """W(t), its eigenvalues and g(t) for each grid time, linearized at x0."""
    times = [float(t) for t in times]
    for t in times:
        if not t > cfg.t0:
            raise InvalidHorizonError(f"grid time t={t:g} is not after t0={cfg.t0:g}")
    model = linearize(cfg.nominal(), cfg.x0, cfg.t0)
    n = model.n_states
    header = ["t[time]"]
    header += [f"W{i + 1}{j + 1}[state^2/energy]" for i in range(n) for j in range(n)]
    header += [f"d{i + 1}[state^2/energy]" for i in range(n)]
    header += _state_cols(n, "g")
    rows = []
    for t in times:
        fact = gramian(model, cfg.t0, t)
        g = zero_input_trajectory(model, cfg.x0, cfg.t0, t)
        rows.append([t, *fact.W.reshape(-1), *fact.eigenvalues, *g])
    out_dir.mkdir(parents=True, exist_ok=True)
    return write_table(out_dir / "gramian", header, rows, cfg.output_format)


_PLOT_ELLIPSOIDS = '''"""Plot ellipsoid boundaries and the zero-input flow written by `locs ellipsoid`."""
import glob, json, sys
import numpy as np
import matplotlib.pyplot as plt

d = sys.argv[1] if len(sys.argv) > 1 else "."
flow = np.loadtxt(f"{d}/flow.csv", delimiter=",", skiprows=1)
summary = json.load(open(f"{d}/ellipsoids.json"))
fig, ax = plt.subplots()
ax.plot(flow[:, 1], flow[:, 2], "k--", lw=1, label="g(t)")
for e in summary["ellipsoids"]:
    b = np.loadtxt(f"{d}/{e['file']}", delimiter=",", skiprows=1)
    ax.plot(b[:, 0], b[:, 1], label=f"t={e['t']:g}, E={e['E']:g}")
ax.set_xlabel("x1"); ax.set_ylabel("x2"); ax.set_aspect("equal"); ax.legend(fontsize=7)
fig.savefig(f"{d}/ellipsoids.png", dpi=150)
'''


def cmd_ellipsoid(
    cfg: RunConfig,
    times: Sequence[float],
    energies: Sequence[float],
    out_dir: Path,
    resolution: int = 200,
) -> dict:
    """Boundary polylines (N = 2) or axis endpoints per (t, E), plus the g(t) flow."""
    for E in energies:
        if not float(E) > 0:
            raise InvalidInputError(f"ellipsoid energy must be positive, got E={E:g}")
    model = linearize(cfg.nominal(), cfg.x0, cfg.t0)
    n = model.n_states
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for t in times:
        for E in energies:
            ell = energy_ellipsoid(model, cfg.x0, cfg.t0, float(t), float(E))
            stem = f"ellipsoid_t{float(t):g}_E{float(E):g}"
            if n == 2:
                path = write_table(out_dir / stem, _state_cols(2), ell.boundary(resolution), "csv")
            else:
                rows = []
                for i, (lo, hi) in enumerate(ell.axis_endpoints()):
                    rows.append([i + 1, -1, *lo])
                    rows.append([i + 1, 1, *hi])
                path = write_table(out_dir / stem, ["axis[-]", "end[-]", *_state_cols(n)], rows, "csv")
            entries.append(
                {
                    "t": float(t),
                    "E": float(E),
                    "file": path.name,
                    "center": ell.center.tolist(),
                    "semi_axes": ell.semi_axes.tolist(),
                    "axes": ell.axes.T.tolist(),
                }
            )
    t_end = max(float(t) for t in times)
    grid = np.linspace(cfg.t0, t_end, 201)
    flow = [[t, *zero_input_trajectory(model, cfg.x0, cfg.t0, t)] for t in grid]
    write_table(out_dir / "flow", ["t[time]", *_state_cols(n, "g")], flow, "csv")
    summary = {"x0": list(cfg.x0), "t0": cfg.t0, "ellipsoids": entries}
    write_json(out_dir / "ellipsoids.json", summary)
    if n == 2:
        (out_dir / "plot_ellipsoids.py").write_text(_PLOT_ELLIPSOIDS)
    return summary


def cmd_steer(cfg: RunConfig, xf: Sequence[float], tf: float, out_dir: Path) -> dict:
    """One minimum-energy move planned on the linearization, run on the true plant."""
    system = cfg.nominal()
    plant = cfg.plant() or system
    model = linearize(system, cfg.x0, cfg.t0)
    law = steer(model, cfg.x0, cfg.t0, xf, tf)
    traj = simulate(plant, cfg.x0, law, cfg.t0, tf, cfg.locs.rtol, cfg.locs.atol)
    n, m = model.n_states, model.n_inputs

    residuals = [0.0]
    for t, x, E in zip(traj.times[1:], traj.states[1:], traj.energy[1:]):
        fact = gramian(model, cfg.t0, float(t))
        if fact.condition_ratio < 1e-10:
            residuals.append(float("nan"))
            continue
        gap = x - zero_input_trajectory(model, cfg.x0, cfg.t0, float(t))
        residuals.append(float(fact.inverse_quadratic(gap)) - float(E))
    header = ["t[time]", *_state_cols(n), *_state_cols(m, "u", "input"), "E[energy]", "residual[energy]"]
    rows = [[t, *x, *u, E, r] for t, x, u, E, r in zip(traj.times, traj.states, traj.inputs, traj.energy, residuals)]
    out_dir.mkdir(parents=True, exist_ok=True)
    write_table(out_dir / "trajectory", header, rows, cfg.output_format)

    contained, worst = None, None
    if law.energy > 0:
        region = ValidRegion(model, cfg.locs.epsilon, system)
        ell = energy_ellipsoid(model, cfg.x0, cfg.t0, tf, law.energy)
        res = ellipsoid_within_region(ell, region, cfg.locs.n_probe, cfg.locs.rng_seed)
        contained, worst = res.contained, res.worst_residual
        if not res.contained:
            log.warning(
                "ellipsoid containment probe failed: worst linearization residual %.4g > epsilon %.4g at %s",
                res.worst_residual,
                cfg.locs.epsilon,
                np.array2string(res.worst_point, precision=4),
            )
    summary = {
        "law": law.to_dict(),
        "terminal_state": traj.final_state.tolist(),
        "terminal_error": float(np.linalg.norm(traj.final_state - np.asarray(xf, dtype=float))),
        "energy_closed_form": law.energy,
        "energy_quadrature": float(traj.energy[-1]),
        "containment_ok": contained,
        "worst_residual": worst,
        "epsilon": cfg.locs.epsilon,
    }
    write_json(out_dir / "steer.json", summary)
    return summary


_PLOT_LOCS = '''"""Plot the LOCS trajectory and waypoints written by `locs locs`."""
import sys
import numpy as np
import matplotlib.pyplot as plt

d = sys.argv[1] if len(sys.argv) > 1 else "."
tr = np.loadtxt(f"{d}/trajectory.csv", delimiter=",", skiprows=1)
wp = np.loadtxt(f"{d}/waypoints.csv", delimiter=",", skiprows=1, ndmin=2)
fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))
a.plot(tr[:, 1], tr[:, 2], "b--", label="simulated")
a.plot(wp[:, 4], wp[:, 5], "k.", label="waypoints")
a.set_xlabel("x1"); a.set_ylabel("x2"); a.legend()
b.semilogy(tr[:, 0], tr[:, -1]); b.set_xlabel("t"); b.set_ylabel("||x - goal||")
fig.savefig(f"{d}/locs.png", dpi=150)
'''


def cmd_locs(cfg: RunConfig, out_dir: Path, include_timings: bool = False):
    """Run the planner and write waypoints, dense trajectory, plan and record."""
    t_start = time.perf_counter()
    system = cfg.nominal()
    plan = locs_run(system, cfg.x0, cfg.t0, cfg.locs, cfg.plant())
    t_plan = time.perf_counter() - t_start
    n = system.n_states
    goal = cfg.locs.goal_point()

    out_dir.mkdir(parents=True, exist_ok=True)
    wp_header = ["step[-]", "t_p[time]", *_state_cols(n, "planned_x"), *_state_cols(n, "simulated_x"), "E[energy]", "fitness[-]"]
    wp_rows = [[0, plan.t0, *plan.x0, *plan.x0, 0.0, fitness(plan.x0, 0.0, goal, cfg.locs)]]
    for s in plan.steps:
        wp_rows.append([s.index + 1, s.t_end, *s.x_planned, *s.x_simulated, s.energy, s.fitness])
    write_table(out_dir / "waypoints", wp_header, wp_rows, cfg.output_format)

    traj = plan.trajectory()
    m = system.n_inputs
    err = np.linalg.norm(traj.states - goal, axis=1)
    inputs = traj.inputs if traj.inputs.shape[1] == m else np.zeros((len(traj), m))
    tr_header = ["t[time]", *_state_cols(n), *_state_cols(m, "u", "input"), "E[energy]", "error_norm[state]"]
    tr_rows = [[t, *x, *u, E, e] for t, x, u, E, e in zip(traj.times, traj.states, inputs, traj.energy, err)]
    write_table(out_dir / "trajectory", tr_header, tr_rows, cfg.output_format)

    write_json(out_dir / "plan.json", plan_to_dict(plan))
    record = RunRecord(
        config=cfg.to_dict(),
        summary={
            "status": plan.status,
            "n_steps": len(plan.steps),
            "final_state": plan.final_state.tolist(),
            "final_time": plan.final_time,
            "total_energy": plan.total_energy,
            "terminal_error": float(np.linalg.norm(plan.final_state - goal)),
        },
        diagnostics=[
            {
                "step": s.index,
                "worst_residual": s.worst_residual,
                "n_candidates": s.n_candidates,
                "fitness": s.fitness,
                "E_max_used": s.E_max_used,
            }
            for s in plan.steps
        ],
        timings={"plan_seconds": t_plan, "total_seconds": time.perf_counter() - t_start},
    )
    write_json(out_dir / "record.json", record.to_dict(include_timings))
    (out_dir / "config.json").write_text(dumps_config(cfg))
    if n == 2:
        (out_dir / "plot_locs.py").write_text(_PLOT_LOCS)
    return plan, record


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="locs", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--config", required=True, help="JSON run configuration")
        sp.add_argument("-o", "--out", help="output directory (default: config, then $LOCS_OUTPUT_DIR)")
        sp.add_argument("--seed", type=int, help="override locs.rng_seed")
        sp.add_argument("--rtol", type=float, help="override integrator relative tolerance")
        sp.add_argument("--atol", type=float, help="override integrator absolute tolerance")

    sub.add_parser("catalog", help="list built-in models")
    g = sub.add_parser("gramian", help="tabulate W(t), d_i(t), g(t)")
    common(g)
    g.add_argument("-t", "--times", type=_floats, required=True, help="grid times, e.g. '1,2,3'")
    e = sub.add_parser("ellipsoid", help="energy ellipsoid boundaries")
    common(e)
    e.add_argument("-t", "--times", type=_floats, required=True)
    e.add_argument("-E", "--energies", type=_floats, required=True)
    e.add_argument("--resolution", type=int, default=200)
    s = sub.add_parser("steer", help="single minimum-energy move")
    common(s)
    s.add_argument("--xf", type=_floats, required=True)
    s.add_argument("--tf", type=float, required=True)
    lp = sub.add_parser("locs", help="run the LOCS planner")
    common(lp)
    lp.add_argument("--max-steps", type=int, help="override locs.max_steps")
    lp.add_argument("--timings", action="store_true", help="store wall-clock timings in record.json")
    return p


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.rtol is not None:
        overrides["rtol"] = args.rtol
    if args.atol is not None:
        overrides["atol"] = args.atol
    if getattr(args, "max_steps", None) is not None:
        overrides["max_steps"] = args.max_steps
    if overrides:
        from dataclasses import replace

        try:
            cfg = cfg.replace(locs=replace(cfg.locs, **overrides))
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "catalog":
        print(json.dumps(cmd_catalog(), indent=2))
        return EXIT_OK
    try:
        cfg = _load(args)
        out = cfg.resolve_output_dir(args.out)
        if args.command == "gramian":
            path = cmd_gramian(cfg, args.times, out)
            print(path)
        elif args.command == "ellipsoid":
            summary = cmd_ellipsoid(cfg, args.times, args.energies, out, args.resolution)
            print(f"{len(summary['ellipsoids'])} ellipsoid(s) written to {out}")
        elif args.command == "steer":
            summary = cmd_steer(cfg, args.xf, args.tf, out)
            print(f"terminal error {summary['terminal_error']:.3e}, energy {summary['energy_closed_form']:.6g}")
        elif args.command == "locs":
            plan, record = cmd_locs(cfg, out, args.timings)
            print(f"status {plan.status} after {len(plan.steps)} step(s); terminal error {record.summary['terminal_error']:.4g}")
            if args.timings:
                print(f"planning took {record.timings['plan_seconds']:.2f} s", file=sys.stderr)
            return STATUS_EXIT[plan.status]
    except (ConfigError, InvalidInputError, InvalidHorizonError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UncontrollableHorizonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
