"""LOCS on the two-state nonlinear example, exact model and mismatched plant.

Runs the exact-model plan, the a = 3.5 plant with re-linearization at every
waypoint, and the exact-model plan replayed open loop on the a = 3.5 plant.

    python scripts/fig2_locs.py -o out/fig2 [--seeds 0 1 2] [--plot]
"""
import argparse
import dataclasses
import time
from pathlib import Path

import numpy as np

from locs.cli import cmd_locs
from locs.config import load_config
from locs.integrate import simulate_plan

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-o", "--out", default="out/fig2")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--plot", action="store_true", help="save fig2.png (needs matplotlib)")
    args = ap.parse_args()

    exact = load_config(ROOT / "configs" / "fig2a.json")
    mismatch = load_config(ROOT / "configs" / "fig2b.json")
    goal = exact.locs.goal_point()
    out = Path(args.out)
    print("seed  run        status     steps  final error  seconds")
    runs = {}
    for seed in args.seeds:
        for label, cfg in (("exact", exact), ("mismatch", mismatch)):
            cfg = cfg.replace(locs=dataclasses.replace(cfg.locs, rng_seed=seed))
            start = time.perf_counter()
            plan, record = cmd_locs(cfg, out / f"{label}_seed{seed}")
            runs[label, seed] = plan
            print(
                f"{seed:4d}  {label:9s}  {plan.status:9s}  {len(plan.steps):5d}  "
                f"{record.summary['terminal_error']:11.4f}  {time.perf_counter() - start:7.2f}"
            )
        replay = simulate_plan(mismatch.plant(), runs["exact", seed])
        err = np.linalg.norm(replay.final_state - goal)
        inside = mismatch.locs.target.contains(replay.final_state)
        print(f"{seed:4d}  open loop  {'reached' if inside else 'missed':9s}  {'-':>5s}  {err:11.4f}")
        runs["replay", seed] = replay

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        seed = args.seeds[0]
        fig, ax = plt.subplots(figsize=(6, 5))
        for label, style in (("exact", "b-"), ("mismatch", "r-")):
            tr = runs[label, seed].trajectory()
            ax.plot(tr.states[:, 0], tr.states[:, 1], style, label=f"LOCS, {label}")
            wp = np.array([w[2] for w in runs[label, seed].waypoints])
            ax.plot(wp[:, 0], wp[:, 1], style[0] + "o", ms=3)
        rp = runs["replay", seed]
        ax.plot(rp.states[:, 0], rp.states[:, 1], "k--", label="open-loop replay, a=3.5")
        circle = plt.Circle(tuple(goal), mismatch.locs.target.radius, fill=False, color="g")
        ax.add_patch(circle)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out / "fig2.png", dpi=130)
        print(f"wrote {out / 'fig2.png'}")


if __name__ == "__main__":
    main()
