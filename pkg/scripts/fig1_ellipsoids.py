"""Energy ellipsoids of the rotating two-state example.

Panel (a): fixed energy, horizons 0.5..3.0; the centers ride the free flow.
Panel (b): fixed horizon, energies 1, 2, 4; same shape, widths grow like sqrt(E).

    python scripts/fig1_ellipsoids.py -o out/fig1 [--plot]
"""
import argparse
from pathlib import Path

import numpy as np

from locs.cli import cmd_ellipsoid
from locs.config import load_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-c", "--config", default=str(ROOT / "configs" / "fig1.json"))
    ap.add_argument("-o", "--out", default="out/fig1")
    ap.add_argument("--plot", action="store_true", help="save fig1.png (needs matplotlib)")
    args = ap.parse_args()

    cfg = load_config(args.config)
    out = Path(args.out)
    times = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
    a = cmd_ellipsoid(cfg, times, [1.0], out / "a")
    b = cmd_ellipsoid(cfg, [1.5], [1.0, 2.0, 4.0], out / "b")

    print("panel (a): t, center, semi-axes")
    for e in a["ellipsoids"]:
        print(f"  {e['t']:4.1f}  {np.round(e['center'], 4)}  {np.round(e['semi_axes'], 4)}")
    print("panel (b): E, semi-axes / sqrt(E)")
    for e in b["ellipsoids"]:
        print(f"  {e['E']:4.1f}  {np.round(np.array(e['semi_axes']) / np.sqrt(e['E']), 6)}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, 2, figsize=(10, 4.5))
        for ax, run, sub in ((axes[0], a, "a"), (axes[1], b, "b")):
            for e in run["ellipsoids"]:
                pts = np.loadtxt(out / sub / e["file"], delimiter=",", skiprows=1)
                ax.plot(pts[:, 0], pts[:, 1], label=f"t={e['t']:g}, E={e['E']:g}")
                ax.plot(*e["center"], "k.", ms=4)
            flow = np.loadtxt(out / sub / "flow.csv", delimiter=",", skiprows=1)
            ax.plot(flow[:, 1], flow[:, 2], "k--", lw=0.8, label="g(t)")
            ax.set_aspect("equal")
            ax.set_xlabel("x1")
            ax.set_ylabel("x2")
            ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out / "fig1.png", dpi=130)
        print(f"wrote {out / 'fig1.png'}")


if __name__ == "__main__":
    main()
