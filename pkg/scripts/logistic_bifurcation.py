"""Bifurcation data of the stacked logistic map plus the depth-1 edge scan.

    python scripts/logistic_bifurcation.py --out runs/logistic
"""
import argparse
from pathlib import Path

import numpy as np

from edgechaos.attractor import detect_attractor, iterate
from edgechaos.operators import LogisticStack
from edgechaos.stability import StabilityConfig, edge_crossing_scan
from edgechaos.svgplot import render


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/logistic")
    ap.add_argument("--depth", type=int, default=20)
    ap.add_argument("--step", type=float, default=0.005)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rs = np.round(np.arange(2.5, 4.0 + 1e-9, args.step), 4)
    xs, ys = [], []
    for r in rs:
        traj = iterate(LogisticStack(r, args.depth), [0.3], 2000, burn_in=1000)
        tail = traj.tail[:, 0]
        xs += [r] * tail.size
        ys += list(tail)
    (out / "bifurcation.svg").write_text(
        render([("", xs, ys)], title=f"depth-{args.depth} logistic operator", xlabel="r", ylabel="x", point_radius=0.4)
    )

    for r in (2.5, 3.2, 3.5, 3.8):
        rep = detect_attractor(iterate(LogisticStack(r, 1), [0.3], 2000, burn_in=1000))
        print(f"r={r}: layer map {rep.label}")

    probes = np.random.default_rng(0).uniform(0, 1, (100, 1))
    grid = np.round(np.arange(3.4, 3.7 + 1e-9, 0.005), 3)
    scan = edge_crossing_scan(lambda r: LogisticStack(r, 1), grid, probes, StabilityConfig())
    scan.write_csv(out / "edge_scan_depth1.csv")
    print("norm crossing:", scan.norm_crossing, "chaos onset:", scan.chaos_onset)


if __name__ == "__main__":
    main()
