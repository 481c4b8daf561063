"""Random tanh networks: norm crossing vs gain g, and the three Lyapunov estimators.

    python scripts/tanh_transition.py --N 500 --out runs/tanh
"""
import argparse
from pathlib import Path

import numpy as np

from edgechaos.operators import make_random_tanh, scale_weights
from edgechaos.stability import StabilityConfig, edge_crossing_scan
from edgechaos.svgplot import render


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="runs/tanh")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    base = make_random_tanh(args.N, 1.0, seed=args.seed)
    probes = np.random.default_rng(args.seed).uniform(-1, 1, (100, args.N))
    grid = np.round(np.arange(0.5, 2.0 + 1e-9, 0.05), 2)
    cfg = StabilityConfig(run_method2=args.N <= 200, max_period=256)
    scan = edge_crossing_scan(lambda g: scale_weights(base, g), grid, probes, cfg, threads=args.threads)
    scan.write_csv(out / f"tanh_N{args.N}.csv")

    series = [
        ("gamma1", grid, [r.gamma_method1 for r in scan.reports]),
        ("gamma3", grid, [r.gamma_method3 for r in scan.reports]),
    ]
    if cfg.run_method2:
        series.append(("gamma2", grid, [np.nan if r.gamma_method2 is None else r.gamma_method2 for r in scan.reports]))
    (out / f"tanh_N{args.N}.svg").write_text(render(series, title=f"random tanh, N={args.N}", xlabel="g",
                                                    ylabel="exponent", lines=True))
    for g, r in zip(grid, scan.reports):
        print(f"g={g:.2f}  norm {r.jac_norm_geomean:.4f}  at mean {r.jac_norm_at_mean:.4f}  {r.phase}")
    print("geomean crossing:", scan.norm_crossing)
    print("at-mean crossing:", scan.mean_norm_crossing)


if __name__ == "__main__":
    main()
