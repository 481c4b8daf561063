"""Train the 784-100-784-10 MLP, track its endomap per epoch, then sweep weight scale c.

    python scripts/mlp_edge_of_chaos.py --data-dir ~/fashion-mnist --seeds 0 1 2
    python scripts/mlp_edge_of_chaos.py --synthetic       # blob data, seconds
"""
import argparse
from pathlib import Path

from edgechaos.stability import phase_ordering
from edgechaos.training import (
    Dataset,
    TrainConfig,
    epoch_phase_trace,
    load_fashion_mnist,
    synth_blobs,
    train,
    weight_scaling_sweep,
    write_epoch_csv,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data-dir")
    ap.add_argument("--synthetic", action="store_true")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--subset", type=int)
    ap.add_argument("--out", default="runs/mlp")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.synthetic:
        d = synth_blobs(4, 64, 250, seed=0)
        te, tr = Dataset(d.x[:200], d.y[:200], 4), Dataset(d.x[200:], d.y[200:], 4)
        arch = (64, 8, 64, 4)
    else:
        tr, te = load_fashion_mnist(args.data_dir)
        arch = (784, 100, 784, 10)

    for seed in args.seeds:
        res = train(TrainConfig(arch=arch, epochs=args.epochs, seed=seed, subset=args.subset), tr, te)
        write_epoch_csv(res.reports, out / f"epochs_seed{seed}.csv")
        trace = epoch_phase_trace(res.reports)
        best = res.best_report
        print(f"seed {seed}: best epoch {best.epoch}, test acc {best.test_accuracy:.4f}, "
              f"norm {best.stability.jac_norm_geomean:.3f}")
        print(f"  epochs: {trace.compact()}")
        scan = weight_scaling_sweep(res.model, probes=te.x[:100])
        scan.write_csv(out / f"scaling_seed{seed}.csv")
        print(f"  scaling: {phase_ordering(scan.params, scan.reports)}")


if __name__ == "__main__":
    main()
