"""Command-line experiments: ``edgechaos <command> [flags]``.

Every command writes CSV files whose ``#`` header records the resolved configuration;
each SVG is regenerated from its CSV (``edgechaos --replot file.csv``).

Exit codes: 0 success, 2 usage error, 3 I/O or format error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attractor import detect_attractor, iterate, poincare_projection
from .errors import DimensionError, EdgeChaosError, IdxFormatError, NonFiniteError, NumericalError, WeightFormatError
from .information import BinSpec, logistic_mi_sweep
from .operators import LogisticStack, load_weights, make_random_tanh, save_weights, scale_weights
from .spectra import circular_law_experiment
from .stability import StabilityConfig, classify_phase, edge_crossing_scan
from .svgplot import plot_header, svg_from_csv

log = logging.getLogger("edgechaos")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
OUTDIR_ENV = "EDGECHAOS_OUTDIR"


class UsageError(EdgeChaosError):
    pass


# Built-in defaults per command; flag > config file > these.
DEFAULTS = {
    "logistic": {
        "r_from": 2.5, "r_to": 4.0, "step": 0.01, "depth": 20, "burn": 1000, "keep": 1000,
        "seed": 0, "tol": 1e-6, "max_period": 64, "select": [2.5, 3.2, 3.5, 3.8],
    },
    "edge-scan": {
        "family": "logistic", "from": None, "to": None, "step": None, "N": 500, "depth": 1,
        "weights": None, "probes": 100, "probe_file": None, "seed": 0, "T": 500, "window": None,
        "method2": True, "spectral": True, "max_period": None, "scale_biases": False,
    },
    "mi": {
        "r_from": 2.8, "r_to": 4.0, "step": 0.01, "samples": 400_000, "full": False, "k": 10,
        "depth": 20, "bins": 500, "seed": 0,
    },
    "circular-law": {"N": 500, "trials": 20, "seed": 0, "scale": 1.0, "eigenvalues": False},
    "train": {
        "data_dir": None, "synthetic": False, "arch": "784,100,784,10", "epochs": 20, "batch": 32,
        "seed": 0, "lr": 1e-3, "subset": None, "probes": 100, "export_weights": None,
        "synthetic_dim": 64, "synthetic_classes": 4, "synthetic_per_class": 250,
    },
    "analyze": {
        "weights": None, "probes": 100, "probe_file": None, "seed": 0, "T": 500, "burn": 1000, "scale": 1.0,
        "scale_biases": False, "max_period": 256,
    },
}

# grid defaults of edge-scan per family
FAMILY_GRIDS = {"logistic": (3.4, 3.7, 0.005), "random-tanh": (0.5, 2.0, 0.05), "scaled-weights": (0.1, 1.2, 0.05)}


def _d(cmd, key):
    return f"(default: {DEFAULTS[cmd][key]})"


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    p = argparse.ArgumentParser(prog="edgechaos", description="Edge-of-chaos analysis of iterated maps and networks.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--out", default=S, help=f"output directory (default: ${OUTDIR_ENV} or .)")
    p.add_argument("--threads", type=int, default=S, help="worker threads for grid scans (default: 1)")
    p.add_argument("--config", default=S, help="JSON config file with the same key names as the flags")
    p.add_argument("--replot", metavar="CSV", default=S, help="regenerate the SVG of a CSV written by this tool")
    p.add_argument("-v", "--verbose", action="store_true", default=S)
    sub = p.add_subparsers(dest="command")

    c = "logistic"
    q = sub.add_parser(c, help="bifurcation data and Poincare plots of the stacked logistic map")
    q.add_argument("--r-from", dest="r_from", type=float, default=S, help=_d(c, "r_from"))
    q.add_argument("--r-to", dest="r_to", type=float, default=S, help=_d(c, "r_to"))
    q.add_argument("--step", type=float, default=S, help=_d(c, "step"))
    q.add_argument("--depth", type=int, default=S, help=_d(c, "depth"))
    q.add_argument("--burn", type=int, default=S, help=_d(c, "burn"))
    q.add_argument("--keep", type=int, default=S, help=_d(c, "keep"))
    q.add_argument("--seed", type=int, default=S, help=_d(c, "seed"))
    q.add_argument("--tol", type=float, default=S, help=_d(c, "tol"))
    q.add_argument("--max-period", dest="max_period", type=int, default=S, help=_d(c, "max_period"))
    q.add_argument("--select", type=_floats, default=S, help="r values for the Poincare plot " + _d(c, "select"))

    c = "edge-scan"
    q = sub.add_parser(c, help="stability reports over a parameter grid")
    q.add_argument("--family", choices=sorted(FAMILY_GRIDS), default=S, help=_d(c, "family"))
    q.add_argument("--from", dest="from", type=float, default=S, help="grid start (family default)")
    q.add_argument("--to", type=float, default=S, help="grid end (family default)")
    q.add_argument("--step", type=float, default=S, help="grid step (family default)")
    q.add_argument("--N", type=int, default=S, help="random-tanh dimension " + _d(c, "N"))
    q.add_argument("--depth", type=int, default=S, help="logistic depth " + _d(c, "depth"))
    q.add_argument("--weights", default=S, help="weight JSON for scaled-weights")
    q.add_argument("--probes", type=int, default=S, help=_d(c, "probes"))
    q.add_argument("--probe-file", dest="probe_file", default=S, help=".npy or CSV of probe vectors")
    q.add_argument("--seed", type=int, default=S, help=_d(c, "seed"))
    q.add_argument("--T", type=int, default=S, help=_d(c, "T"))
    q.add_argument("--window", type=int, default=S, help="final iterates in the norm geomean (default: T/2)")
    q.add_argument("--no-method2", dest="method2", action="store_false", default=S, help="skip the Jacobian-product estimator")
    q.add_argument("--no-spectral", dest="spectral", action="store_false", default=S, help="skip the spectral radius")
    q.add_argument("--max-period", dest="max_period", type=int, default=S,
                   help="longest cycle searched (default: 64 for logistic, 256 otherwise)")
    q.add_argument("--scale-biases", dest="scale_biases", action="store_true", default=S,
                   help="scale biases together with weights (default: off)")

    c = "mi"
    q = sub.add_parser(c, help="mutual information curve of the stacked logistic map")
    q.add_argument("--r-from", dest="r_from", type=float, default=S, help=_d(c, "r_from"))
    q.add_argument("--r-to", dest="r_to", type=float, default=S, help=_d(c, "r_to"))
    q.add_argument("--step", type=float, default=S, help=_d(c, "step"))
    q.add_argument("--samples", type=int, default=S, help=_d(c, "samples"))
    q.add_argument("--full", action="store_true", default=S, help="use 4000000 samples")
    q.add_argument("--k", type=int, default=S, help=_d(c, "k"))
    q.add_argument("--depth", type=int, default=S, help=_d(c, "depth"))
    q.add_argument("--bins", type=int, default=S, help=_d(c, "bins"))
    q.add_argument("--seed", type=int, default=S, help=_d(c, "seed"))

    c = "circular-law"
    q = sub.add_parser(c, help="spectral radius of i.i.d. Gaussian matrices")
    q.add_argument("--N", type=int, default=S, help=_d(c, "N"))
    q.add_argument("--trials", type=int, default=S, help=_d(c, "trials"))
    q.add_argument("--seed", type=int, default=S, help=_d(c, "seed"))
    q.add_argument("--scale", type=float, default=S, help=_d(c, "scale"))
    q.add_argument("--eigenvalues", action="store_true", default=S, help="also write the complex eigenvalues of trial 0")

    c = "train"
    q = sub.add_parser(c, help="train an MLP and track the stability of its endomap per epoch")
    q.add_argument("--data-dir", dest="data_dir", default=S, help="directory with the four IDX files")
    q.add_argument("--synthetic", action="store_true", default=S, help="use Gaussian blobs instead of IDX data")
    q.add_argument("--arch", default=S, help=_d(c, "arch"))
    q.add_argument("--epochs", type=int, default=S, help=_d(c, "epochs"))
    q.add_argument("--batch", type=int, default=S, help=_d(c, "batch"))
    q.add_argument("--seed", type=int, default=S, help=_d(c, "seed"))
    q.add_argument("--lr", type=float, default=S, help=_d(c, "lr"))
    q.add_argument("--subset", type=int, default=S, help="train on the first k samples")
    q.add_argument("--probes", type=int, default=S, help=_d(c, "probes"))
    q.add_argument("--export-weights", dest="export_weights", default=S, help="directory for per-epoch operator JSON")
    q.add_argument("--synthetic-dim", dest="synthetic_dim", type=int, default=S, help=_d(c, "synthetic_dim"))
    q.add_argument("--synthetic-classes", dest="synthetic_classes", type=int, default=S, help=_d(c, "synthetic_classes"))
    q.add_argument("--synthetic-per-class", dest="synthetic_per_class", type=int, default=S, help=_d(c, "synthetic_per_class"))

    c = "analyze"
    q = sub.add_parser(c, help="full stability report of an operator weight file")
    q.add_argument("weights", nargs="?", default=S, help="weight JSON")
    q.add_argument("--probes", type=int, default=S, help=_d(c, "probes"))
    q.add_argument("--probe-file", dest="probe_file", default=S, help=".npy or CSV of probe vectors")
    q.add_argument("--seed", type=int, default=S, help=_d(c, "seed"))
    q.add_argument("--T", type=int, default=S, help=_d(c, "T"))
    q.add_argument("--burn", type=int, default=S, help="burn-in for the Poincare series " + _d(c, "burn"))
    q.add_argument("--scale", type=float, default=S, help="multiply all weights by this fraction " + _d(c, "scale"))
    q.add_argument("--scale-biases", dest="scale_biases", action="store_true", default=S,
                   help="scale biases together with weights (default: off)")
    q.add_argument("--max-period", dest="max_period", type=int, default=S, help=_d(c, "max_period"))
    return p


def resolve(ns: argparse.Namespace) -> dict:
    """Merge built-in defaults, the JSON config file and explicit flags (in that order)."""
    given = vars(ns).copy()
    cmd = given.pop("command", None)
    file_cfg = {}
    if "config" in given:
        try:
            file_cfg = json.loads(Path(given["config"]).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{given['config']}: invalid JSON ({exc})") from exc
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
    globals_ = {"out": os.environ.get(OUTDIR_ENV, "."), "threads": 1, "verbose": False}
    known = set(globals_) | set(DEFAULTS.get(cmd, {}))
    merged = dict(globals_)
    merged.update(DEFAULTS.get(cmd, {}))
    section = file_cfg.get(cmd, {}) if cmd else {}
    for key, val in file_cfg.items():
        if key in DEFAULTS:
            continue
        if key == "command":
            # present in configs copied from an output header
            if val != cmd:
                raise UsageError(f"config is for command {val!r}, not {cmd!r}")
            continue
        if key not in known:
            raise UsageError(f"unknown config key {key!r} for command {cmd!r}")
        merged[key] = val
    for key, val in section.items():
        if key not in known:
            raise UsageError(f"unknown config key {key!r} in section {cmd!r}")
        merged[key] = val
    for key, val in given.items():
        if key != "config":
            merged[key] = val
    merged["command"] = cmd
    return merged


# -- output helpers ---------------------------------------------------------------


def _header(cfg, extra=()):
    conf = {k: v for k, v in cfg.items() if k != "verbose"}
    return [f"edgechaos {__version__} {cfg['command']}", "config: " + json.dumps(conf, sort_keys=True), *extra]


def _write_rows(path, columns, rows, header_lines):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        w.writerows(rows)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _plot(csv_path):
    svg = Path(csv_path).with_suffix(".svg")
    svg.write_text(svg_from_csv(csv_path))
    return svg


def _grid(a, b, step):
    if step is None or step <= 0:
        raise UsageError("step must be positive")
    if not b > a:
        raise UsageError(f"empty range: from {a} to {b}")
    n = int(np.floor((b - a) / step + 1e-9))
    return np.round(a + step * np.arange(n + 1), 10)


def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_probes(path, dim):
    path = Path(path)
    if path.suffix == ".npy":
        x = np.load(path)
    else:
        x = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[-1] != dim:
        raise WeightFormatError(f"{path}: probe vectors have dimension {x.shape[-1]}, operator has {dim}")
    return x


# -- commands ---------------------------------------------------------------------


def cmd_logistic(cfg) -> int:
    if not (0 < cfg["r_from"] < cfg["r_to"] <= 4):
        raise UsageError("need 0 < r_from < r_to <= 4")
    if cfg["keep"] < 2 * cfg["max_period"]:
        raise UsageError(f"keep must be at least 2*max_period = {2 * cfg['max_period']}")
    grid = _grid(cfg["r_from"], cfg["r_to"], cfg["step"])
    select = [float(r) for r in cfg["select"]]
    grid = np.unique(np.concatenate([grid, [r for r in select if cfg["r_from"] <= r <= cfg["r_to"]]]))
    out = _outdir(cfg)
    x0 = float(np.random.default_rng(cfg["seed"]).uniform(0.0, 1.0))
    steps = cfg["burn"] + cfg["keep"]
    points, summary, poincare = [], [], []
    for r in grid:
        op = LogisticStack(float(r), cfg["depth"])
        traj = iterate(op, [x0], steps, burn_in=cfg["burn"])
        rep = detect_attractor(traj, cfg["tol"], cfg["max_period"])
        # the single layer map g run on from the same tail start
        start = traj.tail[0] if traj.tail.size else traj.points[-1]
        g_traj = iterate(LogisticStack(float(r), 1), start, max(2 * cfg["max_period"], 256), burn_in=0)
        g_rep = detect_attractor(g_traj, cfg["tol"], cfg["max_period"])
        summary.append([_fmt(float(r)), rep.label, _fmt(rep.period), _fmt(rep.residual), g_rep.label, _fmt(g_rep.period)])
        for x in traj.tail[:, 0]:
            points.append([_fmt(float(r)), _fmt(float(x))])
        if any(abs(r - s) < 1e-9 for s in select):
            for a, b in poincare_projection(traj, direction=[1.0]).pairs:
                poincare.append([_fmt(float(r)), _fmt(float(a)), _fmt(float(b))])
    head = _header(cfg)
    _write_rows(out / "logistic_attractors.csv", ["r", "kind", "L", "residual", "kind_layer", "L_layer"], summary, head)
    bif = out / "logistic_bifurcation.csv"
    _write_rows(bif, ["r", "x"], points, head + [plot_header("scatter", "r", "x", title="attractor points vs r")])
    pc = out / "logistic_poincare.csv"
    _write_rows(pc, ["r", "xbar_t", "xbar_t1"], poincare,
                head + [plot_header("scatter", "xbar_t", "xbar_t1", group="r", title="Poincare plot")])
    _plot(bif)
    _plot(pc)
    for row in summary:
        if any(abs(float(row[0]) - s) < 1e-9 for s in select):
            print(f"r={float(row[0]):g}: operator {row[1]}, layer map {row[4]}")
    return EXIT_OK


def _stability_config(cfg):
    max_period = cfg["max_period"] or (64 if cfg["family"] == "logistic" else 256)
    return StabilityConfig(
        T=cfg["T"], window=cfg["window"], run_method2=cfg["method2"], spectral=cfg["spectral"], seed=cfg["seed"],
        max_period=max_period,
    )


def cmd_edge_scan(cfg) -> int:
    fam = cfg["family"]
    if fam not in FAMILY_GRIDS:
        raise UsageError(f"unknown family {fam!r}")
    a, b, s = FAMILY_GRIDS[fam]
    a = a if cfg["from"] is None else cfg["from"]
    b = b if cfg["to"] is None else cfg["to"]
    s = s if cfg["step"] is None else cfg["step"]
    grid = _grid(a, b, s)
    rng = np.random.default_rng(cfg["seed"])
    if fam == "logistic":
        if not 0 < grid[0] or grid[-1] > 4:
            raise UsageError("logistic r must lie in (0, 4]")
        family = lambda r: LogisticStack(float(r), cfg["depth"])  # noqa: E731
        dim = 1
        default_probes = lambda: rng.uniform(0.0, 1.0, (cfg["probes"], 1))  # noqa: E731
    elif fam == "random-tanh":
        base = make_random_tanh(cfg["N"], 1.0, seed=cfg["seed"])
        family = lambda g: scale_weights(base, float(g), cfg["scale_biases"])  # noqa: E731
        dim = cfg["N"]
        default_probes = lambda: rng.uniform(-1.0, 1.0, (cfg["probes"], dim))  # noqa: E731
    else:
        if not cfg["weights"]:
            raise UsageError("--weights is required for the scaled-weights family")
        base = load_weights(cfg["weights"])
        family = lambda c: scale_weights(base, float(c), cfg["scale_biases"])  # noqa: E731
        dim = base.dim
        default_probes = lambda: rng.uniform(0.0, 1.0, (cfg["probes"], dim))  # noqa: E731
    probes = _load_probes(cfg["probe_file"], dim) if cfg["probe_file"] else default_probes()
    res = edge_crossing_scan(family, grid, probes, _stability_config(cfg), threads=cfg["threads"])
    out = _outdir(cfg)
    path = out / f"edge_scan_{fam}.csv"
    cross, mean_cross, onset = res.norm_crossing, res.mean_norm_crossing, res.chaos_onset
    res.write_csv(
        path,
        _header(cfg, [
            f"norm_crossing: {json.dumps(cross)}",
            f"mean_norm_crossing: {json.dumps(mean_cross)}",
            f"chaos_onset: {json.dumps(onset)}",
            plot_header("line", "param", ["jac_norm_geomean", "jac_norm_at_mean"], title=f"{fam} normalized Jacobian norm"),
        ]),
    )
    _plot(path)
    show = lambda c: "none" if c is None else f"[{c[0]:g}, {c[1]:g}] (interpolated {c[2]:.4g})"  # noqa: E731
    print(f"norm geomean crosses 1 in {show(cross)}")
    print(f"norm at attractor mean crosses 1 in {show(mean_cross)}")
    print(f"chaos onset: {'none' if onset is None else f'{onset:g}'}")
    return EXIT_OK


def cmd_mi(cfg) -> int:
    samples = 4_000_000 if cfg["full"] else cfg["samples"]
    if samples < 10_000:
        raise UsageError("samples must be at least 10000")
    if cfg["k"] < 1:
        raise UsageError("k must be >= 1")
    grid = _grid(cfg["r_from"], cfg["r_to"], cfg["step"])
    if grid[0] <= 0 or grid[-1] > 4:
        raise UsageError("r must lie in (0, 4]")
    curve = logistic_mi_sweep(grid, k=cfg["k"], samples=samples, seed=cfg["seed"], depth=cfg["depth"],
                              spec=BinSpec(bins=cfg["bins"]), threads=cfg["threads"])
    path = _outdir(cfg) / "mi_curve.csv"
    curve.write_csv(
        path,
        _header(cfg, [plot_header("line", "r", ["I_x0_xk_bits", "I_x0_x1_bits"], title="mutual information (bits)")]),
    )
    with open(path, "a") as fh:
        fh.write(f"# argmax_r: {curve.argmax_r!r}\n")
    _plot(path)
    print(f"argmax of I(x0, x{cfg['k']}): r = {curve.argmax_r:g} ({float(np.max(curve.mi_x0_xk)):.4f} bits)")
    if curve.dropped.sum():
        print(f"dropped out-of-range samples: {int(curve.dropped.sum())}")
    return EXIT_OK


def cmd_circular_law(cfg) -> int:
    if cfg["N"] < 1 or cfg["trials"] < 1:
        raise UsageError("N and trials must be positive")
    res = circular_law_experiment(cfg["N"], cfg["trials"], seed=cfg["seed"], scale=cfg["scale"])
    out = _outdir(cfg)
    head = _header(cfg, [f"mean_rho: {res.mean_rho!r}", f"cdf_deviation: {res.cdf_deviation!r}"])
    rows = [[cfg["N"], t, _fmt(r), _fmt(n)] for t, (r, n) in enumerate(zip(res.rho, res.norm_normalized))]
    _write_rows(out / "circular_law.csv", ["N", "trial", "rho", "norm_normalized"], rows, head)
    moduli = np.sort(np.concatenate(res.moduli) / cfg["scale"])
    ecdf = np.arange(1, moduli.size + 1) / moduli.size
    mod_path = out / "circular_law_moduli.csv"
    _write_rows(mod_path, ["modulus", "ecdf", "disk_cdf"],
                [[_fmt(m), _fmt(e), _fmt(min(m, 1.0) ** 2)] for m, e in zip(moduli, ecdf)],
                head + [plot_header("line", "modulus", ["ecdf", "disk_cdf"], title="modulus CDF (scaled) vs s^2")])
    _plot(mod_path)
    if cfg["eigenvalues"]:
        eig = out / "circular_law_eigenvalues.csv"
        _write_rows(eig, ["re", "im"], [[_fmt(z.real), _fmt(z.imag)] for z in res.eigenvalues[0]],
                    head + [plot_header("scatter", "re", "im", title="eigenvalues, trial 0")])
        _plot(eig)
    msg = f"mean rho = {res.mean_rho:.4f}"
    if cfg["trials"] > 1:
        msg += f", std = {res.std_rho:.4f}"
    print(msg)
    print(f"modulus CDF deviation from s^2: {res.cdf_deviation:.4f}")
    return EXIT_OK


def cmd_train(cfg) -> int:
    from .training import (
        Dataset, TrainConfig, AdamHyper, epoch_phase_trace, load_fashion_mnist, synth_blobs, train, write_epoch_csv,
    )

    try:
        arch = tuple(int(v) for v in str(cfg["arch"]).split(","))
    except ValueError as exc:
        raise UsageError(f"bad --arch {cfg['arch']!r}") from exc
    if cfg["synthetic"]:
        dim, k, per = cfg["synthetic_dim"], cfg["synthetic_classes"], cfg["synthetic_per_class"]
        data = synth_blobs(k, dim, per, seed=cfg["seed"])
        n_test = max(1, len(data) // 5)
        test = Dataset(data.x[:n_test], data.y[:n_test], k)
        tr = Dataset(data.x[n_test:], data.y[n_test:], k)
        if cfg["arch"] == DEFAULTS["train"]["arch"]:
            # the image-sized default does not fit blob data
            arch = (dim, max(2, dim // 8), dim, k)
    else:
        if not cfg["data_dir"]:
            raise UsageError("give --data-dir or --synthetic")
        tr, test = load_fashion_mnist(cfg["data_dir"])
    tc = TrainConfig(arch=arch, epochs=cfg["epochs"], batch=cfg["batch"], seed=cfg["seed"],
                     adam=AdamHyper(lr=cfg["lr"]), probes=cfg["probes"], subset=cfg["subset"])
    export = Path(cfg["export_weights"]) if cfg["export_weights"] else None
    if export:
        export.mkdir(parents=True, exist_ok=True)

    def on_epoch(rep, op):
        s = rep.stability
        print(f"epoch {rep.epoch:3d}  train {rep.train_accuracy:.4f}  test {rep.test_accuracy:.4f}  "
              f"loss {rep.test_loss:.4f}  norm {s.jac_norm_geomean:.4f}  {s.phase}", flush=True)
        if export:
            save_weights(op, export / f"epoch_{rep.epoch:03d}.json")

    result = train(tc, tr, test, on_epoch=on_epoch)
    trace = epoch_phase_trace(result.reports) if len(result.reports) > 1 else None
    path = _outdir(cfg) / "train_epochs.csv"
    extra = [f"arch: {','.join(map(str, arch))}", f"best_epoch: {result.best_epoch}"]
    if trace:
        extra.append(f"phases: {trace.compact()}")
    extra.append(plot_header("line", "epoch", ["jac_norm_geomean", "test_acc"], title="per-epoch norm and test accuracy"))
    write_epoch_csv(result.reports, path, _header(cfg, extra))
    _plot(path)
    print(f"best epoch (lowest test loss): {result.best_epoch}")
    if trace:
        print(f"phases: {trace.compact()}")
    return EXIT_OK


def cmd_analyze(cfg) -> int:
    if not cfg["weights"]:
        raise UsageError("a weight file is required")
    op = load_weights(cfg["weights"])
    if cfg["scale"] != 1.0:
        op = scale_weights(op, cfg["scale"], cfg["scale_biases"])
    rng = np.random.default_rng(cfg["seed"])
    probes = _load_probes(cfg["probe_file"], op.dim) if cfg["probe_file"] else rng.uniform(0.0, 1.0, (cfg["probes"], op.dim))
    report = classify_phase(op, probes, StabilityConfig(T=cfg["T"], seed=cfg["seed"], max_period=cfg["max_period"]))
    out = _outdir(cfg)
    doc = {"config": {k: v for k, v in cfg.items() if k != "verbose"}, "report": report.to_dict()}
    (out / "analyze_report.json").write_text(json.dumps(doc, indent=2, default=float))
    traj = iterate(op, probes[0], cfg["burn"] + 500, burn_in=cfg["burn"])
    if traj.tail.shape[0] > 1:
        series = poincare_projection(traj, seed=cfg["seed"])
        pc = out / "analyze_poincare.csv"
        series.write_csv(pc, _header(cfg, [plot_header("scatter", "xbar_t", "xbar_t1", title="Poincare plot")]))
        _plot(pc)
    print(f"phase: {report.phase}")
    print(f"normalized Jacobian norm (geomean): {report.jac_norm_geomean:.4f}")
    print(f"gamma1 {report.gamma_method1:.4f}  gamma3 {report.gamma_method3:.4f}"
          + (f"  gamma2 {report.gamma_method2:.4f}" if report.gamma_method2 is not None else ""))
    return EXIT_OK


COMMANDS = {
    "logistic": cmd_logistic,
    "edge-scan": cmd_edge_scan,
    "mi": cmd_mi,
    "circular-law": cmd_circular_law,
    "train": cmd_train,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = resolve(ns)
        logging.basicConfig(level=logging.INFO if cfg["verbose"] else logging.WARNING, format="%(name)s: %(message)s")
        if "replot" in cfg:
            print(f"wrote {_plot(cfg['replot'])}")
            return EXIT_OK
        if cfg["command"] is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        if cfg["threads"] < 1:
            raise UsageError("threads must be >= 1")
        return COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        print(f"edgechaos: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, NonFiniteError, FloatingPointError) as exc:
        print(f"edgechaos: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, IdxFormatError, WeightFormatError, DimensionError) as exc:
        print(f"edgechaos: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"edgechaos: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
