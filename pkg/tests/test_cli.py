import json
import time

import numpy as np
import pytest

from edgechaos.cli import EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from edgechaos.operators import DenseLayer, Mlp, save_weights
from edgechaos.svgplot import read_csv_with_header
from edgechaos.training import write_idx


def run(tmp_path, *args):
    return main(["--out", str(tmp_path), *map(str, args)])


def header_config(path):
    comments, _ = read_csv_with_header(path)
    return json.loads(next(c for c in comments if c.startswith("config:"))[len("config:"):])


def numeric_rows(path):
    _, rows = read_csv_with_header(path)
    return [{k: v for k, v in r.items()} for r in rows]


def test_no_command_is_usage(capsys):
    assert main([]) == EXIT_USAGE


def test_unknown_flag_is_usage():
    assert main(["logistic", "--bogus"]) == EXIT_USAGE


def test_logistic_step_zero(tmp_path):
    assert run(tmp_path, "logistic", "--step", "0") == EXIT_USAGE


def test_logistic_bad_range(tmp_path):
    assert run(tmp_path, "logistic", "--r-from", "3.5", "--r-to", "3.0") == EXIT_USAGE
    assert run(tmp_path, "logistic", "--r-from", "3.5", "--r-to", "4.5") == EXIT_USAGE


def test_logistic_labels(tmp_path, capsys):
    code = run(tmp_path, "logistic", "--r-from", "2.5", "--r-to", "3.8", "--step", "0.65", "--depth", "1")
    assert code == EXIT_OK
    _, rows = read_csv_with_header(tmp_path / "logistic_attractors.csv")
    kinds = {float(r["r"]): (r["kind"], r["L"]) for r in rows}
    assert kinds[2.5] == ("FixedPoint", "1")
    assert kinds[3.2] == ("Cycle(2)", "2")
    assert kinds[3.8][0] == "Chaotic"
    for name in ("logistic_bifurcation.svg", "logistic_poincare.svg"):
        assert (tmp_path / name).read_text().startswith("<svg")


def test_header_config_reproduces(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "circular-law", "--N", "40", "--trials", "3", "--seed", "5") == EXIT_OK
    cfg = header_config(a / "circular_law.csv")
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps(cfg))
    assert main(["--config", str(cfg_file), "--out", str(b), "circular-law"]) == EXIT_OK
    assert numeric_rows(a / "circular_law.csv") == numeric_rows(b / "circular_law.csv")


def test_precedence(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"circular-law": {"N": 30, "trials": 2}, "seed": 9}))
    assert main(["--config", str(cfg_file), "--out", str(tmp_path), "circular-law", "--trials", "4"]) == EXIT_OK
    cfg = header_config(tmp_path / "circular_law.csv")
    assert (cfg["N"], cfg["trials"], cfg["seed"]) == (30, 4, 9)
    # untouched keys keep built-in defaults
    assert cfg["scale"] == 1.0


def test_config_unknown_key(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"Nn": 3}))
    assert main(["--config", str(cfg_file), "--out", str(tmp_path), "circular-law"]) == EXIT_USAGE
    cfg_file.write_text("{not json")
    assert main(["--config", str(cfg_file), "--out", str(tmp_path), "circular-law"]) == EXIT_USAGE


def test_outdir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("EDGECHAOS_OUTDIR", str(tmp_path / "env"))
    assert main(["circular-law", "--N", "5", "--trials", "1"]) == EXIT_OK
    assert (tmp_path / "env" / "circular_law.csv").exists()


def test_replot_is_pure(tmp_path):
    assert run(tmp_path, "circular-law", "--N", "20", "--trials", "2") == EXIT_OK
    svg = tmp_path / "circular_law_moduli.svg"
    first = svg.read_text()
    svg.unlink()
    assert main(["--replot", str(tmp_path / "circular_law_moduli.csv")]) == EXIT_OK
    assert svg.read_text() == first


def test_replot_without_header(tmp_path):
    p = tmp_path / "plain.csv"
    p.write_text("a,b\n1,2\n")
    assert main(["--replot", str(p)]) == EXIT_USAGE


def test_circular_law_n1(tmp_path, capsys):
    assert run(tmp_path, "circular-law", "--N", "1", "--trials", "1", "--seed", "2") == EXIT_OK
    out = capsys.readouterr().out
    assert "std" not in out
    _, rows = read_csv_with_header(tmp_path / "circular_law.csv")
    entry = np.random.default_rng(np.random.SeedSequence(2).spawn(1)[0]).normal()
    assert len(rows) == 1
    assert float(rows[0]["rho"]) == abs(entry)
    assert float(rows[0]["norm_normalized"]) == abs(entry)


def test_threads_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["edge-scan", "--family", "random-tanh", "--N", "20", "--from", "0.5", "--to", "1.5", "--step", "0.25",
            "--probes", "5", "--T", "100"]
    assert main(["--out", str(a), "--threads", "1", *args]) == EXIT_OK
    assert main(["--out", str(b), "--threads", "3", *args]) == EXIT_OK
    assert numeric_rows(a / "edge_scan_random-tanh.csv") == numeric_rows(b / "edge_scan_random-tanh.csv")


def test_mi_threads_and_footer(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["mi", "--r-from", "3.0", "--r-to", "3.6", "--step", "0.3", "--samples", "20000"]
    assert main(["--out", str(a), *args]) == EXIT_OK
    assert main(["--out", str(b), "--threads", "2", *args]) == EXIT_OK
    assert numeric_rows(a / "mi_curve.csv") == numeric_rows(b / "mi_curve.csv")
    assert (a / "mi_curve.csv").read_text().rstrip().splitlines()[-1].startswith("# argmax_r:")


def test_mi_small_samples(tmp_path):
    assert run(tmp_path, "mi", "--samples", "999") == EXIT_USAGE


def test_threads_zero(tmp_path):
    assert main(["--out", str(tmp_path), "--threads", "0", "circular-law", "--N", "3"]) == EXIT_USAGE


def test_missing_labels_exit3(tmp_path):
    d = tmp_path / "data"
    d.mkdir()
    imgs = np.zeros((2, 28, 28), dtype=np.uint8)
    write_idx(d / "train-images-idx3-ubyte", imgs)
    write_idx(d / "t10k-images-idx3-ubyte", imgs)
    write_idx(d / "t10k-labels-idx1-ubyte", np.zeros(2, dtype=np.uint8))
    assert run(tmp_path, "train", "--data-dir", d, "--epochs", "1") == EXIT_IO


def test_bad_idx_exit3(tmp_path):
    d = tmp_path / "data"
    d.mkdir()
    for name in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"):
        (d / name).write_bytes(b"\x00\x00")
    assert run(tmp_path, "train", "--data-dir", d, "--epochs", "1") == EXIT_IO


def test_train_needs_data(tmp_path):
    assert run(tmp_path, "train") == EXIT_USAGE


def test_train_synthetic_smoke(tmp_path):
    t0 = time.perf_counter()
    code = run(tmp_path, "train", "--synthetic", "--epochs", "3", "--export-weights", tmp_path / "w")
    assert code == EXIT_OK
    assert time.perf_counter() - t0 < 30
    _, rows = read_csv_with_header(tmp_path / "train_epochs.csv")
    assert [int(r["epoch"]) for r in rows] == [1, 2, 3]
    assert sorted(p.name for p in (tmp_path / "w").iterdir()) == ["epoch_001.json", "epoch_002.json", "epoch_003.json"]
    # exported operator feeds analyze
    assert run(tmp_path, "analyze", tmp_path / "w" / "epoch_003.json", "--probes", "5", "--T", "100") == EXIT_OK
    doc = json.loads((tmp_path / "analyze_report.json").read_text())
    assert doc["report"]["phase"] and doc["config"]["T"] == 100


def _write_op(path, w, b):
    save_weights(Mlp((DenseLayer(np.asarray(w, float), np.asarray(b, float), "relu"),)), path)


def test_analyze_zero_weights(tmp_path):
    wp = tmp_path / "zero.json"
    _write_op(wp, np.zeros((3, 3)), [0.2, 0.0, 0.7])
    assert run(tmp_path, "analyze", wp, "--probes", "4", "--T", "50") == EXIT_OK
    rep = json.loads((tmp_path / "analyze_report.json").read_text())["report"]
    assert rep["phase"] == "Order"


def test_analyze_scaled_down_is_order(tmp_path):
    wp = tmp_path / "w.json"
    w = np.random.default_rng(0).normal(0, 3.0 / np.sqrt(6), (6, 6))
    _write_op(wp, w, np.zeros(6))
    assert run(tmp_path, "analyze", wp, "--scale", "0.3", "--probes", "5", "--T", "100") == EXIT_OK
    rep = json.loads((tmp_path / "analyze_report.json").read_text())["report"]
    assert rep["phase"] == "Order"


def test_analyze_non_endomap(tmp_path, capsys):
    wp = tmp_path / "bad.json"
    doc = {"layers": [{"kind": "dense", "activation": "relu", "rows": 2, "cols": 3, "weights": [0.0] * 6, "bias": [0, 0]}]}
    wp.write_text(json.dumps(doc))
    assert run(tmp_path, "analyze", wp) == EXIT_IO
    err = capsys.readouterr().err
    assert "endomap" in err and "3 -> 2" in err


def test_analyze_missing_file(tmp_path):
    assert run(tmp_path, "analyze", tmp_path / "nope.json") == EXIT_IO


def test_scaled_weights_requires_file(tmp_path):
    assert run(tmp_path, "edge-scan", "--family", "scaled-weights") == EXIT_USAGE


def test_numeric_failure_exit4(tmp_path, capsys):
    assert run(tmp_path, "circular-law", "--N", "3", "--trials", "1", "--scale", "inf") == EXIT_NUMERIC
    assert "non-finite" in capsys.readouterr().err
