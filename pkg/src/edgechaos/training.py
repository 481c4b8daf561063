"""Dense MLP classifiers trained from scratch, with the stability of the embedded endomap
tracked across epochs.

The model is a chain of :class:`DenseLayer` objects ending in a linear classifier head
(softmax is applied in the loss). Layers ``0 .. operator_cut`` map the input space back
onto itself and form the dynamical operator; the head never enters it.
"""
from __future__ import annotations

import csv
import gzip
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BadMagicError, CountMismatchError, DimensionError, InsufficientDataError, TruncatedFileError
from .operators import DenseLayer, Mlp, _activate, _activation_grad, scale_weights
from .stability import (
    ScanResult,
    StabilityConfig,
    StabilityReport,
    classify_phase,
    edge_crossing_scan,
    first_crossing,
)

log = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


# -- data ---------------------------------------------------------------------


@dataclass
class Dataset:
    x: np.ndarray  # (n, dim) float64
    y: np.ndarray  # (n,) int64 class indices
    num_classes: int

    def __post_init__(self):
        if self.x.ndim != 2 or self.y.shape != (self.x.shape[0],):
            raise DimensionError(f"inconsistent dataset shapes {self.x.shape}, {self.y.shape}")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def head(self, k: Optional[int]) -> "Dataset":
        return self if k is None else Dataset(self.x[:k], self.y[:k], self.num_classes)


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def read_idx(path, expected_magic: Optional[int] = None) -> np.ndarray:
    """Parse an unsigned-byte IDX file into an array of its declared shape."""
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes, no IDX header")
    magic = struct.unpack(">I", raw[:4])[0]
    if (magic >> 16) != 0 or ((magic >> 8) & 0xFF) != 0x08:
        raise BadMagicError(f"{path}: magic 0x{magic:08x} is not an unsigned-byte IDX header")
    if expected_magic is not None and magic != expected_magic:
        raise BadMagicError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    head = 4 + 4 * ndim
    if len(raw) < head:
        raise TruncatedFileError(f"{path}: header declares {ndim} dims but the file ends early")
    dims = struct.unpack(f">{ndim}I", raw[4:head])
    need = int(np.prod(dims, dtype=np.int64))
    if len(raw) - head < need:
        raise TruncatedFileError(f"{path}: {len(raw) - head} data bytes, header declares {need}")
    return np.frombuffer(raw, dtype=np.uint8, count=need, offset=head).reshape(dims)


def load_idx(images_path, labels_path, num_classes: int = 10) -> Dataset:
    """Images scaled to [0, 1] and flattened row-major; labels as class indices."""
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images_path} has {images.shape[0]} images but {labels_path} has {labels.shape[0]} labels"
        )
    x = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    y = labels.astype(np.int64)
    if y.size and y.max() >= num_classes:
        raise CountMismatchError(f"{labels_path}: label {y.max()} outside 0..{num_classes - 1}")
    return Dataset(x, y, num_classes)


def _find(data_dir: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        p = data_dir / name
        if p.exists():
            return p
    raise FileNotFoundError(f"{data_dir}: neither {stem} nor {stem}.gz found")


def load_fashion_mnist(data_dir) -> tuple[Dataset, Dataset]:
    """Train and test splits from the four standard IDX files (optionally gzipped)."""
    d = Path(data_dir)
    train = load_idx(_find(d, "train-images-idx3-ubyte"), _find(d, "train-labels-idx1-ubyte"))
    test = load_idx(_find(d, "t10k-images-idx3-ubyte"), _find(d, "t10k-labels-idx1-ubyte"))
    return train, test


def write_idx(path, array) -> None:
    """Write an unsigned-byte IDX file (used for fixtures and exports)."""
    a = np.asarray(array, dtype=np.uint8)
    header = struct.pack(">I", 0x0800 | a.ndim) + struct.pack(f">{a.ndim}I", *a.shape)
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wb") as fh:
        fh.write(header + a.tobytes())


def synth_blobs(classes: int, dim: int, per_class: int, seed: int = 0, spread: float = 0.05) -> Dataset:
    """Gaussian class blobs around centers in the unit cube.

    Centers are at least 0.3 apart, so the default spread is linearly separable.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if classes < 1 or per_class < 1:
        raise ValueError("classes and per_class must be positive")
    rng = np.random.default_rng(seed)
    centers = np.empty((classes, dim))
    placed = 0
    for _ in range(10000 * classes):
        c = rng.uniform(0.0, 1.0, dim)
        if placed == 0 or np.min(np.linalg.norm(centers[:placed] - c, axis=1)) >= 0.3:
            centers[placed] = c
            placed += 1
            if placed == classes:
                break
    if placed < classes:
        raise ValueError(f"cannot place {classes} separated centers in dimension {dim}")
    y = np.repeat(np.arange(classes), per_class)
    x = centers[y] + spread * rng.normal(size=(y.size, dim))
    perm = rng.permutation(y.size)
    return Dataset(x[perm], y[perm], classes)


# -- model --------------------------------------------------------------------


@dataclass
class MlpModel:
    """Dense classifier; ``layers[-1]`` is the linear head, ``layers[:operator_cut + 1]`` the endomap."""

    layers: list
    operator_cut: int

    def __post_init__(self):
        layers = self.layers
        if len(layers) < 2:
            raise DimensionError("need at least one hidden layer and a classifier head")
        for k, (a, b) in enumerate(zip(layers, layers[1:])):
            if a.out_dim != b.in_dim:
                raise DimensionError(f"layer {k} outputs {a.out_dim} but layer {k + 1} expects {b.in_dim}")
        if not 0 <= self.operator_cut < len(layers) - 1:
            raise DimensionError(f"operator_cut {self.operator_cut} must index a hidden layer")
        if layers[self.operator_cut].out_dim != self.input_dim:
            raise DimensionError(
                f"layer {self.operator_cut} outputs {layers[self.operator_cut].out_dim}, input dim is {self.input_dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def num_classes(self) -> int:
        return self.layers[-1].out_dim

    @property
    def arch(self) -> tuple:
        return (self.input_dim,) + tuple(layer.out_dim for layer in self.layers)

    def params(self) -> list:
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.bias]
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(
            [DenseLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers], self.operator_cut
        )


def find_operator_cut(arch: Sequence[int]) -> int:
    """Index of the last hidden layer whose width equals the input width."""
    hidden = list(arch[1:-1])
    for k in range(len(hidden) - 1, -1, -1):
        if hidden[k] == arch[0]:
            return k
    raise DimensionError(f"architecture {tuple(arch)} has no hidden layer of input width {arch[0]}")


INITS = ("he", "glorot")


def init_mlp(
    arch: Sequence[int], seed: int = 0, activation: str = "relu", zero_head: bool = False, init: str = "he"
) -> MlpModel:
    """Random dense classifier with zero biases.

    ``init="he"``: normal hidden layers with variance 2/fan_in and a 1/fan_in head.
    ``init="glorot"``: every layer uniform with variance 2/(fan_in + fan_out).
    """
    if init not in INITS:
        raise ValueError(f"unknown init {init!r}")
    arch = [int(a) for a in arch]
    if len(arch) < 3:
        raise DimensionError("architecture needs input, at least one hidden layer and output sizes")
    cut = find_operator_cut(arch)
    rng = np.random.default_rng(seed)
    layers = []
    n = len(arch) - 1
    for k, (fan_in, fan_out) in enumerate(zip(arch[:-1], arch[1:])):
        head = k == n - 1
        if head and zero_head:
            w = np.zeros((fan_out, fan_in))
        elif init == "glorot":
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-lim, lim, size=(fan_out, fan_in))
        else:
            std = (1.0 if head else np.sqrt(2.0)) / np.sqrt(fan_in)
            w = rng.normal(0.0, std, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out), "identity" if head else activation))
    return MlpModel(layers, cut)


def extract_operator(model: MlpModel) -> Mlp:
    """Copy of layers ``0 .. operator_cut`` as an endomap (classifier head dropped)."""
    return Mlp(tuple(DenseLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in model.layers[: model.operator_cut + 1]))


def forward(model: MlpModel, batch):
    """Logits and per-layer ``(input, pre-activation, output)`` cache."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DimensionError(f"batch shape {x.shape} does not match input dim {model.input_dim}")
    cache = []
    for layer in model.layers:
        # same expression as DenseLayer.forward, so extracted operators agree bitwise
        z = x @ layer.weights.T + layer.bias
        a = _activate(layer.activation, z)
        cache.append((x, z, a))
        x = a
    return x, cache


def log_softmax(logits):
    s = logits - logits.max(axis=1, keepdims=True)
    return s - np.log(np.sum(np.exp(s), axis=1, keepdims=True))


def cross_entropy(logits, labels) -> float:
    lp = log_softmax(logits)
    return float(-np.mean(lp[np.arange(labels.size), labels]))


def backward(model: MlpModel, labels, cache) -> list:
    """Gradients of the mean cross-entropy, ordered like :meth:`MlpModel.params`."""
    labels = np.asarray(labels)
    logits = cache[-1][2]
    b = logits.shape[0]
    delta = np.exp(log_softmax(logits))
    delta[np.arange(b), labels] -= 1.0
    delta /= b
    grads = [None] * (2 * len(model.layers))
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        x, z, a = cache[k]
        dz = delta * _activation_grad(layer.activation, z, a)
        grads[2 * k] = dz.T @ x
        grads[2 * k + 1] = dz.sum(axis=0)
        if k:
            delta = dz @ layer.weights
    return grads


def loss_and_grads(model: MlpModel, x, y):
    logits, cache = forward(model, x)
    return cross_entropy(logits, y), backward(model, y, cache)


# -- optimizer ----------------------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-7


def adam_step(params, grads, state: AdamState, hyper: AdamHyper = AdamHyper()):
    """In-place bias-corrected Adam update; epsilon is added to ``sqrt(v)`` before correction
    (``p -= lr * sqrt(1 - b2^t) / (1 - b1^t) * m / (sqrt(v) + eps_hat)``)."""
    if not (len(params) == len(grads) == len(state.m)):
        raise DimensionError("params, grads and optimizer state differ in length")
    state.t += 1
    t = state.t
    lr_t = hyper.lr * np.sqrt(1.0 - hyper.beta2**t) / (1.0 - hyper.beta1**t)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise DimensionError(f"shape mismatch: param {p.shape}, grad {g.shape}")
        m *= hyper.beta1
        m += (1.0 - hyper.beta1) * g
        v *= hyper.beta2
        v += (1.0 - hyper.beta2) * (g * g)
        p -= lr_t * m / (np.sqrt(v) + hyper.eps_hat)
    return params, state


# -- training loop --------------------------------------------------------------


def training_stability_config() -> StabilityConfig:
    # method 2 and the eigen-solve are skipped per epoch (not reported); long pseudo-cycles allowed
    return StabilityConfig(run_method2=False, spectral=False, max_period=256)


@dataclass
class TrainConfig:
    arch: tuple = (784, 100, 784, 10)
    epochs: int = 20
    batch: int = 32
    seed: int = 0
    adam: AdamHyper = field(default_factory=AdamHyper)
    probes: int = 100
    subset: Optional[int] = None
    zero_head: bool = False
    init: str = "he"
    stability: StabilityConfig = field(default_factory=training_stability_config)


@dataclass
class EpochReport:
    epoch: int
    train_accuracy: float
    test_accuracy: float
    train_loss: float
    test_loss: float
    stability: StabilityReport

    def row(self) -> dict:
        s = self.stability
        return {
            "epoch": self.epoch,
            "train_acc": self.train_accuracy,
            "test_acc": self.test_accuracy,
            "train_loss": self.train_loss,
            "test_loss": self.test_loss,
            "jac_norm_geomean": s.jac_norm_geomean,
            "gamma3": s.gamma_method3,
            "phase": str(s.phase),
            "L": s.phase.period if s.phase.period is not None else "",
        }


EPOCH_COLUMNS = ["epoch", "train_acc", "test_acc", "train_loss", "test_loss", "jac_norm_geomean", "gamma3", "phase", "L"]


def write_epoch_csv(reports, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.DictWriter(fh, fieldnames=EPOCH_COLUMNS)
        w.writeheader()
        for r in reports:
            w.writerow(r.row())


@dataclass
class TrainResult:
    reports: list
    model: MlpModel
    operators: list = field(repr=False)  # extracted operator per epoch

    @property
    def best_epoch(self) -> int:
        return min(self.reports, key=lambda r: r.test_loss).epoch

    @property
    def best_report(self) -> EpochReport:
        return min(self.reports, key=lambda r: r.test_loss)


def evaluate(model: MlpModel, data: Dataset, chunk: int = 4096):
    """(accuracy, mean cross-entropy) over a dataset."""
    correct = 0
    total_loss = 0.0
    for s in range(0, len(data), chunk):
        logits, _ = forward(model, data.x[s : s + chunk])
        y = data.y[s : s + chunk]
        correct += int(np.sum(np.argmax(logits, axis=1) == y))
        total_loss += cross_entropy(logits, y) * y.size
    return correct / len(data), total_loss / len(data)


def train(
    config: TrainConfig,
    train_set: Dataset,
    test_set: Dataset,
    on_epoch: Optional[Callable[[EpochReport, Mlp], None]] = None,
) -> TrainResult:
    """Seeded minibatch Adam training with a stability report after every epoch.

    Probes for the stability analysis are the first ``config.probes`` test inputs.
    """
    train_set = train_set.head(config.subset)
    if len(train_set) == 0 or len(test_set) == 0:
        raise InsufficientDataError("empty train or test set")
    arch = tuple(config.arch)
    if arch[0] != train_set.dim or arch[0] != test_set.dim:
        raise DimensionError(f"arch input {arch[0]} but data dim {train_set.dim}/{test_set.dim}")
    if arch[-1] < train_set.num_classes:
        raise DimensionError(f"arch has {arch[-1]} outputs for {train_set.num_classes} classes")
    model = init_mlp(arch, seed=config.seed, zero_head=config.zero_head, init=config.init)
    params = model.params()
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng([config.seed, 1])
    probes = test_set.x[: config.probes]
    reports, operators = [], []
    n = len(train_set)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for s in range(0, n, config.batch):
            idx = order[s : s + config.batch]
            _, grads = loss_and_grads(model, train_set.x[idx], train_set.y[idx])
            adam_step(params, grads, state, config.adam)
        tr_acc, tr_loss = evaluate(model, train_set)
        te_acc, te_loss = evaluate(model, test_set)
        op = extract_operator(model)
        rep = EpochReport(epoch, tr_acc, te_acc, tr_loss, te_loss, classify_phase(op, probes, config.stability))
        log.info(
            "epoch %d: train %.4f test %.4f loss %.4f norm %.3f %s",
            epoch, tr_acc, te_acc, te_loss, rep.stability.jac_norm_geomean, rep.stability.phase,
        )
        reports.append(rep)
        operators.append(op)
        if on_epoch is not None:
            on_epoch(rep, op)
    return TrainResult(reports, model, operators)


# -- phase summaries --------------------------------------------------------------


@dataclass
class PhaseTrace:
    params: list
    phases: list  # phase labels per parameter
    segments: list  # (label, first param, last param) for runs of equal labels
    first_order: Optional[float]
    first_chaotic: Optional[float]
    norm_crossing: Optional[tuple]

    @property
    def order_before_chaos(self) -> bool:
        return self.first_order is not None and self.first_chaotic is not None and self.first_order < self.first_chaotic

    def compact(self) -> str:
        return " | ".join(f"{lab}[{a:g}..{b:g}]" if a != b else f"{lab}[{a:g}]" for lab, a, b in self.segments)


def phase_trace(params, reports: Sequence[StabilityReport]) -> PhaseTrace:
    """Run-length phase sequence plus first Order / Chaotic parameters and the norm=1 crossing."""
    params = list(params)
    if len(params) < 2:
        raise InsufficientDataError("a phase trace needs at least two entries")
    labels = [str(r.phase) for r in reports]
    segments = []
    for p, lab in zip(params, labels):
        if segments and segments[-1][0] == lab:
            segments[-1][2] = p
        else:
            segments.append([lab, p, p])
    kinds = [r.phase.kind for r in reports]
    first = lambda k: next((p for p, q in zip(params, kinds) if q == k), None)  # noqa: E731
    return PhaseTrace(
        params,
        labels,
        [tuple(s) for s in segments],
        first("order"),
        first("chaotic"),
        first_crossing(params, [r.jac_norm_geomean for r in reports]),
    )


def epoch_phase_trace(reports: Sequence[EpochReport]) -> PhaseTrace:
    return phase_trace([r.epoch for r in reports], [r.stability for r in reports])


def default_scaling_grid() -> np.ndarray:
    return np.round(np.arange(0.1, 1.2 + 1e-9, 0.05), 10)


def weight_scaling_sweep(
    operator,
    c_grid=None,
    probes=None,
    config: Optional[StabilityConfig] = None,
    threads: int = 1,
    scale_biases: bool = False,
) -> ScanResult:
    """Stability of ``c * weights`` over ``c_grid`` (biases untouched unless ``scale_biases``)."""
    if isinstance(operator, MlpModel):
        operator = extract_operator(operator)
    grid = default_scaling_grid() if c_grid is None else np.asarray(c_grid, dtype=float)
    if probes is None:
        raise ValueError("probe inputs are required")
    cfg = config or training_stability_config()
    return edge_crossing_scan(lambda c: scale_weights(operator, c, scale_biases), grid, probes, cfg, threads=threads)

