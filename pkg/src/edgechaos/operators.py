"""Discrete dynamical operators ``x_{t+1} = f(x_t)`` with analytic Jacobians.

Four operator families are provided:

* :class:`LogisticStack` -- ``depth`` compositions of ``g(x) = r x (1 - x)``.
* :class:`RandomTanh` -- ``tanh(gain * W x)`` with Gaussian ``W`` of variance ``1/N``.
* :class:`Mlp` -- a chain of dense layers whose input and output dimensions agree.
* :class:`ScaledWeights` -- any weighted operator with every weight multiplied by ``c``.

All state arguments accept either a single vector of shape ``(N,)`` or a batch of
row vectors of shape ``(B, N)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import DimensionError, NonFiniteError, WeightFormatError

ACTIVATIONS = ("relu", "tanh", "identity")

# batch chunk for the Gram-trick Jacobian norms (bounds peak memory)
_NORM_CHUNK = 32


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(kind: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if kind == "relu":
        # subgradient at the kink is 0
        return (z > 0.0).astype(z.dtype)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass(frozen=True, eq=False)
class DenseLayer:
    """Affine map followed by an elementwise activation. ``weights`` is (out, in)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise DimensionError(f"weights must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise DimensionError(f"bias shape {b.shape} does not match weights {w.shape}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        return _activate(self.activation, x @ self.weights.T + self.bias)


def _check_chain(layers: Sequence[DenseLayer]) -> None:
    for k in range(1, len(layers)):
        if layers[k].in_dim != layers[k - 1].out_dim:
            raise DimensionError(
                f"layer {k} expects {layers[k].in_dim} inputs but layer {k - 1} "
                f"produces {layers[k - 1].out_dim}"
            )


@dataclass(frozen=True, eq=False)
class LogisticStack:
    r: float
    depth: int = 1

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if not (0.0 < self.r <= 4.0):
            raise ValueError(f"r must lie in (0, 4], got {self.r}")

    @property
    def dim(self) -> int:
        return 1

    def _forward(self, x):
        r = self.r
        for _ in range(self.depth):
            x = r * x * (1.0 - x)
        return x

    def _derivative(self, x):
        """Chain-rule product of single-map derivatives along the intermediate orbit."""
        r = self.r
        d = np.ones_like(x)
        for _ in range(self.depth):
            d = d * (r * (1.0 - 2.0 * x))
            x = r * x * (1.0 - x)
        return d

    def _jac_matmul(self, x, m):
        return self._derivative(x)[0] * m

    def _jac_norms(self, xs):
        return np.abs(self._derivative(xs[:, 0]))

    def _scaled(self, c, scale_biases):
        raise TypeError("LogisticStack has no weights to scale")


@dataclass(frozen=True, eq=False)
class RandomTanh:
    """``f(x) = tanh(gain * W x)``; ``weights`` holds the unit-gain draw ``W``."""

    weights: np.ndarray
    gain: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"RandomTanh needs a square matrix, got {w.shape}")
        if self.gain < 0:
            raise ValueError("gain must be nonnegative")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @cached_property
    def effective_weights(self) -> np.ndarray:
        return self.gain * self.weights

    @cached_property
    def _row_norms2(self):
        return np.sum(self.effective_weights**2, axis=1)

    def _forward(self, x):
        return np.tanh(x @ self.effective_weights.T)

    def _jac_matmul(self, x, m):
        a = np.tanh(self.effective_weights @ x)
        return (1.0 - a * a)[:, None] * (self.effective_weights @ m)

    def _jac_norms(self, xs):
        a = np.tanh(xs @ self.effective_weights.T)
        d2 = (1.0 - a * a) ** 2
        return np.sqrt(d2 @ self._row_norms2)

    def _scaled(self, c, scale_biases):
        return RandomTanh(self.weights, self.gain * c)

    def to_mlp(self) -> "Mlp":
        return Mlp((DenseLayer(self.effective_weights, np.zeros(self.dim), "tanh"),))


@dataclass(frozen=True, eq=False)
class Mlp:
    """Endomap built from dense layers (first input dim == last output dim)."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DimensionError("Mlp needs at least one layer")
        _check_chain(layers)
        if layers[-1].out_dim != layers[0].in_dim:
            raise DimensionError(
                f"not an endomap: input dim {layers[0].in_dim}, output dim {layers[-1].out_dim}"
            )
        object.__setattr__(self, "layers", layers)

    @property
    def dim(self) -> int:
        return self.layers[0].in_dim

    def _forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def _jac_matmul(self, x, m):
        h = x
        for layer in self.layers:
            z = layer.weights @ h + layer.bias
            a = _activate(layer.activation, z)
            m = _activation_grad(layer.activation, z, a)[:, None] * (layer.weights @ m)
            h = a
        return m

    def _derivs(self, xs):
        out = []
        h = xs
        for layer in self.layers:
            z = h @ layer.weights.T + layer.bias
            a = _activate(layer.activation, z)
            out.append(_activation_grad(layer.activation, z, a))
            h = a
        return out

    def _jac_norms(self, xs):
        layers = self.layers
        n = len(layers)
        d = self._derivs(xs)
        widths = [layer.out_dim for layer in layers[:-1]]
        if not widths or min(widths) >= self.dim:
            r = d[0][:, :, None] * layers[0].weights[None]
            for j in range(1, n):
                r = d[j][:, :, None] * np.matmul(layers[j].weights, r)
            return np.sqrt(np.sum(r * r, axis=(1, 2)))
        # split J = L R at the narrowest hidden width m; ||LR||_F^2 = sum((L^T L) * (R R^T))
        k = int(np.argmin(widths))
        r = d[0][:, :, None] * layers[0].weights[None]
        for j in range(1, k + 1):
            r = d[j][:, :, None] * np.matmul(layers[j].weights, r)
        left = d[n - 1][:, :, None] * layers[n - 1].weights[None]
        for j in range(n - 2, k, -1):
            left = np.matmul(left * d[j][:, None, :], layers[j].weights)
        gl = np.matmul(left.transpose(0, 2, 1), left)
        gr = np.matmul(r, r.transpose(0, 2, 1))
        return np.sqrt(np.maximum(np.sum(gl * gr, axis=(1, 2)), 0.0))

    def _scaled(self, c, scale_biases):
        return Mlp(
            tuple(
                DenseLayer(layer.weights * c, layer.bias * c if scale_biases else layer.bias, layer.activation)
                for layer in self.layers
            )
        )


@dataclass(frozen=True, eq=False)
class ScaledWeights:
    """``inner`` with every weight multiplied by ``c`` (biases only if ``scale_biases``)."""

    inner: "Operator"
    c: float
    scale_biases: bool = False

    @cached_property
    def resolved(self):
        return self.inner._scaled(self.c, self.scale_biases)

    @property
    def dim(self) -> int:
        return self.inner.dim

    def _forward(self, x):
        return self.resolved._forward(x)

    def _jac_matmul(self, x, m):
        return self.resolved._jac_matmul(x, m)

    def _jac_norms(self, xs):
        return self.resolved._jac_norms(xs)

    def _scaled(self, c, scale_biases):
        return self.resolved._scaled(c, scale_biases)


Operator = Union[LogisticStack, RandomTanh, Mlp, ScaledWeights]


def _as_state(op, x, allow_batch=True) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.ndim > 2 or (x.ndim == 2 and not allow_batch):
        raise DimensionError(f"state must be a vector{' or batch' if allow_batch else ''}, got shape {x.shape}")
    if x.shape[-1] != op.dim:
        raise DimensionError(f"operator has dimension {op.dim}, state has {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("state contains NaN or Inf")
    return x


def apply(op: Operator, x) -> np.ndarray:
    """Evaluate ``f(x)`` for one state or a batch of row states."""
    return op._forward(_as_state(op, x))


def jacobian(op: Operator, x) -> np.ndarray:
    """Analytic Jacobian ``df_i/dx_j`` at a single state."""
    x = _as_state(op, x, allow_batch=False)
    return op._jac_matmul(x, np.eye(op.dim))


def jacobian_matmul(op: Operator, x, m) -> np.ndarray:
    """``J(x) @ m`` without forming ``J`` (cheaper for chained layers)."""
    x = _as_state(op, x, allow_batch=False)
    m = np.asarray(m, dtype=np.float64)
    if m.shape[0] != op.dim:
        raise DimensionError(f"right factor has {m.shape[0]} rows, operator dimension is {op.dim}")
    return op._jac_matmul(x, m)


def jacobian_norm(op: Operator, x) -> Union[float, np.ndarray]:
    """Frobenius norm of the Jacobian (unnormalized) at one state or at each row of a batch."""
    x = _as_state(op, x)
    if x.ndim == 1:
        return float(op._jac_norms(x[None, :])[0])
    out = np.empty(x.shape[0])
    for s in range(0, x.shape[0], _NORM_CHUNK):
        out[s : s + _NORM_CHUNK] = op._jac_norms(x[s : s + _NORM_CHUNK])
    return out


def jacobian_fd(op: Operator, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian; column j is ``(f(x + h e_j) - f(x - h e_j)) / 2h``."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = _as_state(op, x, allow_batch=False)
    n = op.dim
    steps = np.eye(n) * h
    plus = op._forward(x[None, :] + steps)
    minus = op._forward(x[None, :] - steps)
    if not (np.all(np.isfinite(plus)) and np.all(np.isfinite(minus))):
        raise NonFiniteError("non-finite operator evaluation during finite differencing")
    return ((plus - minus) / (2.0 * h)).T


def make_random_tanh(N: int, g: float, seed: int = 0) -> RandomTanh:
    """Single-layer tanh network; effective weights are i.i.d. N(0, g^2/N)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    return RandomTanh(rng.normal(0.0, 1.0 / np.sqrt(N), size=(N, N)), float(g))


def linear_map(a) -> Mlp:
    """``f(x) = A x`` as a one-layer identity-activation network."""
    a = np.asarray(a, dtype=np.float64)
    return Mlp((DenseLayer(a, np.zeros(a.shape[0]), "identity"),))


def make_mlp(
    sizes: Sequence[int],
    activation: str = "relu",
    gain: float | None = None,
    bias_scale: float = 0.0,
    seed: int = 0,
) -> Mlp:
    """Fresh endomap MLP with Gaussian weights of variance ``gain**2 / fan_in``.

    ``gain`` defaults to sqrt(2) for ReLU and 1 otherwise.
    """
    if gain is None:
        gain = np.sqrt(2.0) if activation == "relu" else 1.0
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = rng.normal(0.0, gain / np.sqrt(fan_in), size=(fan_out, fan_in))
        b = rng.normal(0.0, bias_scale, size=fan_out) if bias_scale > 0 else np.zeros(fan_out)
        layers.append(DenseLayer(w, b, activation))
    return Mlp(tuple(layers))


def scale_weights(op: Operator, c: float, scale_biases: bool = False) -> ScaledWeights:
    """Multiply every weight of ``op`` by ``c``; biases stay put unless ``scale_biases``."""
    if c < 0:
        raise ValueError("scale fraction c must be nonnegative")
    base = op.inner if isinstance(op, ScaledWeights) else op
    if isinstance(base, LogisticStack):
        raise TypeError("LogisticStack has no weights to scale")
    if isinstance(op, ScaledWeights) and op.scale_biases == scale_biases:
        return ScaledWeights(op.inner, op.c * c, scale_biases)
    return ScaledWeights(op, float(c), scale_biases)


def as_mlp(op: Operator) -> Mlp:
    if isinstance(op, ScaledWeights):
        return as_mlp(op.resolved)
    if isinstance(op, RandomTanh):
        return op.to_mlp()
    if isinstance(op, Mlp):
        return op
    raise TypeError(f"{type(op).__name__} cannot be expressed as dense layers")


# -- weight file format ------------------------------------------------------


def weights_to_dict(op: Operator) -> dict:
    return {
        "layers": [
            {
                "kind": "dense",
                "activation": layer.activation,
                "rows": layer.out_dim,
                "cols": layer.in_dim,
                "weights": layer.weights.ravel().tolist(),
                "bias": layer.bias.tolist(),
            }
            for layer in as_mlp(op).layers
        ]
    }


def weights_from_dict(doc: dict) -> Mlp:
    if not isinstance(doc, dict) or not isinstance(doc.get("layers"), list) or not doc["layers"]:
        raise WeightFormatError('weight document needs a non-empty "layers" list')
    layers = []
    for k, spec in enumerate(doc["layers"]):
        try:
            kind = spec["kind"]
            act = spec["activation"]
            rows, cols = int(spec["rows"]), int(spec["cols"])
            w = np.asarray(spec["weights"], dtype=np.float64)
            b = np.asarray(spec["bias"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise WeightFormatError(f"layer {k}: malformed entry ({exc})") from exc
        if kind != "dense":
            raise WeightFormatError(f"layer {k}: unsupported kind {kind!r}")
        if act not in ACTIVATIONS:
            raise WeightFormatError(f"layer {k}: unknown activation {act!r}")
        if w.size != rows * cols:
            raise WeightFormatError(f"layer {k}: {w.size} weights for a {rows}x{cols} matrix")
        if b.shape != (rows,):
            raise WeightFormatError(f"layer {k}: bias length {b.size}, expected {rows}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise WeightFormatError(f"layer {k}: non-finite values")
        layers.append(DenseLayer(w.reshape(rows, cols), b, act))
    dims = " -> ".join([str(layers[0].in_dim)] + [str(layer.out_dim) for layer in layers])
    try:
        return Mlp(tuple(layers))
    except DimensionError as exc:
        raise WeightFormatError(f"{exc} (layer dims: {dims})") from exc


def save_weights(op: Operator, path) -> None:
    Path(path).write_text(json.dumps(weights_to_dict(op)))


def load_weights(path) -> Mlp:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise WeightFormatError(f"{path}: invalid JSON ({exc})") from exc
    return weights_from_dict(doc)
