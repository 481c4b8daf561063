"""Plug-in (histogram) entropy and mutual information, and the logistic MI sweep."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError


@dataclass(frozen=True)
class BinSpec:
    lo: float = 0.0
    hi: float = 1.0
    bins: int = 500

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")
        if self.bins < 1:
            raise ValueError("bins must be positive")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins

    def index(self, v: np.ndarray):
        """Bin index per value (right edge folded into the last bin) and an in-range mask."""
        v = np.asarray(v, dtype=np.float64)
        ok = (v >= self.lo) & (v <= self.hi)
        idx = np.floor((v - self.lo) / self.width).astype(np.int64)
        np.clip(idx, 0, self.bins - 1, out=idx)
        return idx, ok


@dataclass
class JointHistogram:
    counts: np.ndarray  # (bins, bins), axis 0 = first coordinate
    dropped: int

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "JointHistogram") -> "JointHistogram":
        return JointHistogram(self.counts + other.counts, self.dropped + other.dropped)


def _split_pairs(pairs):
    p = np.asarray(pairs, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError(f"pairs must have shape (n, 2), got {p.shape}")
    if p.shape[0] == 0:
        raise InsufficientDataError("empty input")
    return p[:, 0], p[:, 1]


def joint_histogram(pairs, spec: BinSpec = BinSpec()) -> JointHistogram:
    """2-D counts of ``(x, y)`` pairs; pairs with either value out of range are dropped."""
    x, y = _split_pairs(pairs)
    return _joint(x, y, spec)


def _joint(x, y, spec):
    ix, okx = spec.index(x)
    iy, oky = spec.index(y)
    ok = okx & oky
    flat = np.bincount(ix[ok] * spec.bins + iy[ok], minlength=spec.bins * spec.bins)
    return JointHistogram(flat.reshape(spec.bins, spec.bins), int((~ok).sum()))


def entropy(counts) -> float:
    """Shannon entropy in bits of a count array (``0 log 0 = 0``)."""
    c = np.asarray(counts, dtype=np.float64).ravel()
    n = c.sum()
    if n <= 0:
        raise InsufficientDataError("no counts")
    p = c[c > 0] / n
    return float(-np.sum(p * np.log2(p)))


def mi_from_histogram(h: JointHistogram) -> float:
    """``H(X) + H(Y) - H(X, Y)`` in bits."""
    hx = entropy(h.counts.sum(axis=1))
    hy = entropy(h.counts.sum(axis=0))
    hxy = entropy(h.counts)
    # tiny negative values are rounding in the three sums
    return max(hx + hy - hxy, 0.0)


def mutual_information(pairs, spec: BinSpec = BinSpec()) -> float:
    """Plug-in mutual information of binned pairs, in bits (no bias correction)."""
    x, y = _split_pairs(pairs)
    if x.size < spec.bins:
        warnings.warn(f"{x.size} samples for {spec.bins} bins; plug-in MI is strongly biased", stacklevel=2)
    return mi_from_histogram(_joint(x, y, spec))


@dataclass
class MICurve:
    r: np.ndarray
    mi_x0_x1: np.ndarray
    mi_x0_xk: np.ndarray
    k: int
    samples: int
    dropped: np.ndarray = field(default=None)

    @property
    def argmax_r(self) -> float:
        return float(self.r[int(np.argmax(self.mi_x0_xk))])

    def write_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["r", "I_x0_x1_bits", "I_x0_xk_bits", "k", "samples", "dropped"])
            for i, r in enumerate(self.r):
                w.writerow([repr(float(r)), repr(float(self.mi_x0_x1[i])), repr(float(self.mi_x0_xk[i])),
                            self.k, self.samples, int(self.dropped[i])])


def _stack_orbit(r, x0, depth, k):
    """Return ``(x_1, x_k)`` for the depth-``depth`` logistic stack started at ``x0``."""
    x = x0.copy()
    x1 = None
    for step in range(1, k + 1):
        for _ in range(depth):
            x = r * x * (1.0 - x)
        if step == 1:
            x1 = x.copy()
    return x1, x


def logistic_mi_sweep(
    r_grid,
    k: int = 10,
    samples: int = 400_000,
    seed: int = 0,
    depth: int = 20,
    spec: BinSpec = BinSpec(),
    shard_size: int = 500_000,
    threads: int = 1,
) -> MICurve:
    """``I(x0, x1)`` and ``I(x0, xk)`` of the ``depth``-layer logistic operator per ``r``.

    ``x0`` is uniform on (0, 1). Samples are generated in shards with seeds spawned
    from ``seed``; the same shards are reused for every ``r``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n_shards = max(1, -(-samples // shard_size))
    sizes = [samples // n_shards + (1 if i < samples % n_shards else 0) for i in range(n_shards)]
    seeds = np.random.SeedSequence(seed).spawn(n_shards)
    shards = []
    for ss, n in zip(seeds, sizes):
        x0 = np.random.default_rng(ss).uniform(0.0, 1.0, n)
        x0[x0 == 0.0] = 0.5 * spec.width  # open interval
        shards.append(x0)

    def one(r):
        h1 = hk = None
        for x0 in shards:
            x1, xk = _stack_orbit(float(r), x0, depth, k)
            a, b = _joint(x0, x1, spec), _joint(x0, xk, spec)
            h1 = a if h1 is None else h1 + a
            hk = b if hk is None else hk + b
        return mi_from_histogram(h1), mi_from_histogram(hk), hk.dropped

    r_grid = np.asarray(r_grid, dtype=np.float64)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, r_grid))
    else:
        rows = [one(r) for r in r_grid]
    rows = np.array(rows, dtype=np.float64).reshape(-1, 3)
    return MICurve(r_grid, rows[:, 0], rows[:, 1], k, samples, rows[:, 2].astype(np.int64))
