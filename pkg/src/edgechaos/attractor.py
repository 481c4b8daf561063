"""Orbits, attractor classification and Poincare return-map series."""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientDataError, NonFiniteError
from .operators import LogisticStack, Operator, _as_state

LO = 1e-10
HI = 1e10

RUNNING, UNDERFLOW, OVERFLOW = 0, 1, 2
_STATUS_NAMES = {UNDERFLOW: "underflow", OVERFLOW: "overflow"}


@dataclass
class Trajectory:
    """Orbit ``x_1 .. x_n`` of an operator started at ``x0``.

    ``points[burn_in:]`` is the tail used by the analyses; ``stop_reason`` is set to
    ``"underflow"`` or ``"overflow"`` when the last point crossed a stop threshold.
    """

    x0: np.ndarray
    points: np.ndarray
    burn_in: int = 0
    stop_reason: Optional[str] = None

    @property
    def terminated_early(self) -> bool:
        return self.stop_reason is not None

    @property
    def tail(self) -> np.ndarray:
        return self.points[self.burn_in :]


@dataclass
class AttractorReport:
    kind: str  # "fixed_point" | "cycle" | "chaotic" | "divergent"
    period: Optional[int]
    representative_points: np.ndarray
    residual: float

    @property
    def label(self) -> str:
        return {
            "fixed_point": "FixedPoint",
            "cycle": f"Cycle({self.period})",
            "chaotic": "Chaotic",
            "divergent": "Divergent",
        }[self.kind]

    def to_dict(self) -> dict:
        return {"kind": self.label, "L": self.period, "residual": self.residual}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


@dataclass
class PoincareSeries:
    pairs: np.ndarray  # (n, 2): (xbar_t, xbar_{t+1})
    direction: np.ndarray = field(repr=False)

    def write_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["t", "xbar_t", "xbar_t1"])
            for t, (a, b) in enumerate(self.pairs):
                w.writerow([t, repr(float(a)), repr(float(b))])


def _norms(x):
    return np.sqrt(np.sum(x * x, axis=-1))


def iterate(
    op: Operator,
    x0,
    steps: int,
    lo: float = LO,
    hi: float = HI,
    burn_in: int = 0,
) -> Trajectory:
    """Apply ``op`` up to ``steps`` times, stopping when ``|x_t|`` leaves ``[lo, hi]``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not (0.0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    x = _as_state(op, x0, allow_batch=False)
    if isinstance(op, LogisticStack) and not (0.0 <= x[0] <= 1.0):
        warnings.warn("logistic start outside [0, 1]; the orbit may diverge", stacklevel=2)
    pts = np.empty((steps, op.dim))
    reason = None
    n = 0
    for t in range(steps):
        x = op._forward(x)
        pts[t] = x
        n = t + 1
        nx = float(np.sqrt(x @ x))
        if not np.isfinite(nx) or nx > hi:
            reason = "overflow"
            break
        if nx < lo:
            reason = "underflow"
            break
    return Trajectory(np.array(x0, dtype=np.float64), pts[:n], burn_in=min(burn_in, n), stop_reason=reason)


def iterate_batch(op: Operator, x0s, steps: int, lo: float = LO, hi: float = HI, record_from: int | None = None):
    """Batched orbits; a row is frozen once it crosses a stop threshold.

    Returns ``(final_states, status, stop_step, record)`` where ``record`` holds the
    states from step ``record_from`` onward (shape ``(steps - record_from + 1, B, N)``)
    or is ``None``.
    """
    x = np.array(_as_state(op, x0s), dtype=np.float64, ndmin=2)
    b = x.shape[0]
    status = np.zeros(b, dtype=np.int8)
    stop = np.full(b, steps)
    rec = None
    if record_from is not None:
        rec = np.empty((steps - record_from + 1, b, op.dim))
    for t in range(1, steps + 1):
        act = status == RUNNING
        if act.any():
            xa = op._forward(x[act]) if not act.all() else op._forward(x)
            nx = _norms(xa)
            over = ~np.isfinite(nx) | (nx > hi)
            under = ~over & (nx < lo)
            idx = np.flatnonzero(act)
            x[idx] = xa
            status[idx[over]] = OVERFLOW
            status[idx[under]] = UNDERFLOW
            stop[idx[over | under]] = t
        if rec is not None and t >= record_from:
            rec[t - record_from] = x
    return x, status, stop, rec


def _tail_amplitude(tail):
    return float(np.max(_norms(tail)))


def detect_attractor(traj: Trajectory, tol: float = 1e-6, max_period: int = 64) -> AttractorReport:
    """Classify the asymptotic set of ``traj`` by minimal lag recurrence.

    The tolerance is relative: ``tol * max(1, amplitude)`` with ``amplitude`` the
    largest state norm in the examined window.
    """
    if traj.stop_reason == "overflow":
        return AttractorReport("divergent", None, traj.points[-1:], float("inf"))
    if traj.stop_reason == "underflow":
        last = traj.points[-1:]
        return AttractorReport("fixed_point", 1, last, float(_norms(last)[0]))
    tail = traj.tail
    need = 2 * max_period
    if tail.shape[0] < need:
        raise InsufficientDataError(f"need {need} tail points for max_period={max_period}, have {tail.shape[0]}")
    if not np.all(np.isfinite(tail)):
        raise NonFiniteError("trajectory tail contains non-finite states")
    seg = tail[-need:]
    tol_abs = tol * max(1.0, _tail_amplitude(seg))
    best = float("inf")
    for lag in range(1, max_period + 1):
        res = float(np.max(_norms(seg[lag:] - seg[:-lag])))
        best = min(best, res)
        if res < tol_abs:
            if lag == 1:
                return AttractorReport("fixed_point", 1, seg[-1:].copy(), res)
            return AttractorReport("cycle", lag, seg[-lag:].copy(), res)
    return AttractorReport("chaotic", None, seg[-min(need, 64):].copy(), best)


def random_direction(n: int, seed: int = 0) -> np.ndarray:
    """Seeded direction drawn uniformly on the unit sphere."""
    u = np.random.default_rng(seed).normal(size=n)
    norm = np.sqrt(u @ u)
    if norm == 0.0:  # pragma: no cover - probability zero
        u = np.ones(n)
        norm = np.sqrt(n)
    return u / norm


def poincare_projection(traj: Trajectory, seed: int = 0, direction=None) -> PoincareSeries:
    """Lag-1 pairs of the tail projected on a fixed unit direction."""
    tail = traj.tail
    if tail.shape[0] == 0:
        raise InsufficientDataError("empty trajectory tail")
    if direction is None:
        direction = random_direction(tail.shape[1], seed)
    direction = np.asarray(direction, dtype=np.float64)
    direction = direction / np.sqrt(direction @ direction)
    xbar = tail @ direction
    return PoincareSeries(np.column_stack([xbar[:-1], xbar[1:]]), direction)


def twin_runs(op: Operator, x0s, eps: float, T: int, lo=LO, hi=HI, seed: int = 0):
    """Batched twin trajectories ``x0`` and ``x0 + eps * u``.

    Returns ``(separation, steps, diverged)``; a pair is frozen at the first step
    where either member leaves ``[lo, hi]``; a diverged pair has separation ``inf``.
    """
    x = np.array(_as_state(op, x0s), dtype=np.float64, ndmin=2)
    u = random_direction(op.dim, seed)
    y = x + eps * u
    b = x.shape[0]
    active = np.ones(b, dtype=bool)
    steps = np.full(b, T)
    diverged = np.zeros(b, dtype=bool)
    for t in range(1, T + 1):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        xa = op._forward(x[idx])
        ya = op._forward(y[idx])
        x[idx] = xa
        y[idx] = ya
        nx, ny = _norms(xa), _norms(ya)
        over = ~np.isfinite(nx) | ~np.isfinite(ny) | (nx > hi) | (ny > hi)
        under = ~over & ((nx < lo) | (ny < lo))
        stopped = over | under
        diverged[idx[over]] = True
        steps[idx[stopped]] = t
        active[idx[stopped]] = False
    sep = _norms(x - y)
    sep[diverged] = np.inf
    return sep, steps, diverged


def twin_separation(op: Operator, x0, eps: float = 1e-8, T: int = 500, seed: int = 0) -> float:
    """``|x_T - x'_T|`` for ``x'_0 = x0 + eps * u``; ``inf`` if either run diverges."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x0 = _as_state(op, x0, allow_batch=False)
    sep, _, _ = twin_runs(op, x0, eps, T, seed=seed)
    s = float(sep[0])
    if np.isnan(s):
        raise NonFiniteError("non-finite intermediate state")
    return s
