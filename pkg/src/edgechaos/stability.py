"""Maximal Lyapunov exponent estimators, Jacobian-norm statistics and phase labels.

Three estimators are implemented:

1. ``ln`` of the normalized geometric-mean Jacobian norm on the attractor
   (:func:`lyapunov_method1`);
2. the log growth rate of the spectral radius of a product of Jacobians along one
   orbit (:func:`lyapunov_method2`);
3. the finite-time separation rate of twin trajectories (:func:`lyapunov_method3`).
"""
from __future__ import annotations

import csv
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .attractor import HI, LO, OVERFLOW, RUNNING, UNDERFLOW, detect_attractor, iterate, twin_runs
from .errors import ConvergenceError, InsufficientDataError, NumericalError
from .operators import LogisticStack, Operator, _as_state
from .spectra import frobenius_norm, spectral_radius

log = logging.getLogger(__name__)


@dataclass
class StabilityConfig:
    T: int = 500  # iterations for methods 1 and 3
    window: Optional[int] = None  # final iterates per probe in the geometric mean; None -> T // 2
    eps: float = 1e-8
    lo: float = LO
    hi: float = HI
    method2_T: int = 200
    run_method2: bool = True
    spectral: bool = True  # spectral radius of J at the attractor mean
    burn_in: int = 1000
    tol: float = 1e-6
    max_period: int = 64
    attractor_probes: int = 5
    order_threshold: float = 1e-6
    seed: int = 0

    @property
    def window_size(self) -> int:
        w = self.T // 2 if self.window is None else self.window
        return max(1, min(w, self.T))


@dataclass(frozen=True)
class Phase:
    kind: str  # "order" | "periodic" | "chaotic" | "divergent"
    period: Optional[int] = None

    def __str__(self) -> str:
        if self.kind == "periodic":
            return f"Periodic({self.period if self.period else 'pseudo'})"
        return {"order": "Order", "chaotic": "Chaotic", "divergent": "Divergent"}[self.kind]


@dataclass
class StabilityReport:
    gamma_method1: float
    gamma_method2: Optional[float]
    gamma_method3: float
    jac_norm_geomean: float
    jac_norm_at_mean: float
    spectral_radius_at_mean: Optional[float]
    phase: Phase
    sample_count: int
    divergent_count: int
    saturated_count: int
    median_separation: float
    attractor_amplitude: float
    T: int
    method2_valid: bool = False

    @property
    def divergent_fraction(self) -> float:
        return self.divergent_count / self.sample_count if self.sample_count else float("nan")

    @property
    def gamma3_chaotic(self) -> bool:
        """Twin-separation verdict: separation above the order threshold."""
        return self.phase.kind == "chaotic"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phase"] = str(self.phase)
        d["L"] = self.phase.period
        d["divergent_fraction"] = self.divergent_fraction
        return d


def _probe_matrix(op, inputs):
    x = np.array(_as_state(op, inputs), dtype=np.float64, ndmin=2)
    if x.shape[0] == 0:
        raise InsufficientDataError("at least one input is required")
    return x


def _log_norms(op, xs):
    from .operators import jacobian_norm

    with np.errstate(divide="ignore"):
        return np.log(jacobian_norm(op, xs) / np.sqrt(op.dim))


def _window_statistics(op, inputs, T, window, lo=LO, hi=HI):
    """Iterate probes ``T`` steps, averaging log-norms and states over the final ``window``.

    Returns ``(mean_log_norm, mean_state, final_state, status)``; rows whose orbit
    overflowed carry NaN statistics. Rows stopped by underflow stay frozen at their
    last state, which keeps contributing to the window.
    """
    x = _probe_matrix(op, inputs).copy()
    b = x.shape[0]
    status = np.zeros(b, dtype=np.int8)
    acc = np.zeros(b)
    sums = np.zeros_like(x)
    start = T - window + 1
    for t in range(1, T + 1):
        run = np.flatnonzero(status == RUNNING)
        if run.size:
            xa = op._forward(x[run])
            nx = np.sqrt(np.sum(xa * xa, axis=1))
            over = ~np.isfinite(nx) | (nx > hi)
            x[run] = xa
            status[run[over]] = OVERFLOW
            status[run[~over & (nx < lo)]] = UNDERFLOW
        if t >= start:
            ok = np.flatnonzero(status != OVERFLOW)
            if ok.size:
                acc[ok] += _log_norms(op, x[ok])
                sums[ok] += x[ok]
    bad = status == OVERFLOW
    logs = acc / window
    means = sums / window
    logs[bad] = np.nan
    means[bad] = np.nan
    return logs, means, x, status


def jac_norm_geomean(op: Operator, inputs, T: int = 500, window: Optional[int] = None) -> float:
    """Geometric mean of ``|J|_F / sqrt(N)`` over attractor states reached from ``inputs``.

    Each probe is iterated ``T`` steps and the norm is taken at its final ``window``
    states (``window=1`` uses only the final state). Diverged probes are excluded.
    """
    window = StabilityConfig(T=T, window=window).window_size
    logs, _, _, status = _window_statistics(op, inputs, T, window)
    ok = status != OVERFLOW
    if not ok.any():
        raise NumericalError("all samples diverged")
    return float(np.exp(np.mean(logs[ok])))


def lyapunov_method1(op: Operator, inputs, T: int = 500, window: Optional[int] = None) -> float:
    return float(np.log(jac_norm_geomean(op, inputs, T, window)))


def lyapunov_method2(op: Operator, x0, T: int = 200, lo: float = LO, hi: float = HI) -> Optional[float]:
    """``(1/tau) ln rho(J_T ... J_{T/2+1})`` over the second half of one orbit.

    The running product is renormalized to unit Frobenius norm each step and the
    log norms are accumulated. Returns ``None`` when the product degenerates (exact
    zero) or the eigenvalue iteration fails.
    """
    from .operators import jacobian_matmul

    x = _as_state(op, x0, allow_batch=False)
    traj = iterate(op, x, T, lo, hi)
    if traj.stop_reason == "overflow":
        log.info("method 2: orbit diverged")
        return None
    states = np.vstack([x[None, :], traj.points])[:-1]  # state before each step
    n_steps = states.shape[0]
    first = n_steps // 2
    tau = n_steps - first
    if tau < 1:
        return None
    prod = np.eye(op.dim)
    log_acc = 0.0
    for s in states[first:]:
        prod = jacobian_matmul(op, s, prod)
        nrm = frobenius_norm(prod)
        if nrm == 0.0 or not np.isfinite(nrm):
            log.info("method 2: Jacobian product degenerated")
            return None
        log_acc += np.log(nrm)
        prod /= nrm
    try:
        rho = spectral_radius(prod)
    except ConvergenceError as exc:
        log.warning("method 2: %s", exc)
        return None
    if rho == 0.0:
        log.info("method 2: nilpotent product, spectral radius 0")
        return None
    return float((log_acc + np.log(rho)) / tau)


def _method3(op, inputs, eps, T, lo, hi, seed):
    x0 = _probe_matrix(op, inputs)
    sep, steps, diverged = twin_runs(op, x0, eps, T, lo, hi, seed=seed)
    tiny = np.finfo(float).tiny
    clipped = np.clip(sep, tiny, hi)
    saturated = (sep <= tiny) | (sep >= hi)
    rates = np.log(clipped / eps) / steps
    return rates, sep, saturated, diverged


def _gamma3(rates, saturated):
    # saturated pairs only bound the rate; they are used only when nothing else is left
    if (~saturated).any():
        return float(np.mean(rates[~saturated]))
    return float(np.mean(rates)) if rates.size else float("nan")


def lyapunov_method3(op: Operator, inputs, eps: float = 1e-8, T: int = 500, seed: int = 0) -> float:
    """Mean over probes of ``(1/T) ln(|x_T - x'_T| / eps)``, skipping saturated pairs."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    rates, _, saturated, _ = _method3(op, inputs, eps, T, LO, HI, seed)
    if saturated.all():
        raise NumericalError("all twin separations saturated")
    return _gamma3(rates, saturated)


def _attractor_phase(op, inputs, cfg, ok_idx):
    """Majority attractor kind over a few non-divergent probes."""
    picks = ok_idx[: cfg.attractor_probes]
    kinds = []
    for i in picks:
        traj = iterate(op, inputs[i], cfg.burn_in + 2 * cfg.max_period, cfg.lo, cfg.hi, burn_in=cfg.burn_in)
        if isinstance(op, LogisticStack) and op.depth > 1 and not traj.terminated_early:
            # recurrence of the layer-resolved orbit: a g-cycle whose length divides the
            # depth is a fixed point of the stack but still a periodic attractor
            traj = iterate(LogisticStack(op.r, 1), traj.points[-1], 2 * cfg.max_period, cfg.lo, cfg.hi)
        try:
            rep = detect_attractor(traj, cfg.tol, cfg.max_period)
        except InsufficientDataError:
            continue
        kinds.append((rep.kind, rep.period))
    if not kinds:
        return Phase("periodic", None)
    (kind, period), _ = Counter(kinds).most_common(1)[0]
    if kind == "fixed_point":
        return Phase("order", 1)
    if kind == "cycle":
        return Phase("periodic", period)
    if kind == "divergent":
        return Phase("divergent")
    # no exact recurrence but nearby orbits do not separate: (pseudo)periodic
    return Phase("periodic", None)


def classify_phase(op: Operator, inputs, config: StabilityConfig | None = None) -> StabilityReport:
    """Run all estimators on ``op`` from ``inputs`` and assign a phase.

    Divergent if more than half the probes overflow; Chaotic if the median twin
    separation exceeds ``order_threshold * max(1, amplitude)``; otherwise Order or
    Periodic(L) from the attractor recurrence.
    """
    cfg = config or StabilityConfig()
    x0 = _probe_matrix(op, inputs)
    n = x0.shape[0]
    window = cfg.window_size

    logs, means, final, status = _window_statistics(op, x0, cfg.T, window, cfg.lo, cfg.hi)
    ok = status != OVERFLOW
    n_div = int(n - ok.sum())
    if ok.any():
        g1 = float(np.mean(logs[ok]))
        mean_logs = _log_norms(op, means[ok])
        norm_at_mean = float(np.exp(np.mean(mean_logs)))
        amplitude = float(np.mean(np.sqrt(np.sum(final[ok] ** 2, axis=1))))
    else:
        g1, norm_at_mean, amplitude = float("nan"), float("nan"), float("nan")

    rates, sep, saturated, diverged = _method3(op, x0, cfg.eps, cfg.T, cfg.lo, cfg.hi, cfg.seed)
    g3 = _gamma3(rates, saturated)
    med_sep = float(np.median(sep))

    ok_idx = np.flatnonzero(ok)
    if n_div * 2 > n:
        phase = Phase("divergent")
    elif med_sep > cfg.order_threshold * max(1.0, amplitude):
        phase = Phase("chaotic")
    else:
        phase = _attractor_phase(op, x0, cfg, ok_idx)

    g2 = None
    if cfg.run_method2 and ok.any():
        g2 = lyapunov_method2(op, x0[ok_idx[0]], cfg.method2_T, cfg.lo, cfg.hi)

    rho = None
    if cfg.spectral and ok.any():
        from .operators import jacobian

        try:
            rho = spectral_radius(jacobian(op, means[ok_idx[0]]))
        except ConvergenceError as exc:
            log.warning("spectral radius at mean: %s", exc)

    return StabilityReport(
        gamma_method1=g1,
        gamma_method2=g2,
        gamma_method3=g3,
        jac_norm_geomean=float(np.exp(g1)),
        jac_norm_at_mean=norm_at_mean,
        spectral_radius_at_mean=rho,
        phase=phase,
        sample_count=n,
        divergent_count=n_div,
        saturated_count=int(saturated.sum()),
        median_separation=med_sep,
        attractor_amplitude=amplitude,
        T=cfg.T,
        method2_valid=g2 is not None,
    )


# -- parameter scans ---------------------------------------------------------

SCAN_COLUMNS = [
    "param",
    "gamma1",
    "gamma2",
    "gamma3",
    "jac_norm_geomean",
    "spectral_radius",
    "phase",
    "L",
    "divergent_fraction",
    "jac_norm_at_mean",
    "median_separation",
]


def first_crossing(params, values, level: float = 1.0):
    """First grid interval where ``values`` goes from below ``level`` to at/above it.

    Returns ``(lo, hi, interpolated)`` or ``None``.
    """
    p = np.asarray(params, dtype=float)
    v = np.asarray(values, dtype=float)
    for i in range(len(v) - 1):
        if v[i] < level <= v[i + 1]:
            frac = (level - v[i]) / (v[i + 1] - v[i])
            return float(p[i]), float(p[i + 1]), float(p[i] + frac * (p[i + 1] - p[i]))
    return None


@dataclass
class ScanResult:
    params: list
    reports: list = field(repr=False)

    @property
    def norm_crossing(self):
        return first_crossing(self.params, [r.jac_norm_geomean for r in self.reports])

    @property
    def mean_norm_crossing(self):
        return first_crossing(self.params, [r.jac_norm_at_mean for r in self.reports])

    @property
    def chaos_onset(self) -> Optional[float]:
        """First grid parameter labeled Chaotic after a non-chaotic one."""
        seen_order = False
        for p, r in zip(self.params, self.reports):
            if r.phase.kind == "chaotic" and seen_order:
                return float(p)
            if r.phase.kind != "chaotic":
                seen_order = True
        return None

    def rows(self):
        for p, r in zip(self.params, self.reports):
            yield {
                "param": p,
                "gamma1": r.gamma_method1,
                "gamma2": r.gamma_method2 if r.gamma_method2 is not None else "",
                "gamma3": r.gamma_method3,
                "jac_norm_geomean": r.jac_norm_geomean,
                "spectral_radius": r.spectral_radius_at_mean if r.spectral_radius_at_mean is not None else "",
                "phase": str(r.phase),
                "L": r.phase.period if r.phase.period is not None else "",
                "divergent_fraction": r.divergent_fraction,
                "jac_norm_at_mean": r.jac_norm_at_mean,
                "median_separation": r.median_separation,
            }

    def write_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.DictWriter(fh, fieldnames=SCAN_COLUMNS)
            w.writeheader()
            for row in self.rows():
                w.writerow(row)


def edge_crossing_scan(
    family: Callable[[float], Operator],
    grid: Sequence[float],
    inputs,
    config: StabilityConfig | None = None,
    threads: int = 1,
) -> ScanResult:
    """Stability report at every grid parameter of an operator family.

    ``inputs`` is either a probe array shared by all grid points or a callable
    ``param -> probes``. Results are ordered by the (sorted) grid regardless of
    ``threads``.
    """
    grid = [float(g) for g in grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted")
    cfg = config or StabilityConfig()

    def one(p):
        probes = inputs(p) if callable(inputs) else inputs
        return classify_phase(family(p), probes, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(one, grid))
    else:
        reports = [one(p) for p in grid]
    return ScanResult(grid, reports)


def phase_ordering(params, reports) -> dict:
    """Summary used for weight-scaling sweeps: FixedPoint -> Periodic -> Chaotic in ``params``."""
    kinds = [(p, r.phase.kind) for p, r in zip(params, reports)]
    fixed = [p for p, k in kinds if k == "order"]
    chaotic = [p for p, k in kinds if k == "chaotic"]
    last_fixed = max(fixed) if fixed else None
    first_chaos = min(chaotic) if chaotic else None
    between = [
        p
        for p, k in kinds
        if k == "periodic"
        and (last_fixed is None or p > last_fixed)
        and (first_chaos is None or p < first_chaos)
    ]
    ordered = last_fixed is not None and first_chaos is not None and last_fixed < first_chaos
    return {
        "last_fixed": last_fixed,
        "first_chaotic": first_chaos,
        "periodic_between": between,
        "ordered": ordered,
        "three_phase": ordered and bool(between),
    }
