"""Dense spectral utilities and the random-matrix circular-law experiments.

Eigenvalues of real nonsymmetric matrices are computed by balancing, Householder
reduction to upper Hessenberg form and Francis double-shift QR iteration
(eigenvalues only, no Schur vectors).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConvergenceError, NonFiniteError

_RADIX = 2.0


@numba.njit(cache=True)
def _balance(a):
    # Parlett-Reinsch balancing by powers of two (exact in binary floating point)
    n = a.shape[0]
    sqrdx = _RADIX * _RADIX
    done = False
    while not done:
        done = True
        for i in range(n):
            c = 0.0
            r = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j, i])
                    r += abs(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / _RADIX
                f = 1.0
                s = c + r
                while c < g:
                    f *= _RADIX
                    c *= sqrdx
                g = r * _RADIX
                while c > g:
                    f /= _RADIX
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    for j in range(n):
                        a[i, j] *= g
                    for j in range(n):
                        a[j, i] *= f


@numba.njit(cache=True)
def _hessenberg(a):
    n = a.shape[0]
    v = np.empty(n)
    for k in range(n - 2):
        alpha = 0.0
        for i in range(k + 1, n):
            alpha += a[i, k] * a[i, k]
        alpha = np.sqrt(alpha)
        if alpha == 0.0:
            continue
        if a[k + 1, k] > 0:
            alpha = -alpha
        vnorm2 = 0.0
        for i in range(k + 1, n):
            v[i] = a[i, k]
        v[k + 1] -= alpha
        for i in range(k + 1, n):
            vnorm2 += v[i] * v[i]
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        # A <- (I - beta v v^T) A
        for j in range(k, n):
            s = 0.0
            for i in range(k + 1, n):
                s += v[i] * a[i, j]
            s *= beta
            for i in range(k + 1, n):
                a[i, j] -= s * v[i]
        # A <- A (I - beta v v^T)
        for i in range(n):
            s = 0.0
            for j in range(k + 1, n):
                s += a[i, j] * v[j]
            s *= beta
            for j in range(k + 1, n):
                a[i, j] -= s * v[j]
        for i in range(k + 2, n):
            a[i, k] = 0.0


@numba.njit(cache=True)
def _hqr(h, wr, wi, max_iter):
    """Francis double-shift QR on an upper Hessenberg matrix (1-based padded copy).

    Returns the total number of QR sweeps, or -1 if ``max_iter`` was exceeded.
    """
    n = h.shape[0]
    a = np.zeros((n + 1, n + 1))
    a[1:, 1:] = h
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += abs(a[i, j])
    nn = n
    t = 0.0
    total = 0
    p = q = r = 0.0
    x = y = z = w = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1, ll - 1]) + abs(a[ll, ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll, ll - 1]) + s == s:
                    a[ll, ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn, nn]
            if l == nn:
                wr[nn - 1] = x + t
                wi[nn - 1] = 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = np.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + (z if p >= 0.0 else -z)
                    wr[nn - 2] = x + z
                    wr[nn - 1] = x + z
                    if z != 0.0:
                        wr[nn - 1] = x - w / z
                    wi[nn - 2] = 0.0
                    wi[nn - 1] = 0.0
                else:
                    wr[nn - 2] = x + p
                    wr[nn - 1] = x + p
                    wi[nn - 2] = -z
                    wi[nn - 1] = z
                nn -= 2
                break
            if total >= max_iter:
                return -1
            if its > 0 and its % 10 == 0:
                # exceptional shift
                t += x
                for i in range(1, nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                x = 0.75 * s
                y = x
                w = -0.4375 * s * s
            its += 1
            total += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = 0.0
                    if k != nn - 1:
                        r = a[k + 2, k - 1]
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = np.sqrt(p * p + q * q + r * r)
                if p < 0.0:
                    s = -s
                if s != 0.0:
                    if k == m:
                        if l != m:
                            a[k, k - 1] = -a[k, k - 1]
                    else:
                        a[k, k - 1] = -s * x
                    p += s
                    x = p / s
                    y = q / s
                    z = r / s
                    q /= p
                    r /= p
                    for j in range(k, nn + 1):
                        p = a[k, j] + q * a[k + 1, j]
                        if k != nn - 1:
                            p += r * a[k + 2, j]
                            a[k + 2, j] -= p * z
                        a[k + 1, j] -= p * y
                        a[k, j] -= p * x
                    mmin = nn if nn < k + 3 else k + 3
                    for i in range(l, mmin + 1):
                        p = x * a[i, k] + y * a[i, k + 1]
                        if k != nn - 1:
                            p += z * a[i, k + 2]
                            a[i, k + 2] -= p * r
                        a[i, k + 1] -= p * q
                        a[i, k] -= p
    return total


def eigvals(m) -> np.ndarray:
    """All eigenvalues of a real square matrix, as a complex array (unordered)."""
    a = np.array(m, dtype=np.float64, order="C", copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix has non-finite entries")
    n = a.shape[0]
    if n == 0:
        return np.empty(0, dtype=complex)
    # bring entries to O(1) with an exact power-of-two factor; QR deflation tests
    # misbehave near the under/overflow limits
    big = float(np.max(np.abs(a)))
    if big == 0.0:
        return np.zeros(n, dtype=complex)
    e = math.frexp(big)[1]
    a = np.ldexp(a, -e)
    _balance(a)
    _hessenberg(a)
    wr = np.zeros(n)
    wi = np.zeros(n)
    cap = 30 * max(n, 10)
    sweeps = _hqr(a, wr, wi, cap)
    if sweeps < 0:
        raise ConvergenceError(f"QR iteration did not converge within {cap} sweeps (n={n})")
    return np.ldexp(wr, e) + 1j * np.ldexp(wi, e)


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus of a real square matrix."""
    ev = eigvals(m)
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def frobenius_norm(m) -> float:
    m = np.asarray(m, dtype=np.float64)
    big = float(np.max(np.abs(m))) if m.size else 0.0
    if big == 0.0 or not np.isfinite(big):
        return big
    # scaled sum of squares (no under/overflow of the squares)
    e = math.frexp(big)[1]
    s = np.ldexp(m, -e)
    return math.ldexp(float(np.sqrt(np.sum(s * s))), e)


@dataclass
class SpectralSummary:
    frobenius_norm: float
    normalized_norm: float
    spectral_radius: float
    eigenvalues: np.ndarray

    @property
    def eigenvalue_moduli(self) -> np.ndarray:
        return np.sort(np.abs(self.eigenvalues))

    @classmethod
    def of(cls, m) -> "SpectralSummary":
        m = np.asarray(m, dtype=np.float64)
        fro = frobenius_norm(m)
        ev = eigvals(m)
        return cls(fro, fro / np.sqrt(m.shape[0]), float(np.max(np.abs(ev))), ev)


def disk_cdf_deviation(moduli) -> float:
    """Sup distance between the empirical CDF of ``|lambda|`` and the uniform-disk CDF ``s^2``."""
    s = np.sort(np.asarray(moduli, dtype=np.float64))
    n = s.size
    target = np.minimum(s, 1.0) ** 2
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(np.abs(upper - target)), np.max(np.abs(lower - target))))


@dataclass
class CircularLawResult:
    N: int
    scale: float
    rho: np.ndarray
    norm_normalized: np.ndarray
    eigenvalues: list = field(repr=False)  # one complex array per trial

    @property
    def moduli(self) -> list:
        return [np.abs(ev) for ev in self.eigenvalues]

    @property
    def mean_rho(self) -> float:
        return float(np.mean(self.rho))

    @property
    def std_rho(self) -> float:
        return float(np.std(self.rho, ddof=1)) if self.rho.size > 1 else float("nan")

    @property
    def mean_norm(self) -> float:
        return float(np.mean(self.norm_normalized))

    @property
    def gap(self) -> np.ndarray:
        return self.rho - self.norm_normalized

    @property
    def cdf_deviation(self) -> float:
        # radii are compared against the unit disk after undoing the scale
        return disk_cdf_deviation(np.concatenate(self.moduli) / self.scale)


def _trial_seeds(seed, trials):
    return np.random.SeedSequence(seed).spawn(trials)


def circular_law_experiment(N: int, trials: int, seed: int = 0, scale: float = 1.0) -> CircularLawResult:
    """Spectra of ``trials`` matrices with i.i.d. N(0, scale^2/N) entries."""
    rho, norms, evs = [], [], []
    for ss in _trial_seeds(seed, trials):
        rng = np.random.default_rng(ss)
        m = rng.normal(0.0, scale / np.sqrt(N), size=(N, N))
        summary = SpectralSummary.of(m)
        rho.append(summary.spectral_radius)
        norms.append(summary.normalized_norm)
        evs.append(summary.eigenvalues)
    return CircularLawResult(N, scale, np.array(rho), np.array(norms), evs)


def rho_gap_vs_dimension(N_list, trials: int, seed: int = 0) -> dict:
    """Spectral radius spread per dimension for matrices rescaled to unit normalized norm.

    Returns ``{N: array of rho}``; each matrix is divided by its own normalized Frobenius
    norm so that ``rho - 1`` is exactly the gap between the two stability measures.
    """
    out = {}
    root = np.random.SeedSequence(seed)
    for N, ss in zip(N_list, root.spawn(len(N_list))):
        vals = []
        for ts in ss.spawn(trials):
            rng = np.random.default_rng(ts)
            m = rng.normal(0.0, 1.0 / np.sqrt(N), size=(N, N))
            m /= frobenius_norm(m) / np.sqrt(N)
            vals.append(spectral_radius(m))
        out[N] = np.array(vals)
    return out
