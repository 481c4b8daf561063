import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgechaos.errors import NonFiniteError
from edgechaos.spectra import (
    SpectralSummary,
    circular_law_experiment,
    disk_cdf_deviation,
    eigvals,
    frobenius_norm,
    rho_gap_vs_dimension,
    spectral_radius,
)


def _sorted(ev):
    return np.array(sorted(ev, key=lambda z: (round(z.real, 8), round(z.imag, 8))))


def test_frobenius_examples():
    assert frobenius_norm(np.eye(4)) == 2.0
    assert frobenius_norm(np.zeros((3, 3))) == 0.0
    assert frobenius_norm([[3.0, 4.0], [0.0, 0.0]]) == 5.0


def test_radius_examples():
    assert spectral_radius(np.diag([0.5, -0.25])) == pytest.approx(0.5, abs=1e-15)
    th = 0.7
    rot = 0.9 * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    assert spectral_radius(rot) == pytest.approx(0.9, rel=1e-12)
    # companion matrix of z^3 - 8
    comp = np.array([[0.0, 0.0, 8.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    roots = np.roots([1, 0, 0, -8])
    np.testing.assert_allclose(_sorted(eigvals(comp)), _sorted(roots), atol=1e-10)
    assert spectral_radius(comp) == pytest.approx(2.0, rel=1e-12)


def test_one_by_one_and_empty():
    assert spectral_radius([[-3.5]]) == 3.5
    assert eigvals(np.zeros((0, 0))).size == 0


def test_nonfinite_rejected():
    with pytest.raises(NonFiniteError):
        eigvals([[1.0, np.inf], [0.0, 1.0]])
    with pytest.raises(ValueError):
        eigvals(np.zeros((2, 3)))


@given(st.integers(0, 100_000), st.sampled_from([2, 3]))
def test_small_matrices_vs_characteristic_polynomial(seed, n):
    m = np.random.default_rng(seed).normal(size=(n, n))
    roots = np.roots(np.poly(m))
    np.testing.assert_allclose(np.sort(np.abs(eigvals(m))), np.sort(np.abs(roots)), atol=1e-10)


@given(st.integers(0, 100_000), st.integers(1, 40))
def test_against_lapack(seed, n):
    m = np.random.default_rng(seed).normal(size=(n, n))
    ours = np.sort_complex(eigvals(m))
    ref = np.sort_complex(np.linalg.eigvals(m))
    assert np.max(np.abs(np.sort(np.abs(ours)) - np.sort(np.abs(ref)))) < 1e-9 * max(1.0, np.abs(ref).max())
    assert abs(np.sum(ours) - np.trace(m)) < 1e-9 * n


@given(st.integers(0, 100_000), st.integers(2, 30))
def test_symmetric_cross_check(seed, n):
    a = np.random.default_rng(seed).normal(size=(n, n))
    s = a + a.T
    assert spectral_radius(s) == pytest.approx(np.max(np.abs(np.linalg.eigvalsh(s))), rel=1e-9)


@given(st.integers(0, 100_000), st.integers(1, 25), st.floats(-5, 5))
def test_norm_bound_and_homogeneity(seed, n, c):
    m = np.random.default_rng(seed).normal(size=(n, n))
    rho = spectral_radius(m)
    assert rho <= frobenius_norm(m) * (1 + 1e-12)
    assert spectral_radius(c * m) == pytest.approx(abs(c) * rho, rel=1e-9, abs=1e-12)
    assert frobenius_norm(c * m) == pytest.approx(abs(c) * frobenius_norm(m), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("c", [1e-300, 1e-216, 1e250, 1e300])
def test_extreme_scales(c):
    m = np.random.default_rng(0).normal(size=(6, 6))
    assert spectral_radius(c * m) == pytest.approx(c * spectral_radius(m), rel=1e-9)
    assert frobenius_norm(c * m) == pytest.approx(c * frobenius_norm(m), rel=1e-12)


def test_hard_cases():
    # defective Jordan block, permutation (all eigenvalues on the unit circle), graded matrix
    j = np.diag(np.ones(5)) + np.diag(np.ones(4), 1)
    assert spectral_radius(j) == pytest.approx(1.0, abs=1e-2)
    p = np.roll(np.eye(7), 1, axis=0)
    assert spectral_radius(p) == pytest.approx(1.0, abs=1e-12)
    g = np.diag(10.0 ** np.arange(-6, 6)) + np.triu(np.ones((12, 12)), 1)
    np.testing.assert_allclose(np.sort(np.abs(eigvals(g))), 10.0 ** np.arange(-6, 6), rtol=1e-6)


def test_summary_invariants():
    m = np.random.default_rng(0).normal(size=(30, 30))
    s = SpectralSummary.of(m)
    assert s.spectral_radius == s.eigenvalue_moduli.max()
    assert s.spectral_radius <= s.frobenius_norm
    assert s.normalized_norm == pytest.approx(s.frobenius_norm / np.sqrt(30))


def test_disk_cdf_deviation():
    # exact quantiles of the disk distribution give deviation 1/n
    n = 1000
    s = np.sqrt((np.arange(n) + 0.5) / n)
    assert disk_cdf_deviation(s) == pytest.approx(0.5 / n)
    assert disk_cdf_deviation(np.zeros(10)) == pytest.approx(1.0)


def test_circular_law_small():
    res = circular_law_experiment(200, 3, seed=1)
    assert 0.9 < res.mean_rho < 1.1
    assert 0.97 < res.mean_norm < 1.03
    half = circular_law_experiment(200, 3, seed=1, scale=0.5)
    assert half.mean_rho == pytest.approx(0.5 * res.mean_rho, rel=1e-9)
    one = circular_law_experiment(50, 1, seed=0)
    assert np.isnan(one.std_rho)


def test_rho_gap_vs_dimension():
    out = rho_gap_vs_dimension([1, 10, 300], trials=12, seed=0)
    np.testing.assert_allclose(out[1], 1.0, rtol=1e-15)
    assert np.std(out[10]) > np.std(out[300])
