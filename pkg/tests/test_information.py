import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgechaos.errors import InsufficientDataError
from edgechaos.information import BinSpec, entropy, joint_histogram, logistic_mi_sweep, mi_from_histogram, mutual_information


def test_binspec():
    s = BinSpec()
    assert s.width == pytest.approx(0.002)
    idx, ok = s.index(np.array([0.0, 0.5, 1.0, 1.0001, -0.1]))
    assert list(idx[:3]) == [0, 250, 499]
    assert list(ok) == [True, True, True, False, False]
    with pytest.raises(ValueError):
        BinSpec(1.0, 0.0)
    with pytest.raises(ValueError):
        BinSpec(bins=0)


def test_single_pair():
    h = joint_histogram([[0.5, 0.5]])
    assert h.counts.sum() == 1 and h.counts[250, 250] == 1 and h.dropped == 0


def test_drops_counted():
    h = joint_histogram([[0.5, 0.5], [1.5, 0.2], [0.1, -0.2]])
    assert h.total == 1 and h.dropped == 2


def test_empty_rejected():
    with pytest.raises(InsufficientDataError):
        joint_histogram(np.zeros((0, 2)))
    with pytest.raises(InsufficientDataError):
        mutual_information(np.zeros((0, 2)))


def test_uniform_counts_concentrate():
    u = np.random.default_rng(0).uniform(size=(1_000_000, 2))
    h = joint_histogram(u)
    assert h.counts.max() <= 4 + 5 * 2 + 2  # Poisson(4): mean + 5 sigma, plus the max-of-250k slack
    assert h.total == 1_000_000


def test_diagonal_only():
    x = np.random.default_rng(1).uniform(size=5000)
    h = joint_histogram(np.column_stack([x, x]))
    off = h.counts - np.diag(np.diag(h.counts))
    assert off.sum() == 0


def test_identity_mi():
    x = np.random.default_rng(2).uniform(size=400_000)
    assert mutual_information(np.column_stack([x, x])) == pytest.approx(np.log2(500), abs=0.05)


def test_constant_mi_zero():
    x = np.random.default_rng(3).uniform(size=10_000)
    assert mutual_information(np.column_stack([x, np.full_like(x, 0.3)])) == 0.0


def test_independent_mi_small():
    u = np.random.default_rng(4).uniform(size=(4_000_000, 2))
    assert mutual_information(u) < 0.05


def test_shuffle_null_at_default_ratio():
    # 4e6 pairs over 500 bins per axis, 16 per joint cell on average
    x = np.random.default_rng(5).uniform(size=4_000_000)
    y = 3.9 * x * (1 - x)
    assert mutual_information(np.column_stack([x, y])) > 5
    perm = np.random.default_rng(6).permutation(y)
    # plug-in bias is about (bins-1)^2 / (2 n ln 2) = 0.045 bits here
    assert mutual_information(np.column_stack([x, perm])) < 0.05


def test_small_sample_warns():
    with pytest.warns(UserWarning):
        mutual_information(np.random.default_rng(0).uniform(size=(100, 2)))


def test_entropy_convention():
    assert entropy([0, 4, 0, 4]) == pytest.approx(1.0)
    assert entropy([7]) == 0.0
    with pytest.raises(InsufficientDataError):
        entropy([0, 0])


@given(st.integers(0, 10_000), st.integers(50, 2000), st.integers(2, 40))
def test_mi_bounds(seed, n, bins):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=n)
    y = np.clip(x + rng.normal(0, 0.1, n), 0, 1)
    spec = BinSpec(bins=bins)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        i = mutual_information(np.column_stack([x, y]), spec)
    h = joint_histogram(np.column_stack([x, y]), spec)
    assert 0.0 <= i <= min(entropy(h.counts.sum(1)), entropy(h.counts.sum(0))) + 1e-12
    assert i <= np.log2(bins) + 1e-12


@given(st.integers(0, 10_000))
def test_mi_bin_relabeling_invariant(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=3000)
    y = x**2
    h = joint_histogram(np.column_stack([x, y]), BinSpec(bins=30))
    p = rng.permutation(30)
    h2 = type(h)(h.counts[p][:, p], h.dropped)
    assert mi_from_histogram(h2) == pytest.approx(mi_from_histogram(h), abs=1e-12)


def test_sweep_shapes_and_determinism(tmp_path):
    grid = [3.0, 3.2, 3.9]
    a = logistic_mi_sweep(grid, k=2, samples=20_000, seed=1, depth=2, shard_size=7_000)
    b = logistic_mi_sweep(grid, k=2, samples=20_000, seed=1, depth=2, shard_size=7_000, threads=2)
    np.testing.assert_array_equal(a.mi_x0_xk, b.mi_x0_xk)
    assert a.dropped.sum() == 0
    path = tmp_path / "mi.csv"
    a.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,I_x0_x1_bits,I_x0_xk_bits,k,samples,dropped" and len(lines) == 4


def test_sweep_two_state_output():
    c = logistic_mi_sweep([3.2], k=10, samples=100_000, seed=0)
    # the output sits on a 2-cycle: at most one bit plus plug-in bias
    assert c.mi_x0_xk[0] <= 1.1


@pytest.mark.slow
def test_sweep_curves_correlated():
    grid = np.round(np.arange(2.8, 4.0 + 1e-9, 0.01), 2)
    c = logistic_mi_sweep(grid, samples=400_000, seed=0)
    rho = np.corrcoef(c.mi_x0_x1, c.mi_x0_xk)[0, 1]
    print(f"pearson(I(x0,x1), I(x0,x10)) over r in [2.8, 4.0] = {rho:.4f}")
    assert rho > 0.5
