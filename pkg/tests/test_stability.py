import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgechaos.errors import NumericalError
from edgechaos.operators import LogisticStack, linear_map, make_mlp, make_random_tanh, scale_weights
from edgechaos.stability import (
    StabilityConfig,
    classify_phase,
    edge_crossing_scan,
    first_crossing,
    jac_norm_geomean,
    lyapunov_method1,
    lyapunov_method2,
    lyapunov_method3,
    phase_ordering,
)


@pytest.fixture(scope="module")
def probes01():
    return np.random.default_rng(0).uniform(0.0, 1.0, (100, 1))


def brute_force_lyapunov(r, n=200_000, x=0.123):
    # long single-orbit average of ln|g'(x)|
    total = 0.0
    for _ in range(1000):
        x = r * x * (1 - x)
    for _ in range(n):
        total += np.log(abs(r * (1 - 2 * x)))
        x = r * x * (1 - x)
    return total / n


def test_norm_fixed_point(probes01):
    assert jac_norm_geomean(LogisticStack(2.5, 1), probes01) == pytest.approx(0.5, abs=1e-9)


def test_norm_linear_exact():
    for c in (0.3, -1.7, 1.0):
        x = np.random.default_rng(0).normal(size=(10, 1))
        assert jac_norm_geomean(linear_map([[c]]), x, T=5) == pytest.approx(abs(c), rel=1e-12)


def test_norm_r4_vs_oracle(probes01):
    oracle = brute_force_lyapunov(4.0)
    assert abs(oracle - np.log(2)) < 0.01
    assert jac_norm_geomean(LogisticStack(4.0, 1), probes01) == pytest.approx(2.0, rel=0.02)


def test_method1_identity_and_definition(probes01):
    assert lyapunov_method1(linear_map(np.eye(3)), np.ones((4, 3))) == 0.0
    op = LogisticStack(3.3, 1)
    rep = classify_phase(op, probes01, StabilityConfig(run_method2=False, spectral=False))
    assert abs(rep.gamma_method1 - np.log(rep.jac_norm_geomean)) < 1e-15


def test_method1_near_onset(probes01):
    assert abs(lyapunov_method1(LogisticStack(3.57, 1), probes01)) < 0.05


def test_method2_linear():
    for c in (0.5, -1.3):
        assert lyapunov_method2(linear_map([[c]]), [1.0], T=20) == pytest.approx(np.log(abs(c)), abs=1e-12)
    assert lyapunov_method2(linear_map(np.diag([0.9, -0.4])), [1.0, 1.0], T=40) == pytest.approx(np.log(0.9), abs=1e-12)


@given(st.integers(0, 10_000), st.integers(2, 6), st.integers(4, 60))
def test_method2_linear_matches_spectral_radius(seed, n, T):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    a /= np.max(np.abs(np.linalg.eigvals(a))) * 1.05  # keep orbits inside the stop thresholds
    g2 = lyapunov_method2(linear_map(a), rng.normal(size=n), T=T)
    # the product of tau identical Jacobians has spectral radius rho^tau
    assert g2 == pytest.approx(np.log(np.max(np.abs(np.linalg.eigvals(a)))), abs=1e-9)


def test_method2_random_tanh_agrees_with_method1():
    op = make_random_tanh(50, 0.5, seed=0)
    x = np.random.default_rng(1).uniform(-1, 1, (20, 50))
    g2 = lyapunov_method2(op, x[0], T=200)
    assert g2 is not None
    assert abs(g2 - lyapunov_method1(op, x)) < 0.1


def test_method2_divergent_is_none():
    assert lyapunov_method2(linear_map([[3.0]]), [1.0], T=200) is None


def test_method3_linear_contraction():
    assert lyapunov_method3(linear_map([[0.5]]), [[1.0]], T=30) == pytest.approx(np.log(0.5), abs=1e-6)


def test_method3_saturated_error():
    # a contracting fixed point collapses both twins onto the same float
    with pytest.raises(NumericalError):
        lyapunov_method3(LogisticStack(2.5, 1), [[0.3]], T=500)
    with pytest.raises(ValueError):
        lyapunov_method3(LogisticStack(2.5, 1), [[0.3]], eps=0.0)


def test_method3_chaotic_matches_method1(probes01):
    # short horizon: the separation must not yet saturate at the attractor size
    op = LogisticStack(3.8, 1)
    g1 = lyapunov_method1(op, probes01)
    g3 = lyapunov_method3(op, probes01, T=30)
    assert g3 > 0 and abs(g3 - g1) < 0.1


@pytest.mark.parametrize("r", [2.5, 3.2, 3.5, 3.8])
def test_method3_eps_halving(r, probes01):
    a = lyapunov_method3(LogisticStack(r, 1), probes01, eps=1e-8, T=20)
    b = lyapunov_method3(LogisticStack(r, 1), probes01, eps=5e-9, T=20)
    assert abs(a - b) < 0.02


@pytest.mark.parametrize(
    "r,label,below",
    [(2.5, "Order", True), (3.2, "Periodic(2)", True), (3.8, "Chaotic", False)],
)
def test_classify_depth20(r, label, below, probes01):
    rep = classify_phase(LogisticStack(r, 20), probes01, StabilityConfig(run_method2=False))
    assert str(rep.phase) == label
    assert (rep.jac_norm_geomean < 1) == below


def test_classify_divergent():
    x = np.random.default_rng(0).normal(size=(10, 2))
    rep = classify_phase(linear_map(2.0 * np.eye(2)), x)
    assert str(rep.phase) == "Divergent" and rep.divergent_fraction == 1.0
    assert np.isnan(rep.jac_norm_geomean)


def test_report_invariants(probes01):
    for r in (2.8, 3.3, 3.5, 3.6, 3.9):
        rep = classify_phase(LogisticStack(r, 1), probes01, StabilityConfig(run_method2=False))
        assert rep.gamma_method1 == pytest.approx(np.log(rep.jac_norm_geomean), abs=1e-15)
        if rep.phase.kind == "chaotic":
            assert rep.jac_norm_geomean > 1 or rep.gamma_method3 > 0


def test_monotone_onset(probes01):
    cfg = StabilityConfig(run_method2=False, spectral=False)
    for r in np.arange(2.5, 3.57, 0.05):
        assert classify_phase(LogisticStack(r, 1), probes01, cfg).phase.kind != "chaotic", r
    for r in (3.59, 3.6, 3.61, 3.62):
        assert classify_phase(LogisticStack(r, 1), probes01, cfg).phase.kind == "chaotic", r


def test_phase_invariant_under_reordering_and_subsets(probes01):
    cfg = StabilityConfig(run_method2=False, spectral=False)
    rng = np.random.default_rng(3)
    for r in (2.5, 3.2, 3.5, 3.8):
        op = LogisticStack(r, 1)
        base = str(classify_phase(op, probes01, cfg).phase)
        assert str(classify_phase(op, probes01[::-1], cfg).phase) == base
        hits = sum(
            str(classify_phase(op, probes01[rng.choice(100, 80, replace=False)], cfg).phase) == base for _ in range(10)
        )
        assert hits >= 8


def test_first_crossing():
    assert first_crossing([0, 1, 2, 3], [0.5, 0.8, 1.2, 0.9]) == (1.0, 2.0, 1.5)
    assert first_crossing([0, 1], [0.5, 0.6]) is None


def test_scan_threads_identical(probes01):
    grid = np.arange(3.4, 3.7, 0.05)
    cfg = StabilityConfig(run_method2=False, spectral=False, T=200)
    a = edge_crossing_scan(lambda r: LogisticStack(r, 1), grid, probes01, cfg, threads=1)
    b = edge_crossing_scan(lambda r: LogisticStack(r, 1), grid, probes01, cfg, threads=3)
    assert list(a.rows()) == list(b.rows())
    with pytest.raises(ValueError):
        edge_crossing_scan(lambda r: LogisticStack(r, 1), grid[::-1], probes01, cfg)


def test_scan_csv(tmp_path, probes01):
    cfg = StabilityConfig(spectral=True, T=100)
    res = edge_crossing_scan(lambda r: LogisticStack(r, 1), [2.5, 3.9], probes01[:10], cfg)
    path = tmp_path / "s.csv"
    res.write_csv(path, ["hello"])
    lines = path.read_text().splitlines()
    assert lines[1].startswith("param,gamma1,gamma2,gamma3,jac_norm_geomean,spectral_radius,phase,L,divergent_fraction")
    assert len(lines) == 4


def test_random_tanh_order_and_chaos():
    x = np.random.default_rng(0).uniform(-1, 1, (30, 100))
    cfg = StabilityConfig(run_method2=False, spectral=False)
    low = classify_phase(make_random_tanh(100, 0.5, seed=0), x, cfg)
    high = classify_phase(make_random_tanh(100, 2.5, seed=0), x, cfg)
    assert str(low.phase) == "Order" and low.jac_norm_geomean < 1
    assert str(high.phase) == "Chaotic" and high.jac_norm_geomean > 1


def test_phase_ordering_helper():
    class R:
        def __init__(self, kind):
            from edgechaos.stability import Phase

            self.phase = Phase(kind)

    out = phase_ordering([0.1, 0.2, 0.3, 0.4], [R("order"), R("periodic"), R("periodic"), R("chaotic")])
    assert out["ordered"] and out["three_phase"] and out["periodic_between"] == [0.2, 0.3]
    out = phase_ordering([0.1, 0.2], [R("chaotic"), R("order")])
    assert not out["ordered"]


def test_weight_scaling_sequence_on_mlp():
    # bias keeps the scaled map away from the trivial origin fixed point
    op = make_mlp([40, 10, 40], activation="tanh", gain=1.0, bias_scale=0.3, seed=1)
    x = np.random.default_rng(0).uniform(0, 1, (20, 40))
    cfg = StabilityConfig(run_method2=False, spectral=False, max_period=256)
    low = classify_phase(scale_weights(op, 0.2), x, cfg)
    high = classify_phase(scale_weights(op, 4.0), x, cfg)
    assert str(low.phase) == "Order"
    assert str(high.phase) == "Chaotic"
