"""Least-squares estimator tests.

`_exact_ls` is an independent rational-arithmetic solver (Fraction Gaussian
elimination on the normal equations); ols_fit must agree with it to float
precision.  Estimator tests lean on zero-noise panels where recovery must be
exact, plus invariance and calibration checks under real noise.
"""

from fractions import Fraction

import numpy as np
import pytest

from spatial_ab.design import (
    assign,
    cluster_design,
    global_design,
    individual_design,
)
from spatial_ab.dgp import (
    make_noise,
    make_param_dynamic_spec,
    make_param_static_spec,
    simulate,
)
from spatial_ab.inference import wald
from spatial_ab.lattice import build_clusters, build_layout, diagnostics
from spatial_ab.ols import (
    AteEstimate,
    DesignMismatchError,
    InsufficientDataError,
    RankDeficiencyError,
    carryover,
    ols_fit,
    tau_ols,
    tau_ols_dynamic,
)


def _exact_ls(Z, Y):
    """Least squares over the rationals: Gaussian elimination on Z'Z c = Z'Y."""
    n, q = len(Z), len(Z[0])
    G = [
        [sum(Fraction(Z[i][a]) * Fraction(Z[i][b]) for i in range(n))
         for b in range(q)]
        for a in range(q)
    ]
    r = [sum(Fraction(Z[i][a]) * Fraction(Y[i]) for i in range(n))
         for a in range(q)]
    for col in range(q):
        piv = max(range(col, q), key=lambda k: abs(G[k][col]))
        if G[piv][col] == 0:
            raise ZeroDivisionError("singular system")
        G[col], G[piv] = G[piv], G[col]
        r[col], r[piv] = r[piv], r[col]
        for k in range(q):
            if k != col and G[k][col] != 0:
                f = G[k][col] / G[col][col]
                for j in range(col, q):
                    G[k][j] -= f * G[col][j]
                r[k] -= f * r[col]
    return [float(r[k] / G[k][k]) for k in range(q)]


def test_ols_fit_matches_rational_solver():
    rng = np.random.default_rng(0)
    Z = rng.integers(-5, 6, size=(12, 3)).astype(float)
    Z[:, 0] = 1.0
    Y = rng.integers(-10, 11, size=12).astype(float)
    fit = ols_fit(Z, Y)
    want = _exact_ls(Z.tolist(), Y.tolist())
    assert np.allclose(fit.coef, want, atol=1e-10)
    # normal equations leave residuals orthogonal to the regressors
    assert np.allclose(Z.T @ fit.residuals, 0.0, atol=1e-9)
    assert np.allclose(fit.gram_inv @ (Z.T @ Z), np.eye(3), atol=1e-10)


def test_ols_fit_two_point_line():
    fit = ols_fit(np.array([[1.0, 0.0], [1.0, 1.0]]), np.array([1.0, 3.0]))
    assert np.allclose(fit.coef, [1.0, 2.0], atol=1e-12)
    assert np.allclose(fit.residuals, 0.0, atol=1e-12)


def test_ols_fit_names_collinear_columns():
    Z = np.ones((10, 3))
    Z[:, 1] = np.arange(10.0)
    Z[:, 2] = 2.0 * np.arange(10.0)  # duplicate direction
    with pytest.raises(RankDeficiencyError, match="slope"):
        ols_fit(Z, np.arange(10.0), names=["const", "slope", "slope2x"])


def test_ols_fit_requires_enough_rows():
    with pytest.raises(InsufficientDataError):
        ols_fit(np.ones((2, 3)), np.ones(2))


def test_estimate_rejects_negative_variance():
    with pytest.raises(ValueError):
        AteEstimate(tau_hat=1.0, var_hat=-1.0, design="global",
                    method="OLS", n_days=10)


# ---------------------------------------------------------------------------
# carryover


def test_carryover_small_horizons():
    beta = np.array([[5.0, 7.0]])
    B = np.array([[0.4, 0.9]])
    c = carryover(beta, B)
    assert np.allclose(c, [[7.0, 0.0]])  # final interval contributes nothing

    beta3 = np.array([[1.0, 2.0, 3.0]])
    B3 = np.array([[0.5, 0.25, 0.125]])
    c3 = carryover(beta3, B3)
    assert np.allclose(c3, [[2.0 + 0.25 * 3.0, 3.0, 0.0]])

    single = carryover(np.array([[9.0]]), np.array([[0.3]]))
    assert np.allclose(single, [[0.0]])


def test_carryover_matrix_path():
    betas = np.zeros((1, 3, 2))
    betas[0, 1] = [1.0, 2.0]
    betas[0, 2] = [3.0, 4.0]
    Bs = np.zeros((1, 3, 2, 2))
    Bs[0, 1] = [[1.0, 0.0], [2.0, 1.0]]
    c = carryover(betas, Bs)
    assert np.allclose(c[0, 2], [0.0, 0.0])
    assert np.allclose(c[0, 1], [3.0, 4.0])
    # c_first = beta_next + B_next' c_next = [1,2] + [3+8, 0+4]
    assert np.allclose(c[0, 0], [12.0, 6.0])

    with pytest.raises(ValueError):
        carryover(betas, np.zeros((1, 3, 3, 3)))


def test_carryover_scalar_equals_matrix_with_d1():
    rng = np.random.default_rng(5)
    beta = rng.normal(size=(4, 5))
    B = rng.uniform(0.2, 0.8, size=(4, 5))
    a = carryover(beta, B)
    b = carryover(beta[:, :, None], B[:, :, None, None])
    assert np.allclose(a, b[:, :, 0], atol=1e-14)


# ---------------------------------------------------------------------------
# static estimator


@pytest.fixture(scope="module")
def layout():
    return build_layout("square", 36)


@pytest.fixture(scope="module")
def partition(layout):
    return build_clusters(layout, 4)


@pytest.fixture(scope="module")
def diag(layout, partition):
    return diagnostics(layout, partition)


@pytest.fixture(scope="module")
def static_spec(layout):
    return make_param_static_spec(layout, s=3.0, rng=np.random.default_rng(2))


@pytest.fixture(scope="module")
def zero_noise(layout):
    return make_noise("zero", 0.0, layout)


def test_static_zero_noise_recovery(layout, partition, diag, static_spec,
                                    zero_noise):
    cases = [
        (global_design(), {}),
        (individual_design(), {}),
        (cluster_design(partition), {"diagnostics": diag}),
    ]
    for design, kw in cases:
        A = assign(layout, design, 50, 1, seed=3)
        p = simulate(static_spec, A, zero_noise, 50, seed=4)
        est = tau_ols(p, design, **kw)
        assert abs(est.tau_hat - static_spec.true_tau) < 1e-8
        assert est.design == design.spatial and est.method == "OLS"


def test_static_day_permutation_invariance(layout, static_spec):
    noise = make_noise("exponential", 0.5, layout)
    design = individual_design()
    A = assign(layout, design, 30, 1, seed=5)
    p = simulate(static_spec, A, noise, 30, seed=6)
    est = tau_ols(p, design)
    perm = np.random.default_rng(7).permutation(30)
    est_p = tau_ols(p.take_days(perm), design)
    assert est_p.tau_hat == pytest.approx(est.tau_hat, rel=1e-10)
    assert est_p.var_hat == pytest.approx(est.var_hat, rel=1e-10)


def test_static_location_shift_only_moves_intercept(layout, static_spec):
    noise = make_noise("exponential", 0.5, layout)
    design = individual_design()
    A = assign(layout, design, 30, 1, seed=8)
    p = simulate(static_spec, A, noise, 30, seed=9)
    shifted = type(p)(layout=p.layout, O=p.O.copy(), A=p.A.copy(),
                      Abar=p.Abar.copy(), Y=p.Y + 250.0)
    a, b = tau_ols(p, design), tau_ols(shifted, design)
    assert b.tau_hat == pytest.approx(a.tau_hat, abs=1e-8)
    assert b.var_hat == pytest.approx(a.var_hat, rel=1e-8)


def test_individual_estimator_needs_abar_variation(layout, static_spec,
                                                   zero_noise):
    A = assign(layout, global_design(), 40, 1, seed=10)
    p = simulate(static_spec, A, zero_noise, 40, seed=11)
    with pytest.raises(RankDeficiencyError, match="A"):
        tau_ols(p, individual_design())


def test_structure_mismatch_is_detected(layout, partition, diag, static_spec,
                                        zero_noise):
    A = assign(layout, individual_design(), 40, 1, seed=12)
    p = simulate(static_spec, A, zero_noise, 40, seed=13)
    with pytest.raises(DesignMismatchError):
        tau_ols(p, global_design())
    with pytest.raises(DesignMismatchError):
        tau_ols(p, cluster_design(partition), diagnostics=diag)
    with pytest.raises(DesignMismatchError):
        tau_ols(p, cluster_design(partition))  # no diagnostics supplied


def test_static_estimator_rejects_multi_interval(layout, zero_noise):
    spec = make_param_dynamic_spec(layout, s=1.0, M=2,
                                   rng=np.random.default_rng(14))
    A = assign(layout, individual_design("independent"), 30, 2, seed=15)
    p = simulate(spec, A, zero_noise, 30, seed=16)
    with pytest.raises(DesignMismatchError):
        tau_ols(p, individual_design("independent"))


def test_static_influence_variance_is_calibrated(layout):
    # null model: rejection should hold its nominal level loosely, and the
    # reported standard errors should track the replication spread
    spec = make_param_static_spec(layout, s=0.0, rng=np.random.default_rng(17))
    noise = make_noise("exponential", 0.6, layout)
    design = individual_design()
    taus, ses, rejects = [], [], 0
    reps = 150
    for rep in range(reps):
        A = assign(layout, design, 40, 1, seed=20_000 + rep)
        p = simulate(spec, A, noise, 40, seed=30_000 + rep)
        est = tau_ols(p, design)
        taus.append(est.tau_hat)
        ses.append(np.sqrt(est.var_hat))
        rejects += wald(est, 0.05).reject
    ratio = np.std(taus, ddof=1) / np.mean(ses)
    assert 0.7 < ratio < 1.35
    assert rejects / reps < 0.13
    assert abs(np.mean(taus)) < 4 * np.std(taus, ddof=1) / np.sqrt(reps)


# ---------------------------------------------------------------------------
# dynamic estimator


def test_dynamic_zero_noise_recovery(layout, partition, diag, zero_noise):
    spec = make_param_dynamic_spec(layout, s=2.0, M=3,
                                   rng=np.random.default_rng(18))
    cases = [
        (global_design("independent"), {}),
        (individual_design("independent"), {}),
        (cluster_design(partition, "independent"), {"diagnostics": diag}),
    ]
    for design, kw in cases:
        A = assign(layout, design, 60, 3, seed=19)
        p = simulate(spec, A, zero_noise, 60, seed=21)
        est = tau_ols_dynamic(p, design, bootstrap_B=100, seed=22, **kw)
        assert abs(est.tau_hat - spec.true_tau) < 1e-6
        assert est.var_hat < 1e-10


def test_dynamic_switchback_recovery(layout, zero_noise):
    spec = make_param_dynamic_spec(layout, s=2.0, M=4,
                                   rng=np.random.default_rng(23))
    design = individual_design("switchback")
    A = assign(layout, design, 60, 4, seed=24)
    p = simulate(spec, A, zero_noise, 60, seed=25)
    est = tau_ols_dynamic(p, design, bootstrap_B=100, seed=26)
    assert abs(est.tau_hat - spec.true_tau) < 1e-6


def test_dynamic_m1_delegates_to_static(layout, zero_noise):
    spec = make_param_dynamic_spec(layout, s=2.0, M=1,
                                   rng=np.random.default_rng(27))
    design = individual_design()
    A = assign(layout, design, 40, 1, seed=28)
    p = simulate(spec, A, zero_noise, 40, seed=29)
    a = tau_ols_dynamic(p, design, bootstrap_B=100, seed=30)
    b = tau_ols(p, design)
    assert a.tau_hat == b.tau_hat and a.var_hat == b.var_hat


def test_dynamic_day_floor(layout, zero_noise):
    spec = make_param_dynamic_spec(layout, s=2.0, M=5,
                                   rng=np.random.default_rng(31))
    design = individual_design("independent")
    A = assign(layout, design, 18, 5, seed=32)
    p = simulate(spec, A, zero_noise, 18, seed=33)
    # M*q = 5*4 = 20 > 18 days
    with pytest.raises(InsufficientDataError):
        tau_ols_dynamic(p, design, bootstrap_B=100, seed=34)
