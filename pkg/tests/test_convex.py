"""Convex estimators: Lasso, Group Lasso, kernel-scale problem, AdaLasso."""

import numpy as np
import pytest

from groupsparse import (
    ConvexFitConfig, GroupedDesign, kkt_residual_mkl, mkl_recover_theta,
    solve_adalasso, solve_glasso, solve_lasso, solve_mkl_lambda,
)

from conftest import orthogonal_design, random_grouped


def test_config_validation():
    with pytest.raises(ValueError):
        ConvexFitConfig(reg_param=-1.0)
    with pytest.raises(ValueError):
        ConvexFitConfig(tol=0.0)
    with pytest.raises(ValueError):
        ConvexFitConfig(max_iter=0)


# ------------------------------------------------------------
# lasso
# ------------------------------------------------------------

def test_lasso_orthogonal_soft_threshold(rng):
    """With G^T G = n I the solution is the soft threshold of G^T y / n."""
    des = orthogonal_design(rng, [1] * 6, 40)
    y = rng.standard_normal(40) * 2
    s2, gam = 0.7, 3.0
    fit = solve_lasso(y, des.G, ConvexFitConfig(reg_param=gam), sigma2=s2)
    rho = des.G.T @ y / des.n
    ref = np.sign(rho) * np.maximum(0.0, np.abs(rho) - s2 * gam / des.n)
    assert np.allclose(fit.theta, ref, atol=1e-8)


def test_lasso_zero_threshold_property(rng):
    """reg >= ||G^T y||_inf / sigma2 forces the exact zero solution."""
    for _ in range(10):
        G = rng.standard_normal((15, 8))
        y = rng.standard_normal(15)
        s2 = float(rng.uniform(0.3, 2.0))
        gmax = np.max(np.abs(G.T @ y)) / s2
        fit = solve_lasso(y, G, ConvexFitConfig(reg_param=gmax * 1.000001),
                          sigma2=s2)
        assert np.all(fit.theta == 0.0)


def test_lasso_matches_reference_solver(rng):
    """Cross-check against scipy's bound-constrained optimizer on the
    standard split theta = u - v reformulation."""
    from scipy.optimize import minimize
    G = rng.standard_normal((20, 6))
    y = rng.standard_normal(20)
    s2, gam = 0.8, 2.0
    fit = solve_lasso(y, G, ConvexFitConfig(reg_param=gam), sigma2=s2)

    def f(z):
        th = z[:6] - z[6:]
        r = y - G @ th
        return r @ r / (2 * s2) + gam * z.sum()

    ref = minimize(f, np.zeros(12), bounds=[(0, None)] * 12,
                   method="L-BFGS-B", options={"maxiter": 2000, "ftol": 1e-14})
    th_ref = ref.x[:6] - ref.x[6:]
    assert np.linalg.norm(fit.theta - th_ref) <= 1e-4 * (1 + np.linalg.norm(th_ref))


# ------------------------------------------------------------
# group lasso
# ------------------------------------------------------------

def test_glasso_equals_lasso_for_singleton_blocks(rng):
    for _ in range(50):
        m = int(rng.integers(2, 8))
        n = int(rng.integers(m, m + 12))
        G = rng.standard_normal((n, m))
        y = rng.standard_normal(n)
        s2 = float(rng.uniform(0.3, 1.5))
        gam = float(rng.uniform(0.1, 3.0))
        des = GroupedDesign(G, [1] * m)
        gl = solve_glasso(y, des, s2, ConvexFitConfig(reg_param=gam))
        la = solve_lasso(y, G, ConvexFitConfig(reg_param=gam), sigma2=s2)
        assert np.linalg.norm(gl.theta - la.theta) <= 1e-8 * (
            1 + np.linalg.norm(la.theta))


def test_glasso_block_zero_condition(rng):
    """A large enough penalty zeroes every block exactly."""
    des = random_grouped(rng)
    y = rng.standard_normal(des.n)
    s2 = 0.9
    reg = 10.0 * np.linalg.norm(des.G.T @ y) / s2
    fit = solve_glasso(y, des, s2, ConvexFitConfig(reg_param=reg))
    assert np.all(fit.theta == 0.0)
    assert fit.selected == []


def test_glasso_objective_never_increases(rng):
    """Block sweeps are monotone; verify via the reported objective being
    minimal over a perturbation neighborhood."""
    des = random_grouped(rng)
    y = rng.standard_normal(des.n)
    s2, reg = 0.6, 0.8
    fit = solve_glasso(y, des, s2, ConvexFitConfig(reg_param=reg))

    def obj(th):
        r = y - des.G @ th
        bn = sum(np.linalg.norm(th[s]) for s in des.slices)
        return r @ r / (2 * s2) + reg * bn

    f0 = obj(fit.theta)
    for _ in range(20):
        assert obj(fit.theta + 1e-5 * rng.standard_normal(des.m)) >= f0 - 1e-10


# ------------------------------------------------------------
# kernel-scale problem
# ------------------------------------------------------------

def test_mkl_requires_positive_gamma(rng):
    des = random_grouped(rng)
    with pytest.raises(ValueError, match="positive gamma"):
        solve_mkl_lambda(rng.standard_normal(des.n), des, 1.0, 0.0)


def test_mkl_kkt_certificate(rng):
    for _ in range(30):
        des = random_grouped(rng)
        y = rng.standard_normal(des.n) * 2
        s2 = float(rng.uniform(0.2, 2.0))
        gam = float(rng.uniform(0.05, 3.0))
        res = solve_mkl_lambda(y, des, s2, gam)
        assert res.converged
        assert kkt_residual_mkl(res.lam, y, des, s2, gam) <= 1e-6 * (1 + 2 * gam)


def test_mkl_glasso_equivalence(rng):
    """Recovered theta equals Group Lasso with reg = sqrt(2 gamma)."""
    worst = 0.0
    for trial in range(50):
        p = int(rng.integers(2, 6))
        sizes = [int(rng.integers(1, 5)) for _ in range(p)]
        m = sum(sizes)
        n = int(rng.integers(max(2, m // 2), min(2 * m + 4, 21)))
        G = rng.standard_normal((n, m))
        if trial % 3 == 0:  # correlated columns stress the solvers
            G[:, 1:min(3, m)] += G[:, [0]]
        des = GroupedDesign(G, sizes)
        th = rng.standard_normal(m) * rng.integers(0, 2, m)
        s2 = float(rng.uniform(0.2, 2.0))
        y = G @ th + np.sqrt(s2) * rng.standard_normal(n)
        gam = float(rng.uniform(0.05, 3.0))
        mth = mkl_recover_theta(solve_mkl_lambda(y, des, s2, gam),
                                y, des, s2).theta
        gth = solve_glasso(y, des, s2,
                           ConvexFitConfig(reg_param=np.sqrt(2 * gam))).theta
        rel = np.linalg.norm(mth - gth) / max(np.linalg.norm(gth), 1e-12)
        worst = max(worst, rel)
    assert worst <= 1e-4


def test_mkl_recover_theta_accepts_array_or_result(rng):
    des = random_grouped(rng)
    y = rng.standard_normal(des.n)
    res = solve_mkl_lambda(y, des, 1.0, 0.5)
    a = mkl_recover_theta(res, y, des, 1.0)
    b = mkl_recover_theta(res.lam, y, des, 1.0)
    assert np.array_equal(a.theta, b.theta)
    assert a.selected == [i for i in range(des.p) if res.lam[i] > 0]


# ------------------------------------------------------------
# adalasso
# ------------------------------------------------------------

def test_adalasso_weights_reciprocal(rng):
    """eta=1 weights are 1/|theta_ls|; check through a transparent fit."""
    n = 60
    G = np.kron(np.ones((n // 2, 1)), np.eye(2))
    y = G @ np.array([2.0, 0.5]) + 0.01 * rng.standard_normal(n)
    fit = solve_adalasso(y, G, 0.01, {"gamma": np.array([1e-6]),
                                      "eta": np.array([1.0])})
    assert np.allclose(fit.theta, [2.0, 0.5], atol=0.05)
    assert fit.extra["eta"] == 1.0


def test_adalasso_prunes_null_variables(rng):
    n, m = 80, 6
    G = rng.standard_normal((n, m))
    theta = np.array([3.0, 0.0, 2.0, 0.0, 0.0, 1.5])
    y = G @ theta + 0.3 * rng.standard_normal(n)
    grid = np.logspace(-2, 2, 15)
    fit = solve_adalasso(y, G, 0.09, {"gamma": grid})
    assert set(np.nonzero(np.abs(fit.theta) > 1e-8)[0]) <= {0, 2, 5, 1, 3, 4}
    # the three real coefficients survive
    assert all(abs(fit.theta[j]) > 0.5 for j in (0, 2, 5))
