"""Convex estimators: Lasso, Group Lasso, the kernel-scale problem, AdaLasso.

The kernel-scale (MKL-style) problem minimizes
    y^T (K(lambda) + sigma2 I)^{-1} y / 2 + gamma sum_i lambda_i
over lambda >= 0 with K^(i) = G^(i) G^(i)^T, which is convex; recovering
theta from its solution reproduces the Group Lasso estimate with
regularization gamma_gl = sqrt(2 gamma).
"""

import numpy as np
from dataclasses import dataclass

from .model import EstimateResult, HyperState, MarginalFactor, \
    posterior_mean
from .pqn import PqnConfig, minimize_pqn


@dataclass
class ConvexFitConfig:
    reg_param: float = 0.0
    max_iter: int = 20000
    tol: float = 1e-12
    eta: float = None  # AdaLasso weight exponent; None outside AdaLasso

    def __post_init__(self):
        if self.reg_param < 0:
            raise ValueError("reg_param must be nonnegative")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol and max_iter must be positive")


# weight used in place of |theta_ls_j|^(-eta) when the LS coefficient is 0;
# large enough to exclude the variable for any sane gamma
ADALASSO_WEIGHT_CAP = 1e8


def _lasso_objective(y, G, theta, sigma2, gamma):
    r = y - G @ theta
    return (r @ r) / (2.0 * sigma2) + gamma * np.sum(np.abs(theta))


def solve_lasso(y, G, config, sigma2=1.0):
    """L1-penalized least squares by cyclic coordinate descent.

    Minimizes (y - G theta)^T (y - G theta) / (2 sigma2) + reg ||theta||_1
    with exact soft-threshold coordinate updates.
    """
    y = np.asarray(y, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    gamma = config.reg_param
    m = G.shape[1]
    colsq = np.einsum("ij,ij->j", G, G)
    theta = np.zeros(m)
    r = y.copy()
    thr = sigma2 * gamma
    obj = _lasso_objective(y, G, theta, sigma2, gamma)
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        for j in range(m):
            if colsq[j] == 0.0:
                continue
            old = theta[j]
            rho = G[:, j] @ r + colsq[j] * old
            new = np.sign(rho) * max(0.0, abs(rho) - thr) / colsq[j]
            if new != old:
                r += G[:, j] * (old - new)
                theta[j] = new
        new_obj = _lasso_objective(y, G, theta, sigma2, gamma)
        if obj - new_obj <= config.tol * (1.0 + abs(new_obj)):
            obj = new_obj
            converged = True
            break
        obj = new_obj
    return EstimateResult(theta=theta, selected=list(np.nonzero(theta)[0]),
                          gamma=gamma, converged=converged, iterations=it,
                          objective=obj)


def _glasso_block_update(eigvals, Qtb, bnorm, a):
    """Exact proximal update magnitude for one block.

    Solves sum_k c_k^2 / (s_k t + a)^2 = 1 for t = ||theta_block|| by Newton
    (the left side is convex decreasing so iterates climb monotonically to
    the root), where s = eigenvalues of G^(i)T G^(i), c = Q^T b with b the
    block's correlation with the partial residual, and a = sigma2 gamma.
    """
    c2 = Qtb * Qtb
    t = max(0.0, (bnorm - a) / max(np.max(eigvals), 1e-300))
    for _ in range(50):
        den = eigvals * t + a
        phi = np.sum(c2 / (den * den)) - 1.0
        dphi = -2.0 * np.sum(c2 * eigvals / (den * den * den))
        step = phi / dphi
        t_new = t - step
        if t_new < 0:
            t_new = 0.5 * t
        if abs(t_new - t) <= 1e-12 * max(1.0, t):
            t = t_new
            break
        t = t_new
    return t


def solve_glasso(y, design, sigma2, config):
    """Group Lasso by block coordinate descent with exact block updates.

    Minimizes (y - G theta)^T (y - G theta)/(2 sigma2)
    + reg sum_i ||theta^(i)||.  A block is set exactly to zero when
    ||G^(i)T r_i|| / sigma2 <= reg for its partial residual r_i; otherwise
    the update magnitude comes from a 1-D Newton root-find.
    """
    y = np.asarray(y, dtype=float)
    gamma = config.reg_param
    p = design.p
    theta = np.zeros(design.m)
    # per-block eigendecompositions, computed once
    eigs, rots = [], []
    for i in range(p):
        Gi = design.block(i)
        w, Q = np.linalg.eigh(Gi.T @ Gi)
        eigs.append(np.maximum(w, 0.0))
        rots.append(Q)
    r = y.copy()
    a = sigma2 * gamma

    def objective():
        bn = sum(np.linalg.norm(theta[design.slices[i]]) for i in range(p))
        return (r @ r) / (2.0 * sigma2) + gamma * bn

    obj = objective()
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        for i in range(p):
            sl = design.slices[i]
            Gi = design.block(i)
            old = theta[sl].copy()
            b = Gi.T @ r + (Gi.T @ Gi) @ old if np.any(old) else Gi.T @ r
            bnorm = np.linalg.norm(b)
            if a > 0 and bnorm <= a:
                new = np.zeros_like(old)
            elif a == 0:
                new, *_ = np.linalg.lstsq(Gi, r + Gi @ old, rcond=None)
            else:
                Q = rots[i]
                t = _glasso_block_update(eigs[i], Q.T @ b, bnorm, a)
                if t <= 0:
                    new = np.zeros_like(old)
                else:
                    new = Q @ ((Q.T @ b) / (eigs[i] + a / t))
            if np.any(new != old):
                r += Gi @ (old - new)
                theta[sl] = new
        new_obj = objective()
        if obj - new_obj <= config.tol * (1.0 + abs(new_obj)):
            obj = new_obj
            converged = True
            break
        obj = new_obj
    sel = [i for i in range(p) if np.any(theta[design.slices[i]])]
    return EstimateResult(theta=theta, selected=sel, gamma=gamma,
                          converged=converged, iterations=it, objective=obj)


def solve_mkl_lambda(y, design, sigma2, gamma, config=None):
    """Global minimizer of the convex kernel-scale objective.

    Returns a PqnResult; .lam is the nonnegative p-vector of scales.  The
    quality of the solve is certified by kkt_residual_mkl.
    """
    if gamma <= 0:
        raise ValueError("mkl requires positive gamma")
    y = np.asarray(y, dtype=float)
    cfg = config or PqnConfig(grad_tol=1e-10, max_iter=2000)

    def fun_grad(lam):
        fac = MarginalFactor(design, lam, sigma2)
        gy = fac.gtw_y(y)
        sq = np.array([np.sum(gy[s] ** 2) for s in design.slices])
        f = 0.5 * fac.quad(y) + gamma * lam.sum()
        g = -0.5 * sq + gamma
        return f, g

    return minimize_pqn(fun_grad, np.zeros(design.p), cfg)


def mkl_recover_theta(lam, y, design, sigma2):
    """Coefficients from kernel scales: theta^(i) = lam_i G^(i)T c with
    c = (K(lam) + sigma2 I)^{-1} y; algebraically the posterior mean."""
    lam = np.asarray(getattr(lam, "lam", lam), dtype=float)
    bv = posterior_mean(design, HyperState(lam, 0.0, sigma2), y)
    sel = [i for i in range(design.p) if lam[i] > 0]
    return EstimateResult(theta=bv.theta, lam=lam, selected=sel)


def kkt_residual_mkl(lam, y, design, sigma2, gamma):
    """Max violation of the kernel-scale optimality conditions at lambda.

    Active coordinates need ||G^(i)T W y||^2 = 2 gamma; zero coordinates
    need ||G^(i)T W y||^2 <= 2 gamma.
    """
    lam = np.asarray(lam, dtype=float)
    y = np.asarray(y, dtype=float)
    fac = MarginalFactor(design, lam, sigma2)
    gy = fac.gtw_y(y)
    sq = np.array([np.sum(gy[s] ** 2) for s in design.slices])
    res = np.where(lam > 0, np.abs(-sq + 2.0 * gamma),
                   np.maximum(0.0, sq - 2.0 * gamma))
    return float(np.max(res, initial=0.0))


def solve_adalasso(y, G, sigma2, grids):
    """Adaptive Lasso with two-dimensional validation over (gamma, eta).

    grids: mapping with "gamma" (1-D array of penalties) and "eta" (1-D
    array of weight exponents, default 0.5..4 step 0.5).  Weights are
    |theta_ls_j|^(-eta), capped when the LS coefficient vanishes.  Each pair
    is scored by prediction error on the second half of the data after
    fitting on the first half; the winner (ties: smaller gamma, then eta)
    is refit on the full data.
    """
    y = np.asarray(y, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    gammas = np.asarray(grids["gamma"], dtype=float)
    etas = np.asarray(grids.get("eta", np.arange(0.5, 4.01, 0.5)), dtype=float)
    n = y.size
    n_tr = int(np.ceil(0.5 * n))
    y_tr, y_val = y[:n_tr], y[n_tr:]
    G_tr, G_val = G[:n_tr], G[n_tr:]

    def weights(Gd, yd, eta):
        ls, *_ = np.linalg.lstsq(Gd, yd, rcond=None)
        w = np.where(ls != 0, np.abs(ls) ** (-eta), ADALASSO_WEIGHT_CAP)
        return np.minimum(w, ADALASSO_WEIGHT_CAP)

    def weighted_fit(Gd, yd, gamma, w):
        # substitute u = w * theta: plain lasso on rescaled columns
        fit = solve_lasso(yd, Gd / w[None, :], ConvexFitConfig(reg_param=gamma),
                          sigma2=sigma2)
        return fit.theta / w

    best = None
    for eta in etas:
        w_tr = weights(G_tr, y_tr, eta)
        for gamma in gammas:
            th = weighted_fit(G_tr, y_tr, gamma, w_tr)
            err = np.linalg.norm(y_val - G_val @ th)
            key = (err, gamma, eta)
            if best is None or key < best[0]:
                best = (key, gamma, eta)
    _, gamma, eta = best
    w = weights(G, y, eta)
    theta = weighted_fit(G, y, gamma, w)
    return EstimateResult(theta=theta, selected=list(np.nonzero(theta)[0]),
                          gamma=gamma, extra={"eta": eta})
