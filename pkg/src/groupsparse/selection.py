"""Selection pipelines: noise and scale estimation, greedy forward selection
over blocks in hyperparameter space, and the three staged estimators.

All three variants start from the same stage: split the data, estimate the
noise variance from training least squares, estimate a common scale kappa,
run forward selection for each gamma on a grid, and pick gamma by validation
error.  They differ only in the final polish:

  hgla  posterior mean at the forward-selection scales, no polish
  hglb  quasi-Newton refinement over all blocks from the selected start
  hglc  quasi-Newton refinement restricted to the selected blocks, gamma=0
"""

import numpy as np
from dataclasses import dataclass, field

from .model import EstimateResult, GroupedDesign, HyperState, MarginalFactor, \
    posterior_mean
from .hglasso import solve_hgl_pqn
from .pqn import PqnConfig

VARIANTS = ("hgla", "hglb", "hglc")


@dataclass
class SelectionConfig:
    split_fraction: float = 0.5
    gamma_grid: np.ndarray = None      # default: built from kappa, see below
    grid_lo: float = 1e-2              # grid spans [grid_lo/kappa, grid_hi/kappa]
    grid_hi: float = 1e4
    grid_n: int = 30
    kappa_bracket: tuple = None        # default [1e-8, 1e8] * (||y_tr||^2 / n_tr)
    variant: str = "hgla"
    sigma2: float = None               # override; otherwise training LS estimate
    pqn: PqnConfig = field(default_factory=lambda: PqnConfig(grad_tol=1e-8,
                                                             max_iter=1000))

    def __post_init__(self):
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must lie in (0,1)")
        if self.variant not in VARIANTS:
            raise ValueError("variant must be one of %s" % (VARIANTS,))
        if self.gamma_grid is not None:
            g = np.asarray(self.gamma_grid, dtype=float)
            if g.size == 0 or np.any(np.diff(g) <= 0) or np.any(g <= 0):
                raise ValueError("gamma_grid must be nonempty, positive, "
                                 "strictly increasing")
            self.gamma_grid = g


@dataclass
class SelectionTrace:
    gammas: np.ndarray
    selected_sets: list          # I(gamma) per grid point
    gains: list                  # accepted forward-selection gains per grid point
    val_errors: np.ndarray
    chosen_gamma: float
    chosen_set: list
    kappa: float
    sigma2: float


def estimate_sigma2_ls(y, G):
    """Residual variance of the least-squares fit, ||y - G t||^2 / (n - m).

    Requires more rows than columns; with n <= m the residual is zero by
    construction and the caller must supply sigma2 explicitly.
    """
    y = np.asarray(y, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    n, m = G.shape
    if n <= m:
        raise ValueError("need n > m to estimate the noise variance from "
                         "least-squares residuals; supply sigma2 explicitly")
    t, *_ = np.linalg.lstsq(G, y, rcond=None)
    r = y - G @ t
    return float(r @ r) / (n - m)


def estimate_kappa(y_tr, design_tr, sigma2, bracket=None):
    """Common scale: minimize the unpenalized marginal objective over
    lambda = kappa * ones.

    Golden-section search on log kappa over the bracket, then a few Newton
    polish steps on the exact 1-D derivative.  The whole profile reduces to
    the eigenvalues of G G^T, so evaluations are scalar sums.
    """
    y = np.asarray(y_tr, dtype=float)
    if not np.any(y):
        return 0.0
    scale = float(y @ y) / design_tr.n
    lo, hi = bracket if bracket is not None else (1e-8 * scale, 1e8 * scale)
    # Sigma_y(kappa) = kappa G G^T + sigma2 I: diagonalize once
    w, Q = np.linalg.eigh(design_tr.G @ design_tr.G.T)
    w = np.maximum(w, 0.0)
    yt2 = (Q.T @ y) ** 2

    def f(k):
        den = k * w + sigma2
        return 0.5 * np.sum(np.log(den)) + 0.5 * np.sum(yt2 / den)

    def df(k):
        den = k * w + sigma2
        return 0.5 * np.sum(w / den) - 0.5 * np.sum(w * yt2 / (den * den))

    # golden section on log kappa
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = np.log(lo), np.log(hi)
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = f(np.exp(c)), f(np.exp(d))
    for _ in range(200):
        if b - a < 1e-10:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(np.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(np.exp(d))
    k = float(np.exp(0.5 * (a + b)))
    # Newton polish on the derivative
    for _ in range(50):
        g = df(k)
        den = k * w + sigma2
        h = (-0.5 * np.sum(w * w / (den * den))
             + np.sum(w * w * yt2 / (den * den * den)))
        if h <= 0:
            break
        step = g / h
        k_new = k - step
        if k_new <= 0:
            k_new = 0.5 * k
        if abs(k_new - k) <= 1e-12 * max(1.0, k):
            k = k_new
            break
        k = k_new
    # boundary check: a zero scale can beat any interior point
    if f(0.0) <= f(k):
        return 0.0
    return k


def _log_posterior(y, design, sigma2, kappa, gamma, subset):
    """L(I) = -0.5 logdet Sigma_y(lam_I) - 0.5 y^T Sigma_y^{-1} y
    - gamma kappa |I| with lam_I = kappa on I, zero elsewhere."""
    lam = np.zeros(design.p)
    lam[list(subset)] = kappa
    fac = MarginalFactor(design, lam, sigma2)
    return (-0.5 * fac.logdet() - 0.5 * fac.quad(y)
            - gamma * kappa * len(subset))


def forward_select(y_tr, design_tr, sigma2, kappa, gamma):
    """Greedy block inclusion maximizing the marginal log posterior.

    Starting from the empty set, repeatedly add the block with the largest
    gain L(I + {j}) - L(I), smallest index on ties, and stop as soon as the
    best gain is not positive.  Returns (selected indices, accepted gains).
    """
    y = np.asarray(y_tr, dtype=float)
    current = []
    gains = []
    L = _log_posterior(y, design_tr, sigma2, kappa, gamma, current)
    remaining = list(range(design_tr.p))
    while remaining:
        cand = [(_log_posterior(y, design_tr, sigma2, kappa, gamma,
                                current + [j]) - L, j) for j in remaining]
        best_gain = max(g for g, _ in cand)
        if best_gain <= 0:
            break
        j = min(j for g, j in cand if g == best_gain)
        current.append(j)
        remaining.remove(j)
        gains.append(best_gain)
        L += best_gain
    return sorted(current), gains


def _split(y, design, frac):
    n_tr = int(np.ceil(frac * design.n))
    if n_tr < 1 or n_tr >= design.n:
        raise ValueError("degenerate split")
    d_tr = GroupedDesign(design.G[:n_tr], design.group_sizes)
    d_val = GroupedDesign(design.G[n_tr:], design.group_sizes)
    return y[:n_tr], y[n_tr:], d_tr, d_val


def fit_hglasso(y, design, config=None):
    """Staged group-sparse fit; returns (EstimateResult, SelectionTrace).

    Stage one (shared): prefix split, training-residual sigma2 (unless
    overridden), kappa estimate, forward selection per gamma on the grid,
    gamma chosen by validation error (ties: largest gamma).  The variant
    then produces lambda on the full data as described in the module
    docstring, and theta is the posterior mean at that lambda.
    """
    cfg = config or SelectionConfig()
    y = np.asarray(y, dtype=float)
    y_tr, y_val, d_tr, d_val = _split(y, design, cfg.split_fraction)
    sigma2 = cfg.sigma2 if cfg.sigma2 is not None \
        else estimate_sigma2_ls(y_tr, d_tr.G)
    if sigma2 <= 0:
        sigma2 = max(sigma2, 1e-12)
    kappa = estimate_kappa(y_tr, d_tr, sigma2, cfg.kappa_bracket)
    if cfg.gamma_grid is not None:
        gammas = cfg.gamma_grid
    else:
        k_ref = kappa if kappa > 0 else 1.0
        gammas = np.logspace(np.log10(cfg.grid_lo / k_ref),
                             np.log10(cfg.grid_hi / k_ref), cfg.grid_n)

    sets, gains_per_gamma, val_errors = [], [], []
    for gamma in gammas:
        subset, gains = forward_select(y_tr, d_tr, sigma2, kappa, gamma)
        lam = np.zeros(design.p)
        lam[subset] = kappa
        th = posterior_mean(d_tr, HyperState(lam, 0.0, sigma2), y_tr)
        err = float(np.linalg.norm(y_val - d_val.G @ th.theta))
        sets.append(subset)
        gains_per_gamma.append(gains)
        val_errors.append(err)
    val_errors = np.asarray(val_errors)
    # validation error is exactly flat across gammas sharing a selected set,
    # so break ties toward the largest gamma (the most parsimonious prior)
    best = int(val_errors.size - 1 - np.argmin(val_errors[::-1]))
    gamma_hat = float(gammas[best])
    i_fs = sets[best]
    lam_fs = np.zeros(design.p)
    lam_fs[i_fs] = kappa

    trace = SelectionTrace(gammas=np.asarray(gammas), selected_sets=sets,
                           gains=gains_per_gamma, val_errors=val_errors,
                           chosen_gamma=gamma_hat, chosen_set=list(i_fs),
                           kappa=kappa, sigma2=sigma2)

    converged = True
    iterations = 0
    if cfg.variant == "hgla":
        lam_hat = lam_fs
    else:
        if cfg.variant == "hglb":
            pqn_cfg = cfg.pqn
            gamma_solve = gamma_hat
        else:  # hglc
            pqn_cfg = PqnConfig(memory=cfg.pqn.memory, armijo_c=cfg.pqn.armijo_c,
                                backtrack=cfg.pqn.backtrack,
                                grad_tol=cfg.pqn.grad_tol,
                                max_iter=cfg.pqn.max_iter, active_set=i_fs)
            gamma_solve = 0.0
        res = solve_hgl_pqn(y, design, sigma2, gamma_solve, lam_fs, pqn_cfg)
        lam_hat = res.lam
        converged = res.converged
        iterations = res.iterations
    bv = posterior_mean(design, HyperState(lam_hat, 0.0, sigma2), y)
    sel = [i for i in range(design.p) if lam_hat[i] > 0]
    result = EstimateResult(theta=bv.theta, lam=lam_hat, selected=sel,
                            gamma=gamma_hat, converged=converged,
                            iterations=iterations,
                            extra={"kappa": kappa, "sigma2": sigma2,
                                   "variant": cfg.variant})
    return result, trace
