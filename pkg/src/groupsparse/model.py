"""Core model for grouped linear regression with per-block scale factors.

The observation model is y = G theta + v, v ~ N(0, sigma2 I), where the
columns of G are partitioned into p blocks G^(i) and each block of theta
carries a scale factor lambda_i.  Marginalizing theta gives the output
covariance

    Sigma_y(lambda) = sum_i lambda_i G^(i) G^(i)^T + sigma2 I,

and everything downstream (posterior mean, marginal likelihood, MSE) is a
function of lambda through Sigma_y.  This module holds the data containers
and the numerical kernel shared by all solvers.
"""

import numpy as np
from dataclasses import dataclass, field
from scipy.linalg import cho_factor, cho_solve


# ============================================================
# containers
# ============================================================

class GroupedDesign:
    """Regression matrix with a block partition of its columns.

    Parameters
    ----------
    G : (n, m) array
    group_sizes : sequence of p positive ints summing to m
    """

    def __init__(self, G, group_sizes):
        G = np.atleast_2d(np.asarray(G, dtype=float))
        sizes = [int(k) for k in group_sizes]
        if any(k < 1 for k in sizes):
            raise ValueError("every group size must be >= 1")
        if sum(sizes) != G.shape[1]:
            raise ValueError(
                "group sizes sum to %d but design has %d columns"
                % (sum(sizes), G.shape[1])
            )
        self.G = G
        self.group_sizes = sizes
        ends = np.cumsum(sizes)
        self.slices = [slice(int(e - k), int(e)) for k, e in zip(sizes, ends)]
        self._gtg = None

    @property
    def n(self):
        return self.G.shape[0]

    @property
    def m(self):
        return self.G.shape[1]

    @property
    def p(self):
        return len(self.group_sizes)

    def block(self, i):
        """Column block G^(i), shape (n, k_i)."""
        return self.G[:, self.slices[i]]

    def expand(self, per_block):
        """Spread a per-block p-vector to a length-m vector."""
        per_block = np.asarray(per_block, dtype=float)
        if per_block.shape != (self.p,):
            raise ValueError("expected a length-%d per-block vector" % self.p)
        return np.repeat(per_block, self.group_sizes)

    def gram(self):
        """G^T G, cached."""
        if self._gtg is None:
            self._gtg = self.G.T @ self.G
        return self._gtg

    def subdesign(self, blocks):
        """Design restricted to the listed blocks (order preserved)."""
        blocks = sorted(blocks)
        cols = np.concatenate([np.arange(s.start, s.stop) for s in
                               (self.slices[i] for i in blocks)]) if blocks else \
            np.array([], dtype=int)
        return GroupedDesign(self.G[:, cols], [self.group_sizes[i] for i in blocks])


@dataclass
class HyperState:
    """Per-block scales lambda, hyperprior rate gamma, noise variance sigma2."""

    lam: np.ndarray
    gamma: float
    sigma2: float

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        if np.any(self.lam < 0):
            raise ValueError("lambda must be nonnegative")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")


@dataclass
class BlockVector:
    """Coefficient vector partitioned like a GroupedDesign."""

    theta: np.ndarray
    group_sizes: list

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (sum(self.group_sizes),):
            raise ValueError("theta length does not match the partition")
        ends = np.cumsum(self.group_sizes)
        self.slices = [slice(int(e - k), int(e))
                       for k, e in zip(self.group_sizes, ends)]

    def block(self, i):
        return self.theta[self.slices[i]]

    def block_norms(self):
        return np.array([np.linalg.norm(self.block(i))
                         for i in range(len(self.group_sizes))])


@dataclass
class DiagonalizedBlock:
    """One block of the model rotated to diagonal form z = D beta + eps."""

    z: np.ndarray
    d: np.ndarray
    beta: np.ndarray  # None when the true theta block is not supplied
    block_index: int
    eps: np.ndarray = None


@dataclass
class EstimateResult:
    """Output of any estimator: coefficients plus solver diagnostics."""

    theta: np.ndarray
    lam: np.ndarray = None
    selected: list = field(default_factory=list)
    gamma: float = None
    converged: bool = True
    iterations: int = 0
    objective: float = np.nan
    extra: dict = field(default_factory=dict)


# ============================================================
# Sigma_y factorization
# ============================================================

class MarginalFactor:
    """Factorized access to Sigma_y = G Lam G^T + sigma2 I.

    Two routes with identical semantics: an n x n Cholesky when n <= m, and
    for n > m the low-rank form built from Gt = G diag(sqrt(lam)), for which

        Sigma_y = sigma2 I + Gt Gt^T,
        Sigma_y^{-1} = [I - Gt (sigma2 I + Gt^T Gt)^{-1} Gt^T] / sigma2.

    The low-rank route never inverts Lam so lambda_i = 0 is fine.
    """

    def __init__(self, design, lam, sigma2):
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (design.p,):
            raise ValueError("lambda length %d does not match p=%d"
                             % (lam.size, design.p))
        self.design = design
        self.lam = lam
        self.sigma2 = float(sigma2)
        self.lam_full = design.expand(lam)
        n, m = design.n, design.m
        self.lowrank = n > m
        if self.lowrank:
            d = np.sqrt(self.lam_full)
            self._d = d
            gram = design.gram()
            M = d[:, None] * gram * d[None, :]
            M[np.diag_indices_from(M)] += self.sigma2
            self._cM = cho_factor(M, lower=True)
            self._A = gram * d[None, :]          # G^T Gt
            self._logdet = ((n - m) * np.log(self.sigma2)
                            + 2.0 * np.sum(np.log(np.diag(self._cM[0]))))
        else:
            S = (design.G * self.lam_full) @ design.G.T
            S[np.diag_indices_from(S)] += self.sigma2
            self._cS = cho_factor(S, lower=True)
            self._logdet = 2.0 * np.sum(np.log(np.diag(self._cS[0])))
        self._gtwg = None

    def logdet(self):
        return self._logdet

    def solve(self, B):
        """Sigma_y^{-1} B."""
        if self.lowrank:
            Gt = self.design.G * self._d[None, :]
            return (B - Gt @ cho_solve(self._cM, Gt.T @ B)) / self.sigma2
        return cho_solve(self._cS, B)

    def quad(self, y):
        """y^T Sigma_y^{-1} y without forming anything n x n on the low-rank route."""
        if self.lowrank:
            ty = self._d * (self.design.G.T @ y)
            return (y @ y - ty @ cho_solve(self._cM, ty)) / self.sigma2
        return y @ self.solve(y)

    def gtw_y(self, y):
        """G^T Sigma_y^{-1} y, an m-vector."""
        if self.lowrank:
            gy = self.design.G.T @ y
            return (gy - self._A @ cho_solve(self._cM, self._d * gy)) / self.sigma2
        return self.design.G.T @ self.solve(y)

    def gtwg(self):
        """G^T Sigma_y^{-1} G, an m x m matrix (cached)."""
        if self._gtwg is None:
            if self.lowrank:
                self._gtwg = (self.design.gram()
                              - self._A @ cho_solve(self._cM, self._A.T)) / self.sigma2
            else:
                self._gtwg = self.design.G.T @ self.solve(self.design.G)
        return self._gtwg

    def block_traces(self):
        """tr(G^(i)^T W G^(i)) for every block, as a p-vector."""
        diag = np.diag(self.gtwg())
        return np.array([diag[s].sum() for s in self.design.slices])


# ============================================================
# operations
# ============================================================

def assemble_sigma_y(design, hs):
    """Dense output covariance sigma2 I + sum_i lambda_i G^(i) G^(i)^T."""
    if hs.lam.shape != (design.p,):
        raise ValueError("lambda length %d does not match p=%d"
                         % (hs.lam.size, design.p))
    lam_full = design.expand(hs.lam)
    S = (design.G * lam_full) @ design.G.T
    S[np.diag_indices_from(S)] += hs.sigma2
    return 0.5 * (S + S.T)


def posterior_mean(design, hs, y):
    """Conditional mean E[theta | y, lambda] = Lam G^T Sigma_y^{-1} y.

    Blocks with lambda_i = 0 come out exactly zero.
    """
    fac = MarginalFactor(design, hs.lam, hs.sigma2)
    theta = fac.lam_full * fac.gtw_y(np.asarray(y, dtype=float))
    return BlockVector(theta, design.group_sizes)


def neg_log_marginal(design, hs, y):
    """Penalized negative log marginal likelihood of lambda.

    0.5 logdet Sigma_y + 0.5 y^T Sigma_y^{-1} y + gamma sum_i lambda_i.
    """
    y = np.asarray(y, dtype=float)
    fac = MarginalFactor(design, hs.lam, hs.sigma2)
    return 0.5 * fac.logdet() + 0.5 * fac.quad(y) + hs.gamma * hs.lam.sum()


def neg_log_marginal_grad(design, hs, y):
    """Gradient of neg_log_marginal in lambda.

    Component i is 0.5 tr(G^(i)^T W G^(i)) - 0.5 ||G^(i)^T W y||^2 + gamma
    with W = Sigma_y^{-1}.
    """
    y = np.asarray(y, dtype=float)
    fac = MarginalFactor(design, hs.lam, hs.sigma2)
    gy = fac.gtw_y(y)
    sq = np.array([np.sum(gy[s] ** 2) for s in design.slices])
    return 0.5 * fac.block_traces() - 0.5 * sq + hs.gamma


def mse_of_lambda(design, hs, theta_true):
    """Mean squared error of the posterior-mean estimator at a given lambda.

    For blocks with lambda_i > 0 this is the matrix formula

        tr[sigma2 (G^T G + sigma2 Lam^{-1})^{-1}
           (G^T G + sigma2 Lam^{-1} tb tb^T Lam^{-1})
           (G^T G + sigma2 Lam^{-1})^{-1}]

    restricted to the active blocks; a block with lambda_i = 0 is estimated
    as exactly zero, so it contributes ||theta_true^(i)||^2 (the limit of the
    formula as lambda_i -> 0).
    """
    if isinstance(theta_true, BlockVector):
        tb = theta_true
    else:
        tb = BlockVector(np.asarray(theta_true, dtype=float), design.group_sizes)
    active = [i for i in range(design.p) if hs.lam[i] > 0]
    dead = [i for i in range(design.p) if hs.lam[i] == 0]
    total = sum(float(tb.block(i) @ tb.block(i)) for i in dead)
    if not active:
        return total
    sub = design.subdesign(active)
    lam_full = sub.expand(hs.lam[active])
    tb_act = np.concatenate([tb.block(i) for i in active])
    M = sub.gram() + hs.sigma2 * np.diag(1.0 / lam_full)
    u = tb_act / lam_full
    inner = sub.gram() + hs.sigma2 * np.outer(u, u)
    Minv = np.linalg.inv(M)
    total += hs.sigma2 * np.trace(Minv @ inner @ Minv)
    return total


def diagonalize_block(design, hs, i, y, theta_true=None):
    """Rotate block i of the model into the scalar form z = D beta + eps.

    The disturbance covariance seen by block i is
    Sigma_v = sum_{j != i} lambda_j G^(j) G^(j)^T + sigma2 I; with the SVD
    Sigma_v^{-1/2} G^(i) / sqrt(n) = U D V^T the transformed data are
    z = U^T Sigma_v^{-1/2} y / sqrt(n) and beta = V^T theta^(i).
    """
    y = np.asarray(y, dtype=float)
    lam_rest = hs.lam.copy()
    lam_rest[i] = 0.0
    Sv = assemble_sigma_y(design, HyperState(lam_rest, 0.0, hs.sigma2))
    w, Q = np.linalg.eigh(Sv)
    if np.min(w) <= 0:
        raise np.linalg.LinAlgError("disturbance covariance not positive definite")
    isq = Q @ ((1.0 / np.sqrt(w))[:, None] * Q.T)
    rootn = np.sqrt(design.n)
    A = isq @ design.block(i) / rootn
    U, d, Vt = np.linalg.svd(A, full_matrices=False)
    if np.min(d) <= 0:
        raise np.linalg.LinAlgError("block %d is numerically rank deficient" % i)
    z = U.T @ (isq @ y) / rootn
    beta = eps = None
    if theta_true is not None:
        tb = (theta_true if isinstance(theta_true, BlockVector)
              else BlockVector(np.asarray(theta_true, dtype=float),
                               design.group_sizes))
        beta = Vt @ tb.block(i)
        eps = z - d * beta
    return DiagonalizedBlock(z=z, d=d, beta=beta, block_index=i, eps=eps)
