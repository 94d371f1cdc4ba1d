"""Synthetic problem generators, metrics, ARX utilities and the Monte Carlo
benchmark harness.

Experiments:
  exp1           i.i.d. standard normal design, 10 blocks of 4
  exp2           columns follow G[:,j] = G[:,j-1] + 0.2 v (correlated design)
  exp2_noisy_a/b/c  exp2 with noise variance = signal variance / 5, 2, 1
  ada            8 scalar coefficients (3, 1.5, 0, 0, 2, 0, 0, 0), rows with
                 covariance beta^|i-j|, beta ~ U(0.5, 1)

Block activation for exp1/exp2: blocks 1-5 always zero, block 6 always
active, blocks 7-10 active with probability one half; active blocks get
components uniform on [-a, a] with a ~ U(0, 100).  The default noise
variance is the sample variance of the noiseless output divided by 25.
Estimators always receive a noise variance estimated from least-squares
residuals, never the generator's true value.
"""

import csv
import json
import numpy as np
from dataclasses import dataclass, field, asdict

from .model import BlockVector, EstimateResult, GroupedDesign
from .convex import ConvexFitConfig, solve_adalasso, solve_glasso, \
    solve_lasso, solve_mkl_lambda, mkl_recover_theta
from .selection import SelectionConfig, estimate_sigma2_ls, fit_hglasso

EXPERIMENTS = ("exp1", "exp2", "exp2_noisy_a", "exp2_noisy_b", "exp2_noisy_c",
               "ada")
_NOISE_DIVISOR = {"exp1": 25.0, "exp2": 25.0, "exp2_noisy_a": 5.0,
                  "exp2_noisy_b": 2.0, "exp2_noisy_c": 1.0}
ADA_THETA = np.array([3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0])

ZERO_TOL = 1e-10


@dataclass
class McConfig:
    experiment: str = "exp1"
    runs: int = 50
    master_seed: int = 0
    estimators: list = field(default_factory=lambda: ["hgla", "mkl"])
    p: int = 10
    k: int = 4
    n: int = 100
    sigma2: float = 1.0     # ada only; block experiments derive it per run
    threads: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.experiment not in EXPERIMENTS:
            raise ValueError("unknown experiment %r; choose from %s"
                             % (self.experiment, EXPERIMENTS))
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise ValueError("unknown estimator %r; registry: %s"
                                 % (name, sorted(ESTIMATORS)))


def run_seed(master_seed, run_index):
    """Deterministic per-run seed material."""
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=(int(run_index),))
    return ss, int(ss.generate_state(1)[0])


def gen_problem(config, run_index):
    """Draw one problem instance: (design, theta_true, y, sigma2_true)."""
    ss, _ = run_seed(config.master_seed, run_index)
    rng = np.random.default_rng(ss)
    if config.experiment == "ada":
        n = config.n
        m = ADA_THETA.size
        beta = rng.uniform(0.5, 1.0)
        cov = beta ** np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
        G = rng.multivariate_normal(np.zeros(m), cov, size=n,
                                    method="cholesky")
        design = GroupedDesign(G, [1] * m)
        theta = BlockVector(ADA_THETA.copy(), [1] * m)
        sigma2 = config.sigma2
        y = G @ theta.theta + np.sqrt(sigma2) * rng.standard_normal(n)
        return design, theta, y, sigma2

    p, k, n = config.p, config.k, config.n
    m = p * k
    if config.experiment == "exp1":
        G = rng.standard_normal((n, m))
    else:
        G = np.empty((n, m))
        G[:, 0] = rng.standard_normal(n)
        for j in range(1, m):
            G[:, j] = G[:, j - 1] + 0.2 * rng.standard_normal(n)
    design = GroupedDesign(G, [k] * p)

    # blocks 1..5 silent, block 6 active, the rest a coin flip each
    active = np.zeros(p, dtype=bool)
    active[5] = True
    active[6:] = rng.random(p - 6) < 0.5
    theta = np.zeros(m)
    for i in np.nonzero(active)[0]:
        a = rng.uniform(0.0, 100.0)
        theta[design.slices[i]] = rng.uniform(-a, a, size=k)
    noiseless = G @ theta
    sigma2 = float(np.var(noiseless)) / _NOISE_DIVISOR[config.experiment]
    sigma2 = max(sigma2, 1e-12)
    y = noiseless + np.sqrt(sigma2) * rng.standard_normal(n)
    return design, BlockVector(theta, [k] * p), y, sigma2


# ============================================================
# metrics
# ============================================================

def percentage_error(theta_hat, theta_true):
    """100 ||theta_true - theta_hat|| / ||theta_true||."""
    t = np.asarray(getattr(theta_true, "theta", theta_true), dtype=float)
    h = np.asarray(getattr(theta_hat, "theta", theta_hat), dtype=float)
    norm = np.linalg.norm(t)
    if norm == 0:
        raise ValueError("percentage error undefined for a zero true theta")
    return float(100.0 * np.linalg.norm(t - h) / norm)


def zero_pattern(result, design):
    """Per-block estimated-zero flags.

    Uses lambda when the estimator produced one, otherwise block norms of
    theta; "zero" means below 1e-10 times max(largest value, 1).
    """
    if result.lam is not None:
        v = np.asarray(result.lam, dtype=float)
    else:
        bv = BlockVector(result.theta, design.group_sizes)
        v = bv.block_norms()
    thr = ZERO_TOL * max(float(np.max(v, initial=0.0)), 1.0)
    return [bool(x <= thr) for x in v]


def sparsity_index(per_run_outcomes):
    """Percent of truly-zero blocks correctly estimated zero, pooled.

    per_run_outcomes: iterable of (estimated_zero_flags, true_zero_flags).
    """
    hit = tot = 0
    for est, true in per_run_outcomes:
        for e, t in zip(est, true):
            if t:
                tot += 1
                hit += bool(e)
    if tot == 0:
        raise ValueError("no truly-zero blocks to score")
    return 100.0 * hit / tot


# ============================================================
# ARX
# ============================================================

@dataclass
class ArxProblem:
    design: GroupedDesign
    y: np.ndarray
    q: int
    n_inputs: int
    means: np.ndarray   # per-channel normalization offsets (output first)
    stds: np.ndarray


@dataclass
class ArxModel:
    theta: np.ndarray
    q: int
    n_inputs: int
    means: np.ndarray
    stds: np.ndarray


def build_arx(series, q):
    """Lagged regression for y_t on its own past and each input's past.

    series: (T, 1 + n_inputs) array, output in column 0.  Channels are
    normalized to zero mean and unit variance; rows are t = q .. T-1 with
    regressor groups [output lags 1..q, input-1 lags 1..q, ...].
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    if series.shape[0] <= q + 1:
        raise ValueError("series length %d too short for lag order %d"
                         % (series.shape[0], q))
    T, chans = series.shape
    means = series.mean(axis=0)
    stds = series.std(axis=0)
    stds = np.where(stds > 0, stds, 1.0)
    z = (series - means) / stds
    rows = T - q
    cols = []
    for c in range(chans):
        for lag in range(1, q + 1):
            cols.append(z[q - lag:T - lag, c])
    G = np.column_stack(cols)
    y = z[q:, 0]
    return ArxProblem(design=GroupedDesign(G, [q] * chans), y=y, q=q,
                      n_inputs=chans - 1, means=means, stds=stds)


def cod_k(model, test_series, k):
    """Coefficient of determination of k-step-ahead predictions.

    The k-step prediction iterates the one-step ARX predictor, feeding
    predicted outputs into the output-lag slots and measured inputs into the
    input-lag slots.  COD = 1 - sum (y - yhat)^2 / sum (y - mean y)^2 on the
    usable test rows.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    series = np.atleast_2d(np.asarray(test_series, dtype=float))
    q = model.q
    if series.shape[0] <= q + k:
        raise ValueError("test series too short")
    z = (series - model.means) / model.stds
    T = series.shape[0]
    chans = series.shape[1]
    th = model.theta.reshape(chans, q)

    preds, truth = [], []
    for t in range(q + k - 1, T):
        ybuf = z[:, 0].copy()  # predictions overwrite entries > t-k
        for tt in range(t - k + 1, t + 1):
            acc = 0.0
            for c in range(chans):
                src = ybuf if c == 0 else z[:, c]
                acc += th[c] @ src[tt - q:tt][::-1]  # lags 1..q
            ybuf[tt] = acc
        preds.append(ybuf[t])
        truth.append(z[t, 0])
    preds = np.asarray(preds)
    truth = np.asarray(truth)
    denom = np.sum((truth - truth.mean()) ** 2)
    if denom == 0:
        raise ValueError("test output is constant")
    return float(1.0 - np.sum((truth - preds) ** 2) / denom)


def gen_arx_series(T, seed, n_inputs=3):
    """Documented synthetic sparse ARX system used in place of real data.

    Three white-noise inputs; only the first input drives the output:
    y_t = 0.6 y_{t-1} - 0.2 y_{t-2} + 0.8 u1_{t-1} + 0.4 u1_{t-2} + e_t,
    e ~ N(0, 0.1).  Returns a (T, 1 + n_inputs) array, output first.
    """
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((T, n_inputs))
    y = np.zeros(T)
    e = np.sqrt(0.1) * rng.standard_normal(T)
    for t in range(2, T):
        y[t] = (0.6 * y[t - 1] - 0.2 * y[t - 2]
                + 0.8 * u[t - 1, 0] + 0.4 * u[t - 2, 0] + e[t])
    return np.column_stack([y, u])


ARX_TRUE_ACTIVE_CHANNELS = 2  # output lags + input 1


# ============================================================
# estimator registry
# ============================================================

def _hgla_stage(y, design, sigma2, ctx):
    if "hgla" not in ctx:
        cfg = SelectionConfig(variant="hgla")
        ctx["hgla"] = fit_hglasso(y, design, cfg)
    return ctx["hgla"]


def _est_hgl(variant):
    def fit(y, design, sigma2, ctx):
        if variant == "hgla":
            return _hgla_stage(y, design, sigma2, ctx)[0]
        res, _ = fit_hglasso(y, design, SelectionConfig(variant=variant))
        return res
    return fit


def _cv_split(y, design):
    n_tr = int(np.ceil(0.5 * design.n))
    d_tr = GroupedDesign(design.G[:n_tr], design.group_sizes)
    d_val = GroupedDesign(design.G[n_tr:], design.group_sizes)
    return y[:n_tr], y[n_tr:], d_tr, d_val


def est_mkl(y, design, sigma2, ctx):
    """Kernel-scale estimator; gamma chosen by validation on a grid spanning
    [1e-2, 1e4] times the gamma picked by the staged hgla fit."""
    _, trace = _hgla_stage(y, design, sigma2, ctx)
    gamma_ref = trace.chosen_gamma
    grid = np.logspace(np.log10(1e-2 * gamma_ref), np.log10(1e4 * gamma_ref), 30)
    y_tr, y_val, d_tr, d_val = _cv_split(y, design)
    best = None
    for gamma in grid:
        lam = solve_mkl_lambda(y_tr, d_tr, sigma2, gamma).lam
        th = mkl_recover_theta(lam, y_tr, d_tr, sigma2).theta
        err = np.linalg.norm(y_val - d_val.G @ th)
        if best is None or err < best[0]:
            best = (err, gamma)
    gamma = best[1]
    lam = solve_mkl_lambda(y, design, sigma2, gamma).lam
    res = mkl_recover_theta(lam, y, design, sigma2)
    res.gamma = gamma
    return res


def est_glasso(y, design, sigma2, ctx):
    """Group Lasso with the penalty tied to mkl's choice via sqrt(2 gamma)."""
    mkl_res = ctx.get("mkl") or est_mkl(y, design, sigma2, ctx)
    ctx["mkl"] = mkl_res
    cfg = ConvexFitConfig(reg_param=np.sqrt(2.0 * mkl_res.gamma))
    return solve_glasso(y, design, sigma2, cfg)


def _lasso_grid(y, G, sigma2):
    gmax = np.max(np.abs(G.T @ y)) / sigma2
    return np.logspace(np.log10(1e-4 * gmax), np.log10(gmax), 30)


def est_lasso(y, design, sigma2, ctx):
    y_tr, y_val, d_tr, d_val = _cv_split(y, design)
    grid = _lasso_grid(y_tr, d_tr.G, sigma2)
    best = None
    for gamma in grid:
        th = solve_lasso(y_tr, d_tr.G, ConvexFitConfig(reg_param=gamma),
                         sigma2=sigma2).theta
        err = np.linalg.norm(y_val - d_val.G @ th)
        if best is None or err < best[0]:
            best = (err, gamma)
    gamma = best[1]
    return solve_lasso(y, design.G, ConvexFitConfig(reg_param=gamma),
                       sigma2=sigma2)


def est_adalasso(y, design, sigma2, ctx):
    grid = _lasso_grid(y[:int(np.ceil(0.5 * y.size))],
                       design.G[:int(np.ceil(0.5 * y.size))], sigma2)
    return solve_adalasso(y, design.G, sigma2, {"gamma": grid})


def est_oracle(y, design, sigma2, ctx):
    """Returns the true coefficients; for harness tests only."""
    theta = ctx["theta_true"].theta
    bv = BlockVector(theta, design.group_sizes)
    lam = np.array([float(bv.block(i) @ bv.block(i)) > 0
                    for i in range(design.p)], dtype=float)
    return EstimateResult(theta=theta.copy(), lam=lam,
                          selected=list(np.nonzero(lam)[0]))


ESTIMATORS = {
    "hgla": _est_hgl("hgla"),
    "hglb": _est_hgl("hglb"),
    "hglc": _est_hgl("hglc"),
    "mkl": est_mkl,
    "glasso": est_glasso,
    "lasso": est_lasso,
    "adalasso": est_adalasso,
    "oracle": est_oracle,
}


# ============================================================
# Monte Carlo harness
# ============================================================

@dataclass
class McReport:
    config: dict
    per_run: list       # dicts: run, seed, method, pct_error, zero_pattern
    aggregates: dict

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"config": self.config, "per_run": self.per_run,
                       "aggregates": self.aggregates}, fh, indent=2,
                      sort_keys=True)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for row in self.per_run:
                w.writerow([row["run"], row["seed"], row["method"],
                            row["pct_error"],
                            "".join("1" if z else "0"
                                    for z in row["zero_pattern"])])


def _one_run(config, run_index):
    design, theta_true, y, _ = gen_problem(config, run_index)
    _, seed = run_seed(config.master_seed, run_index)
    sigma2 = estimate_sigma2_ls(y, design.G)
    true_zeros = [float(theta_true.block(i) @ theta_true.block(i)) == 0.0
                  for i in range(design.p)]
    ctx = {"theta_true": theta_true}
    rows = []
    for name in config.estimators:
        try:
            res = ESTIMATORS[name](y, design, sigma2, ctx)
            rows.append({"run": run_index, "seed": seed, "method": name,
                         "pct_error": percentage_error(res, theta_true),
                         "zero_pattern": zero_pattern(res, design),
                         "true_zeros": true_zeros, "error": None})
        except Exception as exc:  # recorded, not fatal
            rows.append({"run": run_index, "seed": seed, "method": name,
                         "pct_error": None, "zero_pattern": None,
                         "true_zeros": true_zeros, "error": str(exc)})
    return rows


def run_monte_carlo(config):
    """Run the campaign and aggregate; deterministic given the config."""
    per_run = []
    if config.threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            for rows in pool.map(_one_run, [config] * config.runs,
                                 range(config.runs)):
                per_run.extend(rows)
    else:
        for r in range(config.runs):
            per_run.extend(_one_run(config, r))
    per_run.sort(key=lambda row: (row["run"], row["method"]))

    aggregates = {}
    for name in config.estimators:
        rows = [r for r in per_run if r["method"] == name and r["error"] is None]
        errs = np.array([r["pct_error"] for r in rows], dtype=float)
        outcomes = [(r["zero_pattern"], r["true_zeros"]) for r in rows]
        aggregates[name] = {
            "runs_ok": len(rows),
            "mean_pct_error": float(np.mean(errs)) if errs.size else None,
            "median_pct_error": float(np.median(errs)) if errs.size else None,
            "sparsity_index": sparsity_index(outcomes) if outcomes else None,
        }
    return McReport(config=asdict(config), per_run=per_run,
                    aggregates=aggregates)
