"""Saturation estimators under an orthogonal design.

When the design satisfies G^T G = n I, the per-block scale estimates have
closed forms of the type max(0, .), and the probability that a block is
zeroed is an exact noncentral chi-square tail.  This script compares the
iterative solvers with those formulas on one instance, then checks the
zero probability against simulation.
"""

import numpy as np

from groupsparse import (
    GroupedDesign, ZeroProbQuery, closed_form_lambda_mkl_orth,
    closed_form_lambda_orth, prob_lambda_zero, solve_hgl_pqn,
    solve_mkl_lambda,
)

rng = np.random.default_rng(0)

# build an orthogonal design with three blocks of width 3
n, sizes = 90, [3, 3, 3]
m = sum(sizes)
Q, _ = np.linalg.qr(rng.standard_normal((n, m)))
design = GroupedDesign(Q * np.sqrt(n), sizes)

theta = np.zeros(m)
theta[0:3] = [1.2, -0.8, 0.5]      # block 0 active, blocks 1-2 silent
sigma2 = 0.5
y = design.G @ theta + np.sqrt(sigma2) * rng.standard_normal(n)

gamma = 1.0
theta_ls = design.G.T @ y / n

print("block   solver(hgl)   formula(hgl)   solver(mkl)   formula(mkl)")
lam_hgl = solve_hgl_pqn(y, design, sigma2, gamma).lam
lam_mkl = solve_mkl_lambda(y, design, sigma2, gamma).lam
for i, s in enumerate(design.slices):
    ch = closed_form_lambda_orth(theta_ls[s], sizes[i], n, sigma2, gamma)
    cm = closed_form_lambda_mkl_orth(theta_ls[s], n, sigma2, gamma)
    print("  %d     %11.6f   %12.6f   %11.6f   %12.6f"
          % (i, lam_hgl[i], ch, lam_mkl[i], cm))

# exact zero probability for a silent block vs 10^4 simulated draws
draws = 10_000
tls = np.sqrt(sigma2 / n) * rng.standard_normal((draws, 3))
emp = np.mean([closed_form_lambda_orth(t, 3, n, sigma2, gamma) == 0.0
               for t in tls])
exact = prob_lambda_zero(ZeroProbQuery(0.0, 3, n, sigma2, gamma, "hgl"))
print("\nP[silent block zeroed]: exact %.4f, simulated %.4f" % (exact, emp))
