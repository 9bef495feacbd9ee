"""
Exact sampling for a fossil count model
=======================================

Trees grow by a birth process.  Each lineage alive during an epoch leaves a
fossil with probability alpha, so the observed counts are binomial given
the lineage counts.  Accepting a simulated tree with that binomial
probability gives exact posterior draws on a small parameter grid.
"""

import numpy as np

from abcerr import RejectionConfig, make_stream, run_rejection
from abcerr.models import fossil_acceptance_prob, fossil_model, simulate_fossil_batch

model = fossil_model()
grid = np.asarray(model.prior.points)

s = run_rejection(model.prior, model.simulator, model.obs, RejectionConfig(model.rule, n_target=20_000, seed=3))
idx = model.prior.index_of(s.theta)
post = np.bincount(idx, minlength=len(grid)) / len(idx)
print(f"acceptance rate {s.acceptance_rate:.4f}")

# brute force: average the binomial probability over forward simulations
like = np.array([
    fossil_acceptance_prob(
        simulate_fossil_batch(lam, tau, model.params["epochs"], make_stream(4, i), size=200_000).counts,
        model.obs.values, alpha).mean()
    for i, (lam, tau, alpha) in enumerate(grid)
])
brute = np.asarray(model.prior.probs) * like
brute /= brute.sum()

print("lambda  tau   alpha  rejection  brute force")
for (lam, tau, alpha), a, b in zip(grid, post, brute):
    print(f"{lam:6.2f} {tau:5.2f} {alpha:6.2f}   {a:.4f}     {b:.4f}")
print(f"total variation {0.5 * np.abs(post - brute).sum():.4f}")
