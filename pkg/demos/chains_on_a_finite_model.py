"""
Metropolis chains on a finite model
===================================

The parameter-space chain accepts with the error density over its bound
times the usual prior and proposal ratio.  The joint chain carries the
simulated output along and needs no bound.  On a finite model both the
transition matrices and the target can be written down, so balance can be
checked exactly and the empirical frequencies compared with the truth.
"""

import numpy as np

from abcerr import Gaussian, GridRandomWalk, McmcConfig, run_chain
from abcerr.mcmc import balance_violation, stationary_c, stationary_d, transition_matrix_c, transition_matrix_d
from abcerr.models import DiscreteOracleModel

oracle = DiscreteOracleModel.default()
model = oracle.as_model()
kernel = Gaussian(1.5)
w = oracle.kernel_weights(kernel)
Q = GridRandomWalk(oracle.prior).matrix()

Pc = transition_matrix_c(oracle.prior_probs, oracle.transition, w, Q, kernel.c)
Pd, states = transition_matrix_d(oracle.prior_probs, oracle.transition, w, Q)
print(f"balance, parameter chain: {balance_violation(Pc, stationary_c(oracle.prior_probs, oracle.transition, w)):.1e}")
print(f"balance, joint chain:     {balance_violation(Pd, stationary_d(oracle.prior_probs, oracle.transition, w, states)):.1e}")

exact = oracle.posterior(kernel)
for algorithm in ("c", "d"):
    cfg = McmcConfig(5000, GridRandomWalk(oracle.prior), kernel, algorithm=algorithm, burn_in=100, n_chains=40, seed=2)
    s = run_chain(cfg, model.prior, model.simulator, model.obs)
    freq = np.array([(s.theta[:, 0] == t).mean() for t in oracle.theta_grid])
    print(f"algorithm {algorithm}: acceptance {s.meta['acceptance_rate']:.3f}, "
          f"TV to exact {0.5 * np.abs(freq - exact).sum():.4f}")
