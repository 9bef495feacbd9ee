"""
Uniform versus Gaussian error on the normal mixture
===================================================

The simulator draws from 0.5 N(theta, 1) + 0.5 N(theta, 1/100) and the
observation is 0.  Accepting with a uniform error of half-width delta and
with a Gaussian error of the same variance gives two different posteriors.
They differ visibly at delta = 1 and almost coincide at delta = 0.1.
"""

import math

import numpy as np
from scipy import stats

from abcerr import Gaussian, RejectionConfig, ToyPosterior, UniformBall, run_rejection
from abcerr.models import toy_model

toy = toy_model()
edges = np.linspace(-4, 4, 17)

for delta in (1.0, 0.1):
    print(f"\ndelta = {delta}")
    for kind, kernel in (("uniform", UniformBall(delta)), ("gaussian", Gaussian(delta / math.sqrt(3)))):
        s = run_rejection(toy.prior, toy.simulator, toy.obs, RejectionConfig(kernel, n_target=50_000, seed=1))
        post = ToyPosterior(kind, delta)
        ks = stats.kstest(s.theta[:, 0], post.cdf).statistic
        print(f"  {kind:8s} acceptance {s.acceptance_rate:.4f}  KS vs analytic {ks:.4f}")

    # the analytic densities on a coarse grid
    mid = 0.5 * (edges[1:] + edges[:-1])
    u, g = ToyPosterior("uniform", delta).pdf(mid), ToyPosterior("gaussian", delta).pdf(mid)
    for t, a, b in zip(mid, u, g):
        print(f"  theta {t:+.2f}  uniform {a:.4f}  gaussian {b:.4f}")
