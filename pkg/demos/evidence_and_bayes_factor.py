"""
Evidence under an error model
=============================

Averaging the error density over simulations from the prior estimates the
evidence of the model with that error.  Two finite models have evidences
that can be enumerated, so the estimates and their Bayes factor can be
checked directly.
"""

from abcerr import Gaussian, UniformBall, bayes_factor, estimate_evidence
from abcerr.models import DiscreteOracleModel, toy_model

kernel = Gaussian(1.5)
estimates = []
for seed in (1, 2):
    m = DiscreteOracleModel.default(seed=seed)
    est = estimate_evidence(m.prior, m.simulator, m.obs, kernel, n=10_000, m=10, seed=seed)
    estimates.append(est)
    print(f"model {seed}: estimate {est.value:.5f} +- {est.std_error:.5f}, exact {m.evidence(kernel):.5f}")

bf = bayes_factor(*estimates)
exact = DiscreteOracleModel.default(seed=1).evidence(kernel) / DiscreteOracleModel.default(seed=2).evidence(kernel)
print(f"Bayes factor {bf.value:.4f} +- {bf.std_error:.4f}, exact {exact:.4f}")

# with a uniform error the estimate is the acceptance rate over the box volume
toy = toy_model()
for m_inner in (1, 10, 100):
    est = estimate_evidence(toy.prior, toy.simulator, toy.obs, UniformBall(0.5), n=2000, m=m_inner, seed=5)
    print(f"toy, m = {m_inner:3d}: {est.value:.5f} +- {est.std_error:.5f}")
