"""Shipped experiment configs, keyed by preset name."""

_FIG1 = """\
[experiment]
model = toy
algorithm = rejection
seed = {seed}

[kernel]
family = {family}
delta = {delta}

[algorithm]
n_target = 200000

[output]
dir = {name}
density_table = true
"""


def _figure1():
    out = {}
    seed = 1
    for delta in (1.0, 0.1):
        for family in ("uniform", "gaussian"):
            name = f"{family}-delta{delta:g}"
            out[name] = _FIG1.format(seed=seed, family=family, delta=delta, name=name)
            seed += 1
    return out


PRESETS = {
    "figure1": _figure1(),
    "fossil-mini": {
        "fossil-mini": """\
[experiment]
model = fossil
algorithm = rejection
seed = 7

[model]
epochs = 0.5, 2.0
counts = 2, 1
lam = 0.5, 1.0
tau = 1.0, 1.8
alpha = 0.3, 0.6

[kernel]
family = model

[algorithm]
n_target = 20000

[output]
dir = fossil-mini
"""
    },
    "pritchard-box": {
        "pritchard-box": """\
[experiment]
model = pritchard
algorithm = rejection
seed = 11

[kernel]
family = uniform
delta = 0.1
metric = max_relative

[algorithm]
n_target = 5000

[output]
dir = pritchard-box
"""
    },
    "discrete-evidence": {
        "discrete-evidence": """\
[experiment]
model = discrete
algorithm = evidence
seed = 5

[kernel]
family = gaussian
sigma = 1.5

[algorithm]
n = 10000
m = 10

[output]
dir = discrete-evidence
"""
    },
    "discrete-mcmc": {
        "discrete-mcmc": """\
[experiment]
model = discrete
algorithm = mcmc-d
seed = 3

[kernel]
family = gaussian
sigma = 1.5

[algorithm]
n_steps = 20000
burn_in = 1000
n_chains = 20

[output]
dir = discrete-mcmc
"""
    },
}
