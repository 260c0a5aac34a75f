"""The two halves of the scheme, step by step.

1. Adaptive statistics: a running shift/scale pair keeps every
   just-observed normalized target inside a bound that depends only on
   the step size, no matter how wild the raw targets get.
2. Output preservation: when the statistics move, the final linear layer
   is compensated so the unnormalized predictions do not move at all.

Run:  python3 demos/rescaling_walkthrough.py
"""

import numpy as np

from popart.schedules import constant
from popart.stats import Normalizer
from popart.training import OutputLayer

# -- 1. bounded normalized targets ----------------------------------------

beta = 1e-2
bound = np.sqrt((1.0 - beta) / beta)
nrm = Normalizer(k=1, schedule=constant(beta))
stream = [3.0, -1.0, 4.0, 1e9, 2.0, 5.0]  # note the 1e9 spike

print(f"constant step size beta={beta:g}: bound on |normalized target| = {bound:.2f}\n")
print(f"{'target':>12} {'mu':>12} {'sigma':>12} {'normalized':>11}")
for y in stream:
    nrm.update(y)
    print(f"{y:>12g} {nrm.mu[0]:>12.4g} {nrm.sigma[0]:>12.4g} {nrm.normalize(y)[0]:>11.4f}")

# -- 2. output-preserving rescale -----------------------------------------

rng = np.random.default_rng(0)
layer = OutputLayer(1, 4, rng=rng)
features = rng.normal(size=(3, 4))

before = np.array([layer.unnormalized_output(h)[0] for h in features])
layer.rescale_to([123.4], [-56.7])  # adopt wildly different statistics
after = np.array([layer.unnormalized_output(h)[0] for h in features])

print("\nrescale from (sigma=1, mu=0) to (sigma=123.4, mu=-56.7):")
for f_b, f_a in zip(before, after):
    print(f"  prediction before={f_b:+.12f}  after={f_a:+.12f}  drift={abs(f_a - f_b):.2e}")
