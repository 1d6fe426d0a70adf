"""
Sample paths under a random bandwidth
=====================================

A draw from the prior is a squared-exponential path evaluated at ``A t``,
with ``A^d`` Gamma distributed.  Large ``A`` squeezes many oscillations
into [0, 1]; small ``A`` leaves the path nearly flat.
"""

import numpy as np

from rescaled_gp.bandwidth import GammaRootPrior
from rescaled_gp.spectral import GridSpec, rescale, sample_features

prior = GammaRootPrior(d=1, shape=1.0, rate=1.0)
rng = np.random.default_rng(0)
grid = GridSpec.dyadic(8).points()

# The bandwidth has an exponential law here; its median is log 2.
draws = prior.sample(rng, size=100_000)
print(f"median A: sample {np.median(draws):.4f}, exact {prior.median():.4f}")

# Roughness of a path: count sign changes on the grid.
print("\n   A    sign changes   max |W|")
for a in (0.5, 2.0, 8.0, 32.0):
    path = rescale(sample_features(512, rng), a)(grid)
    crossings = int(np.sum(np.diff(np.sign(path)) != 0))
    print(f"{a:5.1f}   {crossings:8d}      {np.max(np.abs(path)):.3f}")

# The tail P(A > a) decays like exp(-a): large bandwidths are rare but possible.
for a in (3.0, 6.0, 9.0):
    print(f"P(A > {a:g}) = {prior.sf(a):.2e}")
