"""
Reproducing kernel Hilbert spaces of the rescaled field
=======================================================

Elements of the RKHS at scale ``a`` are functions
``h(t) = Re int exp(i lam t) psi(lam) mu_a(dlam)`` with norm ``|psi|_{L2(mu_a)}``.
This tour evaluates a kernel section, moves an element to a larger scale and
approximates a rough and a smooth function.
"""

import math

import numpy as np

from rescaled_gp.rkhs import (
    analytic_membership,
    holder_approximant,
    kernel_section,
    nesting_check,
)
from rescaled_gp.spectral import SpectralMeasure
from rescaled_gp.truths import make_truth

# A kernel section reproduces the covariance and has unit norm.
q = SpectralMeasure.build(1, 3.0)
h = kernel_section(q, [0.4])
t = np.linspace(0, 1, 5)
print("section values:", np.round(h(t), 6))
print("covariance:    ", np.round(np.exp(-(3.0 * (t - 0.4)) ** 2), 6))
print(f"squared norm {h.sq_norm:.10f}")

# The ball at scale a sits inside the ball at scale b >= a, inflated by b / a.
r = nesting_check(h, 6.0)
print(f"\nnorm^2 at b=6: {r.sq_norm_b:.4f} <= (b/a) norm^2 at a=3: {r.bound:.4f}")

# A Weierstrass-type function of smoothness 1/2: the error shrinks roughly like a^(-1/2)
# while the norm grows.
w = make_truth("weierstrass", alpha=0.5)
print("\n  a    sup error   squared norm")
for a in (4.0, 8.0, 16.0, 32.0):
    hh, err = holder_approximant(w, a)
    print(f"{a:4.0f}   {err:.4f}      {hh.sq_norm:8.2f}")

# exp(-t^2) lies in the RKHS itself once a^2 > 1/2, with norm growing like a.
g = make_truth("gaussian-bump", width=1.0, center=0.0)
for a in (2.0, 4.0, 8.0):
    n2 = analytic_membership(g, a)
    closed = (a / 2) / math.sqrt(0.5 - 1 / (4 * a * a))
    print(f"a={a:g}: squared norm {n2:.6f} (closed form {closed:.6f})")
