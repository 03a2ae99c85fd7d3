#!/usr/bin/env python3
"""Bias is a negotiation between the preconditioner and the prior.

The implicit-bias norm ||theta||_{P^-1} decides which interpolant the
flow picks.  When the prior covariance of the target matches P the
stationary bias attains its lower bound 1/(gamma m*); when they clash
(e.g. the target lives in the small-eigenvalue directions) the plain
flow is badly hurt while whitening is insulated.
"""
import numpy as np

from precondrisk import (PreconditionerSpec, bias_lower_bound, make_joint,
                         make_two_atom, theoretical_bias)

fx = make_two_atom(20.0)
gamma = 2.0


def iso(x):
    return np.ones_like(np.asarray(x, dtype=float))


def inv(x):
    return 1.0 / np.asarray(x, dtype=float)


specs = {
    "gradient flow": PreconditionerSpec.identity(),
    "inverse Fisher": PreconditionerSpec.inverse_pop_fisher(),
    "power 1/2": PreconditionerSpec.power(0.5),
    "prior match": PreconditionerSpec.prior_match(),
}

for title, prior in (("aligned prior (Sigma_theta = I)", iso),
                     ("misaligned prior (Sigma_theta = Sigma_X^-1)", inv)):
    bound = bias_lower_bound(fx, prior, gamma)
    print(f"{title}: lower bound {bound:.4f}")
    for name, spec in specs.items():
        joint = make_joint(fx, prior, spec)
        bias = theoretical_bias(joint, gamma)
        marker = "  <- attains the bound" if abs(bias - bound) < 1e-9 \
            else ""
        print(f"  {name:16s} {bias:8.4f}{marker}")
    print()

print("under the aligned prior the plain flow is already prior-matched;")
print("under the misaligned one its bias is ~7x worse than whitening.")
