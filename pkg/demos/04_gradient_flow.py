#!/usr/bin/env python3
"""Risk along the flow: early stopping and the epoch-wise bump.

Variance only accumulates as training proceeds, so stopping early
trades it against bias.  Near the interpolation threshold the plain
flow's bias is not even monotone: it rises, peaks, and falls again
(epoch-wise double descent), while the whitened flow descends cleanly.
"""
import numpy as np

from precondrisk import (PreconditionerSpec, make_two_atom,
                         optimal_early_stopping, sample_design, trajectory)


def inv(x):
    return 1.0 / np.asarray(x, dtype=float)


# near-threshold setting: gamma = 16/15, misaligned prior, kappa = 32
fx = make_two_atom(32.0)
n = 300
d = int(round(16.0 / 15.0 * n))
design = sample_design(n, d, fx, "gaussian", seed=0)
grid = np.geomspace(1e-2, 1e6, 25)

gd = trajectory(design, PreconditionerSpec.identity(), inv, 1.0, grid)
ngd = trajectory(design, PreconditionerSpec.inverse_pop_fisher(), inv,
                 1.0, grid)

print(f"{'t':>12} {'GD bias':>9} {'NGD bias':>9} {'GD risk':>9}")
for p, q in zip(gd[::3], ngd[::3]):
    print(f"{p.t:12.3g} {p.bias:9.4f} {q.bias:9.4f} {p.risk:9.4f}")

stop = optimal_early_stopping(gd)
print()
print(f"GD bias peaks mid-training, then decays: the transient aligns")
print(f"with large eigendirections first, which is exactly where this")
print(f"misaligned target is NOT.")
print(f"optimal stopping for GD: t = {stop.t_risk:.3g} with risk "
      f"{stop.risk:.4f} (stationary risk {gd[-1].risk:.4f})")
