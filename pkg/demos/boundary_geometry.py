"""
Flat points and the adaptive boundary partition
===============================================

The quartic oval ``x^4 + y^4 = 1`` has four flat points where the curvature
vanishes to second order.  We classify the boundary, compare gradient
sublevel exponents, then cut an ellipse patch into dyadic cubes whose size
follows the local Diophantine quality of the normal.
"""

from __future__ import annotations

import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from homlab.geometry import classify_boundary, ellipse, gradient_sublevel_exponent, local_graph, superellipse
from homlab.partition import boundary_partition, size_and_sum_checks

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output")
out.mkdir(parents=True, exist_ok=True)

oval = superellipse(4, 1.0, 1.0)
u, types, _ = classify_boundary(oval, 32)
values, counts = np.unique(types, return_counts=True)
print("types along the oval:", {int(v): int(c) for v, c in zip(values, counts)})
for u0 in (0.0, 0.125):
    fit = gradient_sublevel_exponent(local_graph(oval, u0))
    print(f"  gradient sublevel exponent at u={u0}: {fit.exponent:.3f}")

# %% partition of an ellipse patch for a few scales
patch = local_graph(ellipse(1.0, 0.6), 0.1)
fig, axes = plt.subplots(3, 1, figsize=(7, 5), sharex=True)
for ax, tau in zip(axes, (2.0 ** -5, 2.0 ** -7, 2.0 ** -9)):
    part, _ = boundary_partition(patch, tau, 1.0)
    rep = size_and_sum_checks(part)
    print(f"tau=2^{int(np.log2(tau))}: {len(part.cubes)} cubes, sizes in [{rep['r_min']:.4g}, {rep['r_max']:.4g}]")
    for lo, side in zip(part.lows, part.sides):
        ax.add_patch(plt.Rectangle((lo, 0), side, side, fill=False, lw=0.6))
    ax.set_ylim(0, part.sides.max() * 1.1)
    ax.set_ylabel(f"tau=2^{int(np.log2(tau))}")
axes[0].set_xlim(part.q0.lo, part.q0.hi)
axes[-1].set_xlabel("tangent coordinate")
fig.tight_layout()
fig.savefig(out / "partition.png", dpi=120)
print("wrote", out / "partition.png")
