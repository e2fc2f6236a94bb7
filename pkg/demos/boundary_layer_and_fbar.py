"""
Boundary layers and the homogenized boundary data
=================================================

For each boundary point the half-space problem in the tangent frame is solved
and its tail constant feeds the effective Dirichlet datum.  Normals parallel
to a lattice axis give non-decaying layers; those samples are flagged.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from homlab.cell import constant_field, laminate_field
from homlab.geometry import ellipse
from homlab.layer import LayerProblem, solve_layer
from homlab.pipeline import cosine_data, homogenized_data

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output")
out.mkdir(parents=True, exist_ok=True)

# %% one layer: a Laplace Fourier mode decays like exp(-2 pi |tangential part| t)
normal = np.array([1.0, math.sqrt(2.0)]) / math.sqrt(3.0)
sol = solve_layer(LayerProblem(constant_field(np.eye(2)), normal, lambda th: np.cos(2 * np.pi * th[..., 0]),
                               (32, 32), T=5.0))
amp = np.abs(sol.V[0]).max(axis=(0, 1))
rate = 2 * math.pi * abs(normal[1])
print(f"measured decay rate {-np.polyfit(sol.t[5:60], np.log(amp[5:60]), 1)[0]:.4f}, expected {rate:.4f}")

# %% fbar along an ellipse for a laminate
hd = homogenized_data(ellipse(1.0, 0.6), laminate_field(2.0, 1.0), cosine_data((1, 0)), n_samples=64, N=32)
print(f"{int(hd.flags.sum())} of {hd.u.size} samples flagged")
fig, ax = plt.subplots(figsize=(7, 3))
ax.plot(hd.arclength, hd.values[:, 0], "-", lw=1)
ax.plot(hd.arclength[hd.flags], hd.raw[hd.flags, 0], "rx", label="flagged")
ax.set_xlabel("arclength")
ax.set_ylabel("fbar")
ax.legend()
fig.tight_layout()
fig.savefig(out / "fbar.png", dpi=120)
print("wrote", out / "fbar.png")
