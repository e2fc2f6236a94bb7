"""
Effective coefficients and lattice-resonant directions
======================================================

A laminate ``a(y) = 2 + sin(2 pi y1)`` homogenizes to the harmonic mean across
the layers and the arithmetic mean along them.  The second half scans boundary
normal directions and shows where the Diophantine constant collapses.

Run ``python demos/cell_and_directions.py [output_dir]``.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from homlab.cell import homogenize, laminate_field
from homlab.diophantine import default_mu, direction_from_angle, kappa_many

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output")
out.mkdir(parents=True, exist_ok=True)

# %% cell problem: ahat_11 -> sqrt(3), ahat_22 -> 2
field = laminate_field(2.0, 1.0)
sizes = (32, 64, 128, 256)
a11 = []
for N in sizes:
    _, ahat = homogenize(field, N)
    a11.append(ahat.matrix()[0, 0])
    print(f"N={N:4d}  ahat_11={a11[-1]:.10f}  ahat_22={ahat.matrix()[1, 1]:.10f}")
gaps = np.abs(np.array(a11) - math.sqrt(3))
print("observed order", np.round(np.log2(gaps[:-1] / gaps[1:]), 3))

# %% kappa over directions: zero at rational slopes, largest near "badly approximable" ones
angles = np.linspace(1e-3, math.pi / 2 - 1e-3, 2000)
dirs = np.stack([direction_from_angle(t) for t in angles])
kap = kappa_many(dirs, default_mu(2, 1.0), 200)
best = angles[np.argmax(kap)]
print(f"largest kappa {kap.max():.4f} at slope tan = {math.tan(best):.5f}")

fig, ax = plt.subplots(figsize=(7, 3))
ax.plot(angles, kap, lw=0.7)
for p, q in ((1, 1), (1, 2), (2, 1), (1, 3), (3, 1)):
    ax.axvline(math.atan2(q, p), color="0.7", lw=0.5, ls=":")
ax.set_xlabel("normal angle")
ax.set_ylabel("kappa (R = 200)")
fig.tight_layout()
fig.savefig(out / "kappa_by_angle.png", dpi=120)
print("wrote", out / "kappa_by_angle.png")
