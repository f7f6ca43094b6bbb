"""Negative eigenvalues of L_+ along the shifted family on a 3-edge star.

For p = 1 the second negative eigenvalue has the closed form
``-3/2 t (t + sqrt(1 + 3 sech^2 a))`` with ``t = tanh|a|``; the shooting
roots should sit on that curve, and a finite-element Lanczos run at a few
shifts should agree to O(h^2).
"""

import math

import matplotlib.pyplot as plt
import numpy as np

from nlsgraph import graph as gc
from nlsgraph import operators as ops
from nlsgraph import shooting as sh
from nlsgraph import stationary as st

g = gc.validate_graph(3, 1, (1 / math.sqrt(2), 1, 1), 1)

shifts = np.linspace(-1.5, 1.5, 31)
shifts = shifts[np.abs(shifts) > 1e-9]
roots = []
for a in shifts:
    rep = sh.find_point_spectrum(g, a, n_grid=600)
    roots.append([e.lam for e in rep.entries if e.lam < -1e-7])

fe_shifts = [-1.0, -0.5, 0.5, 1.0]
fe = []
for a in fe_shifts:
    s = st.shifted_state(g, a, grid=gc.EdgeGrid.for_states(1.0, a, spacing=0.02))
    lam = [v for v, _ in ops.lowest_eigenpairs(ops.assemble(g, s, "Lplus"), 3)]
    fe.append([v for v in lam if v < -1e-3])

fig, ax = plt.subplots(figsize=(6, 4))
for a, r in zip(shifts, roots):
    ax.plot([a] * len(r), r, "k.", ms=4)
grid = np.linspace(-1.5, 1.5, 301)
ax.plot(grid, [sh.lambda1_closed_form(a) for a in grid], "C0-", lw=1, label="closed form")
for a, r in zip(fe_shifts, fe):
    ax.plot([a] * len(r), r, "C3x", ms=7)
ax.axhline(sh.scalar_ground_state_exact(1.0), color="0.6", ls="--", lw=0.8)
ax.set_xlabel("shift a")
ax.set_ylabel("negative eigenvalues of $L_+$")
ax.legend(["shooting", "closed form", "finite elements"], loc="lower left")
fig.tight_layout()
fig.savefig("spectrum_vs_shift.png", dpi=150)
print("wrote spectrum_vs_shift.png")
