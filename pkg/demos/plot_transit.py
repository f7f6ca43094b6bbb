"""A line soliton crossing the vertex of a balanced 3-edge star.

When the weights satisfy the balance condition the crossing is reflectionless:
the incoming edge empties and the outgoing edges carry rescaled copies of the
line solution.  A control graph with equal weights reflects part of the mass.
"""

import math

import matplotlib.pyplot as plt
import numpy as np

from nlsgraph import dynamics as dyn
from nlsgraph import graph as gc

balanced = gc.validate_graph(3, 1, (1 / math.sqrt(2), 1, 1), 1)
control = gc.StarGraph(3, 1, (1.0, 1.0, 1.0), 1.0)

fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
for ax, g, name in zip(axes, (balanced, control), ("balanced", "equal weights")):
    res = dyn.transit_test(g, c=1.0, x_start=-8.0, tau=2e-3, spacing=0.02)
    traj = res.trajectory
    x = traj.grid.x
    fin = np.abs(traj.final.values)
    ax.plot(-x, fin[0], "C0", label="incoming")
    for j in (1, 2):
        ax.plot(x, fin[j], f"C{j}", label=f"outgoing {j}")
    ax.set_xlim(-20, 20)
    ax.set_title(f"{name}: transmitted fraction {res.transmitted_mass_fraction:.4f}")
    ax.set_ylabel("|psi| at t = 16")
axes[0].legend(fontsize=8)
axes[1].set_xlabel("signed distance from vertex")
fig.tight_layout()
fig.savefig("transit.png", dpi=150)
print("wrote transit.png")
