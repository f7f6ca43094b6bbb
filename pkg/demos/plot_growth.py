"""Growth of a symmetry-breaking perturbation compared with the linear rate.

The shifted state with a > 0 on the 4-edge star has one real unstable
eigenvalue; ``log d(t)`` of the asymmetric part of ``|Psi|`` should have
that slope once the stable components have died out.
"""

import matplotlib.pyplot as plt
import numpy as np

from nlsgraph import dynamics as dyn
from nlsgraph import graph as gc
from nlsgraph import operators as ops
from nlsgraph import stationary as st

g = gc.validate_graph(4, 2, (1, 1, 1, 1), 1)
a = 0.7
s = st.shifted_state(g, a, grid=gc.EdgeGrid.for_states(1.0, a, spacing=0.02))
rep = ops.stability_spectrum(ops.assemble(g, s, "Lplus"), ops.assemble(g, s, "Lminus"))
lam = rep.max_growth_rate
fit = dyn.growth_rate(g, s, perturbation_seed=0, t_window=40.0, tau=5e-3)

fig, ax = plt.subplots(figsize=(6, 4))
ax.semilogy(fit.times, fit.distance, "k-", lw=1, label="d(t)")
t0, t1 = fit.window
d0 = fit.distance[np.searchsorted(fit.times, t0)]
tt = np.linspace(t0, t1, 50)
ax.semilogy(tt, d0 * np.exp(lam * (tt - t0)), "C3--", label=f"linear rate {lam:.4f}")
ax.axvspan(t0, t1, color="0.9", zorder=0)
ax.set_xlabel("t")
ax.set_ylabel("asymmetric part of |Psi|")
ax.set_title(f"fitted rate {fit.rate:.4f}")
ax.legend()
fig.tight_layout()
fig.savefig("growth.png", dpi=150)
print("wrote growth.png")
