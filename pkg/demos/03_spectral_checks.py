"""
Eigenfunctions and the Dirichlet operator
=========================================

With the arrival rate frozen, every solution of (gamma - A_m) p = 0 is fixed
by its boundary values c_n = p_{n-1,1}(0).  The busy densities are
exp(-Gamma x) times polynomials, so they can be built in closed form and
tested against the operator without any grid error.
"""

import numpy as np

from bulkq import GridConfig, QueueConfig
from bulkq.operators import assemble
from bulkq.spectral import (
    SpectralPoint,
    char_indicator,
    dirichlet,
    kernel_element,
    norm_bound,
    residual,
)

sp = SpectralPoint(gamma=0.5, lam=1.0, mu=2.0)
cfg = QueueConfig(k=2, B=3, mu=2.0)
print(f"Gamma = {sp.Gamma.real}, Lambda = {sp.Lambda.real}")

# %%
# Boundary data c = (1): idle part mu / (Gamma Lambda), level n is
# lam^n x^n / n! exp(-Gamma x).
ke = kernel_element(sp, [1.0], cfg, levels=8)
print("idle part:", np.round(ke.idle.real, 6))
print("busy masses:", np.round(ke.integrals().real[:4], 6),
      " (lam^n / Gamma^(n+1):", np.round([1 / 3.5 ** (n + 1) for n in range(4)], 6), ")")
print(f"sum of busy L1 norms <= {norm_bound(sp, [1.0]):.4f}")

# %%
# The residual with the exact age derivative vanishes to round-off; with
# the upwind matrix it is first order in the cell width.
g = GridConfig(12, 15.0, 3000)
print(f"\nsemi-analytic residual: {residual(sp, kernel_element(sp, [1, 0.5j], cfg, 12), cfg, g):.1e}")
for M in (500, 1000, 2000):
    gg = GridConfig(12, 15.0, M)
    r = residual(sp, kernel_element(sp, [1, 0.5j], cfg, 12), cfg, gg, assemble(cfg, gg, sp.lam),
                 mode="discrete")
    print(f"discrete residual, dx = {gg.dx:.4f}: {r:.3e}")

# %%
# Phi D_gamma and the printed closed forms.  Rows below the first are
# geometric; the idle entries of D_gamma are compared with the printed
# table and mismatches are reported, not asserted.
art = dirichlet(sp, cfg, GridConfig(20, 10.0, 10), N_b=6)
np.set_printoptions(precision=5, suppress=True, linewidth=110)
print("\nPhi D_gamma (first rows):\n", art.PhiD[:4].real)
print("\nobject index  printed      derived      status")
for r in art.report:
    if r.object != "tail_row":
        print(f"{r.object:6s} {r.index:5s}  {r.printed.real:.6f}     {r.derived.real:.6f}     {r.status}")

# %%
# Smallest singular value of I - Phi D_gamma along the real axis.  At
# gamma = 0 a stable queue has a stationary law, and the indicator drops
# to zero there.  To the right of zero it settles as N_b grows; to the
# left it keeps shrinking with N_b, so there the truncated indicator
# cannot single out isolated points.
small = QueueConfig(1, 1, 1.0)
gammas = (-0.45, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0)
print("\n gamma   indicator (k=B=1, lam=0.5, mu=1) for N_b = 20, 40, 60")
table = {nb: [char_indicator(SpectralPoint(x, 0.5, 1.0), small, GridConfig(nb, 5.0, 10), nb)
              for x in gammas] for nb in (20, 40, 60)}
for i, gamma in enumerate(gammas):
    print(f"{gamma:6.2f}   " + "   ".join(f"{table[nb][i]:.3e}" for nb in table))
