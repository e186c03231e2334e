"""
Transient probabilities three ways
==================================

For constant arrivals the queue is an ordinary Markov chain, so its
transient law can be computed three independent ways: the age-structured
solver, uniformization of the chain generator, and Monte Carlo.  This
script puts them side by side for a single-server queue with k = B = 1.
"""

import numpy as np

from bulkq import GridConfig, QueueConfig, estimate, marginals, rates, solve, uniformization

cfg = QueueConfig(k=1, B=1, mu=1.0)
lam = 1.0
times = (0.1, 1.0, 5.0)

# %%
# The solver works on densities in (queue length, elapsed service age).
# Its default grid keeps 40 queue levels and ages up to 25 / mu.
g = GridConfig.default(cfg)
traj = solve(cfg, g, rates.constant(lam), horizon=5.0, checkpoints=times)
print(f"grid: N={g.N} levels, M={g.M} age cells, dx=dt={g.dx:g}")
print("mass defect per checkpoint:", traj.mass_defect())

# %%
# Uniformization needs only the generator of the (queue, busy) chain.
# Monte Carlo replications use per-replication seeds, so the estimate is
# reproducible no matter how the work is split.
est = estimate(cfg, rates.constant(lam), times, n_reps=20_000, master_seed=12345, N=g.N)

print("\n   t   state        solver     uniformized   simulated (se)")
for c, t in enumerate(times):
    ui, uq = uniformization(cfg, lam, 50, t)
    idle, Q = marginals(traj.states[c], g)
    rows = [("idle, 0 wait", idle[0], ui[0], est.idle_prob[c, 0], est.idle_se[c, 0])]
    for n in range(3):
        rows.append((f"busy, {n} wait", Q[n], uq[n], est.queue_prob[c, n], est.queue_se[c, n]))
    for name, a, b, m, se in rows:
        print(f"{t:5.1f}   {name:12s} {a:.6f}   {b:.6f}      {m:.4f} ({se:.4f})")

# %%
# Halving the step halves the error: the scheme is first order.
ui, uq = uniformization(cfg, lam, 50, 1.0, tol=1e-12)
prev = None
print("\n    dx        max error   ratio")
for dx in (4e-3, 2e-3, 1e-3, 5e-4):
    gg = GridConfig.from_step(40, 25.0, dx)
    idle, Q = marginals(solve(cfg, gg, rates.constant(lam), 1.0).states[-1], gg)
    err = max(np.abs(idle - ui).max(), np.abs(Q - uq[:gg.N]).max())
    ratio = "" if prev is None else f"{err / prev:.3f}"
    print(f"{dx:8.1e}   {err:.3e}   {ratio}")
    prev = err
