"""
A queue under cyclic demand
===========================

Arrivals follow lambda(t) = 0.5 + 0.3 sin t and service starts once two
customers wait, taking at most three.  No closed form exists here, so the
solver is checked against simulation, and the simulator's arrival stream
is checked against the Poisson law it should follow.
"""

import math

import numpy as np
from scipy import stats

from bulkq import GridConfig, QueueConfig, estimate, marginals, rates, solve
from bulkq.dessim import next_arrival, stream

cfg = QueueConfig(k=2, B=3, mu=1.0)
rf = rates.sinusoid(0.5, 0.3)

# %%
# Probability that the server is idle, hour by hour.  The lag between the
# arrival peak (t = pi/2) and the busiest moment is visible in the table.
g = GridConfig.from_step(40, 25.0, 1e-3)
traj = solve(cfg, g, rf, horizon=10.0, checkpoints=np.arange(1, 11))
print("  t   lambda(t)  P(idle)   E[waiting]  mass defect")
for t, s, d in zip(traj.times, traj.states, traj.mass_defect()):
    idle, Q = marginals(s, g)
    waiting = np.arange(cfg.k) @ idle + np.arange(g.N) @ Q
    print(f"{t:4.0f}   {rf.eval(t):.3f}     {idle.sum():.4f}    {waiting:.4f}      {d:+.1e}")

# %%
# Simulation at t = 5 against the solver.
c = 4
est = estimate(cfg, rf, [5.0], n_reps=20_000, master_seed=12345, N=g.N)
idle, Q = marginals(traj.states[c], g)
print("\nstate          solver    simulated  z")
for r in range(cfg.k):
    z = (est.idle_prob[0, r] - idle[r]) / max(est.idle_se[0, r], 1e-12)
    print(f"idle, {r} wait   {idle[r]:.4f}    {est.idle_prob[0, r]:.4f}    {z:+.2f}")
for n in range(4):
    z = (est.queue_prob[0, n] - Q[n]) / max(est.queue_se[0, n], 1e-12)
    print(f"busy, {n} wait   {Q[n]:.4f}    {est.queue_prob[0, n]:.4f}    {z:+.2f}")

# %%
# Thinning should produce exactly Poisson(integral of lambda) counts.
T = 2 * math.pi
counts = []
for rep in range(20_000):
    rng = stream(7, rep)
    t, k = next_arrival(rf, 0.0, rng), 0
    while t <= T:
        k += 1
        t = next_arrival(rf, t, rng)
    counts.append(k)
counts = np.array(counts)
mean = rf.integrate(0.0, T)
print(f"\narrivals on [0, 2 pi]: mean {counts.mean():.4f}, var {counts.var():.4f}, "
      f"Poisson mean {mean:.4f}")
for j in range(7):
    print(f"  P(N = {j}) empirical {np.mean(counts == j):.4f}  Poisson {stats.poisson.pmf(j, mean):.4f}")
