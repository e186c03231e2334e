"""Forward integration of the state-probability equations.

The busy densities are transported exactly along characteristics: with
``dt == dx`` one step moves every cell one cell to the right.  Within a
step each unit of busy mass either survives unchanged (probability
``exp(-(lam+mu) dt)``), sees an arrival first (moves up one level) or
sees a completion first (becomes boundary inflow or idle mass).  Using
the exact first-event fractions instead of ``lam*dt`` and ``mu*dt``
makes every step conserve probability to round-off; what leaves the
truncated grid is booked in ``lost_mass``.

The constant-rate uniformization oracle lives here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .model import GridConfig, QueueConfig, StateVector, csv_header, csv_row, \
    marginals, total_mass, write_rows
from .rates import RateFunction

__all__ = [
    "SchemeError",
    "Trajectory",
    "step",
    "solve",
    "ctmc_generator",
    "uniformization",
]

NEG_TOL = 1e-9
MAX_STEPS = 100_000_000


class SchemeError(RuntimeError):
    """A step produced a negative probability."""


def _fractions(lam, mu, h):
    a = lam + mu
    d = math.exp(-a * h)
    return d, lam / a * (1.0 - d), mu / a * (1.0 - d)


def _advance(idle, busy, Q, lam, cfg: QueueConfig, h):
    """Shared update for one step.

    ``busy`` (densities, levels x active cells) is updated in place.
    Returns ``(new_idle, fill_density, escaped_mass)`` where the fill is
    the new age-zero column and the escaped mass left through level N-1.
    """
    k, B = cfg.k, cfg.B
    N = busy.shape[0]
    d, f_arr, f_srv = _fractions(lam, cfg.mu, h)

    escaped = f_arr * Q[-1]
    moved_up = f_arr * busy[:-1]
    busy *= d
    busy[1:] += moved_up
    completed = f_srv * Q

    e = math.exp(-lam * h)
    moved = (1.0 - e) * idle
    new_idle = e * idle
    new_idle[1:] += moved[:-1]
    new_idle += completed[:k]

    inflow = np.zeros(N)
    inflow[0] = completed[k:B + 1].sum() + moved[k - 1]
    inflow[1:N - B] = completed[B + 1:]
    return new_idle, inflow / h, escaped


def _guard(t, idle, fill):
    lo = min(idle.min(), fill.min())
    if lo < -NEG_TOL:
        raise SchemeError(f"negative probability {lo:.3e} at t={t:.6g}")


def step(s: StateVector, t, cfg: QueueConfig, g: GridConfig, rf: RateFunction):
    """Advance ``s`` from ``t`` to ``t + dt`` and return the new state."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if s.busy.shape != (g.N, g.M) or s.idle.shape != (cfg.k,):
        raise ValueError("state does not match configuration")
    g.check(cfg)
    if s.min_entry() < -NEG_TOL:
        raise SchemeError("input state has negative entries")
    h = g.dt
    lam = rf.eval(t + 0.5 * h)
    busy = s.busy.astype(float, copy=True)
    _, Q = marginals(s, g)
    idle, fill, escaped = _advance(s.idle.astype(float), busy, Q, lam, cfg, h)
    _guard(t, idle, fill)
    out = np.empty_like(busy)
    out[:, 1:] = busy[:, :-1]
    out[:, 0] = fill
    lost = s.lost_mass + escaped + busy[:, -1].sum() * h
    return StateVector(idle, out, lost)


class _Engine:
    """Ring-buffer form of :func:`step`.

    Column ``(m - 1) % M`` holds the cells born during step ``m``, so
    transport is a change of index rather than a copy, and only the
    ``min(steps, M)`` columns that can be nonzero are touched.
    """

    def __init__(self, cfg, g, rf):
        self.cfg, self.g, self.rf = cfg, g, rf
        self.ring = np.zeros((g.N, g.M))
        self.idle = np.zeros(cfg.k)
        self.idle[0] = 1.0
        self.lost = 0.0
        self.steps = 0

    def advance(self):
        g, h = self.g, self.g.dt
        t = self.steps * h
        active = self.ring[:, :min(self.steps, g.M)]
        Q = active.sum(axis=1) * h
        lam = self.rf.eval(t + 0.5 * h)
        self.idle, fill, escaped = _advance(self.idle, active, Q, lam, self.cfg, h)
        _guard(t, self.idle, fill)
        pos = self.steps % g.M
        if self.steps >= g.M:
            escaped += self.ring[:, pos].sum() * h
        self.ring[:, pos] = fill
        self.lost += escaped
        self.steps += 1

    def state(self):
        g = self.g
        n_act = min(self.steps, g.M)
        busy = np.zeros((g.N, g.M))
        cols = (self.steps - 1 - np.arange(n_act)) % g.M
        busy[:, :n_act] = self.ring[:, cols]
        return StateVector(self.idle.copy(), busy, self.lost)


@dataclass
class Trajectory:
    """States recorded at checkpoint times, with the configuration used."""

    times: np.ndarray
    states: list
    cfg: QueueConfig
    grid: GridConfig
    rate: dict = field(default_factory=dict)

    def idle(self):
        return np.array([s.idle for s in self.states])

    def queue(self):
        return np.array([marginals(s, self.grid)[1] for s in self.states])

    def mass_defect(self):
        """``total_mass + lost_mass - 1`` per checkpoint."""
        return np.array([total_mass(s, self.grid) + s.lost_mass - 1.0 for s in self.states])

    def rows(self):
        return [csv_row(float(t), s, self.grid) for t, s in zip(self.times, self.states)]

    def to_csv(self, path):
        write_rows(path, csv_header(self.cfg.k, self.grid.N), self.rows())


def _step_index(t, h):
    n = int(round(t / h))
    if abs(n * h - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"checkpoint {t} is not a multiple of dt={h}")
    return n


def solve(cfg: QueueConfig, g: GridConfig, rf: RateFunction, horizon, checkpoints=None,
          progress=None):
    """Integrate from the empty-idle initial state up to ``horizon``.

    Parameters
    ----------
    checkpoints : sequence of float, optional
        Times at which to record the state; default ``[horizon]``.  Each
        must be a multiple of ``g.dt`` in ``[0, horizon]``.
    progress : callable, optional
        Called as ``progress(i, t)`` after checkpoint ``i`` is recorded.
    """
    g.check(cfg)
    h = g.dt
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if checkpoints is None:
        checkpoints = [horizon]
    times = np.asarray(sorted(float(c) for c in checkpoints))
    if times.size == 0:
        raise ValueError("no checkpoints")
    if times[0] < 0 or times[-1] > horizon * (1 + 1e-12):
        raise ValueError("checkpoints must lie in [0, horizon]")
    idx = [_step_index(t, h) for t in times]
    if _step_index(horizon, h) > MAX_STEPS:
        raise ValueError("horizon/dt exceeds the step limit")

    eng = _Engine(cfg, g, rf)
    states = []
    for i, n in enumerate(idx):
        while eng.steps < n:
            eng.advance()
        states.append(eng.state())
        if progress is not None:
            progress(i, times[i])
    return Trajectory(times, states, cfg, g, rf.describe())


# -- uniformization oracle ------------------------------------------------------

def ctmc_generator(cfg: QueueConfig, lam, N):
    """Generator of the (queue length, busy flag) chain for constant ``lam``.

    States ``0..k-1`` are idle with r waiting, ``k + n`` is busy with n
    waiting.  Arrivals at the top busy level are suppressed.
    """
    k, B, mu = cfg.k, cfg.B, cfg.mu
    G = np.zeros((k + N, k + N))
    for r in range(k - 1):
        G[r, r + 1] = lam
    G[k - 1, k] = lam
    for n in range(N):
        i = k + n
        if n < N - 1:
            G[i, i + 1] = lam
        if n < k:
            G[i, n] += mu
        elif n <= B:
            G[i, k] += mu
        else:
            G[i, k + n - B] += mu
    G[np.diag_indices_from(G)] = -G.sum(axis=1)
    return G


def uniformization(cfg: QueueConfig, lam, N, t, tol=1e-10):
    """Transient distribution of the constant-rate chain at time ``t``.

    Returns ``(idle, Q)``.  The Poisson series is cut once the remaining
    tail weight drops below ``tol``.
    """
    if not all(math.isfinite(v) for v in (lam, t, tol)):
        raise ValueError("non-finite input")
    if lam < 0 or t < 0 or tol <= 0:
        raise ValueError("lam, t must be nonnegative and tol positive")
    if N < cfg.B + 1:
        raise ValueError("N must be at least B+1")
    p = np.zeros(cfg.k + N)
    p[0] = 1.0
    # without arrivals the empty idle state is absorbing
    if lam == 0.0 or t == 0.0:
        return p[:cfg.k], p[cfg.k:]
    G = ctmc_generator(cfg, lam, N)
    rate = float(np.max(-np.diag(G)))
    if rate == 0.0:
        return p[:cfg.k], p[cfg.k:]
    P = np.eye(len(p)) + G / rate
    mean = rate * t
    n_terms = int(stats.poisson.isf(tol, mean)) + 1
    weights = stats.poisson.pmf(np.arange(n_terms + 1), mean)
    out = np.zeros_like(p)
    v = p
    for w in weights:
        out += w * v
        v = v @ P
    return out[:cfg.k], out[cfg.k:]
