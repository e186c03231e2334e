"""Discrete-event Monte Carlo estimates of the transient state probabilities.

Each replication runs the queue from an empty system with its own random
stream, seeded from ``(master_seed, replication index)``, so estimates do
not depend on the order in which replications are run or on how they are
split between workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import QueueConfig, write_rows
from .rates import RateFunction

__all__ = ["next_arrival", "simulate_path", "estimate", "SimEstimate", "stream"]

_BLOCK = 64


class _BufferedStream:
    """Uniform draws from a numpy Generator, fetched in blocks."""

    def __init__(self, rng):
        self._rng = rng
        self._buf = rng.random(_BLOCK)
        self._i = 0

    def random(self):
        if self._i == _BLOCK:
            self._buf = self._rng.random(_BLOCK)
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return u

    def standard_exponential(self):
        return -math.log1p(-self.random())


def stream(master_seed, rep):
    """Random stream of replication ``rep``."""
    return _BufferedStream(np.random.default_rng([int(master_seed), int(rep)]))


def next_arrival(rf: RateFunction, t, rng, window=None):
    """Next arrival epoch after ``t`` of the Poisson process with intensity ``rf``.

    Thinning: candidates are proposed at the majorant rate over the
    look-ahead window ``[t, t + window]`` (the whole future when
    ``window`` is None) and accepted with probability ``lam(s)/majorant``.
    Returns ``math.inf`` when the intensity vanishes for good.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    while True:
        if rf.upper_bound(t) == 0.0:
            return math.inf
        end = math.inf if window is None else t + window
        bound = rf.upper_bound(t, end)
        if bound == 0.0:
            t = end
            continue
        cand = t + rng.standard_exponential() / bound
        if cand > end:
            t = end
            continue
        if rng.random() * bound <= rf.eval(cand):
            return cand
        t = cand


def _checkpoints(checkpoints, horizon):
    cps = [float(c) for c in checkpoints]
    if any(b < a for a, b in zip(cps, cps[1:])) or (cps and (cps[0] < 0 or cps[-1] > horizon)):
        raise ValueError("checkpoints must be ascending within [0, horizon]")
    return cps


def simulate_path(cfg: QueueConfig, rf: RateFunction, horizon, checkpoints, seed, rep=0,
                  window=None):
    """One replication; returns ``(q, busy)`` integer arrays at the checkpoints.

    ``q`` counts waiting customers only; the batch in service is not part
    of it.  A service start takes ``min(q, B)`` customers.  ``seed`` is a
    master seed (combined with ``rep``) or an object with ``random`` and
    ``standard_exponential`` methods.
    """
    cps = _checkpoints(checkpoints, horizon)
    rng = seed if hasattr(seed, "random") else stream(seed, rep)
    return _path(cfg, rf, cps, rng, window)


def _path(cfg, rf, cps, rng, window):
    k, B, mu = cfg.k, cfg.B, cfg.mu
    n_cp = len(cps)
    out_q = np.zeros(n_cp, dtype=np.int64)
    out_b = np.zeros(n_cp, dtype=np.int8)

    q, busy = 0, 0
    t_arr = next_arrival(rf, 0.0, rng, window)
    t_done = math.inf
    i = 0
    while i < n_cp:
        # arrival first on exact ties
        t_next = min(t_arr, t_done)
        while i < n_cp and cps[i] < t_next:
            out_q[i], out_b[i] = q, busy
            i += 1
        if i == n_cp or t_next == math.inf:
            break
        if t_arr <= t_done:
            q += 1
            if not busy and q >= k:
                q -= min(q, B)
                busy = 1
                t_done = t_arr + rng.standard_exponential() / mu
            t_arr = next_arrival(rf, t_arr, rng, window)
        else:
            if q >= k:
                q -= min(q, B)
                t_done = t_done + rng.standard_exponential() / mu
            else:
                busy = 0
                t_done = math.inf
    out_q[i:], out_b[i:] = q, busy
    return out_q, out_b


@dataclass
class SimEstimate:
    """Empirical state frequencies per checkpoint.

    ``idle_prob[c, r]`` is the frequency of (r waiting, idle) and
    ``queue_prob[c, n]`` of (n waiting, busy) at checkpoint ``c``; the
    queue axis is long enough to hold every observed queue length.
    """

    checkpoints: np.ndarray
    idle_prob: np.ndarray
    idle_se: np.ndarray
    queue_prob: np.ndarray
    queue_se: np.ndarray
    n_reps: int
    seed: int

    def rows(self):
        out = []
        for c, t in enumerate(self.checkpoints):
            for r in range(self.idle_prob.shape[1]):
                out.append([float(t), f"idle_{r}", self.idle_prob[c, r], self.idle_se[c, r]])
            for n in range(self.queue_prob.shape[1]):
                out.append([float(t), f"busy_{n}", self.queue_prob[c, n], self.queue_se[c, n]])
        return out

    def to_csv(self, path):
        write_rows(path, ["t", "state_label", "probability", "std_error"], self.rows())


def _count(cfg, rf, horizon, cps, master_seed, reps, window):
    """Idle and busy occupation counts over a range of replications."""
    idle = np.zeros((len(cps), cfg.k), dtype=np.int64)
    busy = {}
    cps = _checkpoints(cps, horizon)
    for rep in reps:
        q, b = _path(cfg, rf, cps, stream(master_seed, rep), window)
        for c in range(len(cps)):
            if b[c]:
                busy[(c, int(q[c]))] = busy.get((c, int(q[c])), 0) + 1
            else:
                idle[c, q[c]] += 1
    return idle, busy


def estimate(cfg: QueueConfig, rf: RateFunction, checkpoints, n_reps, master_seed, N=None,
             workers=1, window=None):
    """Run ``n_reps`` replications and tabulate state frequencies.

    Parameters
    ----------
    N : int, optional
        Minimum length of the busy queue-length axis.
    workers : int
        Number of worker processes; the result does not depend on it.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    cps = sorted(float(c) for c in checkpoints)
    if not cps or cps[0] < 0:
        raise ValueError("checkpoints must be nonempty and nonnegative")
    horizon = cps[-1]
    if workers <= 1:
        parts = [_count(cfg, rf, horizon, cps, master_seed, range(n_reps), window)]
    else:
        edges = np.linspace(0, n_reps, workers + 1).astype(int)
        with ProcessPoolExecutor(workers) as ex:
            futs = [ex.submit(_count, cfg, rf, horizon, cps, master_seed,
                              range(a, b), window) for a, b in zip(edges, edges[1:])]
            parts = [f.result() for f in futs]

    idle = sum(p[0] for p in parts)
    busy = {}
    for _, part in parts:
        for key, v in part.items():
            busy[key] = busy.get(key, 0) + v
    width = max([n for _, n in busy] + [(N or 1) - 1]) + 1
    qcount = np.zeros((len(cps), width), dtype=np.int64)
    for (c, n), v in busy.items():
        qcount[c, n] = v

    ip = idle / n_reps
    qp = qcount / n_reps
    return SimEstimate(
        np.asarray(cps), ip, np.sqrt(ip * (1 - ip) / n_reps),
        qp, np.sqrt(qp * (1 - qp) / n_reps), n_reps, master_seed,
    )
