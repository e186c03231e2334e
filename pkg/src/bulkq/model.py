"""Queue parameters, discretisation grid and the truncated state vector.

The state of the M(t)|M[k,B]|1 queue is a pair: the probabilities of the
``k`` idle states (``r`` customers waiting, server idle) and, for every
queue length ``n``, a density over the elapsed service age ``x`` of the
batch currently in service.  On the computer the queue length is cut at
``N`` levels and the age axis at ``x_max``, split into ``M`` cells whose
densities are stored at the cell midpoints.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QueueConfig",
    "GridConfig",
    "StateVector",
    "total_mass",
    "x_norm",
    "marginals",
    "csv_header",
    "csv_row",
    "write_rows",
]


@dataclass(frozen=True)
class QueueConfig:
    """Service threshold ``k``, batch cap ``B`` and service rate ``mu``."""

    k: int
    B: int
    mu: float

    def __post_init__(self):
        if int(self.k) != self.k or int(self.B) != self.B:
            raise ValueError("k and B must be integers")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "B", int(self.B))
        object.__setattr__(self, "mu", float(self.mu))
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.k > self.B:
            raise ValueError("k must not exceed B")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError("mu must be positive and finite")


@dataclass(frozen=True)
class GridConfig:
    """Truncation and discretisation of the busy densities.

    The time step always equals the age cell width so that one step moves
    every density exactly one cell along its characteristic.
    """

    N: int
    x_max: float
    M: int

    def __post_init__(self):
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "x_max", float(self.x_max))
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.M < 2:
            raise ValueError("M must be at least 2")
        if not (self.x_max > 0 and math.isfinite(self.x_max)):
            raise ValueError("x_max must be positive")

    @property
    def dx(self):
        return self.x_max / self.M

    @property
    def dt(self):
        return self.dx

    @property
    def midpoints(self):
        return (np.arange(self.M) + 0.5) * self.dx

    def check(self, cfg: QueueConfig):
        """Raise unless the grid can represent every transition of ``cfg``."""
        if self.N < cfg.B + 1:
            raise ValueError(f"N={self.N} must be at least B+1={cfg.B + 1}")
        return self

    @classmethod
    def from_step(cls, N, x_max, dx):
        """Grid with cell width as close to ``dx`` as divides ``x_max``."""
        M = max(2, int(round(x_max / dx)))
        return cls(N, M * dx, M)

    @classmethod
    def default(cls, cfg: QueueConfig, dx=1e-3):
        """x_max = 25/mu and N = max(5B, 40)."""
        return cls.from_step(max(5 * cfg.B, 40), 25.0 / cfg.mu, dx)


@dataclass
class StateVector:
    """Idle probabilities, busy densities and the mass lost to truncation.

    ``busy[n, j]`` approximates p_{n,1}(x_j) at the midpoint
    ``x_j = (j + 1/2) dx``.  Arrays may be complex (kernel elements of the
    maximal operator are complex for complex spectral parameters).
    """

    idle: np.ndarray
    busy: np.ndarray
    lost_mass: float = 0.0

    def __post_init__(self):
        self.idle = np.asarray(self.idle)
        self.busy = np.asarray(self.busy)
        if self.idle.ndim != 1 or self.busy.ndim != 2:
            raise ValueError("idle must be 1-d and busy 2-d")

    @classmethod
    def zeros(cls, cfg: QueueConfig, g: GridConfig, dtype=float):
        return cls(np.zeros(cfg.k, dtype), np.zeros((g.N, g.M), dtype))

    @classmethod
    def initial(cls, cfg: QueueConfig, g: GridConfig):
        """Empty system with an idle server at time zero."""
        s = cls.zeros(cfg, g)
        s.idle[0] = 1.0
        return s

    def copy(self):
        return StateVector(self.idle.copy(), self.busy.copy(), self.lost_mass)

    def flat(self):
        """Concatenate idle and row-major busy entries."""
        return np.concatenate([self.idle, self.busy.ravel()])

    @classmethod
    def from_flat(cls, v, k, g: GridConfig, lost_mass=0.0):
        v = np.asarray(v)
        if v.shape != (k + g.N * g.M,):
            raise ValueError(f"flat vector has shape {v.shape}")
        return cls(v[:k].copy(), v[k:].reshape(g.N, g.M).copy(), lost_mass)

    def min_entry(self):
        return min(np.min(self.idle.real), np.min(self.busy.real))


def _check_shapes(s: StateVector, g: GridConfig):
    if s.busy.shape != (g.N, g.M):
        raise ValueError(f"busy block has shape {s.busy.shape}, grid expects {(g.N, g.M)}")


def total_mass(s: StateVector, g: GridConfig):
    """Sum of idle probabilities plus the integrals of all busy densities."""
    _check_shapes(s, g)
    return float(np.sum(s.idle).real + np.sum(s.busy).real * g.dx)


def x_norm(s: StateVector, g: GridConfig):
    """Discrete norm of C^k x l1(L1): absolute values, midpoint quadrature."""
    _check_shapes(s, g)
    return float(np.sum(np.abs(s.idle)) + np.sum(np.abs(s.busy)) * g.dx)


def marginals(s: StateVector, g: GridConfig):
    """Return ``(idle, Q)`` with ``Q[n]`` the probability of n waiting while busy."""
    _check_shapes(s, g)
    return s.idle, s.busy.sum(axis=1) * g.dx


# -- CSV ----------------------------------------------------------------------

def csv_header(k, N):
    return (["t"] + [f"idle_{r}" for r in range(k)] + [f"Q_{n}" for n in range(N)]
            + ["total_mass", "lost_mass"])


def csv_row(t, s: StateVector, g: GridConfig):
    idle, Q = marginals(s, g)
    return ([t] + [float(v.real) for v in idle] + [float(v.real) for v in Q]
            + [total_mass(s, g), s.lost_mass])


def write_rows(path, header, rows):
    """Write a CSV with ``repr``-exact floats (byte-stable across runs)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])
