"""Sparse realisations of the maximal operator and its boundary operators.

Flattened state layout: the ``k`` idle probabilities first, then the busy
densities level by level, ``index(n, j) = k + n*M + j``.

``A_m`` acts on the interior of the age axis with a zero ghost value at
``x = 0`` (first-order upwind transport).  Boundary data enter through
``inflow``, which turns a boundary value ``b_n = p_{n,1}(0)`` into the
flux ``b_n / dx`` into cell ``(n, 0)``.  The closed generator of the queue
is therefore ``A_m + inflow @ Phi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import GridConfig, QueueConfig, StateVector

__all__ = [
    "OperatorAssembly",
    "assemble",
    "apply_phi",
    "boundary_trace",
    "psi",
    "dump_triplets",
]

DEFAULT_DIM_CAP = 5_000_000


def psi(density, g: GridConfig):
    """Integral over the age axis by midpoint quadrature (last axis)."""
    return np.sum(density, axis=-1) * g.dx


@dataclass(frozen=True)
class OperatorAssembly:
    A_m: sp.csr_matrix
    L_trace: sp.csr_matrix
    Phi: sp.csr_matrix
    inflow: sp.csr_matrix
    k: int
    N: int
    M: int
    dx: float
    lam: float

    @property
    def dim(self):
        return self.k + self.N * self.M

    @property
    def weights(self):
        """Quadrature weights turning a flattened state into masses."""
        w = np.full(self.dim, self.dx)
        w[: self.k] = 1.0
        return w

    def generator(self):
        """Closed generator: maximal operator with the boundary row folded in."""
        return (self.A_m + self.inflow @ self.Phi).tocsr()

    def mass_generator(self):
        """Closed generator in mass coordinates; its columns sum to zero
        away from the truncation boundaries."""
        w = self.weights
        return (sp.diags(w) @ self.generator() @ sp.diags(1.0 / w)).tocsr()

    def leaky_columns(self):
        """Boolean mask of columns touching level N-1 or the last age cell."""
        mask = np.zeros(self.dim, dtype=bool)
        busy = mask[self.k:].reshape(self.N, self.M)
        busy[-1, :] = True
        busy[:, -1] = True
        return mask

    def blocks(self):
        """Dense views of the four blocks of ``A_m`` (small grids only)."""
        A = self.A_m.toarray()
        k = self.k
        return A[:k, :k], A[:k, k:], A[k:, :k], A[k:, k:]


def assemble(cfg: QueueConfig, g: GridConfig, lam, cap=DEFAULT_DIM_CAP):
    """Assemble ``A_m``, the boundary trace and ``Phi`` for a frozen rate ``lam``.

    Parameters
    ----------
    cfg : QueueConfig
    g : GridConfig
    lam : float
        Arrival rate, held constant.
    cap : int
        Maximum allowed dimension ``k + N*M``.
    """
    lam = float(lam)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    k, N, M, dx, mu = cfg.k, g.N, g.M, g.dx, cfg.mu
    dim = k + N * M
    if dim > cap:
        raise ValueError(f"operator dimension {dim} exceeds cap {cap}")

    busy = np.arange(N * M).reshape(N, M) + k
    rows, cols, vals = [], [], []

    def add(r, c, v):
        r, c = np.broadcast_arrays(np.asarray(r), np.asarray(c))
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.broadcast_to(v, r.shape).ravel().astype(float))

    # top-left: arrivals between idle levels
    ridx = np.arange(k)
    add(ridx, ridx, -lam)
    add(ridx[1:], ridx[:-1], lam)
    # top-right: service completions with r < k waiting empty into idle r
    for r in range(min(k, N)):
        add(r, busy[r], mu * dx)
    # bottom-right: transport, decay and arrivals between busy levels
    add(busy, busy, -(lam + mu) - 1.0 / dx)
    add(busy[:, 1:], busy[:, :-1], 1.0 / dx)
    add(busy[1:, :], busy[:-1, :], lam)
    A_m = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )

    L_trace = sp.csr_matrix(
        (np.ones(N), (np.arange(N), busy[:, 0])), shape=(N, dim)
    )
    inflow = sp.csr_matrix(
        (np.full(N, 1.0 / dx), (busy[:, 0], np.arange(N))), shape=(dim, N)
    )

    rows, cols, vals = [], [], []
    add(0, k - 1, lam)
    for i in range(k, min(cfg.B, N - 1) + 1):
        add(0, busy[i], mu * dx)
    for n in range(1, N):
        if n + cfg.B < N:
            add(n, busy[n + cfg.B], mu * dx)
    Phi = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, dim),
    )
    return OperatorAssembly(A_m, L_trace, Phi, inflow, k, N, M, dx, lam)


def apply_phi(cfg: QueueConfig, g: GridConfig, lam, s: StateVector):
    """Boundary values demanded by the inflow conditions for state ``s``.

    Entry 0 collects completions that leave between k and B waiting plus
    the arrival that lifts the idle queue to k; entry n >= 1 collects
    completions from level n + B.
    """
    if s.busy.shape != (g.N, g.M) or s.idle.shape != (cfg.k,):
        raise ValueError("state does not match configuration")
    Q = psi(s.busy, g)
    out = np.zeros(g.N, dtype=np.result_type(s.busy, s.idle, float))
    out[0] = cfg.mu * Q[cfg.k:cfg.B + 1].sum() + lam * s.idle[cfg.k - 1]
    B = cfg.B
    if B + 1 < g.N:
        out[1:g.N - B] = cfg.mu * Q[B + 1:]
    return out


def boundary_trace(s: StateVector, g: GridConfig):
    """Values at x = 0, taken as the first cell value of each busy level."""
    if s.busy.shape != (g.N, g.M):
        raise ValueError("state does not match grid")
    return s.busy[:, 0].copy()


def dump_triplets(matrix, path):
    """Write a sparse matrix as ``row col value`` lines."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        fh.write(f"# shape {m.shape[0]} {m.shape[1]}\n")
        for i in order:
            fh.write(f"{m.row[i]} {m.col[i]} {float(m.data[i])!r}\n")
