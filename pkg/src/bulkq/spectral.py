"""Kernel elements of the maximal operator and the Dirichlet operator.

For a spectral parameter ``gamma`` with ``Re gamma > -mu`` and
``gamma != -lam`` every element of ``Ker(gamma I - A_m)`` is fixed by its
boundary values ``c_n = p_{n-1,1}(0)``: the busy densities are
``exp(-Gamma x)`` times polynomials and the idle part follows from a
two-term recursion.  Here those elements are built analytically, checked
against the operator, and used to form the Dirichlet operator ``D_gamma``
and the matrix ``Phi D_gamma`` whose printed closed forms are compared
entry by entry.

Notation: ``Gamma = gamma + lam + mu`` and ``Lambda = gamma + lam``.  The
arrival rate is a frozen constant throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .model import GridConfig, QueueConfig, StateVector, x_norm
from .operators import OperatorAssembly
from .model import write_rows

__all__ = [
    "SpectralPoint",
    "AnalyticState",
    "kernel_element",
    "eigenfunction",
    "residual",
    "epsilon",
    "epsilon_mass",
    "norm_bound",
    "busy_norms_quad",
    "DirichletArtifacts",
    "ReportRow",
    "dirichlet",
    "char_indicator",
    "printed_d",
    "printed_a1",
    "printed_tail_row",
]

REL_TOL = 1e-10


@dataclass(frozen=True)
class SpectralPoint:
    gamma: complex
    lam: float
    mu: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", complex(self.gamma))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "mu", float(self.mu))
        if self.lam < 0 or self.mu <= 0:
            raise ValueError("need lam >= 0 and mu > 0")
        if not self.gamma.real > -self.mu:
            raise ValueError(f"Re gamma = {self.gamma.real} must exceed -mu = {-self.mu}")
        if self.gamma == -self.lam:
            raise ValueError("gamma must differ from -lam")

    @property
    def Gamma(self):
        return self.gamma + self.lam + self.mu

    @property
    def Lambda(self):
        return self.gamma + self.lam


@dataclass
class AnalyticState:
    """State whose busy densities are ``exp(-rate x) * poly_n(x)``.

    ``coeffs[n, d]`` multiplies ``x**d`` in level ``n``.
    """

    idle: np.ndarray
    rate: complex
    coeffs: np.ndarray

    @property
    def levels(self):
        return self.coeffs.shape[0]

    def density(self, x, levels=None):
        x = np.asarray(x, dtype=float)
        c = self.coeffs[:levels]
        poly = np.zeros(c.shape[:1] + x.shape, dtype=complex)
        for d in range(c.shape[1] - 1, -1, -1):
            poly = poly * x + c[:, d, None]
        return poly * np.exp(-self.rate * x)

    def derivative(self, x, levels=None):
        """d/dx of every busy density, from the polynomial coefficients."""
        x = np.asarray(x, dtype=float)
        c = self.coeffs[:levels]
        D = c.shape[1]
        dc = c[:, 1:] * np.arange(1, D)
        dpoly = np.zeros(c.shape[:1] + x.shape, dtype=complex)
        for d in range(D - 2, -1, -1):
            dpoly = dpoly * x + dc[:, d, None]
        return dpoly * np.exp(-self.rate * x) - self.rate * self.density(x, levels)

    def integrals(self):
        """Exact integral of each busy density over [0, inf)."""
        d = np.arange(self.coeffs.shape[1])
        # int_0^inf x^d e^{-c x} dx = d! / c^{d+1}
        moments = np.exp(gammaln(d + 1)) / self.rate ** (d + 1)
        return self.coeffs @ moments

    def boundary(self):
        return self.coeffs[:, 0].copy()

    def sample(self, g: GridConfig):
        """Midpoint samples on ``g`` (levels beyond ``g.N`` dropped, missing ones zero)."""
        busy = np.zeros((g.N, g.M), dtype=complex)
        L = min(self.levels, g.N)
        busy[:L] = self.density(g.midpoints, L)
        return StateVector(self.idle.astype(complex), busy)


def _as_coeffs(c):
    c = np.atleast_1d(np.asarray(c, dtype=complex))
    if c.ndim != 1:
        raise ValueError("boundary data must be a 1-d sequence")
    return c


def kernel_element(sp: SpectralPoint, c, cfg: QueueConfig, levels):
    """Element of Ker(gamma I - A_m) with boundary values ``c`` (``c[0] = c_1``)."""
    c = _as_coeffs(c)
    if len(c) > levels:
        raise ValueError("support of c exceeds the number of levels")
    lam, mu, G, Lam = sp.lam, sp.mu, sp.Gamma, sp.Lambda
    cc = np.zeros(levels, dtype=complex)
    cc[:len(c)] = c

    # level n, degree d: c_{n+1-d} lam^d / d!
    d = np.arange(levels)
    scale = np.exp(d * math.log(lam) - gammaln(d + 1)) if lam > 0 else (d == 0).astype(float)
    coeffs = np.zeros((levels, levels), dtype=complex)
    for n in range(levels):
        coeffs[n, :n + 1] = cc[n::-1] * scale[:n + 1]

    # idle recursion; psi of level r is sum_i c_i lam^{r+1-i} / Gamma^{r+2-i}
    idle = np.zeros(cfg.k, dtype=complex)
    for r in range(cfg.k):
        i = np.arange(1, r + 2)
        c_i = np.array([cc[m - 1] if m - 1 < levels else 0 for m in i])
        mass = np.sum(c_i * lam ** (r + 1 - i) / G ** (r + 2 - i))
        prev = idle[r - 1] if r > 0 else 0.0
        idle[r] = (lam * prev + mu * mass) / Lam
    return AnalyticState(idle, G, coeffs)


def eigenfunction(sp: SpectralPoint, c, cfg: QueueConfig, g: GridConfig):
    """Kernel element with boundary data ``c`` sampled on grid ``g``."""
    if len(_as_coeffs(c)) > g.N:
        raise ValueError("support of c exceeds N")
    return kernel_element(sp, c, cfg, g.N).sample(g)


def residual(sp: SpectralPoint, s, cfg: QueueConfig, g: GridConfig,
             assembly: OperatorAssembly | None = None, mode="semi-analytic", boundary=None):
    """Relative size ``||(gamma I - A_m) s|| / ||s||`` in the discrete X norm.

    ``mode="semi-analytic"`` needs an :class:`AnalyticState` and uses the
    exact age derivative and exact integrals; ``mode="discrete"`` applies
    the assembled upwind matrix, with boundary values taken from the
    analytic state (or ``boundary``, default zero).
    """
    lam, mu, gamma = sp.lam, sp.mu, sp.gamma
    k = cfg.k
    if mode == "semi-analytic":
        if not isinstance(s, AnalyticState):
            raise TypeError("semi-analytic mode needs an AnalyticState")
        L = min(s.levels, g.N)
        x = g.midpoints
        p = s.density(x, L)
        dp = s.derivative(x, L)
        res_busy = gamma * p + dp + (lam + mu) * p
        res_busy[1:] -= lam * p[:-1]
        mass = s.integrals()
        shifted = np.concatenate([[0.0], s.idle[:-1]])
        res_idle = gamma * s.idle + lam * s.idle - lam * shifted - mu * mass[:k]
        num = np.sum(np.abs(res_idle)) + np.sum(np.abs(res_busy)) * g.dx
        den = np.sum(np.abs(s.idle)) + np.sum(np.abs(p)) * g.dx
    elif mode == "discrete":
        if assembly is None:
            raise ValueError("discrete mode needs an assembly")
        if assembly.lam != lam:
            raise ValueError("assembly was built with a different lam")
        if isinstance(s, AnalyticState):
            if boundary is None:
                boundary = s.boundary()[:g.N]
            s = s.sample(g)
        b = np.zeros(g.N, dtype=complex)
        if boundary is not None:
            b[:len(boundary)] = boundary
        v = s.flat().astype(complex)
        r = gamma * v - (assembly.A_m @ v + assembly.inflow @ b)
        num = np.sum(np.abs(r) * assembly.weights)
        den = x_norm(s, g)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if den == 0:
        raise ValueError("zero state")
    return float(num / den)


def epsilon(i, sp: SpectralPoint, value, g: GridConfig):
    """Density ``value * lam^i / i! * x^i * exp(-Gamma x)`` at the midpoints."""
    if i < 0:
        raise ValueError("i must be nonnegative")
    x = g.midpoints
    if value == 0:
        return np.zeros(g.M, dtype=complex)
    coef = sp.lam ** i / math.factorial(i)
    return value * coef * x ** i * np.exp(-sp.Gamma * x)


def epsilon_mass(i, sp: SpectralPoint):
    """Exact integral of ``epsilon(i, sp, 1)``: ``lam^i / Gamma^(i+1)``."""
    return sp.lam ** i / sp.Gamma ** (i + 1)


def norm_bound(sp: SpectralPoint, c):
    """Upper bound on the summed L1 norms of the busy part of a kernel element.

    Valid when ``lam < Re Gamma``.
    """
    re = sp.Gamma.real
    if not sp.lam < re:
        raise ValueError("bound needs lam < Re Gamma")
    return (1.0 / re) / (1.0 - sp.lam / re) * float(np.sum(np.abs(_as_coeffs(c))))


def busy_norms_quad(s: AnalyticState, levels=None):
    """L1 norm of each busy density on [0, inf) by adaptive quadrature."""
    L = s.levels if levels is None else levels

    def f(x):
        return np.abs(s.density(np.array([x]), L)[:, 0])

    val, _ = integrate.quad_vec(f, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12)
    return val


# -- printed closed forms ------------------------------------------------------

def printed_d(i, r, sp: SpectralPoint):
    """Idle entry ``d_{i,r}`` of D_gamma as printed (1-based, r <= i)."""
    lam, mu, G, Lam = sp.lam, sp.mu, sp.Gamma, sp.Lambda
    j = np.arange(i + 2 - r)
    return mu * lam ** (i + 1 - r) / (G * Lam ** (i + 2)) * np.sum(Lam ** (r + j) / G ** j)


def printed_a1(i, sp: SpectralPoint, cfg: QueueConfig):
    """First-row entry ``a_{1,i}`` of Phi D_gamma as printed (1-based)."""
    k, B = cfg.k, cfg.B
    lam, mu, G, Lam = sp.lam, sp.mu, sp.Gamma, sp.Lambda
    if 1 <= i <= k:
        j1 = np.arange(k - i + 1)
        j2 = np.arange(k + 1 - i, B + 2 - i)
        return (mu / G * (lam / G) ** (k + 1 - i) * np.sum((Lam / G) ** j1)
                + mu / G * np.sum((lam / G) ** j2))
    if k + 1 <= i <= B + 1:
        return mu / G * np.sum((lam / G) ** np.arange(B + 2 - i))
    return 0.0


def printed_tail_row(n, j, sp: SpectralPoint, cfg: QueueConfig):
    """Entry (n, j) of Phi D_gamma for n >= 1 (0-based): ``mu/G (lam/G)^(n+B-j)``."""
    off = n + cfg.B - j
    if off < 0:
        return 0.0
    return sp.mu / sp.Gamma * (sp.lam / sp.Gamma) ** off


# -- Dirichlet operator ----------------------------------------------------------

@dataclass
class ReportRow:
    object: str
    index: str
    printed: complex
    derived: complex
    abs_dev: float
    rel_dev: float
    hard: bool

    @property
    def status(self):
        if self.rel_dev <= REL_TOL or self.abs_dev <= 1e-15:
            return "ok"
        return "FAIL" if self.hard else "WARN"


def _row(obj, index, printed, derived, hard):
    printed, derived = complex(printed), complex(derived)
    dev = abs(printed - derived)
    rel = dev / abs(derived) if derived != 0 else (0.0 if dev == 0 else math.inf)
    return ReportRow(obj, index, printed, derived, dev, rel, hard)


REPORT_HEADER = ["object", "index", "printed_value_re", "printed_value_im",
                 "derived_value_re", "derived_value_im", "abs_dev", "rel_dev", "status"]


@dataclass
class DirichletArtifacts:
    """Columns of D_gamma, the matrix Phi D_gamma and the closed-form comparison.

    ``columns[j]`` is the kernel element with boundary data ``e_j``; use
    :meth:`column_state` for its grid samples.
    """

    point: SpectralPoint
    cfg: QueueConfig
    columns: list
    PhiD: np.ndarray
    layout_ok: bool
    report: list = field(default_factory=list)

    def column_state(self, j, g: GridConfig):
        return self.columns[j].sample(g)

    def boundary_values(self):
        """Analytic x = 0 values of every column (rows: levels, cols: j)."""
        return np.array([c.boundary() for c in self.columns]).T

    @property
    def warnings(self):
        return [r for r in self.report if r.status == "WARN"]

    @property
    def failures(self):
        return [r for r in self.report if r.status == "FAIL"]

    def report_rows(self):
        return [[r.object, r.index, r.printed.real, r.printed.imag, r.derived.real,
                 r.derived.imag, r.abs_dev, r.rel_dev, r.status] for r in self.report]

    def to_csv(self, path):
        write_rows(path, REPORT_HEADER, self.report_rows())


def _phi_rows(col: AnalyticState, cfg: QueueConfig, lam, mu, n_rows):
    mass = col.integrals()
    out = np.zeros(n_rows, dtype=complex)
    out[0] = mu * mass[cfg.k:cfg.B + 1].sum() + lam * col.idle[cfg.k - 1]
    out[1:] = mu * mass[cfg.B + 1:cfg.B + n_rows]
    return out


def dirichlet(sp: SpectralPoint, cfg: QueueConfig, g: GridConfig, N_b):
    """Build D_gamma on boundary data ``e_0..e_{N_b-1}`` and compare closed forms.

    ``PhiD`` has ``g.N`` rows and ``N_b`` columns and is computed from exact
    integrals of the kernel elements, so it carries no grid error.
    """
    if not 1 <= N_b <= g.N:
        raise ValueError("need 1 <= N_b <= N")
    k, B = cfg.k, cfg.B
    levels = g.N + B
    cols = []
    for j in range(N_b):
        e = np.zeros(j + 1)
        e[j] = 1.0
        cols.append(kernel_element(sp, e, cfg, levels))

    # lower blocks must be eps_{n-j}: coefficient lam^{n-j}/(n-j)! on degree n-j only
    layout_ok = True
    for j, col in enumerate(cols):
        expect = np.zeros_like(col.coeffs)
        for n in range(j, levels):
            expect[n, n - j] = sp.lam ** (n - j) / math.factorial(n - j)
        layout_ok &= bool(np.allclose(col.coeffs, expect, rtol=1e-13, atol=0))

    PhiD = np.column_stack([_phi_rows(c, cfg, sp.lam, sp.mu, g.N) for c in cols])

    report = []
    for i in range(1, k + 1):
        for r in range(1, i + 1):
            if r - 1 < N_b:
                report.append(_row("d", f"{i},{r}", printed_d(i, r, sp),
                                   cols[r - 1].idle[i - 1], hard=False))
    for i in range(1, min(B + 1, N_b) + 1):
        # the low branch (i <= k) is not backed by an independent derivation
        report.append(_row("a1", str(i), printed_a1(i, sp, cfg), PhiD[0, i - 1],
                           hard=i > k))
    for n in range(1, g.N):
        for j in range(N_b):
            if n + B - j >= 0 and n + B < levels:
                report.append(_row("tail_row", f"{n},{j}", printed_tail_row(n, j, sp, cfg),
                                   PhiD[n, j], hard=True))
    return DirichletArtifacts(sp, cfg, cols, PhiD, layout_ok, report)


def char_indicator(sp: SpectralPoint, cfg: QueueConfig, g: GridConfig, N_b):
    """Smallest singular value of ``I - Phi D_gamma`` cut to ``N_b x N_b``.

    Values near zero mark candidate spectral points of the generator.
    """
    art = dirichlet(sp, cfg, g, N_b)
    T = np.eye(N_b) - art.PhiD[:N_b, :N_b]
    return float(np.linalg.svd(T, compute_uv=False)[-1])
