"""Time-varying arrival intensities.

Three families are supported: a constant rate, a shifted sinusoid
``a + b*sin(omega*t + phi)`` and a right-continuous piecewise-constant
rate.  Each knows how to evaluate itself, how to bound itself from above
on an interval (the majorant used by thinning) and how to integrate
itself in closed form.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["RateFunction", "constant", "sinusoid", "piecewise"]

KINDS = ("constant", "sinusoid", "piecewise")


def _check_time(t):
    if isinstance(t, float):
        if not t >= 0:
            raise ValueError(f"time must be nonnegative, got {t!r}")
    elif not np.all(np.asarray(t) >= 0):
        raise ValueError(f"time must be nonnegative, got {t!r}")


def _check_interval(t0, t1):
    _check_time(t0)
    if t1 < t0:
        raise ValueError(f"reversed interval [{t0}, {t1}]")


@dataclass(frozen=True)
class RateFunction:
    """Arrival intensity lambda(t) >= 0.

    Build instances with :func:`constant`, :func:`sinusoid` or
    :func:`piecewise` rather than directly.

    Attributes
    ----------
    kind : str
        One of ``"constant"``, ``"sinusoid"``, ``"piecewise"``.
    params : tuple of float
        ``(a,)`` for constant, ``(a, b, omega, phi)`` for sinusoid and
        ``values`` for piecewise.
    breakpoints : tuple of float
        Ascending switching times (piecewise only).
    """

    kind: str
    params: tuple = ()
    breakpoints: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown rate kind {self.kind!r}")
        p = tuple(float(v) for v in self.params)
        bp = tuple(float(v) for v in self.breakpoints)
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "breakpoints", bp)
        if not all(math.isfinite(v) for v in p + bp):
            raise ValueError("rate parameters must be finite")
        if self.kind == "constant":
            if len(p) != 1 or bp:
                raise ValueError("constant rate takes exactly one value")
            if p[0] < 0:
                raise ValueError("intensity must be nonnegative")
        elif self.kind == "sinusoid":
            if len(p) != 4 or bp:
                raise ValueError("sinusoid rate takes (a, b, omega, phi)")
            if p[0] < abs(p[1]):
                raise ValueError("intensity must be nonnegative (need a >= |b|)")
        else:
            if len(p) != len(bp) + 1:
                raise ValueError("piecewise rate needs len(values) == len(breakpoints) + 1")
            if any(v < 0 for v in p):
                raise ValueError("intensity must be nonnegative")
            if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
                raise ValueError("breakpoints must be strictly ascending")

    # -- evaluation ---------------------------------------------------------

    def eval(self, t):
        """lambda(t); vectorised over array-like ``t``."""
        _check_time(t)
        if isinstance(t, float):
            return self._eval_scalar(t)
        if self.kind == "constant":
            out = np.full(np.shape(t), self.params[0])
        elif self.kind == "sinusoid":
            a, b, w, phi = self.params
            out = a + b * np.sin(w * np.asarray(t, dtype=float) + phi)
            # a == |b| can round to -1e-17
            out = np.maximum(out, 0.0)
        else:
            idx = np.searchsorted(self.breakpoints, t, side="right")
            out = np.asarray(self.params)[idx]
        return float(out) if np.ndim(out) == 0 else out

    __call__ = eval

    def _eval_scalar(self, t):
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "sinusoid":
            a, b, w, phi = self.params
            return max(a + b * math.sin(w * t + phi), 0.0)
        return self.params[bisect.bisect_right(self.breakpoints, t)]

    def upper_bound(self, t0, t1=math.inf):
        """A majorant of lambda on ``[t0, t1]``; ``t1`` may be infinite."""
        _check_interval(t0, t1)
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "sinusoid":
            a, b = self.params[:2]
            return a + abs(b)
        i0 = bisect.bisect_right(self.breakpoints, t0)
        i1 = bisect.bisect_right(self.breakpoints, t1)
        # a closed interval ending exactly on a breakpoint touches that piece
        return max(self.params[i0:i1 + 1])

    def integrate(self, t0, t1):
        """Closed-form integral of lambda over ``[t0, t1]``."""
        _check_interval(t0, t1)
        if self.kind == "constant":
            return self.params[0] * (t1 - t0)
        if self.kind == "sinusoid":
            a, b, w, phi = self.params
            if w == 0:
                return (a + b * math.sin(phi)) * (t1 - t0)
            return a * (t1 - t0) - b / w * (math.cos(w * t1 + phi) - math.cos(w * t0 + phi))
        edges = [t0] + [x for x in self.breakpoints if t0 < x < t1] + [t1]
        total = 0.0
        for lo, hi in zip(edges, edges[1:]):
            total += self.eval(lo) * (hi - lo)
        return total

    # -- serialisation ------------------------------------------------------

    def describe(self):
        """Serialised form: variant name plus parameter list."""
        if self.kind == "piecewise":
            return {"kind": self.kind, "breakpoints": list(self.breakpoints),
                    "values": list(self.params)}
        if self.kind == "constant":
            return {"kind": self.kind, "a": self.params[0]}
        a, b, w, phi = self.params
        return {"kind": self.kind, "a": a, "b": b, "omega": w, "phi": phi}

    @property
    def is_constant(self):
        if self.kind == "sinusoid":
            return self.params[1] == 0 or self.params[2] == 0
        return len(set(self.params)) == 1


def constant(a):
    return RateFunction("constant", (a,))


def sinusoid(a, b, omega=1.0, phi=0.0):
    return RateFunction("sinusoid", (a, b, omega, phi))


def piecewise(breakpoints, values):
    return RateFunction("piecewise", tuple(values), tuple(breakpoints))
