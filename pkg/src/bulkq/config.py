"""Scenario files.

A scenario is a small INI-style text file::

    [queue]
    k = 2
    B = 3
    mu = 1.0

    [rate]
    kind = sinusoid
    a = 0.5
    b = 0.3

    [run]
    horizon = 5
    checkpoints = 1, 5

Sections ``[grid]``, ``[spectral]`` and ``[sim]`` are optional; the
boundary truncation ``N_b`` defaults to ``min(10, N)``.  Unknown
sections and keys are errors, and every error carries the line number it
refers to.  ``configparser`` is not used because it drops line numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rates
from .model import GridConfig, QueueConfig
from .spectral import SpectralPoint

__all__ = ["ConfigError", "Scenario", "parse_config", "serialize", "load"]

GRID_DEFAULT_DX = 1e-3
DEFAULT_N_B = 10

SCHEMA = {
    "queue": {"k", "B", "mu"},
    "rate": {"kind", "a", "b", "omega", "phi", "breakpoints", "values"},
    "grid": {"N", "x_max", "dx"},
    "run": {"horizon", "checkpoints", "out"},
    "spectral": {"gamma", "sweep", "N_b", "lam"},
    "sim": {"n_reps", "seed"},
}
REQUIRED = {"queue": ("k", "B", "mu"), "rate": ("kind",), "run": ("horizon", "checkpoints")}
RATE_KEYS = {
    "constant": ("a",),
    "sinusoid": ("a", "b", "omega", "phi"),
    "piecewise": ("breakpoints", "values"),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    queue: QueueConfig
    rate: rates.RateFunction
    horizon: float
    checkpoints: tuple
    grid_overrides: tuple = ()
    gammas: tuple = ()
    sweep: tuple | None = None
    N_b: int = 10
    spectral_lam: float | None = None
    n_reps: int = 100_000
    seed: int = 12345
    out: str | None = None

    @property
    def grid(self):
        """Grid defaults (x_max = 25/mu, dx = 1e-3, N = max(5B, 40)) with overrides."""
        o = dict(self.grid_overrides)
        N = int(o.get("N", max(5 * self.queue.B, 40)))
        x_max = o.get("x_max", 25.0 / self.queue.mu)
        return GridConfig.from_step(N, x_max, o.get("dx", GRID_DEFAULT_DX))

    @property
    def frozen_lam(self):
        """Arrival rate used by the spectral checks: ``lam`` key or lambda(0)."""
        return self.rate.eval(0.0) if self.spectral_lam is None else self.spectral_lam

    def spectral_points(self):
        pts = list(self.gammas)
        if self.sweep is not None:
            lo, hi, n = self.sweep
            pts += list(np.linspace(lo, hi, int(n)))
        return [SpectralPoint(g, self.frozen_lam, self.queue.mu) for g in pts]


def _tokens(text):
    """Yield ``(lineno, section, key, value)``; section headers have key None."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            yield lineno, section, None, None
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside of any section")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        yield lineno, section, key, value


def _num(value, lineno, key, kind=float):
    try:
        if kind is int:
            v = float(value)
            if v != int(v):
                raise ValueError
            return int(v)
        v = kind(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: malformed number for {key!r}: {value!r}") from None
    if kind is float and not math.isfinite(v):
        raise ConfigError(f"line {lineno}: {key!r} must be finite")
    return v


def _list(value, lineno, key, kind=float):
    return tuple(_num(v.strip(), lineno, key, kind) for v in value.split(",") if v.strip())


def parse_config(text):
    """Parse and validate scenario text; raises :class:`ConfigError`."""
    entries, where = {}, {}
    for lineno, section, key, value in _tokens(text):
        where.setdefault((section, None), lineno)
        if key is None:
            continue
        if (section, key) in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{section}]")
        entries[section, key] = value
        where[section, key] = lineno

    for section, keys in REQUIRED.items():
        for key in keys:
            if (section, key) not in entries:
                line = where.get((section, None))
                at = f"line {line}: " if line else ""
                raise ConfigError(f"{at}missing required key {key!r} in [{section}]")

    def get(section, key, kind=float, default=None):
        if (section, key) not in entries:
            return default
        return _num(entries[section, key], where[section, key], key, kind)

    def line_of(section, key=None):
        return where.get((section, key), where.get((section, None), 0))

    try:
        queue = QueueConfig(get("queue", "k", int), get("queue", "B", int), get("queue", "mu"))
    except ValueError as e:
        raise ConfigError(f"line {line_of('queue')}: {e}") from None

    kind = entries["rate", "kind"]
    if kind not in RATE_KEYS:
        raise ConfigError(f"line {line_of('rate', 'kind')}: unknown rate kind {kind!r}")
    for key in SCHEMA["rate"] - {"kind"} - set(RATE_KEYS[kind]):
        if ("rate", key) in entries:
            raise ConfigError(f"line {line_of('rate', key)}: key {key!r} does not apply to "
                              f"{kind} rates")
    try:
        if kind == "constant":
            if ("rate", "a") not in entries:
                raise ValueError("constant rate needs 'a'")
            rate = rates.constant(get("rate", "a"))
        elif kind == "sinusoid":
            if ("rate", "a") not in entries or ("rate", "b") not in entries:
                raise ValueError("sinusoid rate needs 'a' and 'b'")
            rate = rates.sinusoid(get("rate", "a"), get("rate", "b"),
                                  get("rate", "omega", default=1.0),
                                  get("rate", "phi", default=0.0))
        else:
            bp = _list(entries.get(("rate", "breakpoints"), ""), line_of("rate", "breakpoints"),
                       "breakpoints")
            vals = _list(entries.get(("rate", "values"), ""), line_of("rate", "values"), "values")
            rate = rates.piecewise(bp, vals)
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"line {line_of('rate')}: {e}") from None

    horizon = get("run", "horizon")
    cps = _list(entries["run", "checkpoints"], line_of("run", "checkpoints"), "checkpoints")
    if horizon < 0:
        raise ConfigError(f"line {line_of('run', 'horizon')}: horizon must be nonnegative")
    if not cps:
        raise ConfigError(f"line {line_of('run', 'checkpoints')}: checkpoint list is empty")
    if any(c < 0 or c > horizon for c in cps) or list(cps) != sorted(cps):
        raise ConfigError(f"line {line_of('run', 'checkpoints')}: checkpoints must be "
                          f"ascending within [0, horizon]")

    overrides = []
    for key, kind_ in (("N", int), ("x_max", float), ("dx", float)):
        v = get("grid", key, kind_)
        if v is not None:
            if v <= 0:
                raise ConfigError(f"line {line_of('grid', key)}: {key} must be positive")
            overrides.append((key, v))

    gammas = ()
    if ("spectral", "gamma") in entries:
        gammas = _list(entries["spectral", "gamma"], line_of("spectral", "gamma"), "gamma",
                       complex)
    sweep = None
    if ("spectral", "sweep") in entries:
        sw = _list(entries["spectral", "sweep"], line_of("spectral", "sweep"), "sweep")
        if len(sw) != 3 or sw[2] < 1 or sw[2] != int(sw[2]):
            raise ConfigError(f"line {line_of('spectral', 'sweep')}: sweep is start, stop, count")
        sweep = (sw[0], sw[1], int(sw[2]))

    N_b = get("spectral", "N_b", int)
    if N_b is None:
        n_grid = dict(overrides).get("N", max(5 * queue.B, 40))
        N_b = min(DEFAULT_N_B, n_grid)
    sc = Scenario(
        queue=queue, rate=rate, horizon=horizon, checkpoints=cps,
        grid_overrides=tuple(overrides), gammas=gammas, sweep=sweep,
        N_b=N_b, spectral_lam=get("spectral", "lam"),
        n_reps=get("sim", "n_reps", int, 100_000), seed=get("sim", "seed", int, 12345),
        out=entries.get(("run", "out")),
    )
    try:
        g = sc.grid.check(queue)
        if not 1 <= sc.N_b <= g.N:
            raise ValueError(f"N_b must lie in [1, N={g.N}]")
        if sc.n_reps < 1:
            raise ValueError("n_reps must be at least 1")
        if sc.spectral_lam is not None and sc.spectral_lam < 0:
            raise ValueError("spectral lam must be nonnegative")
        sc.spectral_points()
    except ValueError as e:
        raise ConfigError(f"invalid scenario: {e}") from None
    return sc


def _fmt(v):
    if isinstance(v, complex):
        return repr(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(sc: Scenario):
    """Text form accepted by :func:`parse_config`."""
    lines = ["[queue]", f"k = {sc.queue.k}", f"B = {sc.queue.B}", f"mu = {sc.queue.mu!r}", "",
             "[rate]", f"kind = {sc.rate.kind}"]
    for key, value in sc.rate.describe().items():
        if key == "kind":
            continue
        if isinstance(value, list):
            lines.append(f"{key} = {', '.join(_fmt(v) for v in value)}")
        else:
            lines.append(f"{key} = {_fmt(value)}")
    lines += ["", "[run]", f"horizon = {sc.horizon!r}",
              f"checkpoints = {', '.join(_fmt(c) for c in sc.checkpoints)}"]
    if sc.out is not None:
        lines.append(f"out = {sc.out}")
    if sc.grid_overrides:
        lines += ["", "[grid]"] + [f"{k} = {_fmt(v)}" for k, v in sc.grid_overrides]
    lines += ["", "[spectral]", f"N_b = {sc.N_b}"]
    if sc.gammas:
        lines.append(f"gamma = {', '.join(_fmt(g) for g in sc.gammas)}")
    if sc.sweep is not None:
        lines.append(f"sweep = {sc.sweep[0]!r}, {sc.sweep[1]!r}, {sc.sweep[2]}")
    if sc.spectral_lam is not None:
        lines.append(f"lam = {sc.spectral_lam!r}")
    lines += ["", "[sim]", f"n_reps = {sc.n_reps}", f"seed = {sc.seed}", ""]
    return "\n".join(lines)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
