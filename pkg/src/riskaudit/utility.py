"""Non-decreasing concave utilities for money.

A utility is applied to the net payoff (value minus payment) of a single
realization. All shipped forms are normalized so that ``u(0) == 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError

SHAPE_TOL = 1e-12


class UtilityModel:
    name = "utility"

    def __call__(self, x):
        raise NotImplementedError

    def in_domain(self, x) -> bool:
        return True

    def resolve(self, min_payoff: float) -> "UtilityModel":
        """Concrete utility for an audit whose smallest payoff is ``min_payoff``."""
        return self


@dataclass(frozen=True)
class Identity(UtilityModel):
    @property
    def name(self):
        return "identity"

    def __call__(self, x):
        return np.asarray(x, dtype=float) * 1.0


@dataclass(frozen=True)
class CARA(UtilityModel):
    """Constant absolute risk aversion, ``(1 - exp(-a x)) / a``."""

    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise InputError("CARA coefficient must be positive")

    @property
    def name(self):
        return f"cara({self.a:g})"

    def __call__(self, x):
        return -np.expm1(-self.a * np.asarray(x, dtype=float)) / self.a


@dataclass(frozen=True)
class LogShifted(UtilityModel):
    """``ln(x + c) - ln(c)`` on ``x > -c``.

    ``c=None`` is a placeholder resolved per audit to one plus the largest
    loss seen, which keeps every payoff inside the domain.
    """

    c: float | None = None

    def __post_init__(self):
        if self.c is not None and not self.c > 0:
            raise InputError("log shift must be positive")

    @property
    def name(self):
        return "log_shifted(adaptive)" if self.c is None else f"log_shifted({self.c:g})"

    def resolve(self, min_payoff):
        if self.c is not None:
            return self
        return LogShifted(1.0 + abs(min(float(min_payoff), 0.0)))

    def in_domain(self, x):
        return self.c is not None and bool(np.all(np.asarray(x) > -self.c))

    def __call__(self, x):
        if self.c is None:
            raise InputError("adaptive log utility must be resolved before use")
        x = np.asarray(x, dtype=float)
        if not np.all(x > -self.c):
            raise DomainError(f"{self.name} undefined at {x.min()}")
        return np.log1p(x / self.c)


@dataclass(frozen=True)
class PiecewiseLinear(UtilityModel):
    """Slope ``slopes[k]`` between ``breakpoints[k-1]`` and ``breakpoints[k]``;
    ``len(slopes) == len(breakpoints) + 1``. Normalized to ``u(0) = 0``.

    Concave only if slopes are nonincreasing; that is checked by
    :func:`certify_shape`, not here, so convex kinks can be represented.
    """

    breakpoints: tuple
    slopes: tuple

    def __post_init__(self):
        if len(self.slopes) != len(self.breakpoints) + 1:
            raise InputError("need exactly one more slope than breakpoints")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise InputError("breakpoints must increase strictly")

    @property
    def name(self):
        return "piecewise_linear(" + ",".join(f"{s:g}" for s in self.slopes) + ")"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        edges = [-math.inf, *self.breakpoints, math.inf]
        out = np.zeros_like(x)
        for s, lo, hi in zip(self.slopes, edges, edges[1:]):
            out = out + s * (np.clip(x, lo, hi) - min(max(0.0, lo), hi))
        return out


def eval_utility(u: UtilityModel, x):
    val = u(x)
    return float(val) if np.ndim(val) == 0 else val


def certify_shape(u: UtilityModel, grid) -> bool:
    """Monotone and midpoint-concave on consecutive triples of ``grid``."""
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or len(g) < 3:
        raise InputError("certify_shape needs a grid of at least 3 points")
    if np.any(np.diff(g) < 0):
        raise InputError("grid must be sorted")
    vals = u(g)
    if np.any(vals[1:] < vals[:-1] - SHAPE_TOL):
        return False
    mids = u((g[:-2] + g[2:]) / 2)
    return bool(np.all(mids >= (vals[:-2] + vals[2:]) / 2 - SHAPE_TOL))


def default_battery():
    """Near-neutral to sharply risk-averse; the log shift adapts per audit."""
    return [
        Identity(),
        CARA(0.1),
        CARA(1.0),
        CARA(5.0),
        LogShifted(),
        PiecewiseLinear((0.0, 5.0), (3.0, 1.0, 0.2)),
    ]


def parse_utility(spec: str) -> UtilityModel:
    """``identity``, ``cara:A``, ``log`` / ``log:C``, ``pwl`` or
    ``pwl:S0,S1,..@B1,B2,..``."""
    name, _, arg = spec.strip().partition(":")
    name = name.lower()
    try:
        if name == "identity":
            return Identity()
        if name == "cara":
            return CARA(float(arg))
        if name == "log":
            return LogShifted(float(arg) if arg else None)
        if name == "pwl":
            if not arg:
                return PiecewiseLinear((0.0, 5.0), (3.0, 1.0, 0.2))
            slopes, _, bps = arg.partition("@")
            return PiecewiseLinear(tuple(float(b) for b in bps.split(",") if b),
                                   tuple(float(s) for s in slopes.split(",")))
    except ValueError as exc:
        raise InputError(f"bad utility spec {spec!r}: {exc}") from None
    raise InputError(f"unknown utility {spec!r}")


def parse_battery(specs) -> list:
    if specs is None:
        return default_battery()
    if isinstance(specs, str):
        specs = [s for s in specs.split(";") if s.strip()]
    return [parse_utility(s) for s in specs]
