"""Finite-difference oracles used to audit analytic derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .seq_space import SparseVec
from .smooth_kit import SmoothFn1D

__all__ = [
    "central_diff",
    "richardson_diff",
    "directional_diff",
    "check_scalar_deriv",
    "GradCheck",
]


def central_diff(f: Callable[[float], float], t, h: float = 1e-5):
    return (f(t + h) - f(t - h)) / (2.0 * h)


def richardson_diff(f: Callable[[float], float], t: float, h: float = 1e-5,
                    levels: int = 4) -> float:
    """Centered differences at ``h, h/2, ...`` combined by Richardson's tableau.

    Each column removes the next even power of the step from the error.
    """
    row = [central_diff(f, t, h / 2 ** k) for k in range(levels)]
    for j in range(1, levels):
        w = 4.0 ** j
        row = [(w * row[k + 1] - row[k]) / (w - 1.0) for k in range(len(row) - 1)]
    return row[0]


def directional_diff(f: Callable[[SparseVec], float], x: SparseVec, d: SparseVec,
                     h: float = 1e-5, richardson: bool = True) -> float:
    g = lambda s: f(x + s * d)  # noqa: E731
    return richardson_diff(g, 0.0, h) if richardson else central_diff(g, 0.0, h)


def check_scalar_deriv(fn: SmoothFn1D, points: int = 1000, h: float = 1e-5,
                       interval: tuple[float, float] | None = None) -> float:
    """Max ``|fn'(t) - centered difference|`` on an even grid of the active interval."""
    lo, hi = interval or fn.active
    t = np.linspace(lo, hi, points)
    return float(np.max(np.abs(fn.deriv(t) - central_diff(fn, t, h))))


@dataclass(frozen=True)
class GradCheck:
    """Outcome of comparing a gradient to difference quotients."""

    name: str
    points: int
    max_abs_error: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_abs_error <= self.tol

    def to_dict(self) -> dict:
        return {"name": self.name, "points": self.points,
                "max_abs_error": self.max_abs_error, "tol": self.tol, "ok": self.ok}
