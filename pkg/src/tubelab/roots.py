"""Safeguarded Newton iteration for a scalar root inside a sign-change bracket."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable


@dataclass(frozen=True)
class RootResult:
    root: float
    value: float
    slope: float
    iterations: int
    converged: bool


def safeguarded_newton(fdf: Callable[[float], tuple[float, float]], lo: float, hi: float,
                       ftol: float = 1e-12, xtol: float = 1e-15, maxiter: int = 200) -> RootResult:
    """Root of ``f`` in ``[lo, hi]`` given ``fdf(t) = (f(t), f'(t))``.

    ``f`` may return ``+inf`` or ``-inf`` near a pole inside the bracket.
    A Newton step is taken when it stays inside the current bracket and
    shrinks it fast enough; otherwise the iteration bisects.
    """
    flo, _ = fdf(lo)
    fhi, _ = fdf(hi)
    if flo == 0.0:
        return RootResult(lo, 0.0, fdf(lo)[1], 0, True)
    if fhi == 0.0:
        return RootResult(hi, 0.0, fdf(hi)[1], 0, True)
    if flo * fhi > 0:
        raise ValueError("bracket does not straddle a sign change")
    # orient so that f(a) < 0 < f(b)
    a, b = (lo, hi) if flo < 0 else (hi, lo)
    x = 0.5 * (lo + hi)
    fx, dfx = fdf(x)
    if fx == 0.0:
        return RootResult(x, fx, dfx, 0, True)
    dx_old = abs(hi - lo)
    for it in range(1, maxiter + 1):
        if fx < 0:
            a = x
        else:
            b = x
        # infinite values (a pole at the bracket edge) force a bisection step
        finite = math.isfinite(fx) and math.isfinite(dfx) and dfx != 0.0
        step = fx / dfx if finite else float("inf")
        xn = x - step
        lo_, hi_ = min(a, b), max(a, b)
        if not (lo_ < xn < hi_) or abs(2.0 * step) > dx_old:
            xn = 0.5 * (a + b)
        dx_old = abs(xn - x)
        x = xn
        fx, dfx = fdf(x)
        # stop on a small residual only once the next Newton step is negligible too
        settled = (math.isfinite(fx) and math.isfinite(dfx) and dfx != 0.0
                   and abs(fx / dfx) <= 1e-12 * (1.0 + abs(x)))
        if fx == 0.0 or (abs(fx) <= ftol and settled) or abs(hi_ - lo_) <= xtol:
            if settled and fx != 0.0:
                # the last step is far below the bracket width; take it unguarded
                x -= fx / dfx
            return RootResult(x, fx, dfx, it, True)
    return RootResult(x, fx, dfx, maxiter, abs(fx) <= ftol)
