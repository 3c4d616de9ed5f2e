"""Bump functions whose derivative never vanishes inside their support.

``NonRolleBump`` lives on the twisted tube: ``g(x, t) = phi(x) mu(t)`` on the
cylinder is pushed forward by the chart, and since ``mu`` keeps increasing
along the tube the derivative in the ``t`` direction is positive wherever
``g`` is. ``LostPathBump`` is the quicker non-Lipschitz variant that rides a
bump along a path escaping through infinitely many coordinates.

``approx_rolle_probe`` samples a function on a ball and its boundary and
reports the quantities in the approximate Rolle inequality
``inf_U ||f'|| <= eps / R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.stats import norm as _normal, qmc

from .errors import NotInTube
from .seq_space import SparseVec
from .smooth_kit import BumpOnH, SmoothFn1D, make_alpha_ramp, make_mu, make_theta_supp
from .tube import CylPoint, TubeChart, Z, default_chart

__all__ = [
    "NonRolleBump",
    "LostPathBump",
    "DeepeningReport",
    "RolleReport",
    "approx_rolle_probe",
    "slice_points",
]


def _sobol(d: int, n: int, seed: int) -> np.ndarray:
    """First ``n`` points of a scrambled Sobol sequence (drawn in a power-of-2 block)."""
    m = max(int(math.ceil(math.log2(max(n, 1)))), 0)
    return qmc.Sobol(d=d, scramble=True, seed=seed).random_base2(m)[:n]


@dataclass(frozen=True)
class DeepeningReport:
    """Running minimum of ``||f'||`` over nested prefixes of one sample sequence."""

    sizes: tuple[int, ...]
    running_min: tuple[float, ...]
    min_value: float
    t_range: tuple[float, float]

    @property
    def strictly_decreasing(self) -> bool:
        m = self.running_min
        return all(b < a for a, b in zip(m, m[1:]))

    def to_dict(self) -> dict:
        return {"sizes": list(self.sizes), "running_min": list(self.running_min),
                "min_value": self.min_value, "t_range": list(self.t_range),
                "strictly_decreasing": self.strictly_decreasing}


class NonRolleBump:
    """``f = (phi mu) o pi^{-1}`` on the tube and 0 elsewhere.

    ``phi`` is a radial bump of radius ``eps/2`` on ``H`` and ``mu`` vanishes
    for ``t <= 1`` and increases afterwards, so ``supp f`` is the closure of
    ``pi({||x|| < eps/2, t > 1})``.
    """

    def __init__(self, chart: TubeChart | None = None, mu: SmoothFn1D | None = None):
        self.chart = chart or default_chart(scale=1.0 / 6.0)
        self.phi = BumpOnH(radius=self.chart.epsilon / 2.0, normal=Z)
        self.mu = mu or make_mu()

    def __repr__(self):
        return f"NonRolleBump(epsilon={self.chart.epsilon:g}, scale={self.chart.scale:g})"

    def g_eval(self, x: SparseVec, t: float) -> tuple[float, SparseVec, float]:
        """``g(x, t)`` with its partial gradients ``(phi'(x) mu(t), phi(x) mu'(t))``."""
        ph, dph = self.phi.value_and_grad(x)
        mu, dmu = float(self.mu(t)), float(self.mu.deriv(t))
        return ph * mu, mu * dph, ph * dmu

    def _g_functional(self, pt: CylPoint) -> tuple[float, SparseVec]:
        # g' as a functional on the cylinder coordinates x + t z
        val, gx, gt = self.g_eval(pt.x, pt.t)
        return val, gx + gt * Z

    def f_at(self, pt: CylPoint) -> tuple[SparseVec, float, SparseVec]:
        """``(y, f(y), f'(y))`` at ``y = pi(pt)`` using the known preimage."""
        y = self.chart.pi(pt)
        val, gfun = self._g_functional(pt)
        if val == 0.0 and gfun.nnz == 0:
            return y, 0.0, SparseVec()
        return y, val, self.chart.d_pi_inverse(y, pt).pullback(gfun)

    def f_eval(self, y: SparseVec) -> tuple[float, SparseVec]:
        """Value and gradient of ``f`` at an arbitrary point."""
        try:
            pt = self.chart.pi_inverse(y)
        except NotInTube:
            return 0.0, SparseVec()
        if pt.x.norm() >= self.phi.radius or pt.t <= 1.0:
            return 0.0, SparseVec()
        val, gfun = self._g_functional(pt)
        return val, self.chart.d_pi_inverse(y, pt).pullback(gfun)

    __call__ = f_eval

    def value(self, y: SparseVec) -> float:
        return self.f_eval(y)[0]

    def tangent(self, pt: CylPoint) -> SparseVec:
        """``D pi(x, t)(0, 1)``: the image of the cylinder axis direction."""
        return self.chart.d_pi(pt).apply(Z)

    def support_points(self, n: int, seed: int = 0, t_range: tuple[float, float] = (1.01, 13.0),
                       radius_frac: float = 0.95, dim: int = 6) -> list[CylPoint]:
        """First ``n`` points of a scrambled Sobol sequence over the open support.

        Coordinates: radius fraction, ``dim`` directions in ``H`` (spread over
        the indices touched by ``beta(t)``), and ``t``. Prefixes are nested, so
        minima over growing ``n`` can only go down.
        """
        u = _sobol(dim + 2, n, seed)
        u = np.clip(u, 1e-12, 1 - 1e-12)
        lo, hi = t_range
        pts = []
        for row in u:
            t = lo + (hi - lo) * row[-1]
            base = max(int(math.ceil(t)) - 2, 0)
            g = _normal.ppf(row[1:-1])
            x = SparseVec(np.arange(base, base + dim), g)
            x = x - Z.dot(x) * Z
            r = self.phi.radius * radius_frac * row[0] ** (1.0 / dim)
            nx = x.norm()
            if nx == 0.0 or t <= lo:
                continue
            pts.append(CylPoint(x * (r / nx), t))
        return pts

    def deepening_probe(self, sizes: Iterable[int] = (100, 1000, 10000), seed: int = 0,
                        t_range: tuple[float, float] = (1.01, 13.0)) -> DeepeningReport:
        """Running min of ``||f'||`` on nested support samples of the given sizes."""
        sizes = tuple(sorted(sizes))
        pts = self.support_points(sizes[-1], seed=seed, t_range=t_range)
        norms = np.array([self.f_at(pt)[2].norm() for pt in pts])
        run = tuple(float(np.min(norms[:n])) for n in sizes)
        return DeepeningReport(sizes, run, float(norms.min()), t_range)

    def lipschitz_report(self, pairs: int = 40, seed: int = 0, step: float = 1e-4) -> dict:
        """Sampled difference quotients of ``f`` against ``Lip(g) * M``."""
        rng = np.random.default_rng(seed)
        lip_g = math.hypot(self.phi.lipschitz, float(np.max(self.mu.deriv(np.linspace(1, 50, 5001)))))
        m = self.chart.measure_M(samples=max(pairs, 10), seed=seed)
        worst = 0.0
        for _ in range(pairs):
            pt = self.chart.random_point(rng, t_max=12.0, radius_frac=0.6)
            y = self.chart.pi(pt)
            d = SparseVec.from_dense(rng.standard_normal(y.max_index + 3))
            d = d * (step / d.norm())
            worst = max(worst, abs(self.value(y + d) - self.value(y)) / step)
        return {"lip_g": lip_g, "M": m, "bound": lip_g * m, "max_quotient": worst,
                "ok": worst <= lip_g * m}


class LostPathBump:
    """``g(x, t) = phi(x - p(t)) alpha(t)`` on ``H x R`` for ``t`` in ``[0, 1)``.

    ``p(t) = q(t/(1-t))`` with ``q(s) = sum_n theta(s - n + 1) e_n`` runs through
    ``e_1, e_2, ...`` and has no limit points as ``t -> 1``.
    """

    def __init__(self, radius: float = 1.0 / 16.0):
        self.phi = BumpOnH(radius=radius)
        self.theta = make_theta_supp()
        self.alpha = make_alpha_ramp()

    def __repr__(self):
        return f"LostPathBump(radius={self.phi.radius:g})"

    def _terms(self, s: float) -> np.ndarray:
        k = int(math.floor(s))
        return np.array([k + 1, k + 2])

    def q(self, s: float) -> SparseVec:
        n = self._terms(s)
        return SparseVec(n, self.theta(s - n + 1.0))

    def q_prime(self, s: float) -> SparseVec:
        n = self._terms(s)
        return SparseVec(n, self.theta.deriv(s - n + 1.0))

    def p(self, t: float) -> SparseVec:
        return self.q(t / (1.0 - t))

    def p_prime(self, t: float) -> SparseVec:
        return self.q_prime(t / (1.0 - t)) / (1.0 - t) ** 2

    def eval(self, x: SparseVec, t: float) -> tuple[float, SparseVec, float]:
        """Value and the partial gradients in ``x`` and ``t``."""
        if not 0.0 < t < 1.0:
            return 0.0, SparseVec(), 0.0
        d = x - self.p(t)
        ph, dph = self.phi.value_and_grad(d)
        if ph == 0.0 and dph.nnz == 0:
            return 0.0, SparseVec(), 0.0
        a, da = float(self.alpha(t)), float(self.alpha.deriv(t))
        gt = ph * da - a * dph.dot(self.p_prime(t))
        return ph * a, a * dph, gt

    __call__ = eval

    def directional(self, x: SparseVec, t: float) -> float:
        """Derivative along ``(p'(t), 1)``; equals ``phi(x - p(t)) alpha'(t)``."""
        if not 0.0 < t < 1.0:
            return 0.0
        _, gx, gt = self.eval(x, t)
        return gx.dot(self.p_prime(t)) + gt


# approximate Rolle probe ----------------------------------------------------------

@dataclass(frozen=True)
class RolleReport:
    """``eps_hat``: half the sampled oscillation of ``f`` on the sphere;
    ``m_hat``: sampled minimum of ``||f'||`` inside; ``m_hat_support``: the same
    over samples where ``f`` or ``f'`` is nonzero.
    """

    radius: float
    samples: int
    eps_hat: float
    m_hat: float
    m_hat_support: float
    bound: float
    consistent: bool
    running_min: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"radius": self.radius, "samples": self.samples, "eps_hat": self.eps_hat,
                "m_hat": self.m_hat, "m_hat_support": self.m_hat_support,
                "bound": self.bound, "consistent": self.consistent,
                "running_min": {str(k): v for k, v in self.running_min.items()}}


def slice_points(center: SparseVec, R: float, n: int, coords: np.ndarray, seed: int,
                 sphere: bool) -> list[SparseVec]:
    """Quasi-random points of the ball (or sphere) of radius ``R`` in a coordinate slice."""
    d = len(coords)
    u = np.clip(_sobol(d + 1, n, seed), 1e-12, 1 - 1e-12)
    g = _normal.ppf(u[:, :d])
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = R if sphere else R * u[:, d] ** (1.0 / d)
    pts = g * np.reshape(r, (-1, 1))
    return [center + SparseVec(coords, row) for row in pts]


def approx_rolle_probe(fn: Callable[[SparseVec], tuple[float, SparseVec]], center: SparseVec,
                       R: float, samples: int, seed: int = 0, coords=None,
                       grad_lower_bound: float | None = None) -> RolleReport:
    """Sample ``fn`` (returning value and gradient) on ``B(center, R)`` and its sphere.

    ``coords`` defaults to the support of ``center`` plus indices ``0..5``. The
    report is inconsistent only when a caller-supplied certified lower bound on
    ``||f'||`` over the ball exceeds ``eps_hat / R``; sampled minima alone can
    never contradict the inequality.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if coords is None:
        coords = np.union1d(center.indices, np.arange(6))
    coords = np.asarray(coords, dtype=np.int64)
    bvals = np.array([fn(y)[0] for y in slice_points(center, R, samples, coords, seed, True)])
    eps_hat = 0.5 * float(bvals.max() - bvals.min())
    inner = slice_points(center, R, samples, coords, seed + 1, False)
    norms, support = [], []
    for y in inner:
        val, grad = fn(y)
        gn = grad.norm()
        norms.append(gn)
        if val != 0.0 or gn != 0.0:
            support.append(gn)
    norms = np.array(norms)
    running = {}
    k = 10
    while k <= samples:
        running[k] = float(norms[:k].min())
        k *= 10
    consistent = grad_lower_bound is None or grad_lower_bound <= eps_hat / R
    return RolleReport(R, samples, eps_hat, float(norms.min()),
                       float(min(support)) if support else math.inf,
                       eps_hat / R, consistent, running)
