"""Deleting a twisted tube, and what that buys: Rolle-free bumps on starlike
bodies, smooth retractions onto their boundary, fixed-point-free self-maps.

Pieces, from the bottom up:

* ``PlanarBand``: a convex half-strip ``|s| <= eps/2, t >= -1`` with rounded
  bottom corners, and its Minkowski gauge ``q_B``.
* ``planar_phi``: ``(s, t) -> (s, t + theta(q_B(s, t)))``, a diffeomorphism of
  the plane minus ``B' = B/2`` onto the plane; the identity outside ``B``.
* ``h_map``: the same map along fibres of ``X = H + [z]`` with ``s = ||x||``.
* ``DeletingDiffeo``: ``h`` shifted up by 2 along the cylinder and carried
  into the tube by the chart. It maps ``X`` onto ``X`` minus a smaller tube and
  is the identity outside a ball.
* ``StarlikeBody`` gauges, ``starlike_nonrolle_bump``, ``retract``,
  ``fixed_point_free`` and ``homotopy``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NotInTube
from .roots import safeguarded_newton
from .seq_space import FiniteRankOp, SparseVec
from .smooth_kit import (
    SmoothFn1D, make_blowup_theta, make_theta_even, make_zeta, smoothstep, smoothstep_deriv,
    smoothstep_integral,
)
from .tube import CylPoint, TubeChart, Z, default_chart

__all__ = [
    "PlanarBand",
    "StarlikeBody",
    "CylindricalBody",
    "DeletingDiffeo",
    "StarlikeToolkit",
    "planar_phi",
    "planar_phi_inverse",
]

_SQ2 = math.sqrt(2.0)
_J = float(smoothstep_integral(0.5))  # int_0^{1/2} sigma


# planar band -------------------------------------------------------------------

@dataclass(frozen=True)
class PlanarBand:
    """Convex body ``B`` in the ``(s, t)`` plane and its gauge.

    In corner coordinates ``a = eps/2 - |s|`` (distance to the side) and
    ``b = t + 1`` (height above the floor), rotated to ``xi = (a-b)/sqrt2``,
    ``eta = (a+b)/sqrt2``, the body is ``eta >= m(xi)`` with ``m`` convex,
    ``m(xi) = |xi|`` for ``|xi| >= delta`` and ``m' = 2 sigma((xi+delta)/(2 delta)) - 1``
    in between. So the floor ``t = -1`` survives for ``|s| <= eps/4`` and the
    sides ``|s| = eps/2`` for ``t >= -1 + eps/4``.
    """

    epsilon: float
    blowup: SmoothFn1D = field(default_factory=make_blowup_theta)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def delta(self) -> float:
        return self.epsilon / (4.0 * _SQ2)

    # boundary curve in rotated corner coordinates
    def m(self, xi: float) -> float:
        d = self.delta
        if abs(xi) >= d:
            return abs(xi)
        u = (xi + d) / (2.0 * d)
        return 4.0 * _J * d + 2.0 * d * (2.0 * (float(smoothstep_integral(u)) - _J) - (u - 0.5))

    def m_prime(self, xi: float) -> float:
        d = self.delta
        if abs(xi) >= d:
            return math.copysign(1.0, xi)
        return 2.0 * float(smoothstep((xi + d) / (2.0 * d))) - 1.0

    def _corner(self, s: float, t: float) -> tuple[float, float]:
        a = 0.5 * self.epsilon - abs(s)
        b = t + 1.0
        return (a - b) / _SQ2, (a + b) / _SQ2

    def inside(self, s: float, t: float) -> bool:
        xi, eta = self._corner(s, t)
        return abs(s) <= 0.5 * self.epsilon and t >= -1.0 and eta >= self.m(xi)

    def gauge(self, s: float, t: float) -> float:
        """``q_B(s, t) = inf{lam > 0 : (s, t)/lam in B}``."""
        return self.gauge_and_grad(s, t)[0]

    def gauge_and_grad(self, s: float, t: float) -> tuple[float, float, float]:
        """``(q_B, dq/ds, dq/dt)``; the gradient is ``n / <n, b>`` for the outward
        normal ``n`` at the boundary point ``b = (s, t)/q_B``."""
        e2, e4 = 0.5 * self.epsilon, 0.25 * self.epsilon
        sa = abs(s)
        q0 = max(sa / e2, -t, 0.0)
        if q0 == 0.0:
            return 0.0, 0.0, 0.0  # on the recession half-line {s = 0, t >= 0}
        # boundary point of the unrounded half-strip
        a0, b0 = e2 - sa / q0, t / q0 + 1.0
        if max(a0, b0) >= e4:
            # exit through a flat face
            if sa / e2 >= -t:
                return q0, math.copysign(1.0 / e2, s) if s else 0.0, 0.0
            return q0, 0.0, -1.0

        def G(mu):
            xi, eta = self._corner(sa * mu, t * mu)
            return eta - self.m(xi)

        mu = 1.0 / q0
        if G(mu) < 0.0:  # otherwise the square corner point is already on the arc
            mu = brentq(G, 0.0, mu, xtol=1e-17, rtol=1e-15, maxiter=200)
        q = 1.0 / mu
        xi, _ = self._corner(sa * mu, t * mu)
        mp = self.m_prime(xi)
        n_s, n_t = (1.0 - mp) / _SQ2, -(1.0 + mp) / _SQ2
        nb = n_s * sa * mu + n_t * t * mu
        return q, math.copysign(n_s / nb, s) if s else 0.0, n_t / nb

    # planar deformation ----------------------------------------------------------

    def phi(self, s: float, t: float) -> tuple[float, float]:
        """``(s, t + theta(q_B))``; defined where ``q_B > 1/2``."""
        q = self.gauge(s, t)
        if q <= 0.5:
            raise DomainError("planar_phi is defined only outside B/2")
        return s, t + float(self.blowup(q))

    def phi2_and_dt(self, s: float, t: float) -> tuple[float, float, float]:
        """``phi_2``, ``d phi_2/dt``, ``d phi_2/ds``; ``+inf`` inside ``B/2``."""
        q, qs, qt = self.gauge_and_grad(s, t)
        if q <= 0.5:
            return math.inf, math.inf, 0.0
        th, dth = float(self.blowup(q)), float(self.blowup.deriv(q))
        return t + th, 1.0 + dth * qt, dth * qs

    def phi_inverse(self, s: float, tau: float) -> tuple[float, float]:
        """Solve ``t + theta(q_B(s, t)) = tau`` on the fibre below ``B/2``."""
        return s, self.phi2_inverse(s, tau)

    def phi2_inverse(self, s: float, tau: float) -> float:
        if tau <= -1.0:
            return tau  # q_B >= -t >= 1 there, so phi is the identity
        res = safeguarded_newton(lambda u: _shift(self.phi2_and_dt(s, u), tau), -1.0, tau,
                                 ftol=1e-13, xtol=1e-15)
        return res.root

    def phi_inverse_partials(self, s: float, u: float) -> tuple[float, float]:
        """``(du/dtau, du/ds)`` for ``u = phi2^{-1}(s, tau)`` at the solution ``u``."""
        q, qs, qt = self.gauge_and_grad(s, u)
        dth = float(self.blowup.deriv(q))
        den = 1.0 + dth * qt
        return 1.0 / den, -dth * qs / den


def _shift(vals, tau):
    v, dv, _ = vals
    return v - tau, dv


def planar_phi(s: float, t: float, epsilon: float = 0.01) -> tuple[float, float]:
    return PlanarBand(epsilon).phi(s, t)


def planar_phi_inverse(s: float, t: float, epsilon: float = 0.01) -> tuple[float, float]:
    return PlanarBand(epsilon).phi_inverse(s, t)


# starlike bodies ---------------------------------------------------------------------

@dataclass(frozen=True)
class StarlikeBody:
    """``A = {q_A <= 1}`` for a positively homogeneous gauge with its gradient.

    ``cone`` describes the characteristic cone ``{q_A = 0}``.
    """

    name: str
    gauge: Callable[[SparseVec], float]
    grad: Callable[[SparseVec], SparseVec]
    cone: str = "{0}"

    def __call__(self, x: SparseVec) -> float:
        return self.gauge(x)

    def contains(self, x: SparseVec, tol: float = 1e-12) -> bool:
        return self.gauge(x) <= 1.0 + tol

    @classmethod
    def unit_ball(cls) -> "StarlikeBody":
        return cls("unit_ball", lambda x: x.norm(), lambda x: x / x.norm())

    @classmethod
    def weighted_ball(cls, weight: Callable[[np.ndarray], np.ndarray]) -> "StarlikeBody":
        """Ellipsoid ``sum w_i x_i^2 <= 1``; weights in ``[c, 1]`` keep it bounded
        and containing the unit ball."""
        def q(x):
            return math.sqrt(float(np.sum(weight(x.indices) * x.values ** 2)))

        def g(x):
            w = weight(x.indices)
            return SparseVec(x.indices, w * x.values / q(x))
        return cls("weighted_ball", q, g)


@dataclass(frozen=True)
class CylindricalBody:
    """``{(x, t) : psi(x, t - shift) <= level}`` with ``psi(x, t) = q_B(||x||, t)``,
    a body in ``X = H + [z]``; its characteristic cone is the half-line
    ``{x = 0, t >= 0}`` (before the shift)."""

    band: PlanarBand
    level: float = 1.0
    shift: float = 0.0

    cone = "{x = 0, t >= 0}"

    def psi(self, x: SparseVec, t: float) -> float:
        return self.band.gauge(x.norm(), t - self.shift)

    def gauge(self, u: SparseVec) -> float:
        """Gauge about the apex ``shift * z``; homogeneous in ``u - shift * z``."""
        pt_t = Z.dot(u)
        return self.psi(u - pt_t * Z, pt_t) / self.level

    def contains(self, x: SparseVec, t: float) -> bool:
        return self.psi(x, t) <= self.level


# deleting diffeomorphism ----------------------------------------------------------------

class DeletingDiffeo:
    """A diffeomorphism of ``X`` onto ``X`` minus the closed tube ``T' = pi(V')``
    that is the identity outside ``pi(V)``.

    ``V = 2z + U`` and ``V' = 2z + U'`` with ``U = {psi <= 1}``,
    ``U' = {psi <= 1/2}``. On cylinder coordinates the map is
    ``g(x, t) = (x, 2 + phi2^{-1}(||x||, t - 2))``.
    """

    SHIFT = 2.0

    def __init__(self, chart: TubeChart | None = None):
        self.chart = chart or default_chart(scale=1.0 / 6.0)
        self.band = PlanarBand(self.chart.epsilon)
        self.V = CylindricalBody(self.band, 1.0, self.SHIFT)
        self.V_prime = CylindricalBody(self.band, 0.5, self.SHIFT)

    def __repr__(self):
        return f"DeletingDiffeo(epsilon={self.chart.epsilon:g}, scale={self.chart.scale:g})"

    def psi(self, pt: CylPoint) -> float:
        """``psi(x, t - 2)`` at a cylinder point."""
        return self.band.gauge(pt.x.norm(), pt.t - self.SHIFT)

    # cylinder-level maps
    def h_map(self, x: SparseVec, t: float) -> tuple[SparseVec, float]:
        return x, self.band.phi2_inverse(x.norm(), t)

    def h_inverse(self, x: SparseVec, t: float) -> tuple[SparseVec, float]:
        q = self.band.gauge(x.norm(), t)
        if q <= 0.5:
            raise DomainError("h^{-1} is defined only where psi > 1/2")
        return x, t + float(self.band.blowup(q))

    def g(self, pt: CylPoint) -> CylPoint:
        x, u = self.h_map(pt.x, pt.t - self.SHIFT)
        return CylPoint(x, u + self.SHIFT)

    def g_inverse(self, pt: CylPoint) -> CylPoint:
        x, u = self.h_inverse(pt.x, pt.t - self.SHIFT)
        return CylPoint(x, u + self.SHIFT)

    def dg(self, pt: CylPoint) -> FiniteRankOp:
        """Jacobian of ``g`` on cylinder vectors ``k = k_H + k_t z``."""
        s = pt.x.norm()
        u = self.band.phi2_inverse(s, pt.t - self.SHIFT)
        du_dtau, du_ds = self.band.phi_inverse_partials(s, u)
        row = du_dtau * Z
        if s > 0.0:
            row = row + (du_ds / s) * pt.x
        return FiniteRankOp(1.0, ((-1.0 * Z, Z), (row, Z)))

    # ambient map
    def _preimage(self, y: SparseVec) -> CylPoint | None:
        try:
            return self.chart.pi_inverse(y)
        except NotInTube:
            return None

    def __call__(self, y: SparseVec) -> SparseVec:
        return self.apply(y)

    def apply(self, y: SparseVec) -> SparseVec:
        pt = self._preimage(y)
        if pt is None or self.psi(pt) >= 1.0:
            return y
        return self.chart.pi(self.g(pt))

    def inverse(self, y: SparseVec) -> SparseVec:
        """Inverse on the image ``X \\ T'``; raises on points of ``T'``."""
        pt = self._preimage(y)
        if pt is None or self.psi(pt) >= 1.0:
            return y
        if self.psi(pt) <= 0.5:
            raise DomainError("the point lies in the deleted tube")
        return self.chart.pi(self.g_inverse(pt))

    def jacobian(self, y: SparseVec) -> FiniteRankOp:
        pt = self._preimage(y)
        if pt is None or self.psi(pt) >= 1.0:
            return FiniteRankOp.identity()
        gp = self.g(pt)
        return self.chart.d_pi(gp) @ self.dg(pt) @ self.chart.d_pi_inverse(y, pt)

    def in_deleted(self, y: SparseVec) -> bool:
        pt = self._preimage(y)
        return pt is not None and self.psi(pt) <= 0.5

    def deleted_center(self) -> SparseVec:
        """``pi(0, 3)``: a point on the axis of ``T'``."""
        return self.chart.pi(CylPoint(SparseVec(), self.SHIFT + 1.0))


# consequences for starlike bodies ---------------------------------------------------------

class StarlikeToolkit:
    """Bump, retraction, fixed-point-free map and contracting homotopy for a
    starlike body ``A`` containing the unit ball.

    ``f~(x) = f(x + d0) - d0`` is the deleting map conjugated by the
    translation taking ``d0 = pi(0, 3)`` (inside the deleted tube) to the
    origin, so ``f~`` never vanishes and is the identity near ``boundary A``.
    """

    def __init__(self, body: StarlikeBody | None = None, deleter: DeletingDiffeo | None = None):
        self.body = body or StarlikeBody.unit_ball()
        self.deleter = deleter or DeletingDiffeo()
        self.d0 = self.deleter.deleted_center()
        self.theta = make_theta_even()
        self.zeta = make_zeta()
        # the moved region pi(V) - d0 must sit strictly inside the unit ball
        self.moved_radius = self.deleter.chart.outer_radius + self.d0.norm()
        if not self.moved_radius < 1.0:
            raise ValueError("the translated tube does not fit inside the unit ball")

    def f(self, x: SparseVec) -> SparseVec:
        if x.norm() >= self.moved_radius:
            return x
        return self.deleter(x + self.d0) - self.d0

    def df(self, x: SparseVec) -> FiniteRankOp:
        if x.norm() >= self.moved_radius:
            return FiniteRankOp.identity()
        return self.deleter.jacobian(x + self.d0)

    def bump(self, x: SparseVec) -> tuple[float, SparseVec]:
        """``theta(q_A(f~(x)))`` with its gradient; support exactly ``A``."""
        fx = self.f(x)
        h = self.body(fx)
        val = float(self.theta(h))
        if val == 0.0 and h >= 1.0:
            return 0.0, SparseVec()
        dh = self.df(x).pullback(self.body.grad(fx))
        return val, float(self.theta.deriv(h)) * dh

    def _check_in_A(self, x: SparseVec):
        if not self.body.contains(x, tol=1e-12):
            raise ValueError("the point is not in the body A")

    def retract(self, x: SparseVec) -> SparseVec:
        """``R(x) = f~(x) / q_A(f~(x))``, a smooth retraction of ``A`` onto its boundary."""
        self._check_in_A(x)
        fx = self.f(x)
        return fx / self.body(fx)

    def fixed_point_free(self, x: SparseVec) -> SparseVec:
        return -1.0 * self.retract(x)

    def homotopy(self, t: float, x: SparseVec) -> SparseVec:
        """``R((1 - zeta(t)) x)``: joins the identity of the boundary to the constant ``R(0)``."""
        if not 0.0 <= t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        if abs(self.body(x) - 1.0) > 1e-9:
            raise ValueError("the homotopy acts on the boundary of A")
        return self.retract((1.0 - float(self.zeta(t))) * x)
