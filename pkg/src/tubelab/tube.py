"""The twisted tube: ``pi(x, t) = beta(t) x + p(t)`` on a half-cylinder.

Points of the cylinder are ``x + t z`` with ``x`` in ``H = z^perp``,
``||x|| < eps`` and ``t > 0``, where ``z = v_1 / ||v_1||``. The inverse finds
``t(y)`` as the root of ``F_y(t) = alpha(t)(y - p(t))`` with
``alpha(t) = z o beta(t)^{-1}``, then reads off ``x = beta(t)^{-1}(y - p(t))``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BoundViolation, DomainError, NotInTube
from .iso_path import IsoPath, PathConstants, default_path
from .roots import safeguarded_newton
from .seq_space import FiniteRankOp, SparseVec

__all__ = [
    "CylPoint",
    "TubeChart",
    "NotInTube",
    "Z",
    "path_constants",
    "default_chart",
]

Z = default_path().v1 / math.sqrt(2.0)
_PH = FiniteRankOp(1.0, ((-1.0 * Z, Z),))

DEFAULT_EPS = 0.01
H_TOL = 1e-9


@dataclass(frozen=True)
class CylPoint:
    """``x + t z`` with ``x`` in ``H``; the radius constraint is checked by the chart."""

    x: SparseVec
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError("cylinder points need t > 0")
        if abs(Z.dot(self.x)) > H_TOL * (1.0 + self.x.norm()):
            raise DomainError("x must lie in H")

    def as_vector(self) -> SparseVec:
        return self.x + self.t * Z

    @classmethod
    def from_vector(cls, u: SparseVec) -> "CylPoint":
        t = Z.dot(u)
        return cls(u - t * Z, t)

    def distance(self, other: "CylPoint") -> float:
        return math.hypot((self.x - other.x).norm(), self.t - other.t)


@lru_cache(maxsize=8)
def path_constants(scale: float = 1.0) -> PathConstants:
    """Measured constants of the path (grid step 1e-2 on [0, 20]), cached."""
    return default_path(scale).measure()


class _Grid:
    """Dense tables of ``alpha(t_k)`` and ``alpha(t_k) p(t_k)`` on an even grid."""

    def __init__(self, path: IsoPath, step: float, t_cap: float):
        self.step = step
        self.t_cap = t_cap
        ts = np.arange(0.0, t_cap + 0.5 * step, step)
        self.dim = int(t_cap) + 4
        self.ts = ts
        self.alpha = np.zeros((ts.size, self.dim))
        self.ap = np.zeros(ts.size)
        self.pts = np.zeros((ts.size, self.dim))
        for k, t in enumerate(ts):
            a = path.beta_inv(t).pullback(Z)
            pt = path.p(t)
            self.alpha[k] = a.to_dense(self.dim)
            self.pts[k] = pt.to_dense(self.dim)
            self.ap[k] = a.dot(pt)
        self.p2 = np.einsum("ij,ij->i", self.pts, self.pts)

    def F(self, y: SparseVec) -> np.ndarray:
        return self.alpha[:, y.indices] @ y.values - self.ap

    def dist2(self, y: SparseVec) -> np.ndarray:
        """``||y - p(t_k)||^2`` on the grid."""
        return y.norm2() - 2.0 * (self.pts[:, y.indices] @ y.values) + self.p2


@dataclass
class TubeChart:
    """The diffeomorphism ``pi`` from the half-cylinder onto the tube, with its inverse.

    ``scale`` multiplies ``pi`` (scaled mode uses 1/6 so the tube sits in the
    unit ball). ``K`` defaults to the measured constant of the path.
    """

    epsilon: float = DEFAULT_EPS
    scale: float = 1.0
    K: float | None = None
    root_tol: float = 1e-12
    grid_step: float = 1.0 / 32.0
    path: IsoPath = field(init=False)
    z: SparseVec = field(init=False)
    z_star: SparseVec = field(init=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        self.path = default_path(self.scale)
        self.z = Z
        self.z_star = Z
        if self.K is None:
            self.K = path_constants(self.scale).K_measured
        self._beta_sup = path_constants(1.0).sup_beta
        self._grid = None
        self._lock = threading.Lock()

    @classmethod
    def scaled(cls, epsilon: float = DEFAULT_EPS, **kw) -> "TubeChart":
        return cls(epsilon=epsilon, scale=1.0 / 6.0, **kw)

    @classmethod
    def universal(cls, scale: float = 1.0) -> "TubeChart":
        """Chart with the universal constant and an epsilon below ``1/(6K^5)``."""
        k = path_constants(scale).K_universal
        return cls(epsilon=0.5 / (6.0 * k ** 5), scale=scale, K=k)

    # constants ------------------------------------------------------------------

    @property
    def epsilon_universal_bound(self) -> float:
        return 1.0 / (6.0 * self.K ** 5)

    @property
    def meets_universal_bound(self) -> bool:
        return self.epsilon < self.epsilon_universal_bound

    @property
    def z_star_v(self) -> float:
        """``z*(v)`` for the tangent ``v`` of the scaled path, must be >= 1/K."""
        return self.scale * self.z_star.dot(self.path.v1)

    def slope_gamma(self, t_max: float = 20.0, step: float = 1e-2) -> float:
        """Sup of ``||z o (beta^{-1})'(t) beta(t)||``; at a root ``F' <= -||v_1|| + gamma eps``."""
        return _slope_gamma(self.scale, t_max, step)

    def epsilon_slope_bound(self) -> float:
        """Largest radius for which the root slope is certified below ``-1/(2K)``."""
        return (self.path.v1.norm() - 1.0 / (2.0 * self.K)) / self.slope_gamma()

    def record(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "scale": self.scale,
            "K": self.K,
            "K_universal": path_constants(self.scale).K_universal,
            "epsilon_universal_bound": self.epsilon_universal_bound,
            "meets_universal_bound": self.meets_universal_bound,
            "z_star_v": self.z_star_v,
        }

    @property
    def outer_radius(self) -> float:
        """Radius of a ball about 0 containing the tube (measured constants, 5% margin)."""
        c = path_constants(1.0)
        return 1.05 * self.scale * (c.sup_beta * self.epsilon + c.sup_p)

    # forward map ------------------------------------------------------------------

    def _check(self, pt: CylPoint):
        if not pt.x.norm() < self.epsilon:
            raise DomainError("||x|| must be below epsilon")

    def pi(self, pt: CylPoint) -> SparseVec:
        self._check(pt)
        y = self.path.beta(pt.t).apply(pt.x) + self.path.p(pt.t)
        return y if self.scale == 1.0 else self.scale * y

    def F(self, y: SparseVec, t: float) -> float:
        """``F_y(t)`` for the unscaled chart; ``y`` is divided by ``scale`` first."""
        yu = self._unscale(y)
        return self.path.beta_inv(t).pullback(Z).dot(yu - self.path.p(t))

    def F_prime(self, y: SparseVec, t: float) -> float:
        return self._F_dF(self._unscale(y), t)[1]

    def alpha(self, t: float) -> SparseVec:
        return self.path.beta_inv(t).pullback(Z)

    def _F_dF(self, yu: SparseVec, t: float) -> tuple[float, float]:
        path = self.path
        r = yu - path.p(t)
        a = path.beta_inv(t).pullback(Z)
        da = path.beta_inv_prime(t).pullback(Z)
        return a.dot(r), da.dot(r) - a.dot(path.p_prime(t))

    def _unscale(self, y: SparseVec) -> SparseVec:
        return y if self.scale == 1.0 else y / self.scale

    # inverse ---------------------------------------------------------------------

    def _grid_for(self, t_cap: float) -> _Grid:
        with self._lock:
            if self._grid is None or self._grid.t_cap < t_cap:
                cap = max(32.0, t_cap, 2.0 * self._grid.t_cap if self._grid else 0.0)
                self._grid = _Grid(self.path, self.grid_step, cap)
            return self._grid

    def _roots(self, yu: SparseVec) -> list[float]:
        t_cap = (yu.max_index if yu.nnz else 0) + 2.0
        g = self._grid_for(t_cap)
        m = g.ts <= t_cap
        ts, Fv = g.ts[m], g.F(yu)[m]
        # a preimage needs ||y - p(t)|| = ||beta(t) x|| <= sup||beta|| eps, and
        # ||p'|| <= 2, so cells farther than that from the centre line are skipped
        reach = self._beta_sup * self.epsilon * 1.01 + 2.0 * g.step
        near = np.sqrt(np.maximum(g.dist2(yu)[m], 0.0)) <= reach
        keep = near[:-1] | near[1:]
        brackets = set()
        sgn = np.sign(Fv)
        for k in np.nonzero((sgn[:-1] * sgn[1:] <= 0) & keep)[0]:
            brackets.add((float(ts[k]), float(ts[k + 1])))
        # near the closest centre-line point, rescan finely for close root pairs
        k0 = int(np.argmin(g.dist2(yu)[m]))
        if near[k0]:
            lo, hi = ts[max(k0 - 2, 0)], ts[min(k0 + 2, ts.size - 1)]
            fine = np.linspace(lo, hi, 9)
            fv = np.array([self.alpha(t).dot(yu - self.path.p(t)) for t in fine])
            # the fine scan covers (and refines) the coarse cells inside it
            brackets = {b for b in brackets if b[1] <= lo or b[0] >= hi}
            for k in np.nonzero(np.sign(fv[:-1]) * np.sign(fv[1:]) <= 0)[0]:
                brackets.add((float(fine[k]), float(fine[k + 1])))
        roots = []
        for lo, hi in sorted(brackets):
            res = safeguarded_newton(lambda t: self._F_dF(yu, t), lo, hi, ftol=self.root_tol)
            if not any(abs(res.root - r) < 1e-9 for r in roots):
                roots.append(res.root)
        return roots

    def pi_inverse(self, y: SparseVec) -> CylPoint:
        """Unique cylinder preimage of ``y``; raises :class:`NotInTube` if there is none."""
        if y.norm() > self.outer_radius:
            raise NotInTube("the point lies outside a ball containing the tube")
        yu = self._unscale(y)
        found = []
        for t in self._roots(yu):
            if t <= 0:
                continue
            x = self.path.beta_inv(t).apply(yu - self.path.p(t))
            # the root makes z(x) vanish up to rounding; project it away
            x = x - Z.dot(x) * Z
            if x.norm() < self.epsilon * (1.0 + 1e-9):
                found.append(CylPoint(x, t))
        if not found:
            raise NotInTube("no root of F_y with a preimage inside the cylinder")
        if len(found) > 1:
            raise BoundViolation(f"{len(found)} preimages found; injectivity fails")
        return found[0]

    def contains(self, y: SparseVec) -> bool:
        try:
            self.pi_inverse(y)
        except NotInTube:
            return False
        return True

    def t_of_y(self, y: SparseVec) -> float:
        return self.pi_inverse(y).t

    # derivatives -------------------------------------------------------------------

    def t_of_y_derivative(self, y: SparseVec, pt: CylPoint | None = None) -> SparseVec:
        """Gradient of ``y -> t(y)``: ``-alpha(t) / F_y'(t)``."""
        pt = pt or self.pi_inverse(y)
        yu = self._unscale(y)
        _, dF = self._F_dF(yu, pt.t)
        return (-1.0 / (dF * self.scale)) * self.alpha(pt.t)

    def d_pi(self, pt: CylPoint) -> FiniteRankOp:
        """``k -> beta(t) P_H k + <z, k>(beta'(t) x + p'(t))``."""
        b = self.path.beta(pt.t)
        tang = self.path.beta_prime(pt.t).apply(pt.x) + self.path.p_prime(pt.t)
        op = (b @ _PH) + FiniteRankOp.outer(Z, tang)
        return op if self.scale == 1.0 else self.scale * op

    def d_pi_inverse(self, y: SparseVec, pt: CylPoint | None = None) -> FiniteRankOp:
        """Derivative of ``y -> x(y) + t(y) z``."""
        pt = pt or self.pi_inverse(y)
        yu = self._unscale(y)
        t = pt.t
        bi = self.path.beta_inv(t)
        w = self.path.beta_inv_prime(t).apply(yu - self.path.p(t)) - self.path.v1
        tp = self.t_of_y_derivative(y, pt) * self.scale  # gradient in unscaled y
        op = bi + FiniteRankOp.outer(tp, w + Z)
        return op if self.scale == 1.0 else (1.0 / self.scale) * op

    def measure_M(self, samples: int = 200, t_max: float = 15.0, seed: int = 0) -> float:
        """Sup of ``||D pi||`` and ``||D pi^{-1}||`` over random cylinder points."""
        rng = np.random.default_rng(seed)
        m = 0.0
        for _ in range(samples):
            pt = self.random_point(rng, t_max)
            y = self.pi(pt)
            m = max(m, self.d_pi(pt).norm(), self.d_pi_inverse(y, pt).norm())
        return m

    def random_point(self, rng: np.random.Generator, t_max: float = 15.0,
                     radius_frac: float = 0.999) -> CylPoint:
        """Uniform-ish point of the cylinder with ``t`` in ``(0, t_max)``."""
        t = float(rng.uniform(0.0, t_max))
        while t <= 0:
            t = float(rng.uniform(0.0, t_max))
        n = int(math.ceil(t)) + 3
        x = SparseVec.from_dense(rng.standard_normal(n + 1))
        x = x - Z.dot(x) * Z
        r = self.epsilon * radius_frac * rng.uniform() ** (1.0 / 3.0)
        return CylPoint(x * (r / x.norm()), t)


@lru_cache(maxsize=16)
def _slope_gamma(scale: float, t_max: float, step: float) -> float:
    path = default_path(scale)
    g = 0.0
    for t in np.arange(0.0, t_max + 0.5 * step, step):
        w = path.beta(t).pullback(path.beta_inv_prime(t).pullback(Z))
        g = max(g, w.norm())
    return g


@lru_cache(maxsize=8)
def default_chart(scale: float = 1.0, epsilon: float = DEFAULT_EPS) -> TubeChart:
    return TubeChart(epsilon=epsilon, scale=scale)
