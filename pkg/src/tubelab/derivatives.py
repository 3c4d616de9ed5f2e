"""Catalogue of every analytic derivative in the package, for difference audits.

Each entry draws a random point and direction and returns the map restricted to
that line, ``s -> F(x + s d)``, together with the analytic derivative at
``s = 0``. :func:`audit` compares the two with centered differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .checks import GradCheck, central_diff, richardson_diff
from .seq_space import SparseVec

__all__ = ["Case", "OPERATIONS", "audit", "operation_names"]

Line = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class Case:
    line: Line
    analytic: np.ndarray


def _arr(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))


def _unit(rng, dim) -> SparseVec:
    d = SparseVec.from_dense(rng.standard_normal(dim))
    return d / d.norm()


def _h_unit(rng, dim, z) -> SparseVec:
    d = SparseVec.from_dense(rng.standard_normal(dim))
    d = d - z.dot(d) * z
    return d / d.norm()


def _dense(v: SparseVec, dim: int) -> np.ndarray:
    return v.to_dense(dim)


# shared objects, built lazily ----------------------------------------------------------

@lru_cache(maxsize=1)
def _objects():
    from .gradient_cone import BlockSum, SubspaceAvoidingBump, TwoFactorBump
    from .negligibility import DeletingDiffeo, PlanarBand, StarlikeBody, StarlikeToolkit
    from .rolle_bump import LostPathBump, NonRolleBump
    from .tube import default_chart

    deleter = DeletingDiffeo()
    return dict(
        chart=default_chart(),
        band=PlanarBand(0.01),
        ellipsoid=StarlikeBody.weighted_ball(lambda i: 0.5 + 0.5 / (1.0 + np.asarray(i))),
        deleter=deleter,
        kit=StarlikeToolkit(deleter=deleter),
        bump=NonRolleBump(),
        lost=LostPathBump(),
        blocks=BlockSum(0.1),
        subspace=SubspaceAvoidingBump([SparseVec([0], [1.0]), SparseVec([1, 3], [0.5, 1.0])]),
        two=TwoFactorBump(),
    )


# one-variable gadgets ------------------------------------------------------------------

def _scalar_fn(make, lo=None, hi=None):
    """Uniform over the active window widened by 10%, or over ``[lo, hi]`` when given."""
    def sample(rng):
        fn = make()
        a, b = fn.active
        w = 0.1 * (b - a)
        t = float(rng.uniform(a - w if lo is None else lo, b + w if hi is None else hi))
        return Case(lambda s: _arr(fn(t + s)), _arr(fn.deriv(t)))
    return sample


def _smoothstep(rng):
    from .smooth_kit import smoothstep, smoothstep_deriv

    t = float(rng.uniform(-0.1, 1.1))
    return Case(lambda s: _arr(smoothstep(t + s, 0.9)), _arr(smoothstep_deriv(t, 0.9)))


def _bump_on_h(rng):
    from .smooth_kit import BumpOnH

    phi = BumpOnH(radius=0.3)
    x = _unit(rng, 6) * (0.33 * rng.uniform())
    d = _unit(rng, 6)
    return Case(lambda s: _arr(phi.value(x + s * d)), _arr(phi.value_and_grad(x)[1].dot(d)))


# path of isomorphisms ------------------------------------------------------------------

def _path_op(which):
    def sample(rng):
        from .iso_path import default_path

        path = default_path()
        t = float(rng.uniform(0.0, 20.0))
        dim = int(t) + 6
        x = SparseVec.from_dense(rng.standard_normal(dim))
        if which == "beta":
            return Case(lambda s: _dense(path.beta(t + s).apply(x), dim),
                        _dense(path.beta_prime(t).apply(x), dim))
        if which == "beta_inv":
            return Case(lambda s: _dense(path.beta_inv(t + s).apply(x), dim),
                        _dense(path.beta_inv_prime(t).apply(x), dim))
        return Case(lambda s: _dense(path.p(t + s), dim), _dense(path.p_prime(t), dim))
    return sample


# tube ---------------------------------------------------------------------------------

def _tube_point(rng, frac=0.95):
    ch = _objects()["chart"]
    return ch, ch.random_point(rng, 15.0, radius_frac=frac)


def _F_prime(rng):
    ch, pt = _tube_point(rng)
    y = ch.pi(pt)
    t = float(rng.uniform(max(pt.t - 1.0, 0.0), pt.t + 1.0))
    return Case(lambda s: _arr(ch.F(y, t + s)), _arr(ch.F_prime(y, t)))


def _d_pi(rng):
    from .tube import CylPoint

    ch, pt = _tube_point(rng)
    dim = pt.x.max_index + 3
    hd, c = _h_unit(rng, dim, ch.z), float(rng.standard_normal())
    k = hd + c * ch.z
    return Case(lambda s: _dense(ch.pi(CylPoint(pt.x + s * hd, pt.t + s * c)), dim + 2),
                _dense(ch.d_pi(pt).apply(k), dim + 2))


def _d_pi_inverse(rng):
    ch, pt = _tube_point(rng)
    y = ch.pi(pt)
    dim = y.max_index + 3
    d = _unit(rng, dim)
    return Case(lambda s: _dense(ch.pi_inverse(y + s * d).as_vector(), dim),
                _dense(ch.d_pi_inverse(y, pt).apply(d), dim))


def _t_of_y(rng):
    ch, pt = _tube_point(rng)
    y = ch.pi(pt)
    d = _unit(rng, y.max_index + 3)
    return Case(lambda s: _arr(ch.t_of_y(y + s * d)), _arr(ch.t_of_y_derivative(y, pt).dot(d)))


# planar band, bodies, deleting map ---------------------------------------------------------

def _band_point(rng, qmin=0.0):
    band = _objects()["band"]
    while True:
        s = float(rng.uniform(-0.01, 0.01))
        t = float(rng.uniform(-2.0, 1.0))
        q = band.gauge(s, t)
        if q > qmin:
            return band, s, t


def _band_gauge(rng):
    band, s, t = _band_point(rng)
    a = float(rng.uniform(0, 2 * math.pi))
    ds, dt = math.cos(a), math.sin(a)
    _, gs, gt = band.gauge_and_grad(s, t)
    return Case(lambda h: _arr(band.gauge(s + h * ds, t + h * dt)), _arr(gs * ds + gt * dt))


def _band_phi2(rng):
    band, s, t = _band_point(rng, qmin=0.5)
    a = float(rng.uniform(0, 2 * math.pi))
    ds, dt = math.cos(a), math.sin(a)
    _, p_t, p_s = band.phi2_and_dt(s, t)
    return Case(lambda h: _arr(band.phi2_and_dt(s + h * ds, t + h * dt)[0]),
                _arr(p_t * dt + p_s * ds))


def _band_phi_inverse(rng):
    band = _objects()["band"]
    s = float(rng.uniform(-0.005, 0.005))
    tau = float(rng.uniform(-2.0, 1.0))
    u = band.phi2_inverse(s, tau)
    a = float(rng.uniform(0, 2 * math.pi))
    ds, dtau = math.cos(a), math.sin(a)
    du_dtau, du_ds = band.phi_inverse_partials(s, u)
    return Case(lambda h: _arr(band.phi2_inverse(s + h * ds, tau + h * dtau)),
                _arr(du_dtau * dtau + du_ds * ds))


def _ellipsoid_gauge(rng):
    body = _objects()["ellipsoid"]
    x = _unit(rng, 8) * float(rng.uniform(0.05, 3.0))
    d = _unit(rng, 8)
    return Case(lambda s: _arr(body(x + s * d)), _arr(body.grad(x).dot(d)))


def _moved_point(rng):
    """Cylinder point of the region the deleting map moves."""
    from .tube import CylPoint

    dl = _objects()["deleter"]
    ch = dl.chart
    x = _h_unit(rng, 6, ch.z) * (ch.epsilon * float(rng.uniform(0.0, 0.5)))
    return dl, CylPoint(x, float(rng.uniform(1.0, 10.0)))


def _deleter_dg(rng):
    from .tube import CylPoint

    dl, pt = _moved_point(rng)
    hd, c = _h_unit(rng, 8, dl.chart.z), float(rng.standard_normal())
    k = hd + c * dl.chart.z
    return Case(lambda s: _dense(dl.g(CylPoint(pt.x + s * hd, pt.t + s * c)).as_vector(), 10),
                _dense(dl.dg(pt).apply(k), 10))


def _ambient_moved(rng):
    dl, pt = _moved_point(rng)
    if rng.uniform() < 0.1:  # a few points of the complement as well
        y = _unit(rng, 10) * float(rng.uniform(0.0, 1.0))
    else:
        y = dl.chart.pi(pt)
    return dl, y, _unit(rng, max(y.max_index + 3, 10))


def _deleter_jacobian(rng):
    dl, y, d = _ambient_moved(rng)
    dim = d.max_index + 2
    return Case(lambda s: _dense(dl(y + s * d), dim), _dense(dl.jacobian(y).apply(d), dim))


def _toolkit_df(rng):
    kit = _objects()["kit"]
    dl, y, d = _ambient_moved(rng)
    x = y - kit.d0
    dim = max(d.max_index, x.max_index) + 2
    return Case(lambda s: _dense(kit.f(x + s * d), dim), _dense(kit.df(x).apply(d), dim))


def _toolkit_bump(rng):
    kit = _objects()["kit"]
    dl, y, d = _ambient_moved(rng)
    x = y - kit.d0 if rng.uniform() < 0.5 else _unit(rng, 10) * float(rng.uniform(0.0, 1.1))
    return Case(lambda s: _arr(kit.bump(x + s * d)[0]), _arr(kit.bump(x)[1].dot(d)))


# bumps on the tube -----------------------------------------------------------------------

def _rolle_g(rng):
    from .tube import CylPoint

    bump = _objects()["bump"]
    pt = bump.support_points(1, seed=int(rng.integers(2 ** 31)), radius_frac=1.0)[0]
    hd, c = _h_unit(rng, pt.x.max_index + 3, bump.chart.z), float(rng.standard_normal())
    _, gx, gt = bump.g_eval(pt.x, pt.t)
    return Case(lambda s: _arr(bump.g_eval(pt.x + s * hd, pt.t + s * c)[0]),
                _arr(gx.dot(hd) + gt * c))


def _rolle_f(rng):
    bump = _objects()["bump"]
    pt = bump.support_points(1, seed=int(rng.integers(2 ** 31)), radius_frac=1.0)[0]
    y, _, g = bump.f_at(pt)
    d = _unit(rng, y.max_index + 3)
    return Case(lambda s: _arr(bump.value(y + s * d)), _arr(g.dot(d)))


def _lost_eval(rng):
    lost = _objects()["lost"]
    t = float(rng.uniform(0.0, 1.0))
    x = lost.p(t) + _unit(rng, 12) * (lost.phi.radius * float(rng.uniform(0.0, 1.1)))
    d, c = _unit(rng, 12), float(rng.standard_normal())
    _, gx, gt = lost.eval(x, t)
    return Case(lambda s: _arr(lost.eval(x + s * d, t + s * c)[0]), _arr(gx.dot(d) + gt * c))


def _lost_path(rng):
    lost = _objects()["lost"]
    t = float(rng.uniform(0.0, 0.98))
    return Case(lambda s: _dense(lost.p(t + s), 80), _dense(lost.p_prime(t), 80))


# block sums and product bumps ---------------------------------------------------------------

def _block_x(rng):
    dim = int(rng.integers(1, 40))
    scale = float(rng.choice([0.02, 0.1, 0.5, 3.0]))
    x = SparseVec.from_dense(rng.standard_normal(dim) * scale * rng.uniform(0, 1, dim) ** 3)
    return x, _unit(rng, dim + 8)


def _block_U(rng):
    U = _objects()["blocks"].U
    x = _unit(rng, 8) * (U.epsilon * float(rng.uniform(0.0, 1.2)))
    d = _unit(rng, 8)
    return Case(lambda s: _arr(U.value_and_grad(x + s * d)[0]), _arr(U.value_and_grad(x)[1].dot(d)))


def _block_method(name):
    def sample(rng):
        fn = getattr(_objects()["blocks"], name)
        x, d = _block_x(rng)
        if name == "bump":
            x = x * (0.6 * float(rng.uniform()) / max(x.norm(), 1e-300))
        return Case(lambda s: _arr(fn(x + s * d)[0]), _arr(fn(x)[1].dot(d)))
    return sample


def _product_bump(which):
    def sample(rng):
        b = _objects()[which]
        x = b.sample_support(1, seed=int(rng.integers(2 ** 31)), t_range=(1.01, 13.0),
                             radius_frac=1.0)[0]
        if rng.uniform() < 0.05:
            x = _unit(rng, 10) * float(rng.uniform(1.0, 2.0))
        d = _unit(rng, x.max_index + 3)
        return Case(lambda s: _arr(b(x + s * d)[0]), _arr(b(x)[1].dot(d)))
    return sample


def _smooth(name):
    from . import smooth_kit as sk

    return {"theta": sk.make_theta, "mu": sk.make_mu, "zeta": sk.make_zeta,
            "alpha_ramp": sk.make_alpha_ramp, "theta_supp": sk.make_theta_supp,
            "theta_even": sk.make_theta_even, "theta_blowup": sk.make_blowup_theta}[name]


OPERATIONS: dict[str, Callable[[np.random.Generator], Case]] = {
    "smooth_kit.smoothstep": _smoothstep,
    "smooth_kit.theta": _scalar_fn(_smooth("theta")),
    "smooth_kit.mu": _scalar_fn(_smooth("mu"), 0.5, 20.0),
    "smooth_kit.zeta": _scalar_fn(_smooth("zeta")),
    "smooth_kit.alpha_ramp": _scalar_fn(_smooth("alpha_ramp")),
    "smooth_kit.theta_supp": _scalar_fn(_smooth("theta_supp")),
    "smooth_kit.theta_even": _scalar_fn(_smooth("theta_even")),
    "smooth_kit.theta_blowup": _scalar_fn(_smooth("theta_blowup"), 0.5001, 1.4),
    "smooth_kit.bump_on_h": _bump_on_h,
    "iso_path.beta_prime": _path_op("beta"),
    "iso_path.beta_inv_prime": _path_op("beta_inv"),
    "iso_path.p_prime": _path_op("p"),
    "tube.F_prime": _F_prime,
    "tube.d_pi": _d_pi,
    "tube.d_pi_inverse": _d_pi_inverse,
    "tube.t_of_y": _t_of_y,
    "negligibility.band_gauge": _band_gauge,
    "negligibility.band_phi2": _band_phi2,
    "negligibility.band_phi_inverse": _band_phi_inverse,
    "negligibility.starlike_gauge": _ellipsoid_gauge,
    "negligibility.deleter_dg": _deleter_dg,
    "negligibility.deleter_jacobian": _deleter_jacobian,
    "negligibility.toolkit_df": _toolkit_df,
    "negligibility.toolkit_bump": _toolkit_bump,
    "rolle_bump.g": _rolle_g,
    "rolle_bump.f": _rolle_f,
    "rolle_bump.lost_bump": _lost_eval,
    "rolle_bump.lost_path": _lost_path,
    "gradient_cone.U": _block_U,
    "gradient_cone.f": _block_method("f"),
    "gradient_cone.psi": _block_method("psi"),
    "gradient_cone.bump": _block_method("bump"),
    "gradient_cone.subspace_bump": _product_bump("subspace"),
    "gradient_cone.two_factor_bump": _product_bump("two"),
}


def operation_names(module: str | None = None) -> list[str]:
    return [k for k in OPERATIONS if module is None or k.split(".")[0] == module]


def audit(name: str, points: int = 500, seed: int = 0, h: float = 1e-5, tol: float = 1e-5,
          richardson: bool = False) -> GradCheck:
    """Max abs difference between the analytic derivative and centered differences."""
    sample = OPERATIONS[name]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        case = sample(rng)
        fd = richardson_diff(case.line, 0.0, h) if richardson else central_diff(case.line, 0.0, h)
        worst = max(worst, float(np.max(np.abs(np.asarray(fd) - case.analytic))))
    return GradCheck(name, points, worst, tol)
