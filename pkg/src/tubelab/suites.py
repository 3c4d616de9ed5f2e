"""Named invariant suites behind ``tubelab verify``.

Each suite returns a list of ``Check`` records; sample sizes are kept small
enough that the whole collection runs in a few minutes.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .checks import check_scalar_deriv, directional_diff
from .seq_space import SparseVec, basis, inner

__all__ = ["Check", "SUITES", "run_suite"]


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    value: float
    limit: float

    def to_dict(self) -> dict:
        return asdict(self)


def _le(name, value, limit) -> Check:
    return Check(name, bool(value <= limit), float(value), float(limit))


def _ge(name, value, limit) -> Check:
    return Check(name, bool(value >= limit), float(value), float(limit))


def _rand_vec(rng, dim=10, scale=1.0) -> SparseVec:
    return SparseVec.from_dense(rng.standard_normal(dim) * scale)


def _unit(rng, dim) -> SparseVec:
    d = _rand_vec(rng, dim)
    return d / d.norm()


# per-module suites -----------------------------------------------------------------

def seq_space_suite(seed: int = 0) -> list[Check]:
    from .iso_path import L, S

    rng = np.random.default_rng(seed)
    bio = max(abs(inner(basis(n), basis(k)) - (n == k)) for n in range(65) for k in range(65))
    inv_err = lin_err = 0.0
    for op in [S(3), S(7), L(2, 0.3), L(5, 0.9)]:
        for _ in range(100):
            x = _rand_vec(rng, 12)
            inv_err = max(inv_err, (op.apply(op.inverse.apply(x)) - x).norm() / (1 + x.norm()))
            y = _rand_vec(rng, 12)
            a, b = rng.standard_normal(2)
            lhs = op.apply(a * x + b * y)
            rhs = a * op.apply(x) + b * op.apply(y)
            lin_err = max(lin_err, (lhs - rhs).norm() / max(1.0, rhs.norm()))
    return [_le("biorthogonality", bio, 0.0), _le("inverse_pairs", inv_err, 1e-10),
            _le("linearity", lin_err, 1e-12)]


def smooth_kit_suite(seed: int = 0) -> list[Check]:
    from .smooth_kit import (
        make_alpha_ramp, make_blowup_theta, make_mu, make_theta, make_theta_even, make_theta_supp,
        make_zeta,
    )

    theta = make_theta()
    t = np.linspace(-1.0, 2.0, 10_001)
    out = [_le("theta_slope", float(np.max(np.abs(theta.deriv(t)))), 4.0)]
    s = np.linspace(0.5, 1.0, 1001)
    out.append(_le("theta_symmetry", float(np.max(np.abs(theta(s) - 1 + theta(s - 1)))), 1e-12))
    for fn in [theta, make_mu(), make_zeta(), make_alpha_ramp(), make_blowup_theta(),
               make_theta_supp(), make_theta_even()]:
        out.append(_le(f"fd_{fn.name}", check_scalar_deriv(fn), 1e-6))
    for fn, (lo, hi) in [(make_mu(), (1.05, 30.0)), (make_zeta(), (0.3, 0.68)),
                         (make_alpha_ramp(), (0.05, 5.0))]:
        g = np.linspace(lo, hi, 2001)
        out.append(_ge(f"increasing_{fn.name}", float(np.min(np.diff(fn(g)))), 1e-300))
    return out


def iso_path_suite(seed: int = 0) -> list[Check]:
    from .iso_path import UNIVERSAL_BOUNDS as UB
    from .iso_path import V1, L, cramer, default_path

    lam = np.linspace(0.0, 1.0, 101)
    dmin, ab, ln, li = math.inf, 0.0, [math.inf, 0.0], [math.inf, 0.0]
    for n in range(1, 33):
        for la in lam:
            c = cramer(n, la)
            dmin = min(dmin, c.delta)
            ab = max(ab, c.A.norm(), c.B.norm())
            op = L(n, la)
            a, b = op.norm(), op.inverse.norm()
            ln = [min(ln[0], a), max(ln[1], a)]
            li = [min(li[0], b), max(li[1], b)]
    out = [_ge("delta_min", dmin, 0.5), _le("A_B_norm", ab, UB["A_B_norm"]),
           _ge("L_norm_min", ln[0], 1.0 - 1e-12), _le("L_norm_max", ln[1], UB["L_norm"]),
           _ge("L_inv_norm_min", li[0], 1.0 - 1e-12), _le("L_inv_norm_max", li[1], UB["L_inv_norm"])]
    path = default_path()
    ts = np.arange(0.0, 20.0 + 1e-9, 0.05)
    out.append(_le("beta_prime", max(path.beta_prime(t).norm() for t in ts), UB["beta_prime"]))
    out.append(_le("beta_inv_prime", max(path.beta_inv_prime(t).norm() for t in ts),
                   UB["beta_inv_prime"]))
    out.append(_le("p_norm_scaled", max(path.p(t).norm() for t in ts) / 6.0, 1.0))
    rng = np.random.default_rng(seed)
    err = 0.0
    for t in rng.uniform(0.0, 20.0, 100):
        err = max(err, (path.p_prime(t) - path.beta(t).apply(V1)).norm())
        x = _unit(rng, 25)
        num = (path.beta(t + 1e-5).apply(x) - path.beta(t - 1e-5).apply(x)) / 2e-5
        err = max(err, (num - path.beta_prime(t).apply(x)).norm())
    out.append(_le("derivative_consistency", err, 1e-5))
    return out


def tube_suite(seed: int = 0, chart=None) -> list[Check]:
    from .tube import default_chart, path_constants

    ch = chart or default_chart()
    rng = np.random.default_rng(seed)
    rt = tder = 0.0
    slope = -math.inf
    for _ in range(60):
        pt = ch.random_point(rng)
        y = ch.pi(pt)
        q = ch.pi_inverse(y)
        rt = max(rt, q.distance(pt))
        slope = max(slope, ch.F_prime(ch._unscale(y), q.t))
        tder = max(tder, ch.t_of_y_derivative(y, q).norm())
    gap = math.inf
    for _ in range(300):
        a, b = ch.random_point(rng), ch.random_point(rng)
        gap = min(gap, (ch.pi(a) - ch.pi(b)).norm())
    # a priori bounds for D pi and D pi^{-1} assembled from the unscaled path suprema
    c, s, eps = path_constants(1.0), ch.scale, ch.epsilon
    m_pi = s * (c.sup_beta + eps * c.sup_beta_prime + c.sup_beta * c.v_norm)
    m_inv = (c.sup_beta_inv
             + 2 * ch.K ** 2 * (c.sup_beta_inv_prime * c.sup_beta * eps + c.v_norm + 1.0)) / s
    dmax = dinv = 0.0
    for _ in range(40):
        pt = ch.random_point(rng)
        dmax = max(dmax, ch.d_pi(pt).norm())
        dinv = max(dinv, ch.d_pi_inverse(ch.pi(pt), pt).norm())
    return [_le("round_trip", rt, 1e-8), _le("root_slope", slope, -1.0 / (2 * ch.K)),
            _le("t_gradient", tder, 2 * ch.K ** 2 / s), _ge("injectivity_gap", gap, 1e-300),
            _le("d_pi_norm", dmax, m_pi), _le("d_pi_inverse_norm", dinv, m_inv)]


def rolle_bump_suite(seed: int = 0) -> list[Check]:
    from .rolle_bump import LostPathBump, NonRolleBump

    bump = NonRolleBump()
    rep = bump.deepening_probe(sizes=(10, 100, 1000), seed=seed)
    out = [_ge("min_grad_on_support", rep.min_value, 1e-300),
           Check("running_min_decreasing", rep.strictly_decreasing, rep.running_min[-1],
                 rep.running_min[0])]
    rng = np.random.default_rng(seed)
    err = 0.0
    for pt in bump.support_points(40, seed=seed + 1, t_range=(1.2, 12.0), radius_frac=0.9):
        y, _, g = bump.f_at(pt)
        tan = bump.tangent(pt)
        err = max(err, abs(g.dot(tan) - bump.phi.value(pt.x) * float(bump.mu.deriv(pt.t))))
        d = _unit(rng, y.max_index + 3)
        err = max(err, abs(g.dot(d) - directional_diff(bump.value, y, d, 1e-5)))
    out.append(_le("gradient_consistency", err, 1e-5))
    vals = [bump.value(_unit(rng, 12) * rng.uniform(1.0, 3.0)) for _ in range(50)]
    out.append(_le("zero_outside_ball", max(abs(v) for v in vals), 0.0))
    lost = LostPathBump()
    out.append(_le("lost_path_vertices", max((lost.q(n - 1.0) - basis(n)).norm()
                                             for n in range(1, 20)), 1e-15))
    lip = bump.lipschitz_report(pairs=20, seed=seed)
    out.append(_le("lipschitz_quotient", lip["max_quotient"], lip["bound"]))
    return out


def negligibility_suite(seed: int = 0) -> list[Check]:
    from .negligibility import DeletingDiffeo, StarlikeBody, StarlikeToolkit
    from .tube import CylPoint

    deleter = DeletingDiffeo()
    kit = StarlikeToolkit(deleter=deleter)
    ch = deleter.chart
    rng = np.random.default_rng(seed)
    ident = 0.0
    for _ in range(200):
        y = _unit(rng, 10) * rng.uniform(0.0, 1.0)
        pt = deleter._preimage(y)
        if pt is None or deleter.psi(pt) >= 1.0:
            ident = max(ident, (deleter(y) - y).norm())
    rt, psi_min = 0.0, math.inf
    for _ in range(60):
        x = _rand_vec(rng, 6)
        x = x - ch.z.dot(x) * ch.z
        pt = CylPoint(x * (rng.uniform(0, 0.5) * ch.epsilon / x.norm()), rng.uniform(1.0, 10.0))
        fy = deleter(ch.pi(pt))
        rt = max(rt, (deleter.inverse(fy) - ch.pi(pt)).norm())
        psi_min = min(psi_min, deleter.psi(ch.pi_inverse(fy)))
    hom = 0.0
    for body in [StarlikeBody.unit_ball()]:
        for _ in range(200):
            x, r = _rand_vec(rng, 8), rng.uniform(0, 10)
            hom = max(hom, abs(body(r * x) - r * body(x)))
    ret, fp = 0.0, math.inf
    for _ in range(200):
        x = _unit(rng, 8) * rng.uniform() ** 0.125
        ret = max(ret, abs(kit.retract(x).norm() - 1.0))
        fp = min(fp, (kit.fixed_point_free(x) - x).norm())
    return [_le("identity_off_V", ident, 0.0), _le("round_trip", rt, 1e-7),
            _ge("image_avoids_deleted", psi_min, 0.5 + 1e-12), _le("homogeneity", hom, 1e-10),
            _le("retraction_on_sphere", ret, 1e-9), _ge("no_fixed_points", fp, 1e-300)]


def gradient_cone_suite(seed: int = 0, epsilon: float = 0.1) -> list[Check]:
    from .gradient_cone import BlockSum

    bs = BlockSum(epsilon)
    rng = np.random.default_rng(seed)
    e = epsilon
    lo = psi_lo = math.inf
    up = -math.inf
    psi_gap = tail = 0.0
    samples = []
    for _ in range(200):
        x = SparseVec.from_dense(rng.standard_normal(30) * rng.uniform(0, 3)
                                 * rng.uniform(0, 1, 30) ** 3)
        samples.append(x)
        v, _ = bs.f(x)
        r2 = x.norm2()
        lo = min(lo, v - max(e * e / 3, r2))
        up = max(up, v - (2 * e * e / 3 + r2))
        p = math.sqrt(v) - math.sqrt(r2)
        psi_lo = min(psi_lo, p)
        psi_gap = max(psi_gap, p)
        tail = max(tail, abs(v - bs.f_brute(x)))
    cert = bs.cone_certificate(samples)
    lip = bs.lipschitz_report(pairs=30, seed=seed)
    return [_ge("f_lower", lo, 0.0), _le("f_upper", up, 1e-15), _ge("psi_lower", psi_lo, 0.0),
            _le("psi_upper", psi_gap, 2 * e / math.sqrt(3)), _le("tail_closed_form", tail, 1e-12),
            _ge("bump_at_zero", bs.bump(SparseVec())[0], 1e-300),
            _ge("cone_blocks", cert.min_block_norm, cert.threshold),
            _le("f_prime_lipschitz", lip["max_f_prime_quotient"], lip["M"]),
            _le("psi_lipschitz", lip["max_psi_quotient"], lip["psi_bound"])]


SUITES: dict[str, Callable[..., list[Check]]] = {
    "seq-space": seq_space_suite,
    "smooth-kit": smooth_kit_suite,
    "iso-path": iso_path_suite,
    "tube": tube_suite,
    "rolle-bump": rolle_bump_suite,
    "negligibility": negligibility_suite,
    "gradient-cone": gradient_cone_suite,
}


def run_suite(name: str, seed: int = 0) -> dict[str, list[Check]]:
    """Run one suite, or every suite for ``name == "all"``."""
    if name == "all":
        return {k: fn(seed=seed) for k, fn in SUITES.items()}
    if name not in SUITES:
        raise KeyError(name)
    return {name: SUITES[name](seed=seed)}
