"""A smooth path of isomorphisms of l2 carrying v_1 along v_1, v_2, v_3, ...

With x_n = e_n and v_n = e_n - e_{n-1}, the operators
``S_n = id + f_n (x) (v_n - v_1)`` satisfy ``S_n v_1 = v_n``. The path
``beta(t) = sum_n theta_n(t) S_n`` is, on each window ``[n-1, n]``, the
interpolant ``L_{n,lam} = (1-lam) S_n + lam S_{n+1}`` with ``lam = theta_{n+1}(t)``,
whose inverse is written down by Cramer's rule on a 2x2 system.
``p(t) = int_{-inf}^t beta(s) v_1 ds`` is a bounded curve of infinite length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np

from .errors import BoundViolation, DomainError
from .seq_space import FiniteRankOp, RankPerturbOp, SparseVec
from .smooth_kit import SmoothFn1D, THETA_A, make_theta, theta_integral_fast

__all__ = [
    "V1",
    "v",
    "make_f",
    "S",
    "CramerSolution",
    "cramer",
    "L",
    "window",
    "IsoPath",
    "PathConstants",
    "UNIVERSAL_BOUNDS",
    "default_path",
    "beta",
    "beta_inv",
    "beta_prime",
    "beta_inv_prime",
    "p",
    "p_prime",
    "separation_check",
]

# universal ceilings from the construction; measured values must sit below them
UNIVERSAL_BOUNDS = {
    "f_norm": 18.0,
    "A_B_norm": 144.0,
    "L_norm": 73.0,
    "L_inv_norm": 577.0,
    "beta_prime": 584.0,
    "beta_inv_prime": 577.0 ** 2 * 584.0,
    "p_norm": 6.0,
    "K": 577.0 ** 2 * 584.0,
}


def v(n: int) -> SparseVec:
    """``v_n = e_n - e_{n-1}``."""
    if n < 1:
        raise ValueError("v_n needs n >= 1")
    return SparseVec([n - 1, n], [-1.0, 1.0], _trusted=False)


V1 = v(1)


@lru_cache(maxsize=4096)
def make_f(n: int) -> SparseVec:
    """Functional with ``f_n(v_1) = f_n(v_n) = 1``."""
    if n < 1:
        raise ValueError("make_f needs n >= 1")
    if n == 1:
        return SparseVec([1], [1.0])
    if n == 2:
        return SparseVec([1, 2, 3], [1.0, 2.0, 7.0 / 3.0])
    return SparseVec([1, n - 1], [1.0, -1.0])


@lru_cache(maxsize=4096)
def _dv(n: int) -> SparseVec:
    return v(n) - V1


@lru_cache(maxsize=4096)
def S(n: int) -> RankPerturbOp:
    """``S_n``; its inverse is ``y - f_n(y)(v_n - v_1)`` because ``f_n`` kills ``v_n - v_1``."""
    f, d = make_f(n), _dv(n)
    return RankPerturbOp(((f, d),), inverse=RankPerturbOp(((-f, d),)))


@dataclass(frozen=True)
class CramerSolution:
    """Coefficient functionals of ``L_{n,lam}^{-1}``."""

    n: int
    lam: float
    delta: float
    A: SparseVec
    B: SparseVec


def _check_window(n: int, lam: float):
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")


@lru_cache(maxsize=65536)
def cramer(n: int, lam: float) -> CramerSolution:
    """Solve for ``A_n(y) = f_n(x)`` and ``B_n(y) = f_{n+1}(x)`` given ``y = L_{n,lam} x``."""
    _check_window(n, lam)
    fn, fm = make_f(n), make_f(n + 1)
    c1 = fn.dot(v(n + 1)) - 1.0
    c2 = fm.dot(v(n)) - 1.0
    delta = 1.0 - lam * (1.0 - lam) * c1 * c2
    A = (fn - (lam * c1) * fm) / delta
    B = (fm - ((1.0 - lam) * c2) * fn) / delta
    if delta < 0.5 or A.norm() > UNIVERSAL_BOUNDS["A_B_norm"] or B.norm() > UNIVERSAL_BOUNDS["A_B_norm"]:
        raise BoundViolation(f"Cramer bounds fail at n={n}, lam={lam}")
    return CramerSolution(n, float(lam), float(delta), A, B)


@lru_cache(maxsize=65536)
def L(n: int, lam: float) -> RankPerturbOp:
    """``x + (1-lam) f_n(x)(v_n - v_1) + lam f_{n+1}(x)(v_{n+1} - v_1)`` with its inverse."""
    sol = cramer(n, lam)
    dn, dm = _dv(n), _dv(n + 1)
    inv = RankPerturbOp((((lam - 1.0) * sol.A, dn), ((-lam) * sol.B, dm)))
    return RankPerturbOp((((1.0 - lam) * make_f(n), dn), (lam * make_f(n + 1), dm)), inverse=inv)


def window(t: float, theta: SmoothFn1D | None = None) -> tuple[int, float, float]:
    """Active ``(n, lam, dlam/dt)`` with ``t`` in ``[n-1, n]``; ties take the lower n."""
    if t < 0:
        raise DomainError("the path is defined for t >= 0")
    theta = theta or _THETA
    n = max(1, math.ceil(t))
    u = t - n
    return n, float(theta(u)), float(theta.deriv(u))


_THETA = make_theta()


@dataclass(frozen=True)
class PathConstants:
    """Suprema measured on a grid, with the universal ceilings alongside."""

    t_max: float
    step: float
    sup_beta: float
    sup_beta_inv: float
    sup_beta_prime: float
    sup_beta_inv_prime: float
    sup_p: float
    v_norm: float
    a: float
    separation_ratio: float
    K_measured: float
    K_universal: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["universal_bounds"] = dict(UNIVERSAL_BOUNDS)
        return d


class IsoPath:
    """The pair ``(beta, p)``.

    ``scale`` only records the factor applied by the tube in scaled mode; the
    operators returned here are the unscaled ones, so ``beta(0)`` is the
    identity.
    """

    def __init__(self, scale: float = 1.0):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.theta = _THETA
        self.v1 = V1
        self.scale = float(scale)
        self.a = THETA_A

    def __repr__(self):
        return f"IsoPath(scale={self.scale:g})"

    def beta(self, t: float) -> RankPerturbOp:
        n, lam, _ = window(t, self.theta)
        return L(n, lam)

    def beta_inv(self, t: float) -> RankPerturbOp:
        return self.beta(t).inverse

    def beta_prime(self, t: float) -> FiniteRankOp:
        n, _, dlam = window(t, self.theta)
        return FiniteRankOp(0.0, (((-dlam) * make_f(n), _dv(n)),
                                  (dlam * make_f(n + 1), _dv(n + 1))))

    def beta_inv_prime(self, t: float) -> FiniteRankOp:
        bi = self.beta_inv(t)
        return -1.0 * (bi @ self.beta_prime(t) @ bi)

    def p(self, t: float) -> SparseVec:
        """Closed bookkeeping: the first ``m = floor(t)`` terms telescope to ``e_m - e_0``."""
        if t < 0:
            raise DomainError("the path is defined for t >= 0")
        m = int(math.floor(t))
        w = theta_integral_fast(np.array([t - m, t - m - 1.0]))
        parts = [(float(w[0]), v(m + 1)), (float(w[1]), v(m + 2))]
        if m >= 1:
            parts.append((1.0, SparseVec([0, m], [-1.0, 1.0])))
        return SparseVec.combine(parts)

    def p_prime(self, t: float) -> SparseVec:
        return self.beta(t).apply(self.v1)

    def scaled_p(self, t: float) -> SparseVec:
        return self.scale * self.p(t)

    def separation_check(self, t: float, s: float) -> float:
        """``||p(t) - p(s)||``; raises if it drops below ``min(|t-s|/12, a/4)``."""
        d = (self.p(t) - self.p(s)).norm()
        bound = min(abs(t - s) / 12.0, self.a / 4.0)
        if d < bound:
            raise BoundViolation(f"separation {d} < {bound} at t={t}, s={s}")
        return d

    def measure(self, t_max: float = 20.0, step: float = 1e-2, pairs: int = 10_000,
                seed: int = 0) -> PathConstants:
        sb, sbi, sbp, sbip, sp, ratio = _raw_sups(t_max, step, pairs, seed)
        c = self.scale
        # scaling beta and p by c scales beta', p by c and beta^{-1} by 1/c
        vals = dict(
            sup_beta=c * sb, sup_beta_inv=sbi / c, sup_beta_prime=c * sbp,
            sup_beta_inv_prime=sbip / c, sup_p=c * sp,
        )
        v_norm = c * self.v1.norm()
        k = max(max(vals.values()), 1.0 / v_norm, v_norm)
        return PathConstants(t_max=t_max, step=step, v_norm=v_norm, a=self.a,
                             separation_ratio=float(ratio), K_measured=float(k),
                             K_universal=UNIVERSAL_BOUNDS["K"], **{k_: float(x) for k_, x in vals.items()})


@lru_cache(maxsize=8)
def _raw_sups(t_max: float, step: float, pairs: int, seed: int) -> tuple[float, ...]:
    """Grid suprema of the unscaled operators and the sampled separation ratio."""
    path = IsoPath()
    ts = np.arange(0.0, t_max + 0.5 * step, step)
    sb = sbi = sbp = sbip = sp = 0.0
    for t in ts:
        b = path.beta(t)
        sb = max(sb, b.norm())
        sbi = max(sbi, b.inverse.norm())
        sbp = max(sbp, path.beta_prime(t).norm())
        sbip = max(sbip, path.beta_inv_prime(t).norm())
        sp = max(sp, path.p(t).norm())
    rng = np.random.default_rng(seed)
    tt = rng.uniform(0.0, t_max, size=(pairs, 2))
    dist = np.linalg.norm(p_dense(tt[:, 0]) - p_dense(tt[:, 1]), axis=1)
    bound = np.minimum(np.abs(tt[:, 0] - tt[:, 1]) / 12.0, path.a / 4.0)
    keep = bound > 0
    ratio = float(np.min(dist[keep] / bound[keep])) if keep.any() else np.inf
    return sb, sbi, sbp, sbip, sp, ratio


def p_dense(ts: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Rows ``p(t)`` as dense vectors of length ``dim`` (default: just long enough)."""
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < 0):
        raise DomainError("the path is defined for t >= 0")
    m = np.floor(ts).astype(np.int64)
    if dim is None:
        dim = int(m.max(initial=0)) + 3
    w0 = theta_integral_fast(ts - m)
    w1 = theta_integral_fast(ts - m - 1.0)
    out = np.zeros((ts.size, dim))
    rows = np.arange(ts.size)
    # w0 v_{m+1} + w1 v_{m+2} + (e_m - e_0)
    np.add.at(out, (rows, m), -w0)
    np.add.at(out, (rows, m + 1), w0 - w1)
    np.add.at(out, (rows, m + 2), w1)
    np.add.at(out, (rows, m), np.where(m >= 1, 1.0, 0.0))
    np.add.at(out, (rows, np.zeros_like(m)), np.where(m >= 1, -1.0, 0.0))
    return out


@lru_cache(maxsize=4)
def default_path(scale: float = 1.0) -> IsoPath:
    return IsoPath(scale)


def beta(t: float) -> RankPerturbOp:
    return default_path().beta(t)


def beta_inv(t: float) -> RankPerturbOp:
    return default_path().beta_inv(t)


def beta_prime(t: float) -> FiniteRankOp:
    return default_path().beta_prime(t)


def beta_inv_prime(t: float) -> FiniteRankOp:
    return default_path().beta_inv_prime(t)


def p(t: float) -> SparseVec:
    return default_path().p(t)


def p_prime(t: float) -> SparseVec:
    return default_path().p_prime(t)


def separation_check(t: float, s: float) -> float:
    return default_path().separation_check(t, s)
