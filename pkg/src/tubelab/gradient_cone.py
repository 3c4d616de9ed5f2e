"""Bumps whose derivatives stay away from prescribed sets.

``BlockSpace`` identifies l2 with the l2-sum of countably many copies of l2.
``BlockSum`` builds ``f(x) = sum_n 4^{-n} U(2^n x_n)`` from a functional
``U(x) = eps^2 + ||eps phi(x/eps)||^2``, where ``phi`` is a deleting map that
never vanishes and is the identity off the unit ball. Every block of ``f'`` is
nonzero at every point, so no derivative of ``f``, ``sqrt f`` or ``theta(f)``
lies in the closed set of functionals with a vanishing block.

``SubspaceAvoidingBump`` and ``TwoFactorBump`` are the product constructions
whose gradients miss a finite-dimensional subspace, or both summands of a
splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .negligibility import StarlikeToolkit
from .rolle_bump import NonRolleBump
from .seq_space import SparseVec
from .smooth_kit import make_theta_even

__all__ = [
    "BlockSpace",
    "BlockGradient",
    "BlockFunctionalU",
    "BlockSum",
    "ConeCertificate",
    "SubspaceAvoidingBump",
    "TwoFactorBump",
    "cone_certificate",
]


# block decomposition --------------------------------------------------------------

class BlockSpace:
    """``k + 1 = 2^(n-1) (2j + 1)``: index ``k`` is entry ``j`` of block ``n >= 1``."""

    @staticmethod
    def block_of_index(k):
        k1 = np.asarray(k, dtype=np.int64) + 1
        if np.any(k1 < 1):
            raise ValueError("indices must be nonnegative")
        low = k1 & -k1  # lowest set bit
        n = np.log2(low).astype(np.int64) + 1
        j = (k1 // low - 1) // 2
        return n, j

    @staticmethod
    def index_of(n, j):
        n = np.asarray(n, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        if np.any(n < 1) or np.any(j < 0):
            raise ValueError("blocks start at 1 and entries at 0")
        return (np.left_shift(1, n - 1) * (2 * j + 1)) - 1

    @classmethod
    def split(cls, x: SparseVec) -> dict[int, SparseVec]:
        """Nonzero blocks of ``x`` in local coordinates."""
        if not x.nnz:
            return {}
        n, j = cls.block_of_index(x.indices)
        return {int(b): SparseVec(j[n == b], x.values[n == b]) for b in np.unique(n)}

    @classmethod
    def embed(cls, n: int, v: SparseVec) -> SparseVec:
        """Place a local vector into block ``n``."""
        if not v.nnz:
            return SparseVec()
        return SparseVec(cls.index_of(n, v.indices), v.values)

    @classmethod
    def top_block(cls, x: SparseVec) -> int:
        """Largest block touched by ``x`` (0 for the zero vector)."""
        return int(cls.block_of_index(x.indices)[0].max()) if x.nnz else 0


@dataclass(frozen=True)
class BlockGradient:
    """A functional with explicit blocks ``1..N`` and, beyond, block ``n`` equal
    to ``tail_scale * 2^{-n} tail`` in local coordinates.

    Its support is infinite, so only dot products with finitely supported
    vectors, block norms and the exact total norm are computed.
    """

    head: SparseVec
    top: int
    tail: SparseVec
    tail_scale: float = 1.0

    def block(self, n: int) -> SparseVec:
        if n <= self.top:
            return BlockSpace.split(self.head).get(n, SparseVec())
        return (self.tail_scale * 2.0 ** -n) * self.tail

    def block_norm(self, n: int) -> float:
        return self.block(n).norm()

    def dot(self, d: SparseVec) -> float:
        out = self.head.dot(d)
        for n, v in BlockSpace.split(d).items():
            if n > self.top:
                out += self.block(n).dot(v)
        return out

    def norm(self) -> float:
        tail2 = (self.tail_scale * self.tail.norm()) ** 2 * 4.0 ** -self.top / 3.0
        return math.sqrt(self.head.norm2() + tail2)

    def truncate(self, blocks: int) -> SparseVec:
        """Explicit vector of blocks ``1..blocks``."""
        parts = [self.head.select(lambda k: BlockSpace.block_of_index(k)[0] <= blocks)]
        parts += [BlockSpace.embed(n, self.block(n)) for n in range(self.top + 1, blocks + 1)]
        return SparseVec.combine((1.0, p) for p in parts)

    def scaled(self, c: float) -> "BlockGradient":
        return BlockGradient(c * self.head, self.top, self.tail, c * self.tail_scale)


# the functional U and the block sum ----------------------------------------------------

class BlockFunctionalU:
    """``U(x) = eps^2 + ||eps phi(x/eps)||^2`` with gradient ``2 eps Dphi(x/eps)^* phi(x/eps)``.

    ``phi`` needs ``f(x)``, ``df(x)`` (a linear map with ``pullback``) and
    ``moved_radius``; it is the identity beyond that radius.
    """

    def __init__(self, epsilon: float = 0.1, phi=None):
        if not 0.0 < epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        self.epsilon = epsilon
        self.phi = phi or StarlikeToolkit()

    def __call__(self, x: SparseVec) -> float:
        return self.value_and_grad(x)[0]

    def value_and_grad(self, x: SparseVec) -> tuple[float, SparseVec]:
        e = self.epsilon
        u = x / e
        if u.norm() >= self.phi.moved_radius:
            return e * e + x.norm2(), 2.0 * x
        fu = self.phi.f(u)
        return e * e * (1.0 + fu.norm2()), (2.0 * e) * self.phi.df(u).pullback(fu)

    @cached_property
    def at_zero(self) -> tuple[float, SparseVec]:
        return self.value_and_grad(SparseVec())


class BlockSum:
    """``f(x) = sum_n 4^{-n} U(2^n x_n)``, ``psi = sqrt f`` and ``b = theta(f)``.

    Blocks of ``x`` that vanish still contribute ``4^{-n} U(0)``; all but
    finitely many do, and their sum is kept in closed form.
    """

    def __init__(self, epsilon: float = 0.1, phi=None, U: BlockFunctionalU | None = None):
        self.U = U or BlockFunctionalU(epsilon, phi)
        self.epsilon = self.U.epsilon
        self.theta = make_theta_even()

    def __repr__(self):
        return f"BlockSum(epsilon={self.epsilon:g})"

    def _terms(self, x: SparseVec):
        u0, g0 = self.U.at_zero
        val = u0 / 3.0  # every block at zero
        head = []
        blocks = BlockSpace.split(x)
        top = max(blocks, default=0)
        for n in range(1, top + 1):
            xn = blocks.get(n)
            if xn is None:
                head.append((2.0 ** -n, BlockSpace.embed(n, g0)))
                continue
            un, gn = self.U.value_and_grad(2.0 ** n * xn)
            val += 4.0 ** -n * (un - u0)
            head.append((2.0 ** -n, BlockSpace.embed(n, gn)))
        return val, BlockGradient(SparseVec.combine(head), top, g0)

    def f(self, x: SparseVec) -> tuple[float, BlockGradient]:
        return self._terms(x)

    def f_brute(self, x: SparseVec, blocks: int = 60) -> float:
        """Partial sum over the first ``blocks`` blocks, term by term."""
        parts = BlockSpace.split(x)
        u0 = self.U.at_zero[0]
        return math.fsum(4.0 ** -n * (self.U(2.0 ** n * parts[n]) if n in parts else u0)
                         for n in range(1, blocks + 1))

    def psi(self, x: SparseVec) -> tuple[float, BlockGradient]:
        val, g = self._terms(x)
        s = math.sqrt(val)
        return s, g.scaled(0.5 / s)

    def bump(self, x: SparseVec) -> tuple[float, BlockGradient]:
        if not 2.0 * self.epsilon ** 2 / 3.0 < 1.0:
            raise ValueError("the bump needs epsilon < sqrt(3/2)")
        val, g = self._terms(x)
        th = float(self.theta(val))
        return th, g.scaled(float(self.theta.deriv(val)))

    def cone_certificate(self, samples: list[SparseVec], extra: int = 3) -> "ConeCertificate":
        return cone_certificate(self, samples, extra)

    # constants in the Lipschitz estimates
    def u_lipschitz(self, samples: int = 200, seed: int = 0, step: float = 1e-3) -> float:
        """Sampled Lipschitz ratio of ``U'`` on pairs inside the moved ball."""
        rng = np.random.default_rng(seed)
        r = self.epsilon * self.U.phi.moved_radius
        worst = 0.0
        for _ in range(samples):
            x = SparseVec.from_dense(rng.standard_normal(8))
            x = x * (r * rng.uniform() / x.norm())
            d = SparseVec.from_dense(rng.standard_normal(8))
            d = d * (step * self.epsilon / d.norm())
            gx, gy = self.U.value_and_grad(x)[1], self.U.value_and_grad(x + d)[1]
            worst = max(worst, (gx - gy).norm() / d.norm())
        return max(worst, 2.0)  # 2 is the constant off the moved ball

    def lipschitz_report(self, pairs: int = 100, seed: int = 0, step: float = 1e-3) -> dict:
        """Sampled difference quotients of ``f'`` and ``psi`` against their bounds."""
        rng = np.random.default_rng(seed)
        M = self.u_lipschitz(seed=seed)
        g0 = self.f(SparseVec())[1].norm()
        psi_bound = M / 2.0 + math.sqrt(3.0) / (2.0 * self.epsilon) * g0
        fq = pq = 0.0
        for _ in range(pairs):
            x = SparseVec.from_dense(rng.standard_normal(16) * rng.uniform(0.01, 0.5))
            d = SparseVec.from_dense(rng.standard_normal(16))
            d = d * (step / d.norm())
            (fx, gx), (fy, gy) = self.f(x), self.f(x + d)
            top = max(gx.top, gy.top)
            fq = max(fq, (gx.truncate(top) - gy.truncate(top)).norm() / step)
            pq = max(pq, abs(math.sqrt(fx) - math.sqrt(fy)) / step)
        return {"M": M, "max_f_prime_quotient": fq, "psi_bound": psi_bound,
                "max_psi_quotient": pq, "ok": fq <= M and pq <= psi_bound}


@dataclass(frozen=True)
class ConeCertificate:
    """Minimum block norm of ``f'`` over the checked blocks of every sample."""

    samples: int
    min_block_norm: float
    per_sample_min: tuple[float, ...]
    threshold: float = 1e-14

    @property
    def ok(self) -> bool:
        return self.min_block_norm > self.threshold

    def to_dict(self) -> dict:
        return {"samples": self.samples, "min_block_norm": self.min_block_norm,
                "threshold": self.threshold, "ok": self.ok,
                "per_sample_min": list(self.per_sample_min)}


def cone_certificate(bs: BlockSum, samples: list[SparseVec], extra: int = 3) -> ConeCertificate:
    """Check that blocks ``1..N(x)+extra`` of ``f'(x)`` are nonzero for each sample."""
    if not samples:
        raise ValueError("need at least one sample")
    mins = []
    for x in samples:
        _, g = bs.f(x)
        mins.append(min(g.block_norm(n) for n in range(1, g.top + extra + 1)))
    return ConeCertificate(len(samples), float(min(mins)), tuple(mins))


# product bumps ---------------------------------------------------------------------------

def _householder_chain(W: np.ndarray) -> list[np.ndarray]:
    """Reflections whose product ``Q`` sends ``span W`` onto the first ``k`` axes."""
    k, m = W.shape
    A = W.T.copy()
    vs = []
    for i in range(k):
        a = A[i:, i]
        alpha = -math.copysign(np.linalg.norm(a), a[0] if a[0] else 1.0)
        v = np.zeros(m)
        v[i:] = a
        v[i] -= alpha
        nv = np.linalg.norm(v)
        if nv == 0.0:
            vs.append(None)
            continue
        v /= nv
        A -= 2.0 * np.outer(v, v @ A)
        vs.append(v)
    return vs


def _reflect(vs, x: np.ndarray, reverse: bool = False) -> np.ndarray:
    for v in (reversed(vs) if reverse else vs):
        if v is not None:
            x = x - 2.0 * v * (v @ x)
    return x


class SubspaceAvoidingBump:
    """``f(y, z) = phi(y) theta(z)`` on ``X = Y + Z`` with ``Z = span W`` and
    ``Y = W^perp``; ``phi`` is a bump on ``Y`` without Rolle points, so the
    ``Y`` part of ``f'`` is nonzero wherever ``f`` is and ``f'`` misses ``W``.

    ``Y`` is identified with l2 by an orthogonal map ``Q`` (a product of
    Householder reflections) and a shift by ``k = dim W``.
    """

    def __init__(self, W_basis: list[SparseVec], phi: NonRolleBump | None = None,
                 z_radius: float = 1.0):
        if not W_basis:
            raise ValueError("W needs at least one vector")
        self.k = len(W_basis)
        self.m = max(w.max_index for w in W_basis) + 1
        W = np.array([w.to_dense(self.m) for w in W_basis])
        if np.linalg.matrix_rank(W) < self.k:
            raise ValueError("the W basis is linearly dependent")
        self.W = W
        self._vs = _householder_chain(W)
        self.phi = phi or NonRolleBump()
        self.z_radius = z_radius
        self.theta = make_theta_even()

    def __repr__(self):
        return f"SubspaceAvoidingBump(dim_W={self.k})"

    def to_coords(self, x: SparseVec) -> tuple[SparseVec, np.ndarray]:
        """``(y in l2, z in R^k)`` for ``x``."""
        xd = x.to_dense(max(self.m, x.max_index + 1))
        qx = np.concatenate([_reflect(self._vs, xd[:self.m]), xd[self.m:]])
        return SparseVec.from_dense(qx[self.k:]), qx[:self.k]

    def from_coords(self, y: SparseVec, z: np.ndarray) -> SparseVec:
        m = max(self.m, y.max_index + 1 + self.k)
        qx = np.concatenate([z, y.to_dense(m - self.k)])
        head = _reflect(self._vs, qx[:self.m], reverse=True)
        return SparseVec.from_dense(np.concatenate([head, qx[self.m:]]))

    def complement_part(self, g: SparseVec) -> SparseVec:
        """Orthogonal projection of a functional onto ``W^perp``."""
        y, _ = self.to_coords(g)
        return self.from_coords(y, np.zeros(self.k))

    def _theta_z(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        r2 = float(z @ z) / self.z_radius ** 2
        th, dth = float(self.theta(r2)), float(self.theta.deriv(r2))
        return th, (2.0 * dth / self.z_radius ** 2) * z

    def __call__(self, x: SparseVec) -> tuple[float, SparseVec]:
        return self.value_and_grad(x)

    def value_and_grad(self, x: SparseVec) -> tuple[float, SparseVec]:
        y, z = self.to_coords(x)
        th, dth = self._theta_z(z)
        if th == 0.0:
            return 0.0, SparseVec()
        ph, dph = self.phi.f_eval(y)
        if ph == 0.0 and dph.nnz == 0:
            return 0.0, SparseVec()
        return ph * th, self.from_coords(th * dph, ph * dth)

    def sample_support(self, n: int, seed: int = 0, t_range=(1.25, 13.0),
                       radius_frac: float = 0.9, z_frac: float = 0.9) -> list[SparseVec]:
        """Points where the bump is nonzero: tube samples in ``Y`` times a ball in ``Z``."""
        rng = np.random.default_rng(seed)
        pts = self.phi.support_points(n, seed=seed, t_range=t_range, radius_frac=radius_frac)
        out = []
        for pt in pts:
            z = rng.standard_normal(self.k)
            z *= self.z_radius * z_frac * rng.uniform() ** (1.0 / self.k) / np.linalg.norm(z)
            out.append(self.from_coords(self.phi.chart.pi(pt), z))
        return out


class TwoFactorBump:
    """``f(x1, x2) = phi(x1) phi(x2)`` for the even/odd splitting of l2.

    Both partial gradients are nonzero wherever ``f`` is, so ``f'`` lies in
    neither ``X1*`` nor ``X2*``.
    """

    def __init__(self, phi: NonRolleBump | None = None):
        self.phi = phi or NonRolleBump()

    def __repr__(self):
        return "TwoFactorBump()"

    @staticmethod
    def split(x: SparseVec) -> tuple[SparseVec, SparseVec]:
        ev = x.indices % 2 == 0
        return (SparseVec(x.indices[ev] // 2, x.values[ev]),
                SparseVec(x.indices[~ev] // 2, x.values[~ev]))

    @staticmethod
    def join(x1: SparseVec, x2: SparseVec) -> SparseVec:
        return SparseVec.combine([(1.0, SparseVec(2 * x1.indices, x1.values)),
                                  (1.0, SparseVec(2 * x2.indices + 1, x2.values))])

    def __call__(self, x: SparseVec) -> tuple[float, SparseVec]:
        return self.value_and_grad(x)

    def value_and_grad(self, x: SparseVec) -> tuple[float, SparseVec]:
        x1, x2 = self.split(x)
        p1, g1 = self.phi.f_eval(x1)
        if p1 == 0.0 and g1.nnz == 0:
            return 0.0, SparseVec()
        p2, g2 = self.phi.f_eval(x2)
        if p2 == 0.0 and g2.nnz == 0:
            return 0.0, SparseVec()
        return p1 * p2, self.join(p2 * g1, p1 * g2)

    def sample_support(self, n: int, seed: int = 0, t_range=(1.25, 13.0),
                       radius_frac: float = 0.9) -> list[SparseVec]:
        a = self.phi.support_points(n, seed=seed, t_range=t_range, radius_frac=radius_frac)
        b = self.phi.support_points(n, seed=seed + 1, t_range=t_range, radius_frac=radius_frac)
        ch = self.phi.chart
        return [self.join(ch.pi(p), ch.pi(q)) for p, q in zip(a, b)]
