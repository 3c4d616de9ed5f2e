"""Finitely supported vectors in l2 and identity-plus-finite-rank operators.

Every object here is immutable. A :class:`SparseVec` doubles as a bounded
linear functional through the inner product, so ``f(x)`` for a functional
``f`` is written ``f.dot(x)``.
"""

from __future__ import annotations

import json
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SparseVec",
    "FiniteRankOp",
    "RankPerturbOp",
    "NormEstimate",
    "inner",
    "apply",
    "basis",
    "operator_norm_estimate",
]

_EMPTY_I = np.zeros(0, dtype=np.int64)
_EMPTY_F = np.zeros(0, dtype=np.float64)

DEFAULT_ATOL = 1e-12
DEFAULT_RTOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class SparseVec:
    """Real vector in l2 with finitely many nonzero coordinates.

    Indices are stored strictly increasing and exact zeros are dropped, so two
    vectors with the same coordinates have identical storage.
    """

    __slots__ = ("indices", "values")

    def __init__(self, indices=None, values=None, *, _trusted: bool = False):
        if indices is None:
            idx, val = _EMPTY_I, _EMPTY_F
        elif _trusted:
            idx, val = indices, values
        else:
            idx = np.asarray(indices, dtype=np.int64).ravel()
            val = np.asarray(values, dtype=np.float64).ravel()
            if idx.shape != val.shape:
                raise ValueError("indices and values must have the same length")
            if idx.size and idx.min() < 0:
                raise ValueError("indices must be nonnegative")
            if idx.size:
                # merge duplicates, sort
                idx, inv = np.unique(idx, return_inverse=True)
                val = np.bincount(inv, weights=val, minlength=idx.size)
            if not np.all(np.isfinite(val)):
                raise ValueError("coefficients must be finite")
        keep = val != 0.0
        if not keep.all():
            idx, val = idx[keep], val[keep]
        object.__setattr__(self, "indices", _frozen(np.array(idx, dtype=np.int64)))
        object.__setattr__(self, "values", _frozen(np.array(val, dtype=np.float64)))

    def __setattr__(self, name, value):
        raise AttributeError("SparseVec is immutable")

    # construction -----------------------------------------------------------

    @classmethod
    def zero(cls) -> "SparseVec":
        return cls()

    @classmethod
    def basis(cls, n: int, coeff: float = 1.0) -> "SparseVec":
        return cls([n], [coeff])

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "SparseVec":
        pairs = list(pairs)
        if not pairs:
            return cls()
        idx, val = zip(*pairs)
        return cls(idx, val)

    @classmethod
    def from_dense(cls, arr, offset: int = 0) -> "SparseVec":
        arr = np.asarray(arr, dtype=np.float64).ravel()
        nz = np.flatnonzero(arr)
        return cls(nz + offset, arr[nz])

    @classmethod
    def from_dense_on(cls, indices, arr) -> "SparseVec":
        """Inverse of :meth:`to_dense_on` for an explicit index set."""
        return cls(indices, arr)

    @classmethod
    def combine(cls, terms: Iterable[tuple[float, "SparseVec"]]) -> "SparseVec":
        """Linear combination ``sum(c * v for c, v in terms)`` in one pass."""
        idx_parts, val_parts = [], []
        for c, v in terms:
            if c == 0.0 or not v.indices.size:
                continue
            idx_parts.append(v.indices)
            val_parts.append(c * v.values)
        if not idx_parts:
            return cls()
        if len(idx_parts) == 1:
            return cls(idx_parts[0], val_parts[0], _trusted=True)
        idx = np.concatenate(idx_parts)
        val = np.concatenate(val_parts)
        uidx, inv = np.unique(idx, return_inverse=True)
        return cls(uidx, np.bincount(inv, weights=val, minlength=uidx.size), _trusted=True)

    # serialization ----------------------------------------------------------

    def to_pairs(self) -> list[list]:
        return [[int(i), float(c)] for i, c in zip(self.indices, self.values)]

    def to_json(self) -> str:
        return json.dumps([[int(i), float(repr_float(c))] for i, c in zip(self.indices, self.values)])

    @classmethod
    def from_json(cls, text: str) -> "SparseVec":
        data = json.loads(text) if isinstance(text, str) else text
        if not isinstance(data, list):
            raise ValueError("expected a JSON array of [index, coeff] pairs")
        for pair in data:
            if not (isinstance(pair, list) and len(pair) == 2):
                raise ValueError(f"malformed pair {pair!r}")
        idx = [int(p[0]) for p in data]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly ascending")
        return cls.from_pairs(data)

    # queries ----------------------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    @property
    def max_index(self) -> int:
        """Largest stored index, or -1 for the zero vector."""
        return int(self.indices[-1]) if self.indices.size else -1

    def __getitem__(self, n: int) -> float:
        k = np.searchsorted(self.indices, n)
        if k < self.indices.size and self.indices[k] == n:
            return float(self.values[k])
        return 0.0

    def to_dense(self, size: int | None = None) -> np.ndarray:
        size = self.max_index + 1 if size is None else size
        out = np.zeros(size)
        m = self.indices < size
        out[self.indices[m]] = self.values[m]
        return out

    def to_dense_on(self, indices: np.ndarray) -> np.ndarray:
        """Coordinates at the (sorted) ``indices``; everything else is dropped."""
        out = np.zeros(len(indices))
        if not self.indices.size:
            return out
        common, ia, ib = np.intersect1d(indices, self.indices, assume_unique=True,
                                        return_indices=True)
        out[ia] = self.values[ib]
        return out

    def norm2(self) -> float:
        return float(self.values @ self.values)

    def norm(self) -> float:
        n = float(np.sqrt(self.values @ self.values))
        if 0.0 < n < 1e-150 or n == 0.0 and self.values.size:
            # rescale so tiny entries do not underflow when squared
            m = float(np.max(np.abs(self.values)))
            n = m * float(np.sqrt(np.sum((self.values / m) ** 2))) if m else 0.0
        return n

    def dot(self, other: "SparseVec") -> float:
        if not self.indices.size or not other.indices.size:
            return 0.0
        _, ia, ib = np.intersect1d(self.indices, other.indices, assume_unique=True,
                                   return_indices=True)
        return float(self.values[ia] @ other.values[ib])

    __call__ = dot

    def map_indices(self, fn) -> "SparseVec":
        """Relabel coordinates through an injective index map."""
        return SparseVec(np.asarray([fn(int(i)) for i in self.indices], dtype=np.int64),
                         self.values)

    def select(self, mask_fn) -> "SparseVec":
        keep = np.asarray([bool(mask_fn(int(i))) for i in self.indices], dtype=bool)
        return SparseVec(self.indices[keep], self.values[keep], _trusted=True)

    def allclose(self, other: "SparseVec", atol: float = DEFAULT_ATOL,
                 rtol: float = DEFAULT_RTOL) -> bool:
        return (self - other).norm() <= atol + rtol * other.norm()

    # arithmetic -------------------------------------------------------------

    def __add__(self, other: "SparseVec") -> "SparseVec":
        if not isinstance(other, SparseVec):
            return NotImplemented
        return SparseVec.combine(((1.0, self), (1.0, other)))

    def __sub__(self, other: "SparseVec") -> "SparseVec":
        if not isinstance(other, SparseVec):
            return NotImplemented
        return SparseVec.combine(((1.0, self), (-1.0, other)))

    def __neg__(self) -> "SparseVec":
        return SparseVec(self.indices, -self.values, _trusted=True)

    def __mul__(self, c) -> "SparseVec":
        c = float(c)
        if c == 0.0:
            return SparseVec()
        return SparseVec(self.indices, c * self.values, _trusted=True)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "SparseVec":
        return self * (1.0 / float(c))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVec):
            return NotImplemented
        return (np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self) -> str:
        body = ", ".join(f"{int(i)}: {c:.6g}" for i, c in zip(self.indices, self.values))
        return f"SparseVec({{{body}}})"


def repr_float(x: float) -> float:
    """Round-trip a float through 17 significant digits."""
    return float(f"{float(x):.17g}")


def basis(n: int) -> SparseVec:
    return SparseVec.basis(n)


def inner(a: SparseVec, b: SparseVec) -> float:
    return a.dot(b)


class FiniteRankOp:
    """Operator ``x -> scale*x + sum_i <functional_i, x> vector_i`` on l2.

    Closed under composition, sums and adjoints, so Jacobians of every map in
    the package can be carried exactly in this form.
    """

    __slots__ = ("scale", "terms", "inverse")

    def __init__(self, scale: float = 1.0, terms=(), inverse: "FiniteRankOp | None" = None):
        kept = tuple((f, v) for f, v in terms if f.nnz and v.nnz)
        object.__setattr__(self, "scale", float(scale))
        object.__setattr__(self, "terms", kept)
        object.__setattr__(self, "inverse", inverse)

    def __setattr__(self, name, value):
        raise AttributeError("operators are immutable")

    @classmethod
    def identity(cls) -> "FiniteRankOp":
        return cls(1.0, ())

    def __call__(self, x: SparseVec) -> SparseVec:
        return self.apply(x)

    def apply(self, x: SparseVec) -> SparseVec:
        parts = [(self.scale, x)]
        parts.extend((f.dot(x), v) for f, v in self.terms)
        return SparseVec.combine(parts)

    def pullback(self, phi: SparseVec) -> SparseVec:
        """The functional ``phi o self``, i.e. the adjoint applied to ``phi``."""
        parts = [(self.scale, phi)]
        parts.extend((phi.dot(v), f) for f, v in self.terms)
        return SparseVec.combine(parts)

    def adjoint(self) -> "FiniteRankOp":
        return FiniteRankOp(self.scale, tuple((v, f) for f, v in self.terms))

    def compose(self, other: "FiniteRankOp") -> "FiniteRankOp":
        """``self o other``."""
        terms = [(f, self.scale * v) for f, v in other.terms]
        terms.extend((other.pullback(f), v) for f, v in self.terms)
        return FiniteRankOp(self.scale * other.scale, terms)

    __matmul__ = compose

    def __add__(self, other: "FiniteRankOp") -> "FiniteRankOp":
        return FiniteRankOp(self.scale + other.scale, self.terms + other.terms)

    def __sub__(self, other: "FiniteRankOp") -> "FiniteRankOp":
        return self + (-1.0) * other

    def __mul__(self, c) -> "FiniteRankOp":
        c = float(c)
        return FiniteRankOp(c * self.scale, tuple((f, c * v) for f, v in self.terms))

    __rmul__ = __mul__

    @classmethod
    def outer(cls, functional: SparseVec, vector: SparseVec) -> "FiniteRankOp":
        return cls(0.0, ((functional, vector),))

    def support(self) -> np.ndarray:
        parts = [_EMPTY_I]
        for f, v in self.terms:
            parts.extend((f.indices, v.indices))
        return np.unique(np.concatenate(parts))

    def to_dense_on(self, indices: np.ndarray) -> np.ndarray:
        """Matrix of the operator restricted to coordinates ``indices``."""
        n = len(indices)
        m = self.scale * np.eye(n)
        for f, v in self.terms:
            m += np.outer(v.to_dense_on(indices), f.to_dense_on(indices))
        return m

    def norm(self) -> float:
        """Exact operator norm.

        Off the support of the terms the operator is ``scale * I``, and the
        support span is invariant, so the norm is the larger of the two pieces.
        """
        idx = self.support()
        if not idx.size:
            return abs(self.scale)
        s = np.linalg.norm(self.to_dense_on(idx), 2)
        return float(max(s, abs(self.scale)))

    @property
    def rank(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(scale={self.scale:g}, rank={self.rank})"


class RankPerturbOp(FiniteRankOp):
    """Identity plus at most two rank-one terms, with an optional stored inverse."""

    __slots__ = ()

    MAX_TERMS = 2

    def __init__(self, terms=(), inverse: FiniteRankOp | None = None):
        super().__init__(1.0, terms, inverse)
        if len(self.terms) > self.MAX_TERMS:
            raise ValueError(f"at most {self.MAX_TERMS} rank-one terms allowed")


def apply(op: FiniteRankOp, x: SparseVec) -> SparseVec:
    return op.apply(x)


class NormEstimate(tuple):
    """``(lower_bound, exact)``: sampled lower bound and the exact norm."""

    __slots__ = ()

    def __new__(cls, lower_bound: float, exact: float):
        return super().__new__(cls, (lower_bound, exact))

    @property
    def lower_bound(self) -> float:
        return self[0]

    @property
    def exact(self) -> float:
        return self[1]


def operator_norm_estimate(op: FiniteRankOp, trials: int, seed: int,
                           extra: int = 4) -> NormEstimate:
    """Sampled lower bound on ``||op||`` plus the exact value.

    Random unit vectors are drawn on the term support together with ``extra``
    coordinates outside it.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    supp = op.support()
    start = int(supp[-1]) + 1 if supp.size else 0
    idx = np.concatenate([supp, np.arange(start, start + extra)])
    mat = op.to_dense_on(idx)
    x = rng.standard_normal((trials, idx.size))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    lower = float(np.max(np.linalg.norm(x @ mat.T, axis=1)))
    return NormEstimate(lower, op.norm())
