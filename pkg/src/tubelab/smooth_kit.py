"""Scalar C-infinity gadgets and a radial bump on a hyperplane.

Everything is assembled from the flat function ``exp(-c/t)`` through the
smoothstep ``sigma(t) = s(t) / (s(t) + s(1 - t))``. The gadgets accept floats
or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import expit

from .seq_space import SparseVec

__all__ = [
    "SmoothFn1D",
    "BumpOnH",
    "smoothstep",
    "smoothstep_deriv",
    "smoothstep_integral",
    "make_theta",
    "make_theta_n",
    "theta_integral",
    "theta_integral_fast",
    "THETA_A",
    "make_mu",
    "make_zeta",
    "make_alpha_ramp",
    "make_blowup_theta",
    "make_theta_supp",
    "make_theta_even",
]

# Sharpness of the smoothstep used for theta. With c = 1 the peak slope of
# sigma is exactly 2, which would put sup|theta'| exactly on the bound 4.
THETA_SHARPNESS = 0.9

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _as_array(t):
    return np.asarray(t, dtype=np.float64)


def _ret(t_in, out):
    return float(out) if np.ndim(t_in) == 0 else out


def smoothstep(t, c: float = 1.0):
    """0 for t <= 0, 1 for t >= 1, C-infinity and increasing in between."""
    t = _as_array(t)
    out = np.where(t >= 1.0, 1.0, 0.0)
    m = (t > 0.0) & (t < 1.0)
    if np.any(m):
        tt = t[m] if t.ndim else t
        val = expit(c * (1.0 / (1.0 - tt) - 1.0 / tt))
        if t.ndim:
            out[m] = val
        else:
            out = val
    return _ret(t, out)


def smoothstep_deriv(t, c: float = 1.0):
    t = _as_array(t)
    out = np.zeros_like(t)
    m = (t > 0.0) & (t < 1.0)
    if np.any(m):
        tt = t[m] if t.ndim else t
        z = c * (1.0 / (1.0 - tt) - 1.0 / tt)
        # expit(z) expit(-z) keeps relative accuracy in both tails
        val = expit(z) * expit(-z) * c * (1.0 / (1.0 - tt) ** 2 + 1.0 / tt ** 2)
        if t.ndim:
            out[m] = val
        else:
            out = val
    return _ret(t, out)


def smoothstep_integral(w, c: float = 1.0):
    """``int_0^w sigma`` for w in [0, 1] (64-node Gauss-Legendre, ~1e-16)."""
    w = _as_array(w)
    wc = np.clip(w, 0.0, 1.0)
    nodes = 0.5 * wc[..., None] * (_GL_X + 1.0)
    vals = smoothstep(nodes.ravel(), c).reshape(nodes.shape)
    out = 0.5 * wc * (vals @ _GL_W)
    out = out + np.maximum(w - 1.0, 0.0)
    return _ret(w, out)


@dataclass(frozen=True)
class SmoothFn1D:
    """A scalar gadget: value, first derivative and (optionally) the integral
    from minus infinity."""

    name: str
    f: Callable
    df: Callable
    antideriv: Callable | None = None
    # interval where the function is not locally constant; used by the checks
    active: tuple[float, float] = (0.0, 1.0)
    params: dict = field(default_factory=dict)

    def __call__(self, t):
        return self.f(t)

    def deriv(self, t):
        return self.df(t)

    def integral(self, t):
        if self.antideriv is None:
            raise NotImplementedError(f"{self.name} has no integral")
        return self.antideriv(t)

    def shifted(self, shift: float, name: str | None = None) -> "SmoothFn1D":
        """``t -> self(t - shift)``."""
        f, df, F = self.f, self.df, self.antideriv
        return SmoothFn1D(
            name or f"{self.name}[{shift:+g}]",
            lambda t: f(_as_array(t) - shift) if np.ndim(t) else f(t - shift),
            lambda t: df(_as_array(t) - shift) if np.ndim(t) else df(t - shift),
            None if F is None else (lambda t: F(_as_array(t) - shift) if np.ndim(t) else F(t - shift)),
            (self.active[0] + shift, self.active[1] + shift),
            dict(self.params, shift=shift),
        )


# theta: the partition gadget for the path of isomorphisms --------------------

def _theta(t, c=THETA_SHARPNESS):
    t = _as_array(t)
    up = smoothstep(2.0 * t + 1.0, c)
    # sigma(1 - u) = 1 - sigma(u), written so the tail keeps relative accuracy
    down = smoothstep(2.0 - 2.0 * t, c)
    out = np.where(t <= 0.5, up, down)
    out = np.where((t <= -0.5) | (t >= 1.0), 0.0, out)
    return _ret(t, out)


def _dtheta(t, c=THETA_SHARPNESS):
    t = _as_array(t)
    up = 2.0 * smoothstep_deriv(2.0 * t + 1.0, c)
    down = -2.0 * smoothstep_deriv(2.0 * t - 1.0, c)
    out = np.where(t <= 0.5, up, down)
    out = np.where((t <= -0.5) | (t >= 1.0), 0.0, out)
    return _ret(t, out)


def _theta_antideriv(t, c=THETA_SHARPNESS):
    # piecewise bookkeeping; property (iv) makes the tail integrals mirror
    t = _as_array(t)
    rise = 0.5 * smoothstep_integral(np.clip(2.0 * t + 1.0, 0.0, 1.0), c)
    a = 0.5 * smoothstep_integral(1.0, c)
    flat = a + np.clip(t, 0.0, 0.5)
    fall = (a + 0.5 + (np.clip(t, 0.5, 1.0) - 0.5)
            - 0.5 * smoothstep_integral(np.clip(2.0 * t - 1.0, 0.0, 1.0), c))
    out = np.where(t <= 0.0, rise, np.where(t <= 0.5, flat, fall))
    out = np.where(t <= -0.5, 0.0, out)
    return _ret(t, out)


def make_theta() -> SmoothFn1D:
    """theta: 0 off (-1/2, 1), 1 on [0, 1/2], rising on (-1/2, 0),
    theta(t) = 1 - theta(t - 1) on [1/2, 1], sup|theta'| = 3.6."""
    return SmoothFn1D("theta", _theta, _dtheta, _theta_antideriv, (-0.5, 1.0),
                      {"sharpness": THETA_SHARPNESS})


def make_theta_n(n: int) -> SmoothFn1D:
    if n < 1:
        raise ValueError("n must be >= 1")
    return make_theta().shifted(n - 1, name=f"theta_{n}")


def theta_integral_fast(t):
    """``int_{-inf}^t theta`` from the piecewise bookkeeping and fixed
    Gauss-Legendre nodes; vectorised, used on hot paths."""
    return _theta_antideriv(t)


THETA_A = float(_theta_antideriv(0.0))


def theta_integral(t: float, epsabs: float = 1e-10) -> float:
    """``int_{-inf}^t theta`` by adaptive Gauss-Kronrod (QUADPACK)."""
    if t <= -0.5:
        return 0.0
    pts = [p for p in (0.0, 0.5) if -0.5 < p < min(t, 1.0)]
    val, _ = quad(lambda s: _theta(s), -0.5, min(t, 1.0), points=pts or None,
                  epsabs=epsabs, epsrel=1e-12, limit=200)
    return float(val)


# mu: the slowly rising factor along the tube ----------------------------------

_MU_C = 0.9


@dataclass(frozen=True)
class _MuParts:
    head: float  # int_0^1 sigma(w) / (1 + w^2) dw
    norm: float


def _mu_parts() -> _MuParts:
    head = 0.5 * float(np.sum(_GL_W * smoothstep(0.5 * (_GL_X + 1.0), _MU_C)
                              / (1.0 + (0.5 * (_GL_X + 1.0)) ** 2)))
    # mu(inf) = (head + pi/4) / norm, kept strictly below 1
    return _MuParts(head, np.pi / 2.0)


_MU = _mu_parts()


def _mu(t):
    t = _as_array(t)
    u = t - 1.0
    uc = np.clip(u, 0.0, 1.0)
    nodes = 0.5 * uc[..., None] * (_GL_X + 1.0)
    integrand = smoothstep(nodes.ravel(), _MU_C).reshape(nodes.shape) / (1.0 + nodes ** 2)
    head = 0.5 * uc * (integrand @ _GL_W)
    tail = np.where(u > 1.0, np.arctan(np.maximum(u, 1.0)) - np.pi / 4.0, 0.0)
    out = np.where(u <= 0.0, 0.0, (head + tail) / _MU.norm)
    return _ret(t, out)


def _dmu(t):
    t = _as_array(t)
    u = t - 1.0
    out = smoothstep(u, _MU_C) / (1.0 + u * u) / _MU.norm
    out = np.where(u <= 0.0, 0.0, out)
    return _ret(t, out)


def make_mu() -> SmoothFn1D:
    """mu: 0 on (-inf, 1]; 0 < mu < 1 and 0 < mu' < 1 on (1, inf); mu' -> 0."""
    return SmoothFn1D("mu", _mu, _dmu, None, (1.0, 60.0))


def make_zeta() -> SmoothFn1D:
    """zeta: nondecreasing, 0 for t <= 1/4, 1 for t >= 3/4."""
    return SmoothFn1D(
        "zeta",
        lambda t: smoothstep(2.0 * _as_array(t) - 0.5) if np.ndim(t) else smoothstep(2.0 * t - 0.5),
        lambda t: 2.0 * smoothstep_deriv(2.0 * _as_array(t) - 0.5) if np.ndim(t)
        else 2.0 * smoothstep_deriv(2.0 * t - 0.5),
        None, (0.25, 0.75))


def _alpha(t):
    t = _as_array(t)
    safe = np.where(t > 0.0, t, 1.0)
    out = np.where(t > 0.0, np.exp(-1.0 / safe), 0.0)
    return _ret(t, out)


def _dalpha(t):
    t = _as_array(t)
    safe = np.where(t > 0.0, t, 1.0)
    out = np.where(t > 0.0, np.exp(-1.0 / safe) / safe ** 2, 0.0)
    return _ret(t, out)


def make_alpha_ramp() -> SmoothFn1D:
    """alpha(t) = exp(-1/t) for t > 0, else 0: values in [0, 1), alpha' > 0 on t > 0."""
    return SmoothFn1D("alpha_ramp", _alpha, _dalpha, None, (0.0, 1.0))


# blow-up theta for the planar band map ------------------------------------------

def _check_blowup_domain(t):
    if np.any(_as_array(t) <= 0.5):
        raise ValueError("theta_blowup is defined only for t > 1/2")


def _blowup(t):
    _check_blowup_domain(t)
    t = _as_array(t)
    out = smoothstep(2.0 * (1.0 - t)) / (t - 0.5)
    return _ret(t, out)


def _dblowup(t):
    _check_blowup_domain(t)
    t = _as_array(t)
    s = smoothstep(2.0 * (1.0 - t))
    ds = -2.0 * smoothstep_deriv(2.0 * (1.0 - t))
    out = ds / (t - 0.5) - s / (t - 0.5) ** 2
    return _ret(t, out)


def make_blowup_theta() -> SmoothFn1D:
    """On (1/2, inf): sigma(2(1 - t)) / (t - 1/2). Zero on [1, inf), strictly
    decreasing on (1/2, 1), diverging like 1/(t - 1/2) at 1/2."""
    # the checked window stops short of the pole, where difference quotients
    # with a fixed step lose meaning
    return SmoothFn1D("theta_blowup", _blowup, _dblowup, None, (0.625, 1.25))


# even bump with support exactly [-1, 1] ------------------------------------------

def _supp(t):
    t = _as_array(t)
    out = smoothstep(1.0 - np.abs(t))
    return _ret(t, out)


def _dsupp(t):
    t = _as_array(t)
    out = -np.sign(t) * smoothstep_deriv(np.abs(t))
    return _ret(t, out)


def make_theta_supp() -> SmoothFn1D:
    """1 - sigma(|t|) = sigma(1 - |t|): even, 1 at 0, positive on (-1, 1), zero outside,
    strictly decreasing on (0, 1); also satisfies theta(t-1) = 1 - theta(t)
    on [0, 1]."""
    return SmoothFn1D("theta_supp", _supp, _dsupp, None, (-1.0, 1.0))


# radial bump on the hyperplane H = z^perp -------------------------------------------

@dataclass(frozen=True)
class BumpOnH:
    """``phi(x) = sigma(1 - |x - center|^2 / radius^2)`` on ``H = {x : <x, normal> = 0}``.

    Positive exactly on the open ball of the given radius, 1 at the center,
    flat at the boundary sphere. ``normal=None`` means the whole space.
    """

    radius: float
    center: SparseVec = field(default_factory=SparseVec)
    normal: SparseVec | None = None
    tol: float = 1e-9

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def _check(self, x: SparseVec):
        if self.normal is not None and abs(self.normal.dot(x)) > self.tol * (1.0 + x.norm()):
            raise ValueError("point is not in the hyperplane H")

    def profile(self, r2: float) -> tuple[float, float]:
        """Value and d/d(r^2) of the radial profile."""
        w = 1.0 - r2 / self.radius ** 2
        return smoothstep(w), -smoothstep_deriv(w) / self.radius ** 2

    def value(self, x: SparseVec) -> float:
        self._check(x)
        return self.profile((x - self.center).norm2())[0]

    __call__ = value

    def value_and_grad(self, x: SparseVec) -> tuple[float, SparseVec]:
        self._check(x)
        d = x - self.center
        val, dval = self.profile(d.norm2())
        return val, (2.0 * dval) * d

    @cached_property
    def lipschitz(self) -> float:
        """Sup of |grad phi| = sup_r 2 r sigma'(1 - r^2/R^2) / R^2 (grid estimate)."""
        r = np.linspace(0.0, self.radius, 20001)
        return float(np.max(2.0 * r * smoothstep_deriv(1.0 - r ** 2 / self.radius ** 2))
                     / self.radius ** 2)


def _even(t):
    t = _as_array(t)
    w = 1.0 - t * t
    inside = w > 0
    out = np.zeros_like(t)
    out[inside] = np.exp(1.0 - 1.0 / w[inside])
    return _ret(t, out)


def _deven(t):
    t = _as_array(t)
    w = 1.0 - t * t
    inside = w > 0
    out = np.zeros_like(t)
    wi = w[inside]
    out[inside] = -2.0 * t[inside] / wi ** 2 * np.exp(1.0 - 1.0 / wi)
    return _ret(t, out)


def make_theta_even() -> SmoothFn1D:
    """exp(1 - 1/(1 - t^2)) on (-1, 1), zero outside.

    Same qualitative shape as ``make_theta_supp`` but only quadratically flat
    at 0, so the slope near 0 stays representable in floating point.
    """
    return SmoothFn1D("theta_even", _even, _deven, None, (-1.0, 1.0))
