"""Smooth weights V supported in [1, 2] and their integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import expit

MAX_ORDER = 4

# sup |S^(i)| for the smooth step S below, i = 0..4, rounded up.  For D >= 2
# the two transitions of the plateau never overlap, so |V^(i)| <= C_i D^i
# with the same constants.
DERIVATIVE_CONSTANTS = (1.0, 2.05, 10.0, 115.0, 2400.0)


class UnsupportedOrder(ValueError):
    pass


@dataclass(frozen=True)
class BumpFunction:
    """V on ``support`` (a sub-interval of [1, 2]).

    plain_bump: exp(-1/((u-1)(2-u))) with u the affine image of x in [1, 2].
    plateau:    S(delta (u-1)) S(delta (2-u)), equal to 1 on [1+1/delta, 2-1/delta].
    """

    kind: str = "plain_bump"
    delta: float = 2.0
    normalization: float = 1.0
    support: tuple[float, float] = (1.0, 2.0)

    def __post_init__(self):
        if self.kind not in ("plain_bump", "plateau"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if not self.delta >= 2:
            raise ValueError("plateau scale delta must be >= 2")
        lo, hi = self.support
        if not 1.0 <= lo < hi <= 2.0:
            raise ValueError("support must be a sub-interval of [1, 2]")

    def scaled(self, factor: float) -> "BumpFunction":
        return BumpFunction(self.kind, self.delta, self.normalization * factor, self.support)

    def __call__(self, x, i: int = 0):
        return eval_V(self, x, i)


PLAIN = BumpFunction()


def _step(y: np.ndarray, i: int) -> np.ndarray:
    """S(y) = B(y)/(B(y) + B(1-y)), B(y) = e^{-1/y} [y > 0], and S', S''."""
    out = np.zeros_like(y) if i else (y >= 1).astype(np.float64)
    m = (y > 0) & (y < 1)
    if not m.any():
        return out
    ym = y[m]
    # S = 1/(1 + e^g), g = 1/y - 1/(1-y)
    g = 1 / ym - 1 / (1 - ym)
    s = expit(-g)
    if i == 0:
        out[m] = s
        return out
    s1 = s * expit(g)  # S (1 - S)
    g1 = -1 / ym**2 - 1 / (1 - ym) ** 2
    if i == 1:
        out[m] = -s1 * g1
        return out
    g2 = 2 / ym**3 - 2 / (1 - ym) ** 3
    out[m] = s1 * (1 - 2 * s) * g1 * g1 - s1 * g2
    return out


def _plain(u: np.ndarray, i: int) -> np.ndarray:
    out = np.zeros_like(u)
    m = (u > 1) & (u < 2)
    if not m.any():
        return out
    um = u[m]
    p = (um - 1) * (2 - um)
    v = np.exp(-1 / p)
    if i == 0:
        out[m] = v
        return out
    p1 = 3 - 2 * um
    f1 = p1 / p**2
    if i == 1:
        out[m] = v * f1
        return out
    f2 = -2 / p**2 - 2 * p1 * p1 / p**3
    out[m] = v * (f2 + f1 * f1)
    return out


def _closed_form(V: BumpFunction, u: np.ndarray, i: int) -> np.ndarray:
    if V.kind == "plain_bump":
        return _plain(u, i)
    d = V.delta
    a, b = d * (u - 1), d * (2 - u)
    if i == 0:
        return _step(a, 0) * _step(b, 0)
    if i == 1:
        return d * (_step(a, 1) * _step(b, 0) - _step(a, 0) * _step(b, 1))
    return d * d * (
        _step(a, 2) * _step(b, 0) - 2 * _step(a, 1) * _step(b, 1) + _step(a, 0) * _step(b, 2)
    )


def _richardson(f, u: np.ndarray, h: float, second: bool) -> np.ndarray:
    def diff(h):
        if second:
            return (f(u + h) - 2 * f(u) + f(u - h)) / (h * h)
        return (f(u + h) - f(u - h)) / (2 * h)

    # error expansion in h^2: two Richardson levels
    d1, d2, d3 = diff(h), diff(h / 2), diff(h / 4)
    r1, r2 = (4 * d2 - d1) / 3, (4 * d3 - d2) / 3
    return (16 * r2 - r1) / 15


def eval_V(V: BumpFunction, x, i: int = 0):
    """i-th derivative of V at x (scalar or array); 0 outside the support."""
    if not 0 <= i <= MAX_ORDER or int(i) != i:
        raise UnsupportedOrder(f"derivative order {i} not supported (0..{MAX_ORDER})")
    xs = np.asarray(x, dtype=np.float64)
    lo, hi = V.support
    scale = 1.0 / (hi - lo)
    u = 1.0 + (np.atleast_1d(xs) - lo) * scale
    if i <= 2:
        val = _closed_form(V, u, i)
    else:
        # differences of the closed-form V'' on a step well below 1/delta
        h = 0.02 / (V.delta if V.kind == "plateau" else 4.0)
        val = _richardson(lambda z: _closed_form(V, z, 2), u, h, second=(i == 4))
        val[(u <= 1) | (u >= 2)] = 0.0
    val = V.normalization * scale**i * val
    return float(val[0]) if xs.ndim == 0 else val


def _breakpoints(V: BumpFunction) -> list[float]:
    lo, hi = V.support
    if V.kind != "plateau":
        return [lo + 0.5 * (hi - lo)]
    w = (hi - lo) / V.delta
    return [lo + w, hi - w]


def _quad(f, V: BumpFunction, weight=None, wvar=None) -> float:
    lo, hi = V.support
    kw = dict(epsabs=1e-14, epsrel=1e-13, limit=400)
    if weight is None:
        val, _ = integrate.quad(f, lo, hi, points=_breakpoints(V), **kw)
    else:
        val, _ = integrate.quad(f, lo, hi, weight=weight, wvar=wvar, **kw)
    return val


def integral_c(V: BumpFunction) -> float:
    """c = int V."""
    return _quad(lambda x: eval_V(V, x), V)


def log_weighted_integral(V: BumpFunction) -> complex:
    """int V(xi) [i pi/4 + log(xi / 2 pi)/2] d xi."""
    c = integral_c(V)
    re = _quad(lambda x: eval_V(V, x) * 0.5 * math.log(x / (2 * math.pi)), V)
    return complex(re, 0.25 * math.pi * c)


def mellin_V(V: BumpFunction, s: complex) -> complex:
    """int_0^inf V(x) x^{s-1} dx.

    Written as int V(e^y) e^{sigma y} e^{i tau y} dy so the oscillation goes
    to QUADPACK's Fourier weights.
    """
    s = complex(s)
    lo, hi = V.support
    ylo, yhi = math.log(lo), math.log(hi)
    sig, tau = s.real, s.imag

    def f(y):
        return eval_V(V, math.exp(y)) * math.exp(sig * y)

    if tau == 0:
        val, _ = integrate.quad(f, ylo, yhi, epsabs=1e-14, epsrel=1e-13, limit=400)
        return complex(val, 0.0)
    kw = dict(epsabs=1e-15, epsrel=1e-12, limit=400)
    re, _ = integrate.quad(f, ylo, yhi, weight="cos", wvar=tau, **kw)
    im, _ = integrate.quad(f, ylo, yhi, weight="sin", wvar=tau, **kw)
    return complex(re, im)


def check_delta(V: BumpFunction, T: float) -> bool:
    """True if the plateau scale respects delta <= sqrt(T)/log T."""
    return V.kind != "plateau" or V.delta <= math.sqrt(T) / math.log(T)
