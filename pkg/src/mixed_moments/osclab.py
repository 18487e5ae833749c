"""Oscillatory integrals int w(xi) e^{i h(xi)} d xi: direct values, decay and stationary phase."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace

import numpy as np

from .quadrature import gauss_legendre_on, pairwise_sum
from .weights import DERIVATIVE_CONSTANTS, BumpFunction, eval_V

PHASE_KINDS = ("linear", "quadratic", "loglinear")
NODES = 16
MAX_PANELS = 2_000_000
NOISE_FLOOR = 1e-14


class ResolutionError(RuntimeError):
    pass


class NoStationaryPoint(ValueError):
    pass


class BoundaryStationaryPoint(ValueError):
    pass


class ProblemParseError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseProblem:
    """w(xi) = V((xi - shift)/Z) on [Z + shift, 2Z + shift], h(xi) = h0(xi - shift).

    linear:    h0 = lam xi
    quadratic: h0 = lam (xi - xi0)^2
    loglinear: h0 = lam xi (log(xi/xi0) - 1), so h0' = lam log(xi/xi0)
    """

    kind: str = "linear"
    lam: float = 100.0
    xi0: float | None = None
    weight: BumpFunction = BumpFunction()
    Z: float = 1.0
    shift: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in PHASE_KINDS:
            raise ValueError(f"unknown phase kind {self.kind!r}")
        if not self.Z > 0:
            raise ValueError("Z must be positive")
        if self.kind != "linear":
            if self.xi0 is None:
                raise ValueError(f"{self.kind} phase needs xi0")
            if self.kind == "loglinear" and not self.xi0 > 0:
                raise ValueError("loglinear phase needs xi0 > 0")

    @property
    def X(self) -> float:
        return self.weight.delta if self.weight.kind == "plateau" else 1.0

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.weight.support
        return self.Z * lo + self.shift, self.Z * hi + self.shift

    @property
    def Y(self) -> float:
        """Size of h on the support scale: Z max|h'|."""
        return self.Z * self.max_speed()

    def w(self, xi, j: int = 0):
        return eval_V(self.weight, (np.asarray(xi) - self.shift) / self.Z, j) / self.Z**j

    def h(self, xi, j: int = 0):
        x = np.asarray(xi, dtype=np.float64) - self.shift
        lam = self.lam
        if self.kind == "linear":
            return (lam * x, np.full_like(x, lam), np.zeros_like(x), np.zeros_like(x))[j]
        if self.kind == "quadratic":
            d = x - self.xi0
            return (lam * d * d, 2 * lam * d, np.full_like(x, 2 * lam), np.zeros_like(x))[j]
        if j == 0:
            return lam * x * (np.log(x / self.xi0) - 1)
        if j == 1:
            return lam * np.log(x / self.xi0)
        return lam / x if j == 2 else -lam / (x * x)

    def max_speed(self) -> float:
        a, b = self.support
        return float(max(abs(self.h(a, 1)), abs(self.h(b, 1)), abs(self.lam) * 1e-300))

    def with_lam(self, lam: float) -> "PhaseProblem":
        return replace(self, lam=lam)


@dataclass(frozen=True)
class IntegralValue:
    value: complex
    error_estimate: float
    panels: int


def _panel_rule(p: PhaseProblem, panels: int, conj: bool) -> complex:
    a, b = p.support
    nodes, wts = gauss_legendre_on(np.linspace(a, b, panels + 1), NODES)
    ph = p.h(nodes)
    vals = p.w(nodes) * np.exp((-1j if conj else 1j) * ph) * wts
    return complex(pairwise_sum(vals.reshape(panels, NODES).sum(axis=1).tolist()))


def direct_oscillatory_integral(p: PhaseProblem, tol: float = 1e-13, conj: bool = False) -> IntegralValue:
    """int w e^{ih}, panels no wider than 2 pi Z / (8 Y), refined by halving."""
    a, b = p.support
    width = 2 * math.pi * p.Z / (8 * max(p.Y, 1e-300))
    # the weight itself varies on the scale Z/X
    width = min(width, p.Z / (4 * p.X))
    panels = max(4, math.ceil((b - a) / width))
    if panels > MAX_PANELS:
        raise ResolutionError(f"{panels} panels needed, budget is {MAX_PANELS}")
    scale = b - a
    prev = _panel_rule(p, panels, conj)
    for _ in range(6):
        if 2 * panels > MAX_PANELS:
            break
        panels *= 2
        cur = _panel_rule(p, panels, conj)
        err = abs(cur - prev)
        if err <= tol * max(scale, abs(cur)):
            return IntegralValue(cur, err, panels)
        prev = cur
    raise ResolutionError(f"no convergence after halving to {panels} panels")


# ---------------------------------------------------------------------------
# non-stationary decay


@dataclass(frozen=True)
class DecayCertificate:
    slope: float
    underflow: bool
    ratios: tuple[float, ...]
    magnitudes: tuple[float, ...]

    def passes(self, bound: float) -> bool:
        return self.underflow or self.slope <= bound


def decay_certificate(p: PhaseProblem, multipliers=(1, 2, 4, 8)) -> DecayCertificate:
    """Slope of log|I| against log(Y/X) as lam runs over lam0 * multipliers."""
    ratios, mags = [], []
    for k in multipliers:
        q = p.with_lam(p.lam * k)
        a, b = q.support
        xs = np.linspace(a, b, 2001)
        hmin = float(np.min(np.abs(q.h(xs, 1))))
        if hmin < q.Y / (2 * q.Z):
            raise ValueError("decay regime needs min |h'| >= Y/(2Z) on the support")
        ratios.append(q.Y / q.X)
        mags.append(abs(direct_oscillatory_integral(q).value))
    above = [(r, m) for r, m in zip(ratios, mags) if m >= NOISE_FLOOR]
    if len(above) < 2:
        return DecayCertificate(float("-inf"), True, tuple(ratios), tuple(mags))
    x = np.log([r for r, _ in above])
    y = np.log([m for _, m in above])
    slope = float(np.polyfit(x, y, 1)[0])
    return DecayCertificate(slope, len(above) < len(mags), tuple(ratios), tuple(mags))


# ---------------------------------------------------------------------------
# stationary phase


@dataclass(frozen=True)
class StationaryTerm:
    value: complex
    xi0: float


def locate_stationary_point(p: PhaseProblem, max_iter: int = 200) -> float:
    a, b = p.support
    fa, fb = float(p.h(a, 1)), float(p.h(b, 1))
    if fa == 0:
        return a
    if fb == 0:
        return b
    if fa * fb > 0:
        raise NoStationaryPoint("h' has one sign on the support")
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        fm = float(p.h(m, 1))
        if fm == 0 or (b - a) <= 1e-12 * abs(m):
            return m
        if fa * fm < 0:
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def stationary_leading_term(p: PhaseProblem) -> StationaryTerm:
    """sqrt(2 pi) e^{i h(xi0) + i pi/4} w(xi0) / sqrt(h''(xi0)); h'' < 0 by conjugation."""
    xi0 = locate_stationary_point(p)
    a, b = p.support
    if min(xi0 - a, b - xi0) < 1e-3 * p.Z:
        raise BoundaryStationaryPoint(f"stationary point {xi0} is at the support edge")
    h2 = float(p.h(xi0, 2))
    if h2 == 0:
        raise NoStationaryPoint("degenerate stationary point")
    sign = 1.0 if h2 > 0 else -1.0
    # for h'' < 0 the integral is conj of the one with phase -h
    val = math.sqrt(2 * math.pi) * np.exp(1j * (sign * float(p.h(xi0)) + math.pi / 4))
    val *= float(p.w(xi0)) / math.sqrt(abs(h2))
    if sign < 0:
        val = np.conj(val)
    return StationaryTerm(complex(val), xi0)


# ---------------------------------------------------------------------------
# inertness checks


def check_inert(p: PhaseProblem, grid: int = 10_000, orders=(0, 1, 2, 3)) -> bool:
    """|w^(j)| <= C_j (Z/X)^{-j} on the support."""
    a, b = p.support
    xs = np.linspace(a, b, grid)
    for j in orders:
        bound = DERIVATIVE_CONSTANTS[j] * (p.Z / p.X) ** (-j)
        if p.weight.kind == "plain_bump":
            bound = _PLAIN_SUP[j] * p.Z ** (-j)
        if np.max(np.abs(p.w(xs, j))) > bound * abs(p.weight.normalization) * (1 + 1e-9):
            return False
    return True


# sup |V^(j)| of the plain bump on [1, 2], rounded up
_PLAIN_SUP = (0.0184, 0.08, 0.6, 8.5, 205.0)


def check_phase(p: PhaseProblem, C: float = 10.0) -> bool:
    """|h^(j)| <= C Y / Z^j for j = 1..3, by central differences."""
    a, b = p.support
    xs = np.linspace(a, b, 201)[1:-1]
    step = 1e-3 * p.Z
    f = lambda x: p.h(x)  # noqa: E731
    d1 = (f(xs + step) - f(xs - step)) / (2 * step)
    d2 = (f(xs + step) - 2 * f(xs) + f(xs - step)) / step**2
    d3 = (f(xs + 2 * step) - 2 * f(xs + step) + 2 * f(xs - step) - f(xs - 2 * step)) / (2 * step**3)
    Y = p.Y
    return all(
        np.max(np.abs(d)) <= C * Y / p.Z**j * (1 + 1e-6) + 1e-6 * abs(p.lam)
        for j, d in ((1, d1), (2, d2), (3, d3))
    )


# ---------------------------------------------------------------------------
# problem files


def parse_problems(text: str) -> list[PhaseProblem]:
    """INI text, one section per problem.

    keys: kind, lam, xi0, weight (plain_bump | plateau), delta, Z, shift
    """
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ProblemParseError(str(exc)) from exc
    if not cp.sections():
        raise ProblemParseError("no problem sections found")
    out = []
    allowed = {"kind", "lam", "xi0", "weight", "delta", "z", "shift"}
    for name in cp.sections():
        sec = cp[name]
        extra = set(sec) - allowed
        if extra:
            raise ProblemParseError(f"[{name}] unknown keys {sorted(extra)}")
        try:
            weight = BumpFunction(sec.get("weight", "plain_bump"), float(sec.get("delta", "2")))
            xi0 = sec.get("xi0")
            out.append(
                PhaseProblem(
                    kind=sec.get("kind", "linear"),
                    lam=float(sec["lam"]),
                    xi0=float(xi0) if xi0 is not None else None,
                    weight=weight,
                    Z=float(sec.get("z", "1")),
                    shift=float(sec.get("shift", "0")),
                    name=name,
                )
            )
        except (KeyError, ValueError) as exc:
            raise ProblemParseError(f"[{name}] {exc}") from exc
    return out


def load_problems(path) -> list[PhaseProblem]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemParseError(str(exc)) from exc
    return parse_problems(text)


DEFAULT_PROBLEMS = """\
[quadratic_default]
kind = quadratic
lam = 1000
xi0 = 1.5

[linear_default]
kind = linear
lam = 100
"""


def stationary_error_slope(p: PhaseProblem, lams=(1e3, 4e3, 1.6e4)) -> tuple[float, list[float]]:
    """log-log slope of |direct - leading| over lam."""
    errs = []
    for lam in lams:
        q = p.with_lam(lam)
        errs.append(abs(direct_oscillatory_integral(q).value - stationary_leading_term(q).value))
    return float(np.polyfit(np.log(lams), np.log(errs), 1)[0]), errs
