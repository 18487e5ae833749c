"""Complex log-gamma, gamma-factor ratios, AFE kernels and the cutoff W_s."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .hecke import FormDescriptor
from .quadrature import gauss_legendre_panels

LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2 * math.pi)
_HALF_LOG_2PI = 0.5 * LOG_2PI

# Stirling series ends at B_20; with |z| >= 15 the next term is below 1e-26.
_STIRLING_MIN = 15.0


def _bernoulli(n: int) -> list[Fraction]:
    b = [Fraction(0)] * (n + 1)
    b[0] = Fraction(1)
    for m in range(1, n + 1):
        b[m] = -sum(math.comb(m + 1, k) * b[k] for k in range(m)) / (m + 1)
    return b


_B = _bernoulli(20)
_STIRLING_COEFFS = np.array(
    [float(_B[2 * k] / (2 * k * (2 * k - 1))) for k in range(1, 11)]
)


class PoleError(ValueError):
    pass


class DomainError(ValueError):
    pass


def _stirling(z: np.ndarray) -> np.ndarray:
    # log Gamma(z) for |z| >= 15, Re z > 0
    inv = 1.0 / z
    inv2 = inv * inv
    series = np.zeros_like(z)
    for c in _STIRLING_COEFFS[::-1]:
        series = series * inv2 + c
    return (z - 0.5) * np.log(z) - z + _HALF_LOG_2PI + series * inv


def _loggamma_right(z: np.ndarray) -> np.ndarray:
    """Re z >= 0.5: upward recurrence to |z| >= 15, then Stirling."""
    shift = np.where(np.abs(z) < _STIRLING_MIN, np.ceil(_STIRLING_MIN - z.real), 0.0)
    shift = np.maximum(shift, 0).astype(int)
    out = _stirling(z + shift)
    if shift.any():
        top = int(shift.max())
        acc = np.zeros_like(z)
        for j in range(top):
            m = shift > j
            acc[m] += np.log(z[m] + j)
        out = out - acc
    return out


def _log_sinpi_upper(z: np.ndarray) -> np.ndarray:
    # continuous branch of log sin(pi z) for Im z >= 0
    return -1j * np.pi * z + (math.log(0.5) + 0.5j * np.pi) + np.log1p(-np.exp(2j * np.pi * z))


def log_gamma(z) -> np.ndarray | complex:
    """Principal branch of log Gamma, continuous on C minus (-inf, 0]."""
    arr = np.asarray(z, dtype=np.complex128)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    bad = (arr.imag == 0) & (arr.real <= 0) & (arr.real == np.round(arr.real))
    if bad.any():
        raise PoleError(f"log_gamma has a pole at z={arr[bad][0].real:g}")
    out = np.empty_like(arr)
    right = arr.real >= 0.5
    if right.any():
        out[right] = _loggamma_right(arr[right])
    left = ~right
    if left.any():
        zl = arr[left]
        upper = zl.imag >= 0
        zu = np.where(upper, zl, np.conj(zl))
        # Gamma(z) Gamma(1 - z) = pi / sin(pi z)
        val = LOG_PI - _log_sinpi_upper(zu) - _loggamma_right(1 - zu)
        out[left] = np.where(upper, val, np.conj(val))
    return complex(out[0]) if scalar else out


def log_gamma_factor(form: FormDescriptor, s) -> np.ndarray:
    """log gamma(s, f) = -(d s/2) log pi + sum_j log Gamma((s - kappa_j)/2)."""
    s = np.asarray(s, dtype=np.complex128)
    acc = -0.5 * form.degree * s * LOG_PI
    for k in form.kappa:
        acc = acc + log_gamma((s - k) / 2)
    return acc


def gamma_ratio(form: FormDescriptor, s: complex, u) -> np.ndarray | complex:
    """gamma(s + u, f) / gamma(s, f)."""
    u_arr = np.asarray(u, dtype=np.complex128)
    acc = -0.5 * form.degree * u_arr * LOG_PI
    for k in form.kappa:
        base = log_gamma((s - k) / 2)
        acc = acc + (log_gamma((s + u_arr - k) / 2) - base)
    out = np.exp(acc)
    if u_arr.ndim == 0:
        return 1.0 + 0j if u_arr == 0 else complex(out)
    return np.where(u_arr == 0, 1.0 + 0j, out)


def stirling_ratio_first(t: float, w: complex, form: FormDescriptor) -> complex:
    """Large-|t| approximation of gamma(1/2 + it + w)/gamma(1/2 + it).

    Each Gamma ratio is (|t|/2)^{w/2} e^{i sgn(t) pi w/4}; the d factors and
    pi^{-dw/2} combine to (|t|/2pi)^{dw/2} e^{i sgn(t) pi d w/4}.
    """
    if abs(t) < 10:
        raise DomainError("stirling_ratio_first needs |t| >= 10")
    d = form.degree
    sg = math.copysign(1.0, t)
    w = complex(w)
    return complex(np.exp(d * (w / 2) * math.log(abs(t) / 2) + 1j * sg * math.pi * d * w / 4 - d * w / 2 * LOG_PI))


def stirling_ratio_second(t: float, form: FormDescriptor) -> complex:
    """prod_j (|t|/2e)^{-it} e^{i pi sgn(t) (1/4 + kappa_j/2)}.

    Approximates prod_j Gamma((1/2 - it - kappa_j)/2) / Gamma((1/2 + it - kappa_j)/2);
    the full gamma(1/2 - it)/gamma(1/2 + it) carries an extra pi^{i d t}.
    """
    if abs(t) < 10:
        raise DomainError("stirling_ratio_second needs |t| >= 10")
    sg = math.copysign(1.0, t)
    # phase of (|t|/2e)^{-it}, reduced mod 2pi in extended precision
    phase = float(np.mod(-np.longdouble(t) * (np.longdouble(math.log(abs(t) / 2)) - 1), 2 * np.pi))
    acc = 0j
    for k in form.kappa:
        acc += 1j * phase + 1j * math.pi * sg * (0.25 + complex(k) / 2)
    return complex(np.exp(acc))


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class CutoffKernel:
    """Even entire G with G(0) = 1, bounded in |Re u| < 4.

    gauss:   G(u) = exp(a u^2)
    quartic: G(u) = exp(a u^2 - (a u^2)^2 / 100)

    ``width`` is a; None lets the evaluators pick a per degree.
    """

    kind: str = "gauss"
    width: float | None = None

    def __post_init__(self):
        if self.kind not in ("gauss", "quartic"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.width is not None and not self.width > 0:
            raise ValueError("kernel width must be positive")

    def resolved(self, width: float) -> "CutoffKernel":
        return self if self.width is not None else CutoffKernel(self.kind, width)

    def log_g(self, u) -> np.ndarray:
        a = 1.0 if self.width is None else self.width
        u = np.asarray(u, dtype=np.complex128)
        au2 = a * u * u
        if self.kind == "gauss":
            return au2
        return au2 - au2 * au2 / 100.0

    def __call__(self, u):
        return np.exp(self.log_g(u))


GAUSS = CutoffKernel("gauss")
QUARTIC = CutoffKernel("quartic")


def default_width(degree: int) -> float:
    """Kernel width used when the caller leaves it open.

    The effective kernel seen by W is G(u) e^{i pi d u/4}; its peak modulus on
    the imaginary axis is exp((pi d/4)^2 / (4a)).  Capping that at e^7 keeps
    cancellation inside the AFE below about 1e3 ulp while keeping a small.
    """
    phi = math.pi * degree / 4
    return phi * phi / 28.0


@dataclass(frozen=True)
class GammaFactorPlan:
    """Contour data for W_s: line Re u = c, |Im u| <= v_max, GL panels."""

    c: float = 1.0
    v_max: float = 8.0
    nodes_per_panel: int = 16
    panel_width: float = 0.5

    def __post_init__(self):
        if not 0 < self.c < 4:
            raise ValueError("contour abscissa must satisfy 0 < c < 4")
        if self.v_max < 8:
            raise ValueError("v_max must be >= 8")

    @classmethod
    def for_kernel(cls, kernel: CutoffKernel, form: FormDescriptor, c: float = 1.0, **kw):
        """Plan whose truncation makes the kernel envelope negligible (< e^-40)."""
        a = kernel.width if kernel.width is not None else 1.0
        phi = math.pi * form.degree / 4
        v = (phi + math.sqrt(phi * phi + 4 * a * (45 + a * c * c))) / (2 * a)
        return cls(c=c, v_max=max(8.0, math.ceil(v)), **kw)


@dataclass(frozen=True)
class WValue:
    value: np.ndarray
    error_estimate: float


class NonConvergence(RuntimeError):
    pass


def cutoff_W(
    form: FormDescriptor,
    s: complex,
    x,
    plan: GammaFactorPlan | None = None,
    kernel: CutoffKernel = GAUSS,
    tol: float = 1e-9,
) -> WValue:
    """W_s(x) = (1/2 pi i) int_{(c)} x^{-u} G(u) gamma(s+u)/gamma(s) du/u.

    Composite Gauss-Legendre on the truncated line; the error estimate is the
    change under node doubling.
    """
    if plan is None:
        plan = GammaFactorPlan.for_kernel(kernel, form)
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if (xs <= 0).any():
        raise ValueError("x must be positive")
    logx = np.log(xs)

    def run(m: int) -> np.ndarray:
        v, wts = gauss_legendre_panels(-plan.v_max, plan.v_max, plan.panel_width, m)
        u = plan.c + 1j * v
        g = kernel(u) * gamma_ratio(form, s, u) / u
        # du = i dv, and 1/(2 pi i) * i = 1/(2 pi)
        ph = np.exp(-np.outer(logx, u))
        return ph @ (g * wts) / (2 * np.pi)

    coarse = run(plan.nodes_per_panel)
    fine = run(2 * plan.nodes_per_panel)
    err = float(np.max(np.abs(fine - coarse)))
    if err > tol * max(1.0, float(np.max(np.abs(fine)))):
        raise NonConvergence(f"W_s node doubling disagreement {err:.3e} exceeds {tol:.1e}")
    return WValue(value=fine if np.ndim(x) else complex(fine[0]), error_estimate=err)
