"""zeta and L(s, f) through the smoothed approximate functional equation.

For s and the gamma data of a form,

    L(s) = sum_n a_n n^{-s} W_s(n / sqrt q)
           + eps q^{1/2-s} gamma(1-s)/gamma(s) sum_n conj(a_n) n^{s-1} W_{1-s}(n / sqrt q)
           [- (G(1-s)/(1-s) + G(s)/s) / gamma(s)   for zeta]

W_s(x) is rebuilt on Chebyshev pieces in l = log x from its derivative,

    W'(l) = -(1/2 pi) int e^{-ivl} G(iv) gamma(s+iv)/gamma(s) dv,

which has no pole on Re u = 0.  Anchoring at l = L where W is negligible,

    W(l) = (1/2 pi) int F(v) (e^{-ivl} - e^{-ivL}) / (iv) dv,

an entire integrand, so the trapezoid rule converges geometrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .hecke import (
    DELTA,
    ZETA,
    CoefficientTable,
    FormDescriptor,
    InsufficientCoefficients,
)
from .special import (
    GAUSS,
    LOG_PI,
    CutoffKernel,
    DomainError,
    NonConvergence,
    PoleError,
    default_width,
    log_gamma,
    log_gamma_factor,
)

# trapezoid step in v; good for anchors up to l = 14 (see module notes)
V_STEP = 2 * math.pi / 27.0
PIECE = 0.25
CHEB_NODES = 20
# W(n) is below e^-TAIL_EXPONENT at the nominal truncation
TAIL_EXPONENT = 34.0
MIN_TERMS = 16
CONVERGENCE_TOL = 1e-8


@dataclass(frozen=True)
class LValue:
    s: complex
    value: complex
    error_estimate: float
    terms_used: int
    kernel: str
    kernel_width: float = float("nan")


# ---------------------------------------------------------------------------
# W_s on a Chebyshev grid


def _cheb_nodes() -> np.ndarray:
    i = np.arange(CHEB_NODES)
    return np.cos(np.pi * (i + 0.5) / CHEB_NODES)


@lru_cache(maxsize=1)
def _cheb_fit_matrix() -> np.ndarray:
    # values at first-kind nodes -> Chebyshev coefficients
    tau = _cheb_nodes()
    j = np.arange(CHEB_NODES)
    m = (2.0 / CHEB_NODES) * np.cos(np.outer(j, np.arccos(tau)))
    m[0] *= 0.5
    return m


def _ell_nodes(pieces: int) -> np.ndarray:
    tau = _cheb_nodes()
    left = PIECE * np.arange(pieces)[:, None]
    return (left + 0.5 * PIECE * (tau + 1.0)).ravel()


class _TermGeometry:
    """Per-n piece index and Chebyshev basis values, grown on demand."""

    def __init__(self):
        self.n = 0
        self.logn = np.zeros(0)
        self.piece = np.zeros(0, dtype=np.int64)
        self.basis = np.zeros((0, CHEB_NODES))

    def ensure(self, n: int):
        if n <= self.n:
            return
        n = max(n, int(self.n * 1.5), 1024)
        logn = np.log(np.arange(1, n + 1, dtype=np.float64))
        piece = np.floor(logn / PIECE).astype(np.int64)
        tau = 2.0 * (logn - piece * PIECE) / PIECE - 1.0
        basis = np.cos(np.outer(np.arccos(np.clip(tau, -1.0, 1.0)), np.arange(CHEB_NODES)))
        self.n, self.logn, self.piece, self.basis = n, logn, piece, basis


_GEOM = _TermGeometry()


class _PhaseTable:
    """exp(-i v l) on the fixed (l-node, v-node) lattice, grown on demand."""

    def __init__(self):
        self.rows = 0
        self.half = -1
        self.table = np.zeros((0, 0), dtype=np.complex128)

    def get(self, rows: int, half: int) -> np.ndarray:
        if rows > self.rows or half > self.half:
            big_rows = max(rows, self.rows)
            big_half = max(half, self.half)
            v = V_STEP * np.arange(-big_half, big_half + 1, dtype=np.float64)
            self.table = np.exp(-1j * np.outer(_ell_nodes(big_rows // CHEB_NODES), v))
            self.rows, self.half = big_rows, big_half
        return self.table[:rows, self.half - half : self.half + half + 1]


_PHASE = _PhaseTable()


def _kernel_width(form: FormDescriptor, kernel: CutoffKernel, s: complex) -> float:
    if kernel.width is not None:
        return kernel.width
    a = default_width(form.degree)
    t = abs(complex(s).imag)
    # Poles of gamma(s+u) close to Re u = 0 sit at Im u = -t; the kernel
    # must push the integrand there below e^-30.
    nearest = min(complex(s).real - complex(k).real for k in form.kappa)
    if nearest < 3 and t > 0:
        a = max(a, (math.pi * form.degree * t / 4 + 30.0) / (t * t))
    return min(a, 1.0)


def _scale(form: FormDescriptor, s: complex) -> float:
    """Effective AFE length scale sqrt(q) prod_j (|s - kappa_j| / 2 pi)^{1/2}."""
    acc = 0.5 * math.log(form.conductor)
    for k in form.kappa:
        acc += 0.5 * math.log(max(abs(s - k), 1.0) / (2 * math.pi))
    return math.exp(acc)


def truncation_length(form: FormDescriptor, s: complex, width: float) -> int:
    phi = math.pi * form.degree / 4
    y_cut = math.exp(math.sqrt(4 * width * TAIL_EXPONENT + phi * phi))
    return max(MIN_TERMS, math.ceil(_scale(form, s) * y_cut))


def _v_max(form: FormDescriptor, width: float) -> float:
    phi = math.pi * form.degree / 4
    return (phi + math.sqrt(phi * phi + 4 * width * 45.0)) / (2 * width)


def w_chebyshev(
    form: FormDescriptor, s: complex, kernel: CutoffKernel, width: float, anchor: float
) -> np.ndarray:
    """Chebyshev coefficients (pieces x CHEB_NODES) of W_s on [0, anchor] in log x."""
    pieces = max(1, math.ceil(anchor / PIECE))
    ell = _ell_nodes(pieces)
    q = math.ceil(_v_max(form, width) / V_STEP)
    v = V_STEP * np.arange(-q, q + 1, dtype=np.float64)
    u = 1j * v
    k = kernel.resolved(width)
    logf = k.log_g(u) - 0.5 * form.degree * u * LOG_PI
    for kap in form.kappa:
        logf = logf + log_gamma((s + u - kap) / 2) - log_gamma((s - kap) / 2)
    f = np.exp(logf)
    nz = v != 0
    g = np.zeros_like(f)
    g[nz] = f[nz] / u[nz]
    phase = _PHASE.get(ell.size, q)
    anchor_term = np.sum(g * np.exp(-1j * v * anchor))
    w = (phase @ g - anchor_term + (anchor - ell) * f[q]) * (V_STEP / (2 * np.pi))
    return w.reshape(pieces, CHEB_NODES) @ _cheb_fit_matrix().T


def w_values(coef: np.ndarray, n: int) -> np.ndarray:
    """W at x = 1..n from the piecewise Chebyshev coefficients."""
    _GEOM.ensure(n)
    idx = _GEOM.piece[:n]
    if idx[-1] >= coef.shape[0]:
        raise ValueError("Chebyshev grid does not reach n")
    return np.einsum("ij,ij->i", coef[idx], _GEOM.basis[:n])


# ---------------------------------------------------------------------------
# AFE sums


def _coefficients(form: FormDescriptor, table: CoefficientTable | None, n: int) -> np.ndarray:
    if form.polar:
        return np.ones(n)
    if table is None:
        raise ValueError(f"form {form.name!r} needs a coefficient table")
    if n > table.n_max:
        raise InsufficientCoefficients(n, table.n_max)
    return table.values[:n]


def _side_sum(form, coeffs, s, kernel, width, n_terms, check=True) -> tuple[complex, complex]:
    """(sum up to N, sum up to 2N) of a_n n^{-s} W_s(n/sqrt q); without
    ``check`` only the first sum is formed and returned twice."""
    n2 = 2 * n_terms if check else n_terms
    anchor = math.log(n2 / math.sqrt(form.conductor)) + PIECE
    coef = w_chebyshev(form, s, kernel, width, anchor)
    _GEOM.ensure(n2)
    logn = _GEOM.logn[:n2]
    if form.conductor == 1:
        w = w_values(coef, n2)
    else:  # x = n / sqrt q: evaluate the series directly at shifted log x
        lx = logn - 0.5 * math.log(form.conductor)
        if lx[0] < 0:
            raise NotImplementedError("conductor > 1 with n < sqrt(q)")
        piece = np.floor(lx / PIECE).astype(np.int64)
        tau = 2.0 * (lx - piece * PIECE) / PIECE - 1.0
        basis = np.cos(np.outer(np.arccos(tau), np.arange(CHEB_NODES)))
        w = np.einsum("ij,ij->i", coef[piece], basis)
    terms = coeffs[:n2] * np.exp(-s * logn) * w
    head = complex(np.sum(terms[:n_terms]))
    return head, (head + complex(np.sum(terms[n_terms:])) if check else head)


def _polar_term(form: FormDescriptor, s: complex, kernel: CutoffKernel, width: float) -> complex:
    if not form.polar:
        return 0j
    k = kernel.resolved(width)
    lg = complex(log_gamma_factor(form, s))
    out = 0j
    for z in (1 - s, s):
        out += complex(np.exp(complex(k.log_g(z)) - lg)) / z
    return -out


def afe(
    s: complex,
    form: FormDescriptor,
    table: CoefficientTable | None = None,
    kernel: CutoffKernel = GAUSS,
    check: bool = True,
    reflect: bool = True,
) -> LValue:
    """L(s, f) at a general point by the smoothed AFE.

    With ``reflect`` (the default) and real data on Re s = 1/2 the dual sum is
    taken as the conjugate of the first; ``reflect=False`` always evaluates
    both sides, which the functional-equation checks rely on.
    """
    s = complex(s)
    if form.polar and (s == 1 or s == 0):
        raise PoleError("zeta has a pole at s = 1")
    width = _kernel_width(form, kernel, s)
    n1 = truncation_length(form, s, width)
    n_need = 2 * n1 if check else n1
    coeffs = _coefficients(form, table, n_need)
    eps = complex(form.root_number)
    q = form.conductor
    on_line = abs(s.real - 0.5) < 1e-15
    real_data = form.self_dual and all(complex(k).imag == 0 for k in form.kappa)
    head, full = _side_sum(form, coeffs, s, kernel, width, n1, check)
    x = eps * q ** (0.5 - s) * complex(
        np.exp(log_gamma_factor(form, 1 - s) - log_gamma_factor(form, s))
    )
    if reflect and on_line and real_data:
        # W_{1-s} = conj W_s and a_n real: the dual sum is the conjugate
        dual_head, dual_full = head.conjugate(), full.conjugate()
    else:
        n1d = n1
        dual_head, dual_full = _side_sum(form, np.conj(coeffs), 1 - s, kernel, width, n1d, check)
    polar = _polar_term(form, s, kernel, width)
    value = head + x * dual_head + polar
    err = abs((full + x * dual_full + polar) - value) if check else 0.0
    if check and err > CONVERGENCE_TOL * max(1.0, abs(value)):
        raise NonConvergence(
            f"truncation doubling moved L({s}) by {err:.3e} (N={n1})"
        )
    return LValue(
        s=s, value=value, error_estimate=err, terms_used=n1, kernel=kernel.kind, kernel_width=width
    )


def required_terms(t: float, form: FormDescriptor, kernel: CutoffKernel = GAUSS) -> int:
    """Coefficients needed (doubling included) for an evaluation at 1/2 + it."""
    s = complex(0.5, t)
    return 2 * truncation_length(form, s, _kernel_width(form, kernel, s))


def zeta_afe(t: float, kernel: CutoffKernel = GAUSS, check: bool = True) -> LValue:
    if abs(t) < 10:
        raise DomainError("zeta_afe needs |t| >= 10")
    return afe(complex(0.5, t), ZETA, None, kernel, check)


def lfun_afe(
    t: float,
    form: FormDescriptor,
    table: CoefficientTable,
    kernel: CutoffKernel = GAUSS,
    check: bool = True,
) -> LValue:
    if abs(t) < 10:
        raise DomainError("lfun_afe needs |t| >= 10")
    return afe(complex(0.5, t), form, table, kernel, check)


def lfun_near_one(
    w: complex,
    form: FormDescriptor,
    table: CoefficientTable,
    kernel: CutoffKernel = GAUSS,
    check: bool = True,
) -> LValue:
    """L(1 - w, f) for 1/2 <= Re(1 - w) <= 3/2."""
    s = 1 - complex(w)
    if not 0.5 - 1e-12 <= s.real <= 1.5 + 1e-12:
        raise DomainError("lfun_near_one needs Re(1 - w) in [1/2, 3/2]")
    return afe(s, form, table, kernel, check)


def completed_log(
    s: complex, table: CoefficientTable, kernel: CutoffKernel = GAUSS
) -> tuple[complex, LValue]:
    """log Lambda(s) for Lambda(s) = (2 pi)^{-(s+11/2)} Gamma(s + 11/2) L(s, Delta).

    L is taken from the two-sided AFE (no conjugation shortcut), so the
    functional equation Lambda(s) = Lambda(1 - s) is a genuine check.  The
    imaginary part is only defined mod 2 pi.
    """
    s = complex(s)
    lv = afe(s, DELTA, table, kernel, reflect=False)
    if lv.value == 0:
        raise DomainError(f"L(s) vanishes at s={s}")
    log_factor = -(s + 5.5) * math.log(2 * math.pi) + complex(log_gamma(s + 5.5))
    return log_factor + complex(np.log(lv.value)), lv


# ---------------------------------------------------------------------------
# Euler-Maclaurin oracle


def zeta_oracle(s: complex, terms: int | None = None, order: int = 8) -> complex:
    """zeta(s) by Euler-Maclaurin with N = ceil(10 + 2|Im s|) and B_2..B_{2 order}."""
    s = complex(s)
    if s == 1:
        raise PoleError("zeta has a pole at s = 1")
    if abs(s.imag) > 1e4:
        raise DomainError("zeta_oracle is verified for |Im s| <= 1e4")
    from .special import _B  # exact Bernoulli numbers

    if not 1 <= order <= (len(_B) - 1) // 2:
        raise ValueError(f"order must lie in 1..{(len(_B) - 1) // 2}")

    n = terms if terms is not None else math.ceil(10 + 2 * abs(s.imag))
    k = np.arange(1, n, dtype=np.float64)
    head = np.exp(-s * np.log(k))
    total = complex(math.fsum(head.real), math.fsum(head.imag))
    nn = float(n)
    total += nn ** (1 - s) / (s - 1) + 0.5 * nn ** (-s)
    # s (s+1) ... (s + 2j - 2) N^{-s-2j+1} B_{2j} / (2j)!
    rising = s
    power = nn ** (-s - 1)
    for j in range(1, order + 1):
        total += float(_B[2 * j]) / math.factorial(2 * j) * rising * power
        rising *= (s + 2 * j - 1) * (s + 2 * j)
        power /= nn * nn
    return total
