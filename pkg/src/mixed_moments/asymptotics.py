"""Predicted main terms and residual-exponent fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hecke import CoefficientTable, FormDescriptor
from .lfun import NonConvergence, lfun_near_one
from .quadrature import gauss_legendre_on, graded_edges, pairwise_sum
from .special import GAUSS
from .weights import BumpFunction, integral_c, log_weighted_integral

CONTOUR_EPS = 0.1
CONTOUR_VMAX = 8.0
CONTOUR_NODES = 16


class DegenerateFit(ValueError):
    pass


@dataclass(frozen=True)
class Prediction:
    c: float
    c_f: complex
    T: float
    main_term: complex
    variant: str
    L1: complex = 0j


def _term1_integrand(v: np.ndarray, eps: float, form, table) -> np.ndarray:
    out = np.empty(len(v), dtype=np.complex128)
    for i, vi in enumerate(v):
        w = complex(eps, vi)
        lv = lfun_near_one(w, form, table, GAUSS).value
        out[i] = lv * (-1.0 / (w * w)) * np.exp(2 * w * w + 0.5j * math.pi * w)
    return out


def contour_term(
    form: FormDescriptor,
    table: CoefficientTable,
    eps: float = CONTOUR_EPS,
    v_max: float = CONTOUR_VMAX,
    tol: float = 1e-10,
) -> complex:
    """(1/2 pi i) int_{(eps)} L(1-w, f) (-w^-2) e^{2w^2 + i pi w/2} dw on |Im w| <= v_max.

    With w = eps + iv the measure dw/(2 pi i) is dv/(2 pi).  Panels shrink
    geometrically towards v = 0 where -1/w^2 peaks at height eps^-2.
    """
    if not 0 < eps < 0.5:
        raise ValueError("contour abscissa must lie in (0, 1/2)")
    edges = graded_edges(-v_max, v_max, 0.0, eps / 4, 0.5)

    def run(e):
        v, wts = gauss_legendre_on(e, CONTOUR_NODES)
        vals = _term1_integrand(v, eps, form, table) * wts
        return complex(pairwise_sum(vals.reshape(-1, CONTOUR_NODES).sum(axis=1).tolist()))

    coarse = run(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    fine = run(np.sort(np.concatenate([edges, mids])))
    if abs(fine - coarse) > tol * max(1.0, abs(fine)):
        raise NonConvergence(f"c_f contour integral moved by {abs(fine - coarse):.3e} under halving")
    return fine / (2 * math.pi)


def constant_cf(
    V: BumpFunction,
    form: FormDescriptor,
    table: CoefficientTable,
    eps: float = CONTOUR_EPS,
    v_max: float = CONTOUR_VMAX,
) -> complex:
    """c_f = c * contour_term + L(1, f) * int V(xi)[i pi/4 + log(xi/2pi)/2] d xi."""
    c = integral_c(V)
    L1 = lfun_near_one(0.0, form, table, GAUSS).value
    if eps == CONTOUR_EPS and v_max == CONTOUR_VMAX:
        term = _cached_contour(form, table)
    else:
        term = contour_term(form, table, eps, v_max)
    return c * term + L1 * log_weighted_integral(V)


def predict(
    T: float,
    variant: str,
    V: BumpFunction,
    form: FormDescriptor,
    table: CoefficientTable,
    c_f: complex | None = None,
) -> Prediction:
    if not T >= 100:
        raise ValueError("T must be >= 100")
    c = integral_c(V)
    L1 = lfun_near_one(0.0, form, table, GAUSS).value
    if c_f is None:
        c_f = constant_cf(V, form, table)
    if variant == "zeta_square":
        main = 0.5 * c * L1 * T * math.log(T) + c_f * T
    elif variant == "zeta_linear":
        main = c * T * L1
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return Prediction(c=c, c_f=c_f, T=T, main_term=complex(main), variant=variant, L1=L1)


# ---------------------------------------------------------------------------
# residual fits


@dataclass(frozen=True)
class ResidualRow:
    T: float
    measured: complex
    predicted: complex
    residual: complex
    quad_error: float

    @property
    def abs_residual(self) -> float:
        return abs(self.residual)

    def scaled(self, power: float) -> float:
        return abs(self.residual) / self.T**power


@dataclass(frozen=True)
class ResidualScan:
    slope: float
    fit_ok: bool
    rows: tuple[ResidualRow, ...] = field(default_factory=tuple)
    intercept: float = float("nan")


def fit_exponent(Ts: Sequence[float], residuals: Sequence[float]) -> tuple[float, float]:
    """Unweighted least squares of log|R| against log T: (slope, intercept)."""
    x = np.log(np.asarray(Ts, dtype=np.float64))
    y = np.log(np.asarray(residuals, dtype=np.float64))
    if not np.all(np.isfinite(y)):
        raise DegenerateFit("a residual underflowed to zero")
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(slope), float(intercept)


def scan_from_values(
    Ts: Sequence[float],
    measured: Sequence[complex],
    predicted: Sequence[complex],
    quad_errors: Sequence[float] | None = None,
) -> ResidualScan:
    if len(Ts) < 3:
        raise ValueError("residual fits need at least three T values")
    if any(b <= a for a, b in zip(Ts, Ts[1:])):
        raise ValueError("T list must be increasing")
    qe = list(quad_errors) if quad_errors is not None else [0.0] * len(Ts)
    rows = tuple(
        ResidualRow(float(T), complex(m), complex(p), complex(m) - complex(p), float(q))
        for T, m, p, q in zip(Ts, measured, predicted, qe)
    )
    # noise floor: quadrature error or a few ulps of the main term
    floor = [max(3 * r.quad_error, 1e-13 * abs(r.predicted)) for r in rows]
    at_floor = [r.abs_residual <= f for r, f in zip(rows, floor)]
    if all(at_floor):
        return ResidualScan(float("nan"), False, rows)
    if any(at_floor):
        raise DegenerateFit("some residuals sit at the quadrature noise floor")
    slope, intercept = fit_exponent([r.T for r in rows], [r.abs_residual for r in rows])
    return ResidualScan(slope, True, rows, intercept)


def residual_scan(
    T_list: Sequence[float],
    variant: str,
    V: BumpFunction | None,
    form: FormDescriptor,
    table: CoefficientTable,
    cutoff: str = "smoothed",
    workers: int = 1,
    nodes_per_oscillation: float = 6.0,
    measured: Sequence[complex] | None = None,
    quad_errors: Sequence[float] | None = None,
    c_f: complex | None = None,
) -> ResidualScan:
    """Fit log|measured - main_term| against log T.

    ``measured`` short-circuits the moment runs (synthetic controls).  Sharp
    runs are compared with the prediction for the indicator weight, c = 1.
    """
    from .moments import MomentRequest, moment

    if len(T_list) < 3:
        raise ValueError("residual fits need at least three T values")
    if cutoff == "smoothed" and V is None:
        raise ValueError("smoothed residual scans need a weight V")
    if cutoff == "sharp":
        c_ind = 1.0
        L1 = lfun_near_one(0.0, form, table, GAUSS).value
        if variant == "zeta_square":
            # indicator of [1, 2]: int log(xi/2pi)/2 = (2 log 2 - 1 - log 2pi)/2
            lw = complex(0.5 * (2 * math.log(2) - 1 - math.log(2 * math.pi)), math.pi / 4)
            cf = c_ind * _cached_contour(form, table) + L1 * lw
            preds = [0.5 * L1 * T * math.log(T) + cf * T for T in T_list]
        else:
            preds = [T * L1 for T in T_list]
    else:
        if c_f is None and variant == "zeta_square":
            c_f = constant_cf(V, form, table)
        preds = [predict(T, variant, V, form, table, c_f=c_f or 0j).main_term for T in T_list]
    if measured is None:
        results = [
            moment(MomentRequest(T, variant, cutoff, V if cutoff == "smoothed" else None,
                                 nodes_per_oscillation), form, table, workers=workers)
            for T in T_list
        ]
        measured = [r.value for r in results]
        quad_errors = [r.quad_error for r in results]
    return scan_from_values(list(T_list), measured, preds, quad_errors)


_CONTOUR_CACHE: dict = {}


def _cached_contour(form, table) -> complex:
    key = (form, table.source, table.n_max)
    if key not in _CONTOUR_CACHE:
        _CONTOUR_CACHE[key] = contour_term(form, table)
    return _CONTOUR_CACHE[key]


# ---------------------------------------------------------------------------
# diagnostic: both diagonals of the shifted-moment recipe


def lfun_derivative_at_one(form: FormDescriptor, table: CoefficientTable, radius: float = 0.25,
                           points: int = 32) -> complex:
    """L'(1, f) by the trapezoid rule for the Cauchy integral on |s - 1| = radius."""
    theta = 2 * math.pi * (np.arange(points) + 0.5) / points
    z = radius * np.exp(1j * theta)
    vals = [lfun_near_one(-zk, form, table, GAUSS).value for zk in z]
    return complex(pairwise_sum((np.array(vals) * np.exp(-1j * theta)).tolist())) / (points * radius)


def two_diagonal_main_term(T: float, V: BumpFunction, form: FormDescriptor,
                           table: CoefficientTable, L1p: complex | None = None) -> complex:
    """int V(t/T) [L(1)(log(t/2pi) + 2 gamma) + L'(1)] dt.

    The density comes from the two diagonal terms
    L(1+a+g) zeta(1+b+g) + (t/2pi)^{-b-g} L(1+a-b) zeta(1-b-g) at zero shifts.
    Reported next to the stated main term; not used by any gate.
    """
    c = integral_c(V)
    L1 = lfun_near_one(0.0, form, table, GAUSS).value
    if L1p is None:
        L1p = lfun_derivative_at_one(form, table)
    log_part = 2 * log_weighted_integral(V).real  # int V log(xi / 2 pi)
    return T * (L1 * (c * math.log(T) + log_part + 2 * np.euler_gamma * c) + c * L1p)
