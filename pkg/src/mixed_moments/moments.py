"""Smoothed and sharp mixed moments of L(1/2+it, f) against zeta(1/2-it)."""

from __future__ import annotations

import hashlib
import math
import multiprocessing as mp
import time
from dataclasses import dataclass, field

import numpy as np

from .hecke import CoefficientTable, FormDescriptor
from .lfun import lfun_afe, zeta_afe
from .quadrature import gauss_legendre_on, pairwise_sum, panel_edges
from .special import GAUSS, CutoffKernel
from .weights import BumpFunction, check_delta, eval_V

VARIANTS = ("zeta_square", "zeta_linear")
# total degree of L |zeta|^2; the phase speed is (D/2) log(t / 2 pi)
TOTAL_DEGREE = 4
NODES_PER_PANEL = 8
SPOT_CHECK_STRIDE = 10
CHUNK = 128


class BudgetExceeded(RuntimeError):
    def __init__(self, partial: "MomentResult", panels_done: int, panels_total: int):
        super().__init__(
            f"evaluation budget exhausted after {panels_done}/{panels_total} panels"
        )
        self.partial = partial
        self.panels_done = panels_done
        self.panels_total = panels_total


class MomentEvaluationError(RuntimeError):
    def __init__(self, t: float, cause: Exception):
        super().__init__(f"integrand failed at t={t!r}: {cause}")
        self.t = t
        self.cause = cause


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class MomentRequest:
    T: float
    variant: str = "zeta_square"
    cutoff: str = "smoothed"
    V: BumpFunction | None = None
    nodes_per_oscillation: float = 6.0
    panel_width: float | None = None
    # False admits a plateau delta above sqrt(T)/log T; the violation is
    # still reported through delta_violation
    enforce_delta: bool = True

    @property
    def delta_violation(self) -> bool:
        return self.V is not None and not check_delta(self.V, self.T)

    def __post_init__(self):
        if not self.T >= 100:
            raise PreconditionError("T must be >= 100")
        if self.variant not in VARIANTS:
            raise PreconditionError(f"unknown variant {self.variant!r}")
        if self.cutoff not in ("smoothed", "sharp"):
            raise PreconditionError(f"unknown cutoff {self.cutoff!r}")
        if self.cutoff == "smoothed":
            if self.V is None:
                raise PreconditionError("smoothed cutoff needs a weight V")
            if self.enforce_delta and not check_delta(self.V, self.T):
                raise PreconditionError(
                    f"plateau delta={self.V.delta} exceeds sqrt(T)/log T="
                    f"{math.sqrt(self.T) / math.log(self.T):.3f}"
                )
        if not self.nodes_per_oscillation >= 4:
            raise PreconditionError("nodes_per_oscillation must be >= 4")
        if self.panel_width is not None and not self.panel_width > 0:
            raise PreconditionError("panel_width must be positive")


@dataclass(frozen=True)
class MomentResult:
    value: complex
    quad_error: float
    eval_count: int
    wall_time: float = field(default=0.0, compare=False)
    panels: int = 0


# ---------------------------------------------------------------------------
# integrand


def integrand(
    t: float,
    variant: str,
    form: FormDescriptor,
    table: CoefficientTable,
    kernel: CutoffKernel = GAUSS,
) -> complex:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    lv = lfun_afe(t, form, table, kernel, check=False).value
    z = zeta_afe(t, kernel, check=False).value
    return _combine(lv, z, variant)


def _combine(lv, z, variant: str):
    if variant == "zeta_square":
        return lv * (z.real * z.real + z.imag * z.imag)
    return lv * np.conj(z)


class EvalCache:
    """(L, zeta) pairs keyed by t; values are pure functions of t and the form."""

    def __init__(self):
        self.store: dict[tuple, dict[float, tuple[complex, complex]]] = {}

    def bucket(self, form: FormDescriptor, table: CoefficientTable, kernel: CutoffKernel):
        # tables of different length share their prefix, so key on the values
        head = np.ascontiguousarray(table.values[:4096]).tobytes()
        key = (form, kernel, hashlib.sha256(head).hexdigest())
        return self.store.setdefault(key, {})

    def clear(self):
        self.store.clear()


DEFAULT_CACHE = EvalCache()

_WORKER_STATE: dict = {}


def _worker_init(form, table, kernel):
    _WORKER_STATE.update(form=form, table=table, kernel=kernel)


def _eval_chunk(ts: np.ndarray) -> np.ndarray:
    form, table, kernel = (_WORKER_STATE[k] for k in ("form", "table", "kernel"))
    out = np.empty((len(ts), 2), dtype=np.complex128)
    for i, t in enumerate(ts):
        try:
            out[i, 0] = lfun_afe(t, form, table, kernel, check=False).value
            out[i, 1] = zeta_afe(t, kernel, check=False).value
        except Exception as exc:  # surfaced with the offending coordinate
            raise MomentEvaluationError(float(t), exc) from exc
    return out


def evaluate_nodes(
    ts: np.ndarray,
    form: FormDescriptor,
    table: CoefficientTable,
    kernel: CutoffKernel = GAUSS,
    workers: int = 1,
    cache: EvalCache | None = DEFAULT_CACHE,
) -> tuple[np.ndarray, np.ndarray, int]:
    """L and zeta at every t; returns (L, zeta, fresh evaluation count)."""
    bucket = cache.bucket(form, table, kernel) if cache is not None else {}
    todo = [t for t in dict.fromkeys(ts.tolist()) if t not in bucket]
    if todo:
        arr = np.array(todo)
        chunks = [arr[i : i + CHUNK] for i in range(0, len(arr), CHUNK)]
        if workers > 1 and len(chunks) > 1:
            ctx = mp.get_context("fork")
            with ctx.Pool(workers, _worker_init, (form, table, kernel)) as pool:
                parts = pool.map(_eval_chunk, chunks)
        else:
            _worker_init(form, table, kernel)
            parts = [_eval_chunk(c) for c in chunks]
        vals = np.concatenate(parts)
        for t, (lv, z) in zip(todo, vals):
            bucket[t] = (complex(lv), complex(z))
    lv = np.array([bucket[t][0] for t in ts.tolist()])
    z = np.array([bucket[t][1] for t in ts.tolist()])
    return lv, z, len(todo)


# ---------------------------------------------------------------------------
# quadrature driver


def panel_width_for(T_hi: float, nodes_per_oscillation: float) -> float:
    """Width giving ``nodes_per_oscillation`` GL nodes per period of the fastest phase."""
    speed = 0.5 * TOTAL_DEGREE * math.log(T_hi / (2 * math.pi))
    return NODES_PER_PANEL * (2 * math.pi / speed) / nodes_per_oscillation


@dataclass(frozen=True)
class _Plan:
    edges: np.ndarray
    sign: float

    @property
    def panels(self) -> int:
        return len(self.edges) - 1


def _integrate(
    plan: _Plan,
    weight,
    variant: str,
    form: FormDescriptor,
    table: CoefficientTable,
    kernel: CutoffKernel,
    workers: int,
    max_evaluations: int | None,
    cache: EvalCache | None,
) -> MomentResult:
    start = time.perf_counter()
    m = NODES_PER_PANEL
    edges = plan.edges
    npan = plan.panels
    spot = np.arange(0, npan, SPOT_CHECK_STRIDE)
    planned = npan * m + len(spot) * 2 * m
    done_panels = npan
    if max_evaluations is not None and planned > max_evaluations:
        done_panels = min(npan, max_evaluations // m)
        edges = edges[: done_panels + 1]
        spot = spot[:0]

    nodes, wts = gauss_legendre_on(edges, m)
    ts = plan.sign * nodes
    lv, z, fresh = evaluate_nodes(ts, form, table, kernel, workers, cache)
    vals = _combine(lv, z, variant) * weight(nodes) * wts
    panel_sums = vals.reshape(-1, m).sum(axis=1)
    value = complex(pairwise_sum(panel_sums.tolist()))

    quad_error = 0.0
    if len(spot):
        lo, hi = edges[spot], edges[spot + 1]
        mid = 0.5 * (lo + hi)
        fine_edges = np.stack([lo, mid, hi], axis=1)
        fnodes, fwts = [], []
        for row in fine_edges:
            a, b = gauss_legendre_on(row, m)
            fnodes.append(a)
            fwts.append(b)
        fnodes, fwts = np.concatenate(fnodes), np.concatenate(fwts)
        flv, fz, fresh2 = evaluate_nodes(plan.sign * fnodes, form, table, kernel, workers, cache)
        fresh += fresh2
        fvals = _combine(flv, fz, variant) * weight(fnodes) * fwts
        fine = fvals.reshape(-1, 2 * m).sum(axis=1)
        diffs = np.abs(fine - panel_sums[spot])
        quad_error = float(pairwise_sum(diffs.tolist())) * (npan / len(spot))

    result = MomentResult(
        value=value,
        quad_error=quad_error,
        eval_count=len(ts) + (len(spot) * 2 * m),
        wall_time=time.perf_counter() - start,
        panels=done_panels,
    )
    if done_panels < npan:
        raise BudgetExceeded(result, done_panels, npan)
    return result


def _plan(a: float, b: float, T_hi: float, req_npo: float, width: float | None, sign=1.0):
    w = width if width is not None else panel_width_for(T_hi, req_npo)
    return _Plan(panel_edges(a, b, w), sign)


def smoothed_moment(
    req: MomentRequest,
    V: BumpFunction | None,
    form: FormDescriptor,
    table: CoefficientTable,
    kernel: CutoffKernel = GAUSS,
    workers: int = 1,
    max_evaluations: int | None = None,
    cache: EvalCache | None = DEFAULT_CACHE,
    negative: bool = False,
) -> MomentResult:
    """int V(t/T) integrand(t) dt over the support of V(./T).

    ``negative`` integrates V(-t/T) over [-2T, -T] instead.
    """
    V = V if V is not None else req.V
    if req.cutoff != "smoothed" or V is None:
        raise PreconditionError("smoothed_moment needs a smoothed request and a weight")
    T = req.T
    lo, hi = V.support
    plan = _plan(lo * T, hi * T, 2 * T, req.nodes_per_oscillation, req.panel_width,
                 -1.0 if negative else 1.0)
    return _integrate(plan, lambda x: eval_V(V, x / T), req.variant, form, table, kernel,
                      workers, max_evaluations, cache)


def sharp_moment(
    T: float,
    variant: str,
    form: FormDescriptor,
    table: CoefficientTable,
    kernel: CutoffKernel = GAUSS,
    workers: int = 1,
    max_evaluations: int | None = None,
    cache: EvalCache | None = DEFAULT_CACHE,
    interval: tuple[float, float] | None = None,
    nodes_per_oscillation: float = 6.0,
    panel_width: float | None = None,
) -> MomentResult:
    """int_T^{2T} integrand(t) dt (or over ``interval``)."""
    MomentRequest(T, variant, "sharp", None, nodes_per_oscillation, panel_width)
    a, b = interval if interval is not None else (T, 2 * T)
    if not a < b:
        raise PreconditionError("empty interval")
    plan = _plan(a, b, max(2 * T, b), nodes_per_oscillation, panel_width)
    return _integrate(plan, np.ones_like, variant, form, table, kernel,
                      workers, max_evaluations, cache)


def moment(req: MomentRequest, form, table, **kw) -> MomentResult:
    if req.cutoff == "sharp":
        return sharp_moment(req.T, req.variant, form, table,
                            nodes_per_oscillation=req.nodes_per_oscillation,
                            panel_width=req.panel_width, **kw)
    return smoothed_moment(req, req.V, form, table, **kw)


# ---------------------------------------------------------------------------
# mean value diagnostic

MEANVALUE_LIMIT = 10_000


def mean_value_check(coeffs, T: float, nodes_per_panel: int = 16) -> tuple[float, float]:
    """(int_0^T |sum a_n n^{it}|^2 dt, (T + N) sum |a_n|^2)."""
    a = np.asarray(coeffs, dtype=np.complex128)
    n = len(a)
    if n == 0:
        raise ValueError("empty coefficient sequence")
    if n > MEANVALUE_LIMIT or T > MEANVALUE_LIMIT:
        raise BudgetExceeded(MomentResult(0j, 0.0, 0), 0, 0)
    if not T > 0:
        raise ValueError("T must be positive")
    logn = np.log(np.arange(1, n + 1, dtype=np.float64))
    # the fastest frequency of |.|^2 is log N; 4 panels per period
    width = min(T, 2 * math.pi / max(logn[-1], 1.0) / 4)
    nodes, wts = gauss_legendre_on(panel_edges(0.0, T, width), nodes_per_panel)
    acc = []
    step = max(1, 2_000_000 // n)
    for i in range(0, len(nodes), step):
        t = nodes[i : i + step]
        s = np.exp(1j * np.outer(t, logn)) @ a
        acc.append(float(np.sum((s.real**2 + s.imag**2) * wts[i : i + step])))
    lhs = float(pairwise_sum(acc))
    rhs = (T + n) * float(np.sum(np.abs(a) ** 2))
    return lhs, rhs
