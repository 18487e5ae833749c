"""Composite Gauss-Legendre rules and an order-fixed summation tree."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_edges(a: float, b: float, width: float) -> np.ndarray:
    n = max(1, math.ceil((b - a) / width - 1e-12))
    return np.linspace(a, b, n + 1)


def gauss_legendre_on(edges: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an m-point rule on each [edges[i], edges[i+1]]."""
    x, w = gauss_legendre(m)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + hi) * 0.5 + half * x
    weights = half * w
    return nodes.ravel(), weights.ravel()


def gauss_legendre_panels(a: float, b: float, width: float, m: int):
    return gauss_legendre_on(panel_edges(a, b, width), m)


def pairwise_sum(values) -> complex:
    """Sum in a fixed balanced binary tree.

    The shape depends only on len(values), so the rounding is the same no
    matter how the terms were produced.
    """
    vals = list(values)
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def graded_edges(a: float, b: float, center: float, first: float, width: float) -> np.ndarray:
    """Panel edges on [a, b] that shrink geometrically towards ``center``.

    Used where the integrand has a nearby singularity off the real line at
    distance ~``first`` from ``center``.
    """
    edges = {a, b}
    if a < center < b:
        edges.add(center)
    for side in (-1.0, 1.0):
        h = first
        pos = center
        while True:
            pos = pos + side * h
            if not a < pos < b:
                break
            edges.add(pos)
            h = min(2 * h, width)
    out = np.array(sorted(edges))
    return out
