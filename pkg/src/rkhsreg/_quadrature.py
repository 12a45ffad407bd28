"""Gauss-Legendre panel rules shared by the kernel, estimator and risk code."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1], cached and read-only."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_nodes(breaks, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Flattened nodes/weights of a composite rule over consecutive breakpoints.

    Zero-length panels contribute nothing.
    """
    breaks = np.asarray(breaks, dtype=float)
    if breaks.size < 2:
        return np.empty(0), np.empty(0)
    a, b = breaks[:-1], breaks[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    z, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * z[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def interval_nodes(a, b, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Per-interval nodes for arrays of bounds, shape ``(len(a), order)``.

    Intervals with ``b <= a`` get zero weights, so sums over them vanish.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    z, w = gauss_legendre(order)
    half = 0.5 * np.maximum(b - a, 0.0)
    mid = 0.5 * (a + b)
    nodes = mid[:, None] + half[:, None] * z[None, :]
    weights = half[:, None] * w[None, :]
    return nodes, weights


def integrate(func, a: float, b: float, order: int = 16, panels: int = 1) -> float:
    """Composite Gauss-Legendre integral of a vectorized ``func`` over [a, b]."""
    if b <= a:
        return 0.0
    nodes, weights = panel_nodes(np.linspace(a, b, panels + 1), order)
    return float(np.dot(weights, func(nodes)))


class QuadratureError(RuntimeError):
    """Adaptive quadrature ran out of panels; ``worst_panel`` is the offending interval."""

    def __init__(self, worst_panel: tuple[float, float], error: float):
        self.worst_panel = worst_panel
        self.error = error
        super().__init__(
            f"quadrature did not converge: panel [{worst_panel[0]:.6g}, {worst_panel[1]:.6g}] "
            f"has error estimate {error:.3g}"
        )


def adaptive_columns(func, breaks, tol: float = 1e-13, order: int = 16, max_panels: int = 4096) -> np.ndarray:
    """Integrate a matrix-valued integrand column by column over [breaks[0], breaks[-1]].

    ``func(s)`` maps a 1-D array of nodes to an array of shape ``(len(s), k)``.
    Panels are bisected until the two-half estimate agrees with the whole-panel
    estimate to ``tol * (1 + |value|)`` in every column.

    Raises:
        QuadratureError: when more than ``max_panels`` panels would be needed.
    """
    z, w = gauss_legendre(order)
    pending = [(float(a), float(b)) for a, b in zip(breaks[:-1], breaks[1:]) if b > a]
    total = None
    n_panels = len(pending)

    def rule(a, b):
        half = 0.5 * (b - a)
        s = 0.5 * (a + b) + half * z
        return half * (w @ func(s))

    while pending:
        a, b = pending.pop()
        whole = rule(a, b)
        mid = 0.5 * (a + b)
        split = rule(a, mid) + rule(mid, b)
        err = float(np.max(np.abs(split - whole)))
        scale = 1.0 + float(np.max(np.abs(split)))
        if err <= tol * scale or b - a < 1e-14:
            total = split if total is None else total + split
            continue
        n_panels += 1
        if n_panels > max_panels:
            raise QuadratureError((a, b), err)
        pending.extend([(a, mid), (mid, b)])
    if total is None:
        probe = np.asarray(func(np.array([0.5 * (breaks[0] + breaks[-1])])))
        return np.zeros(probe.shape[1:])
    return total
