"""Sampling designs on [0, 1] and the spacing statistics used by the asymptotics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np


class DesignError(ValueError):
    """Raised for design points that are not strictly increasing inside [0, 1]."""


@dataclass(frozen=True, eq=False)
class DesignGrid:
    """Ordered sampling points ``t_1 < ... < t_n`` in [0, 1].

    ``density`` and ``quantile`` are kept when the grid was generated from a
    density (regular designs); they are used by the asymptotic formulas.
    """

    points: np.ndarray
    density: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    quantile: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size == 0:
            raise DesignError("design must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise DesignError("design points must be finite")
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise DesignError("design points must lie in [0, 1]")
        bad = np.flatnonzero(np.diff(pts) <= 0.0)
        if bad.size:
            raise DesignError(f"design is not strictly increasing at index {int(bad[0]) + 1}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.size

    def __len__(self) -> int:
        return self.points.size

    def augmented(self) -> np.ndarray:
        """Points with ``t_0 = 0`` and ``t_{n+1} = 1`` attached."""
        return np.concatenate(([0.0], self.points, [1.0]))

    def spacings(self) -> np.ndarray:
        """``d_j = t_{j+1} - t_j`` for j = 0..n, including both boundary gaps."""
        return np.diff(self.augmented())

    def max_spacing(self) -> float:
        return float(self.spacings().max())

    def to_json(self) -> list[float]:
        return [float(t) for t in self.points]

    @classmethod
    def from_json(cls, values) -> "DesignGrid":
        return cls(np.asarray(values, dtype=float))


def regular_design(quantile: Callable, n: int, density: Optional[Callable] = None) -> DesignGrid:
    """Regular design ``t_i = F^{-1}(i/n)`` generated by a quantile function.

    Raises:
        DesignError: if the quantile function does not produce strictly
            increasing points in [0, 1].
    """
    if n < 1:
        raise DesignError("n must be >= 1")
    probs = np.arange(1, n + 1) / n
    pts = np.asarray(quantile(probs), dtype=float)
    if np.any(np.diff(pts) <= 0.0):
        raise DesignError("quantile function is not increasing on the design probabilities")
    return DesignGrid(pts, density=density, quantile=quantile)


def uniform_regular_design(n: int) -> DesignGrid:
    """Regular design of the uniform density: the grid i/n."""
    return regular_design(lambda p: p, n, density=lambda t: np.ones_like(np.asarray(t, dtype=float)))


def midpoint_design(n: int) -> DesignGrid:
    """The midpoint grid ``t_i = (i - 0.5)/n`` used in the benchmark tables."""
    if n < 1:
        raise DesignError("n must be >= 1")
    pts = (np.arange(1, n + 1) - 0.5) / n
    return DesignGrid(pts, density=lambda t: np.ones_like(np.asarray(t, dtype=float)))


def gm_midpoints(design: DesignGrid) -> np.ndarray:
    """Cell boundaries ``s_0 = 0 < s_1 < ... < s_n = 1`` of the Gasser-Muller partition."""
    t = design.points
    return np.concatenate(([0.0], 0.5 * (t[:-1] + t[1:]), [1.0]))


class ActiveWindow(NamedTuple):
    indices: np.ndarray
    count: int


def active_window(design: DesignGrid, x: float, h: float) -> ActiveWindow:
    """Indices i whose bracket ``[t_{i-1}, t_{i+1}]`` meets the open window ``(x-h, x+h)``.

    Indices are 0-based; the bracket of the first and last point uses
    ``t_0 = 0`` and ``t_{n+1} = 1``. The result is always a contiguous range.
    """
    aug = design.augmented()
    left, right = aug[:-2], aug[2:]
    hit = (left < x + h) & (right > x - h)
    idx = np.flatnonzero(hit)
    return ActiveWindow(idx, int(idx.size))


def design_from_spec(kind: str, n: int) -> DesignGrid:
    """Build a design from its config name (``midpoint`` or ``regular-uniform``)."""
    if kind == "midpoint":
        return midpoint_design(n)
    if kind == "regular-uniform":
        return uniform_regular_design(n)
    raise DesignError(f"unknown design {kind!r}; expected 'midpoint' or 'regular-uniform'")
