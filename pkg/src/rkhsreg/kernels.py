"""Smoothing kernels on [-1, 1], their moments, and the scaled kernel ``phi_{x,h}``."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from ._quadrature import gauss_legendre, interval_nodes

MOMENT_ORDER = 64
INTERVAL_ORDER = 16


@dataclass(frozen=True)
class KernelMoments:
    mass: float
    first: float
    B: float
    A: float
    C_K: float


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A symmetric kernel supported on [-1, 1].

    Args:
        name: identifier used in configs.
        func: vectorized ``K(u)``; only evaluated on the open interval (-1, 1).
        cdf: optional exact ``int_{-1}^u K``; used for interval integrals of
            the scaled kernel. Without it those integrals use Gauss-Legendre.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    _moments: list = field(default_factory=list, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) < 1.0
        return np.where(inside, self.func(np.where(inside, u, 0.0)), 0.0)

    def integral(self, lo, hi) -> np.ndarray:
        """``int_lo^hi K(u) du`` for arrays of bounds (clipped to [-1, 1])."""
        lo = np.clip(np.asarray(lo, dtype=float), -1.0, 1.0)
        hi = np.clip(np.asarray(hi, dtype=float), -1.0, 1.0)
        if self.cdf is not None:
            return np.where(hi > lo, self.cdf(hi) - self.cdf(lo), 0.0)
        nodes, weights = interval_nodes(lo.ravel(), hi.ravel(), INTERVAL_ORDER)
        return (weights * self(nodes)).sum(axis=1).reshape(np.shape(lo))

    @property
    def moments(self) -> KernelMoments:
        if not self._moments:
            with self._lock:
                if not self._moments:
                    self._moments.append(kernel_moments(self))
        return self._moments[0]


def kernel_moments(k: KernelSpec) -> KernelMoments:
    """Mass, first moment, ``B = int u^2 K``, ``A = int K^2`` and ``C_K = int int |u-v| K(u) K(v)``.

    One-dimensional moments use 64-node Gauss-Legendre on [-1, 0] and [0, 1].
    ``C_K`` is computed as ``2 int K(v) int_{-1}^v (v-u) K(u) du dv``, which
    keeps both integrands smooth (the kink of ``|u - v|`` sits on the panel
    boundary of the inner integral).
    """
    z, w = gauss_legendre(MOMENT_ORDER)
    nodes = np.concatenate((0.5 * z - 0.5, 0.5 * z + 0.5))
    weights = np.concatenate((0.5 * w, 0.5 * w))
    kv = k(nodes)
    mass = float(weights @ kv)
    first = float(weights @ (nodes * kv))
    second = float(weights @ (nodes**2 * kv))
    sq = float(weights @ kv**2)

    # inner(v) = int_{-1}^{v} (v - u) K(u) du, split at 0 when v > 0
    def inner(v: float) -> float:
        total = 0.0
        for a, b in ((-1.0, min(v, 0.0)), (0.0, v)):
            if b > a:
                u = 0.5 * (b - a) * z + 0.5 * (a + b)
                total += 0.5 * (b - a) * float(w @ ((v - u) * k(u)))
        return total

    c_k = 2.0 * float(sum(wi * kvi * inner(vi) for wi, kvi, vi in zip(weights, kv, nodes)))
    return KernelMoments(mass=mass, first=first, B=second, A=sq, C_K=c_k)


def _quartic(u):
    return 15.0 / 16.0 * (1.0 - u**2) ** 2


def _quartic_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return 15.0 / 16.0 * (u - 2.0 * u**3 / 3.0 + u**5 / 5.0) + 0.5


def quartic_kernel() -> KernelSpec:
    """``K(u) = 15/16 (1 - u^2)^2`` on [-1, 1], with its exact antiderivative."""
    return KernelSpec("quartic", _quartic, _quartic_cdf)


def uniform_kernel() -> KernelSpec:
    """``K(u) = 1/2`` on [-1, 1]."""
    return KernelSpec(
        "uniform",
        lambda u: np.full(np.shape(u), 0.5),
        lambda u: 0.5 * (np.clip(u, -1.0, 1.0) + 1.0),
    )


KERNELS = {"quartic": quartic_kernel, "uniform": uniform_kernel}


def kernel_from_name(name: str) -> KernelSpec:
    try:
        return KERNELS[name]()
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; expected one of {sorted(KERNELS)}") from None


class BoundaryMode(str, Enum):
    NONE = "none"
    RENORM = "renorm"


@dataclass(frozen=True)
class ScaledKernel:
    """``phi_{x,h}(s) = K((x - s)/h) / h`` on [0, 1].

    With ``BoundaryMode.RENORM`` the kernel is cut to [0, 1] and divided by its
    mass there whenever the window ``[x-h, x+h]`` leaves the unit interval.
    """

    x: float
    h: float
    base: KernelSpec
    boundary: BoundaryMode = BoundaryMode.RENORM
    _scale: float = field(default=1.0, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.h > 0.0:
            raise ValueError("bandwidth must be positive")
        object.__setattr__(self, "boundary", BoundaryMode(self.boundary))
        object.__setattr__(self, "_scale", self._compute_scale())

    @property
    def lo(self) -> float:
        return max(0.0, self.x - self.h)

    @property
    def hi(self) -> float:
        return min(1.0, self.x + self.h)

    @property
    def scale(self) -> float:
        """Multiplier applied to the raw scaled kernel (1 unless renormalized)."""
        return self._scale

    def _compute_scale(self) -> float:
        if self.boundary is BoundaryMode.NONE:
            return 1.0
        if self.x - self.h >= 0.0 and self.x + self.h <= 1.0:
            return 1.0
        mass = float(self.base.integral((self.x - 1.0) / self.h, self.x / self.h))
        return 1.0 / mass if mass > 0.0 else 0.0

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        inside = (s >= 0.0) & (s <= 1.0) & (s > self.x - self.h) & (s < self.x + self.h)
        return np.where(inside, self.base((self.x - s) / self.h) / self.h * self.scale, 0.0)

    def integral(self, a, b) -> np.ndarray:
        """``int_a^b phi(s) ds`` for arrays of bounds, with [a, b] clipped to [0, 1]."""
        a = np.clip(np.asarray(a, dtype=float), 0.0, 1.0)
        b = np.clip(np.asarray(b, dtype=float), 0.0, 1.0)
        vals = self.base.integral((self.x - b) / self.h, (self.x - a) / self.h)
        return np.where(b > a, vals * self.scale, 0.0)

    def moment_integral(self, func, a, b, order: int = INTERVAL_ORDER, panels: int = 1) -> np.ndarray:
        """``int_a^b func(s) phi(s) ds`` per interval, restricted to the support.

        ``func`` must be smooth on each interval; ``phi`` is polynomial-smooth
        on the clipped interval so Gauss-Legendre converges quickly. Each
        interval is split into ``panels`` equal pieces for sharply varying
        ``func``. ``func`` receives nodes of shape ``(len(a), panels * order)``.
        """
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        lo = np.maximum(a, self.lo)
        hi = np.minimum(b, self.hi)
        if panels > 1:
            frac = np.arange(panels + 1) / panels
            edges = lo[:, None] + np.maximum(hi - lo, 0.0)[:, None] * frac
            nodes, weights = interval_nodes(edges[:, :-1].ravel(), edges[:, 1:].ravel(), order)
            nodes = nodes.reshape(lo.size, panels * order)
            weights = weights.reshape(lo.size, panels * order)
        else:
            nodes, weights = interval_nodes(lo, hi, order)
        return (weights * func(nodes) * self(nodes)).sum(axis=1)


def phi(sk: ScaledKernel, s):
    """Scaled kernel value at ``s`` (zero outside its support)."""
    out = sk(s)
    return float(out) if np.ndim(out) == 0 else out
