"""Autocovariance models of the error process and linear algebra on their Gram matrices.

Two families have an explicit tridiagonal inverse on any design and get O(n)
solves: the generalized Wiener process ``R(s, t) = sigma2 * min(s, t)**(beta+1)/(beta+1)``
(``beta = 0`` is the standard Wiener process) and the stationary
Ornstein-Uhlenbeck process ``R(s, t) = sigma2 * exp(-lam * |s - t|)``.
Anything else goes through :class:`CustomCovariance` and a dense Cholesky solve.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

from .designs import DesignGrid

FD_STEP = 1e-5


class CovarianceError(ValueError):
    """Invalid covariance parameters or arguments outside the unit interval."""


class GramFactorizationError(np.linalg.LinAlgError):
    """The Gram matrix is not numerically positive definite.

    ``pivot`` is the 1-based order of the leading minor that failed.
    """

    def __init__(self, pivot: int, n: int):
        self.pivot = pivot
        self.n = n
        super().__init__(
            f"Gram matrix of order {n} is not positive definite "
            f"(leading minor {pivot} failed); retry with an explicit jitter"
        )


class ApproximateJumpWarning(UserWarning):
    """The jump function was obtained by finite differences."""


def _check_unit(name: str, value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(~np.isfinite(arr)):
        raise CovarianceError(f"{name} must lie in [0, 1]")
    return arr


class CovarianceModel:
    """Base class: a known autocovariance ``R`` on [0, 1]^2.

    Subclasses implement the vectorized :meth:`__call__`, :meth:`jump` and,
    when available, :meth:`apply_inverse` (the O(n) Gram solve).
    """

    kind: str = "custom"

    def __call__(self, s, t) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def jump(self, t) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def variance(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self(t, t)

    @property
    def has_closed_form(self) -> bool:
        return False

    def apply_inverse(self, points: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no closed-form Gram inverse")

    def to_json(self) -> dict:
        raise CovarianceError(f"{type(self).__name__} cannot be serialized")


@dataclass(frozen=True)
class GeneralizedWiener(CovarianceModel):
    """``R(s, t) = sigma2 * int_0^{min(s,t)} u**beta du``."""

    beta: float = 0.0
    sigma2: float = 1.0
    kind: str = field(default="generalized-wiener", init=False, repr=False)

    def __post_init__(self):
        if not self.beta >= 0.0:
            raise CovarianceError("beta must be >= 0")
        if not self.sigma2 > 0.0:
            raise CovarianceError("sigma2 must be > 0")

    def __call__(self, s, t):
        p = self.beta + 1.0
        return self.sigma2 * np.minimum(s, t) ** p / p

    def jump(self, t):
        return self.sigma2 * np.asarray(t, dtype=float) ** self.beta

    @property
    def has_closed_form(self) -> bool:
        return True

    def apply_inverse(self, points, rhs):
        # u' R^{-1} v = sum_k (u_k - u_{k-1})(v_k - v_{k-1}) / (F_k - F_{k-1}) / sigma2
        # with F = t**(beta+1)/(beta+1) and u_0 = v_0 = F_0 = 0.
        p = self.beta + 1.0
        big_f = np.concatenate(([0.0], points**p / p))
        dF = np.diff(big_f)
        if np.any(dF <= 0.0):
            raise GramFactorizationError(int(np.flatnonzero(dF <= 0.0)[0]) + 1, points.size)
        rhs = np.asarray(rhs, dtype=float)
        zero = np.zeros((1,) + rhs.shape[1:])
        y = np.diff(np.concatenate((zero, rhs)), axis=0)
        y /= dF.reshape((-1,) + (1,) * (rhs.ndim - 1))
        out = y - np.concatenate((y[1:], zero))
        return out / self.sigma2

    def to_json(self) -> dict:
        if self.beta == 0.0:
            return {"kind": "wiener", "params": {"sigma2": self.sigma2}}
        return {"kind": "generalized-wiener", "params": {"beta": self.beta, "sigma2": self.sigma2}}


def Wiener(sigma2: float = 1.0) -> GeneralizedWiener:
    """Standard Wiener covariance ``sigma2 * min(s, t)``."""
    return GeneralizedWiener(beta=0.0, sigma2=sigma2)


@dataclass(frozen=True)
class OrnsteinUhlenbeck(CovarianceModel):
    """Stationary ``R(s, t) = sigma2 * exp(-lam |s - t|)``."""

    lam: float = 1.0
    sigma2: float = 1.0
    kind: str = field(default="ou", init=False, repr=False)

    def __post_init__(self):
        if not self.lam > 0.0:
            raise CovarianceError("lambda must be > 0")
        if not self.sigma2 > 0.0:
            raise CovarianceError("sigma2 must be > 0")

    def __call__(self, s, t):
        return self.sigma2 * np.exp(-self.lam * np.abs(np.subtract(s, t)))

    def jump(self, t):
        return np.full(np.shape(t), 2.0 * self.sigma2 * self.lam)

    @property
    def has_closed_form(self) -> bool:
        return True

    def precision_bands(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal and first off-diagonal of the inverse Gram matrix."""
        n = points.size
        if n == 1:
            return np.array([1.0 / self.sigma2]), np.empty(0)
        rho = np.exp(-self.lam * np.diff(points))
        denom = -np.expm1(-2.0 * self.lam * np.diff(points))  # 1 - rho**2
        if np.any(denom <= 0.0):
            raise GramFactorizationError(int(np.flatnonzero(denom <= 0.0)[0]) + 2, n)
        diag = np.empty(n)
        diag[0] = 1.0 / denom[0]
        diag[-1] = 1.0 / denom[-1]
        # interior: (1 - rho_{i-1}^2 rho_i^2) / ((1 - rho_{i-1}^2)(1 - rho_i^2))
        diag[1:-1] = 1.0 / denom[:-1] + 1.0 / denom[1:] - 1.0
        off = -rho / denom
        return diag / self.sigma2, off / self.sigma2

    def apply_inverse(self, points, rhs):
        diag, off = self.precision_bands(points)
        rhs = np.asarray(rhs, dtype=float)
        shape = (-1,) + (1,) * (rhs.ndim - 1)
        out = diag.reshape(shape) * rhs
        if off.size:
            off = off.reshape(shape)
            out[:-1] += off * rhs[1:]
            out[1:] += off * rhs[:-1]
        return out

    def to_json(self) -> dict:
        return {"kind": "ou", "params": {"lambda": self.lam, "sigma2": self.sigma2}}


@dataclass(frozen=True)
class CustomCovariance(CovarianceModel):
    """User-supplied covariance.

    ``func`` must be vectorized over broadcastable arrays. Without ``alpha`` the
    jump is estimated by one-sided second-order finite differences of step
    ``FD_STEP`` and an :class:`ApproximateJumpWarning` is emitted; the jump only
    enters the asymptotic formulas, never the exact risk.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    alpha: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"

    def __call__(self, s, t):
        return np.asarray(self.func(np.asarray(s, dtype=float), np.asarray(t, dtype=float)), dtype=float)

    def jump(self, t):
        t = np.asarray(t, dtype=float)
        if self.alpha is not None:
            return np.asarray(self.alpha(t), dtype=float) * np.ones_like(t)
        warnings.warn("jump function estimated by finite differences", ApproximateJumpWarning, stacklevel=3)
        d = FD_STEP
        if np.any(t - 2 * d < 0.0) or np.any(t + 2 * d > 1.0):
            raise CovarianceError("finite-difference jump needs t in [2e-5, 1 - 2e-5]")
        r0 = self(t, t)
        left = (3.0 * r0 - 4.0 * self(t, t - d) + self(t, t - 2 * d)) / (2 * d)
        right = (-3.0 * r0 + 4.0 * self(t, t + d) - self(t, t + 2 * d)) / (2 * d)
        return left - right


def eval_cov(model: CovarianceModel, s, t):
    """``R(s, t)`` with a domain check; scalars in, scalar out."""
    s_arr, t_arr = _check_unit("s", s), _check_unit("t", t)
    out = model(s_arr, t_arr)
    return float(out) if np.ndim(out) == 0 else out


def jump_alpha(model: CovarianceModel, t):
    """Jump ``R^{(0,1)}(t, t-) - R^{(0,1)}(t, t+)`` of the diagonal derivative, for t in (0, 1)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0) or np.any(t_arr >= 1.0):
        raise CovarianceError("the jump function is defined on the open interval (0, 1)")
    out = model.jump(t_arr)
    return float(out) if np.ndim(out) == 0 else out


class GramMatrix:
    """``(R(t_i, t_j))`` on a design with a lazily computed Cholesky factor.

    The factor is computed at most once, under a lock; afterwards the object is
    read-only and safe to share between threads.
    """

    def __init__(self, model: CovarianceModel, design: DesignGrid, jitter: float = 0.0):
        self.model = model
        self.design = design
        self.jitter = float(jitter)
        t = design.points
        values = model(t[:, None], t[None, :])
        values = 0.5 * (values + values.T)
        if self.jitter:
            values = values + self.jitter * np.eye(t.size)
        values.setflags(write=False)
        self.values = values
        self._factor: Optional[np.ndarray] = None
        self._lock = threading.Lock()

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def factor(self) -> np.ndarray:
        """Lower-triangular ``L`` with ``L @ L.T == values``."""
        if self._factor is None:
            with self._lock:
                if self._factor is None:
                    c, info = dpotrf(self.values, lower=1, clean=1, overwrite_a=0)
                    if info > 0:
                        raise GramFactorizationError(int(info), self.n)
                    if info < 0:  # pragma: no cover - argument error in LAPACK
                        raise np.linalg.LinAlgError(f"dpotrf argument {-info} invalid")
                    c.setflags(write=False)
                    self._factor = c
        return self._factor

    def fast_path_available(self) -> bool:
        return self.model.has_closed_form and self.jitter == 0.0

    def solve(self, rhs, fast_path: bool = False) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ValueError(f"right-hand side has {rhs.shape[0]} rows, Gram matrix has order {self.n}")
        if fast_path and self.fast_path_available():
            return self.model.apply_inverse(self.design.points, rhs)
        return cho_solve((self.factor, True), rhs)


def gram(model: CovarianceModel, design: DesignGrid, jitter: float = 0.0) -> GramMatrix:
    """Gram matrix of ``model`` on ``design``; ``jitter`` is added to the diagonal only if asked."""
    return GramMatrix(model, design, jitter=jitter)


def gram_solve(g: GramMatrix, rhs, fast_path: bool = True) -> np.ndarray:
    """Solve ``Gram @ x = rhs``; O(n) for Wiener-type and OU models when ``fast_path``."""
    return g.solve(rhs, fast_path=fast_path)


def quadratic_form(g: GramMatrix, u, v, fast_path: bool = True) -> float:
    """``u' Gram^{-1} v``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (g.n,) or v.shape != (g.n,):
        raise ValueError(f"vectors must have length {g.n}")
    return float(u @ g.solve(v, fast_path=fast_path))


def covariance_from_json(obj: dict) -> CovarianceModel:
    """Parse ``{"kind": ..., "params": {...}}``."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise CovarianceError("covariance must be an object with a 'kind' field")
    kind = obj["kind"]
    params = dict(obj.get("params", {}))
    if kind == "wiener":
        return GeneralizedWiener(beta=0.0, sigma2=float(params.get("sigma2", 1.0)))
    if kind == "generalized-wiener":
        return GeneralizedWiener(beta=float(params.get("beta", 0.0)), sigma2=float(params.get("sigma2", 1.0)))
    if kind == "ou":
        return OrnsteinUhlenbeck(lam=float(params.get("lambda", 1.0)), sigma2=float(params.get("sigma2", 1.0)))
    raise CovarianceError(f"unknown covariance kind {kind!r}; expected 'wiener', 'generalized-wiener' or 'ou'")
