"""Weight vectors of the linear smoothers and their evaluation on averaged data.

Every estimator here is linear in the averaged observations,
``ghat(x) = sum_i w_i(x) * ybar_i``. The projection estimator takes
``w = Gram^{-1} f`` where ``f_i = int_0^1 R(s, t_i) phi_{x,h}(s) ds`` is the
representer of the continuous kernel smoother; the classical competitors use
explicit integrals or point values of ``phi_{x,h}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from ._quadrature import adaptive_columns
from .covariance import CovarianceModel, GeneralizedWiener, GramMatrix, OrnsteinUhlenbeck, gram
from .designs import DesignGrid, active_window, gm_midpoints
from .kernels import BoundaryMode, KernelSpec, ScaledKernel


class Method(str, Enum):
    PROJECTION_EXACT = "pro"
    PROJECTION_WIENER_CLOSED = "pro-wiener"
    PROJECTION_OU_CLOSED = "pro-ou"
    PROJECTION_ASYMPTOTIC = "pro-asym"
    GASSER_MULLER = "gm"
    PRIESTLEY_CHAO = "pc"
    CHENG_LIN = "cl"


CLI_METHODS = ("pro", "pro-fast", "pro-asym", "gm", "pc", "cl")


class MethodError(ValueError):
    pass


def resolve_method(name: str, model: Optional[CovarianceModel] = None) -> Method:
    """Map a CLI method name to a :class:`Method`.

    ``pro-fast`` picks the closed form that matches ``model``.
    """
    if isinstance(name, Method):
        return name
    if name == "pro-fast":
        if isinstance(model, GeneralizedWiener):
            return Method.PROJECTION_WIENER_CLOSED
        if isinstance(model, OrnsteinUhlenbeck):
            return Method.PROJECTION_OU_CLOSED
        raise MethodError("method 'pro-fast' needs a Wiener-type or Ornstein-Uhlenbeck covariance")
    try:
        return Method(name)
    except ValueError:
        raise MethodError(f"unknown method {name!r}; valid methods: {', '.join(CLI_METHODS)}") from None


@dataclass(frozen=True)
class LinearSmoother:
    """Weights of one estimator at one location."""

    method: Method
    x: float
    h: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if not np.all(np.isfinite(w)):
            raise ValueError("smoother weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class RepresenterSamples:
    values: np.ndarray
    x: float
    h: float
    model: CovarianceModel


# -- representer ---------------------------------------------------------------


def representer_values(model: CovarianceModel, sk: ScaledKernel, t, closed_form: bool = True) -> np.ndarray:
    """``f_{x,h}(t) = int_0^1 R(s, t) phi_{x,h}(s) ds`` at arbitrary points ``t``.

    Built-in models use their explicit one-dimensional forms; everything else
    goes through adaptive Gauss-Legendre with panels split at every ``t`` inside
    the kernel window (the diagonal kink of ``R``).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if sk.hi <= sk.lo:
        return np.zeros_like(t)
    if closed_form and isinstance(model, GeneralizedWiener):
        p = model.beta + 1.0
        below = sk.moment_integral(lambda s: s**p, np.zeros_like(t), t)
        above = sk.integral(t, 1.0)
        return model.sigma2 / p * (below + t**p * above)
    if closed_form and isinstance(model, OrnsteinUhlenbeck):
        lam = model.lam
        tt = t[:, None]
        k = _exp_panels(lam, sk.hi - sk.lo)
        below = sk.moment_integral(lambda s: np.exp(-lam * (tt - s)), np.zeros_like(t), t, panels=k)
        above = sk.moment_integral(lambda s: np.exp(-lam * (s - tt)), t, np.ones_like(t), panels=k)
        return model.sigma2 * (below + above)
    inside = t[(t > sk.lo) & (t < sk.hi)]
    breaks = np.unique(np.concatenate(([sk.lo, sk.hi], inside)))
    return adaptive_columns(lambda s: sk(s)[:, None] * model(s[:, None], t[None, :]), breaks)


def _exp_panels(lam: float, length: float) -> int:
    """Panels per interval so that 16-node Gauss-Legendre sees ``exp`` over at most 4 e-folds."""
    return max(1, int(np.ceil(lam * length / 4.0)))


def representer(model: CovarianceModel, sk: ScaledKernel, design: DesignGrid, closed_form: bool = True) -> RepresenterSamples:
    """Representer samples ``f_{x,h}(t_i)`` on the design."""
    values = representer_values(model, sk, design.points, closed_form=closed_form)
    return RepresenterSamples(values=values, x=sk.x, h=sk.h, model=model)


# -- projection ----------------------------------------------------------------


def projection_weights(
    model: CovarianceModel,
    sk: ScaledKernel,
    design: DesignGrid,
    fast: bool = False,
    gram_matrix: Optional[GramMatrix] = None,
) -> LinearSmoother:
    """Projection weights ``Gram^{-1} f_{x,h}``.

    ``fast`` uses the O(n) tridiagonal inverse for Wiener-type and OU models.
    """
    g = gram_matrix if gram_matrix is not None else gram(model, design)
    f = representer(model, sk, design).values
    w = g.solve(f, fast_path=fast)
    return LinearSmoother(Method.PROJECTION_EXACT, sk.x, sk.h, w)


def wiener_closed_weights(beta: float, sk: ScaledKernel, design: DesignGrid) -> np.ndarray:
    """Weights read off the explicit estimator for ``R = int_0^{min(s,t)} u^beta du``.

    Uses ``t_0 = 0``, ``t_{n+1} = 1``, ``ybar(t_0) = 0`` and
    ``ybar(t_{n+1}) = ybar(t_n)``; the virtual last observation is folded into
    the last weight. The noise scale cancels, so it does not appear.
    """
    t = design.points
    n = t.size
    p = beta + 1.0
    aug = design.augmented()
    powers = aug[:-1] ** p  # P_0 .. P_n with P_0 = 0
    cells = sk.integral(aug[:-1], aug[1:])  # int over [t_{i-1}, t_i], i = 1..n+1
    w = cells[:n].copy()
    w[-1] += cells[n]
    left, right = aug[:n], aug[1 : n + 1]  # intervals [t_i, t_{i+1}], i = 0..n-1
    top = right**p
    bend = sk.moment_integral(lambda s: s**p - top[:, None], left, right)
    q = bend / (top - powers[:n])
    w += q
    w[:-1] -= q[1:]
    return w


def projection_wiener_closed(beta: float, sk: ScaledKernel, design: DesignGrid, ybar) -> float:
    """Projection estimate under a generalized Wiener error, without any matrix solve."""
    ybar = _check_data(ybar, design.n)
    return _dot(wiener_closed_weights(beta, sk, design), ybar)


def ou_closed_weights(lam: float, sk: ScaledKernel, design: DesignGrid) -> np.ndarray:
    """Weights read off the explicit estimator for ``R = exp(-lam |s - t|)``.

    The unit-rate formula is applied in the time scale ``lam * t``.

    Raises:
        ValueError: for designs with fewer than two points.
    """
    t = design.points
    n = t.size
    if n < 2:
        raise ValueError("the Ornstein-Uhlenbeck closed form needs n >= 2")
    k = _exp_panels(lam, 2.0 * design.max_spacing())

    def mi(func, a, b):
        return sk.moment_integral(func, a, b, panels=k)

    w = np.zeros(n)
    if n > 2:
        tk = t[1:-1, None]
        w[1:-1] = mi(lambda s: np.exp(lam * (tk - s)), t[:-2], t[1:-1]) + mi(
            lambda s: np.exp(lam * (s - tk)), t[1:-1], t[2:]
        )
    w[0] += mi(lambda s: np.exp(lam * (s - t[0])), 0.0, t[1])[0]
    w[-1] += mi(lambda s: np.exp(lam * (t[-1] - s)), t[-2], 1.0)[0]
    lo, hi = t[:-1], t[1:]
    c = 1.0 / -np.expm1(-2.0 * lam * (hi - lo))
    a = mi(lambda s: np.exp(lam * (hi[:, None] - s)), lo, hi)
    b = mi(lambda s: np.exp(lam * (s - hi[:, None])), lo, hi)
    a0 = mi(lambda s: np.exp(lam * (lo[:, None] - s)), lo, hi)
    b0 = mi(lambda s: np.exp(lam * (s - lo[:, None])), lo, hi)
    w[1:] += c * (b - a)
    w[:-1] += c * (a0 - b0)
    return w


def projection_ou_closed(lam: float, sk: ScaledKernel, design: DesignGrid, ybar) -> float:
    """Projection estimate under an Ornstein-Uhlenbeck error, without any matrix solve."""
    ybar = _check_data(ybar, design.n)
    return _dot(ou_closed_weights(lam, sk, design), ybar)


def asymptotic_projection_weights(model: CovarianceModel, sk: ScaledKernel, design: DesignGrid) -> LinearSmoother:
    """Large-n approximation ``0.5 * (t_{i+1} - t_{i-1}) * phi(t_i)`` of the projection weights.

    The first and last design points and points outside the active window get
    zero weight. ``model`` only fixes the regime; the rule itself is free of R.
    """
    t = design.points
    w = np.zeros(t.size)
    if t.size >= 3:
        idx = active_window(design, sk.x, sk.h).indices
        idx = idx[(idx > 0) & (idx < t.size - 1)]
        w[idx] = 0.5 * (t[idx + 1] - t[idx - 1]) * sk(t[idx])
    return LinearSmoother(Method.PROJECTION_ASYMPTOTIC, sk.x, sk.h, w)


# -- classical competitors -----------------------------------------------------


def gm_weights(sk: ScaledKernel, design: DesignGrid) -> LinearSmoother:
    """Gasser-Muller weights: ``phi`` integrated over the cells between midpoints."""
    s = gm_midpoints(design)
    return LinearSmoother(Method.GASSER_MULLER, sk.x, sk.h, sk.integral(s[:-1], s[1:]))


def priestley_chao_weights(sk: ScaledKernel, design: DesignGrid) -> LinearSmoother:
    """``(t_{i+1} - t_i) * phi(t_i)`` with ``t_{n+1} = 1``."""
    t = design.points
    gaps = np.diff(np.append(t, 1.0))
    return LinearSmoother(Method.PRIESTLEY_CHAO, sk.x, sk.h, gaps * sk(t))


def cheng_lin_weights(sk: ScaledKernel, design: DesignGrid) -> LinearSmoother:
    """``int_{t_{i-1}}^{t_i} phi`` with ``t_0 = 0``: Gasser-Muller cells moved to the design points."""
    t = design.points
    return LinearSmoother(Method.CHENG_LIN, sk.x, sk.h, sk.integral(np.concatenate(([0.0], t[:-1])), t))


# -- dispatch ------------------------------------------------------------------


def smoother(
    method,
    model: CovarianceModel,
    kernel: KernelSpec,
    design: DesignGrid,
    x: float,
    h: float,
    boundary: BoundaryMode = BoundaryMode.RENORM,
    gram_matrix: Optional[GramMatrix] = None,
) -> LinearSmoother:
    """Weights of ``method`` at ``x``; ``method`` may be a CLI string."""
    method = resolve_method(method, model)
    sk = ScaledKernel(float(x), float(h), kernel, boundary)
    if method is Method.PROJECTION_EXACT:
        return projection_weights(model, sk, design, fast=False, gram_matrix=gram_matrix)
    if method is Method.PROJECTION_WIENER_CLOSED:
        if not isinstance(model, GeneralizedWiener):
            raise MethodError("the Wiener closed form needs a Wiener-type covariance")
        return LinearSmoother(method, sk.x, sk.h, wiener_closed_weights(model.beta, sk, design))
    if method is Method.PROJECTION_OU_CLOSED:
        if not isinstance(model, OrnsteinUhlenbeck):
            raise MethodError("the Ornstein-Uhlenbeck closed form needs an OU covariance")
        return LinearSmoother(method, sk.x, sk.h, ou_closed_weights(model.lam, sk, design))
    if method is Method.PROJECTION_ASYMPTOTIC:
        return asymptotic_projection_weights(model, sk, design)
    if method is Method.GASSER_MULLER:
        return gm_weights(sk, design)
    if method is Method.PRIESTLEY_CHAO:
        return priestley_chao_weights(sk, design)
    return cheng_lin_weights(sk, design)


def weight_matrix(
    method,
    model: CovarianceModel,
    kernel: KernelSpec,
    design: DesignGrid,
    h: float,
    xs,
    boundary: BoundaryMode = BoundaryMode.RENORM,
    gram_matrix: Optional[GramMatrix] = None,
) -> np.ndarray:
    """Stack of weight vectors, one row per evaluation point in ``xs``.

    The projection path solves all right-hand sides against one factorization.
    """
    method = resolve_method(method, model)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if method is Method.PROJECTION_EXACT:
        g = gram_matrix if gram_matrix is not None else gram(model, design)
        reps = np.array(
            [representer_values(model, ScaledKernel(float(x), h, kernel, boundary), design.points) for x in xs]
        )
        return g.solve(reps.T, fast_path=False).T
    return np.array(
        [smoother(method, model, kernel, design, float(x), h, boundary).weights for x in xs]
    )


def estimate(sm: LinearSmoother, ybar) -> float:
    """``sum_i w_i * ybar_i``."""
    ybar = _check_data(ybar, sm.weights.size)
    return _dot(sm.weights, ybar)


def _check_data(ybar, n: int) -> np.ndarray:
    ybar = np.asarray(ybar, dtype=float)
    if ybar.shape[0] != n:
        raise ValueError(f"data has length {ybar.shape[0]}, expected {n}")
    return ybar


def _dot(w: np.ndarray, ybar: np.ndarray):
    out = w @ ybar
    return float(out) if np.ndim(out) == 0 else out
