"""Exact and asymptotic risk of the linear smoothers, and bandwidth selection.

Everything exact here follows from linearity: with weights ``w(x)`` the bias is
``sum_i w_i g(t_i) - g(x)`` and the variance is ``w' Gram w / m`` because the
``m`` error processes are i.i.d. Integrated quantities use composite Simpson
on a uniform grid in x.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar

from ._quadrature import panel_nodes
from .covariance import CovarianceModel, GramMatrix, gram, jump_alpha
from .designs import DesignGrid
from .estimators import LinearSmoother, Method, representer_values, resolve_method, weight_matrix
from .kernels import BoundaryMode, KernelSpec, ScaledKernel

DEFAULT_GRID = 201
RESIDUAL_ROUNDOFF = 1e-12


class RiskError(ValueError):
    pass


def _uniform_density(x):
    return np.ones_like(np.asarray(x, dtype=float))


# -- pointwise exact risk ------------------------------------------------------


def exact_bias(sm: LinearSmoother, g: Callable, design: DesignGrid) -> float:
    """``E ghat(x) - g(x) = sum_i w_i g(t_i) - g(x)``."""
    return float(sm.weights @ g(design.points) - g(sm.x))


def exact_variance(sm: LinearSmoother, model: CovarianceModel, design: DesignGrid, m: int,
                   gram_matrix: Optional[GramMatrix] = None) -> float:
    """``w' Gram w / m``."""
    if m < 1:
        raise RiskError("m must be >= 1")
    values = (gram_matrix or gram(model, design)).values
    w = sm.weights
    return float(w @ values @ w) / m


def sigma2_xh(model: CovarianceModel, sk: ScaledKernel, panels: int = 4, order: int = 16) -> float:
    """RKHS norm ``int int phi(s) R(s, t) phi(t) ds dt`` of the representer.

    The outer integral runs over the kernel support with Gauss-Legendre; the
    inner one is the representer itself, which is smooth in ``t`` there.
    """
    if sk.hi <= sk.lo:
        return 0.0
    nodes, weights = panel_nodes(np.linspace(sk.lo, sk.hi, panels + 1), order)
    return float(weights @ (sk(nodes) * representer_values(model, sk, nodes)))


def residual_norm2(model: CovarianceModel, sk: ScaledKernel, design: DesignGrid,
                   gram_matrix: Optional[GramMatrix] = None) -> float:
    """``||f - P f||^2 = sigma2_xh - f' Gram^{-1} f``, the distance of the representer to the span.

    Values in ``[-1e-12, 0)`` are rounding and clamp to 0; anything more negative
    is returned unchanged so callers can see it.
    """
    g = gram_matrix or gram(model, design)
    f = representer_values(model, sk, design.points)
    value = sigma2_xh(model, sk) - float(f @ g.solve(f))
    if -RESIDUAL_ROUNDOFF <= value < 0.0:
        return 0.0
    return value


def rkhs_residual(model: CovarianceModel, sk: ScaledKernel, design: DesignGrid, weights,
                  gram_matrix: Optional[GramMatrix] = None, sigma2: Optional[float] = None) -> float:
    """``||f - sum_i w_i R(., t_i)||^2 = sigma2 - 2 w'f + w' Gram w`` for any weights."""
    g = gram_matrix or gram(model, design)
    w = np.asarray(weights, dtype=float)
    f = representer_values(model, sk, design.points)
    s2 = sigma2_xh(model, sk) if sigma2 is None else sigma2
    return s2 - 2.0 * float(w @ f) + float(w @ g.values @ w)


# -- integrated exact risk -----------------------------------------------------


@dataclass(frozen=True)
class RiskReport:
    grid: np.ndarray
    bias2: np.ndarray
    variance: np.ndarray
    mse: np.ndarray
    Ibias2: float
    Ivar: float
    IMSE: float
    h: float
    method: str
    m: int
    weight_density: str = "uniform"

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["x", "bias2", "var", "mse"])
        for row in zip(self.grid, self.bias2, self.variance, self.mse):
            out.writerow([fmt(v) for v in row])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "method": self.method,
            "m": self.m,
            "h": float(self.h),
            "Ibias2": float(self.Ibias2),
            "Ivar": float(self.Ivar),
            "IMSE": float(self.IMSE),
            "weight_density": self.weight_density,
        }

    def to_json(self) -> str:
        return json.dumps({k: (fmt(v) if isinstance(v, float) else v) for k, v in self.summary().items()}, sort_keys=True)


def fmt(value: float) -> str:
    """Six significant digits, the output precision used everywhere."""
    return f"{float(value):.6g}"


def x_grid(size: int = DEFAULT_GRID) -> np.ndarray:
    if size < 3:
        raise RiskError("the x-grid needs at least 3 points")
    return np.linspace(0.0, 1.0, size)


def risk_report(
    method,
    model: CovarianceModel,
    g: Callable,
    kernel: KernelSpec,
    design: DesignGrid,
    h: float,
    m: int,
    w_density: Optional[Callable] = None,
    grid=DEFAULT_GRID,
    boundary: BoundaryMode = BoundaryMode.RENORM,
    density_name: str = "uniform",
) -> RiskReport:
    """Exact bias^2, variance and MSE on an x-grid and their Simpson integrals against ``w``."""
    if not 0.0 < h < 1.0:
        raise RiskError(f"bandwidth must lie in (0, 1), got {h}")
    if m < 1:
        raise RiskError("m must be >= 1")
    method = resolve_method(method, model)
    xs = x_grid(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    gm = gram(model, design)
    W = weight_matrix(method, model, kernel, design, h, xs, boundary, gram_matrix=gm)
    bias2 = (W @ g(design.points) - g(xs)) ** 2
    var = np.einsum("ij,jk,ik->i", W, gm.values, W) / m
    mse = bias2 + var
    w = (w_density or _uniform_density)(xs)
    ib = float(simpson(bias2 * w, x=xs))
    iv = float(simpson(var * w, x=xs))
    return RiskReport(xs, bias2, var, mse, ib, iv, ib + iv, float(h), method.value, int(m), density_name)


def exact_imse(method, model, g, kernel, design, h, m, w_density=None, grid=DEFAULT_GRID,
               boundary: BoundaryMode = BoundaryMode.RENORM) -> float:
    return risk_report(method, model, g, kernel, design, h, m, w_density, grid, boundary).IMSE


# -- asymptotic risk -----------------------------------------------------------


class Flavor(str, Enum):
    GENERAL = "general"
    WIENER = "wiener"
    GM = "gm"


@dataclass(frozen=True)
class AsymptoticRisk:
    """Integrals entering the leading IMSE terms, together with the kernel constants."""

    R_bar: float
    alpha_bar: float
    gpp_bar: float
    ou_term: float
    A: float
    B: float
    C_K: float

    def __post_init__(self):
        if not self.alpha_bar > 0.0:
            raise RiskError("alpha_bar must be positive")


def asymptotic_constants(
    model: CovarianceModel,
    gpp: Callable,
    kernel: KernelSpec,
    w_density: Optional[Callable] = None,
    f_density: Optional[Callable] = None,
    panels: int = 64,
) -> AsymptoticRisk:
    """Integrate ``R(x,x)``, ``alpha``, ``(g'')^2`` and ``alpha/f^2`` against ``w`` on (0, 1)."""
    w_density = w_density or _uniform_density
    f_density = f_density or _uniform_density
    nodes, weights = panel_nodes(np.linspace(0.0, 1.0, panels + 1), 16)
    ww = weights * w_density(nodes)
    alpha = jump_alpha(model, nodes)
    mom = kernel.moments
    return AsymptoticRisk(
        R_bar=float(ww @ model.variance(nodes)),
        alpha_bar=float(ww @ alpha),
        gpp_bar=float(ww @ gpp(nodes) ** 2),
        ou_term=float(ww @ (alpha / f_density(nodes) ** 2)),
        A=mom.A,
        B=mom.B,
        C_K=mom.C_K,
    )


def asymptotic_imse(consts: AsymptoticRisk, h: float, m: int, flavor=Flavor.GENERAL, n: Optional[int] = None) -> float:
    """Leading terms of the asymptotic IMSE (no order terms).

    ``Flavor.WIENER`` adds the ``-A/(12 m n^2 h) int alpha w / f^2`` correction
    that exact projection weights earn under a Wiener error; it needs ``n``.
    """
    flavor = Flavor(flavor)
    value = consts.R_bar / m - consts.C_K * h * consts.alpha_bar / (2.0 * m) + consts.B**2 * h**4 * consts.gpp_bar / 4.0
    if flavor is Flavor.WIENER:
        if n is None:
            raise RiskError("the Wiener flavor needs the design size n")
        value -= consts.A / (12.0 * m * n**2 * h) * consts.ou_term
    return value


def optimal_bandwidth_closed(consts: AsymptoticRisk, m: int, variant: str = "derived") -> float:
    """Minimizer of the leading asymptotic IMSE.

    ``variant="derived"`` differentiates the ``B^2 h^4 / 4`` term and gives
    ``(C_K alpha_bar / (2 B^2 gpp_bar))^{1/3} m^{-1/3}``; ``variant="paper"``
    uses ``2 B`` in the denominator instead.
    """
    if not consts.gpp_bar > 0.0:
        raise RiskError("no interior minimizer: the curvature integral of g'' vanishes")
    if variant == "derived":
        denom = 2.0 * consts.B**2 * consts.gpp_bar
    elif variant == "paper":
        denom = 2.0 * consts.B * consts.gpp_bar
    else:
        raise RiskError(f"unknown bandwidth variant {variant!r}; expected 'derived' or 'paper'")
    return float(np.cbrt(consts.C_K * consts.alpha_bar / denom / m))


def optimal_bandwidth_exact(
    method,
    model: CovarianceModel,
    g: Callable,
    kernel: KernelSpec,
    design: DesignGrid,
    m: int,
    w_density: Optional[Callable] = None,
    interval: Optional[tuple[float, float]] = None,
    grid=DEFAULT_GRID,
    boundary: BoundaryMode = BoundaryMode.RENORM,
    scan: int = 24,
    xatol: float = 1e-5,
) -> tuple[float, float]:
    """Minimize the exact IMSE over ``h`` in ``interval`` (default ``[1.5/n, 0.6]``).

    A uniform scan picks the best bracket (the first one on ties, so smaller
    ``h`` wins), then bounded Brent (golden section with parabolic steps)
    refines inside it.

    Raises:
        RiskError: if the IMSE is not finite somewhere on the scan.
    """
    lo, hi = interval if interval is not None else (1.5 / design.n, 0.6)
    if not 0.0 < lo < hi < 1.0:
        raise RiskError(f"search interval must satisfy 0 < lo < hi < 1, got ({lo}, {hi})")
    gm = gram(model, design)
    method = resolve_method(method, model)
    xs = x_grid(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    w = (w_density or _uniform_density)(xs)
    gt, gx = g(design.points), g(xs)

    def imse(h: float) -> float:
        W = weight_matrix(method, model, kernel, design, h, xs, boundary, gram_matrix=gm)
        mse = (W @ gt - gx) ** 2 + np.einsum("ij,jk,ik->i", W, gm.values, W) / m
        return float(simpson(mse * w, x=xs))

    hs = np.linspace(lo, hi, scan + 1)
    vals = np.array([imse(h) for h in hs])
    if not np.all(np.isfinite(vals)):
        bad = hs[~np.isfinite(vals)][0]
        raise RiskError(f"exact IMSE is not finite at h={bad:.6g}")
    k = int(np.argmin(vals))
    a, b = hs[max(k - 1, 0)], hs[min(k + 1, scan)]
    res = minimize_scalar(imse, bounds=(a, b), method="bounded", options={"xatol": xatol})
    if res.fun < vals[k]:
        return float(res.x), float(res.fun)
    return float(hs[k]), float(vals[k])


def variance_gap_limit(model: CovarianceModel, kernel: KernelSpec, f_density: Optional[Callable], x: float) -> float:
    """Limit of ``m n^2 h (Var GM - Var projection)`` at ``x``: ``(A/12) alpha(x) / f(x)^2``."""
    f = float((f_density or _uniform_density)(np.array([x]))[0])
    return kernel.moments.A / 12.0 * float(jump_alpha(model, x)) / f**2
