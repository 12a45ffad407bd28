"""Seeded repeated-measurement data, Monte Carlo risk and a normality check.

Errors are Gaussian processes with the model covariance. Every experimental
unit draws from its own counter-based Philox stream whose 128-bit key is
``(seed << 64) ^ unit``. Keeping the seed in the upper word means units of
neighbouring seeds never share a stream. The replication index occupies the
top counter word, so any unit of any replication can be regenerated on its own
and parallel execution cannot change the numbers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import stats
from scipy.integrate import simpson

from .covariance import CovarianceModel, GramMatrix, gram
from .designs import DesignGrid, design_from_spec
from .estimators import weight_matrix
from .kernels import BoundaryMode, kernel_from_name
from .risk import optimal_bandwidth_exact, x_grid

KS_CRITICAL = 1.63  # asymptotic Kolmogorov-Smirnov constant at level ~0.01


@dataclass(frozen=True)
class Curve:
    name: str
    g: Callable[[np.ndarray], np.ndarray]
    gpp: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x):
        return self.g(np.asarray(x, dtype=float))


def _m1(x):
    return 10 * x**3 - 15 * x**4 + 6 * x**5


def _m1pp(x):
    return 60 * x * (1 - x) * (1 - 2 * x)


def _m2(x):
    return x + 0.5 * np.exp(-80 * (x - 0.5) ** 2)


def _m2pp(x):
    return 0.5 * np.exp(-80 * (x - 0.5) ** 2) * (25600 * (x - 0.5) ** 2 - 160)


M1 = Curve("M1", _m1, _m1pp)
M2 = Curve("M2", _m2, _m2pp)
CURVES = {"M1": M1, "M2": M2}


def curve_from_name(name: str) -> Curve:
    try:
        return CURVES[name]
    except KeyError:
        raise ValueError(f"unknown curve {name!r}; expected one of {sorted(CURVES)}") from None


@dataclass(frozen=True)
class Scenario:
    curve: Curve
    model: CovarianceModel
    n: int
    m: int
    design_kind: str = "midpoint"
    kernel: str = "quartic"
    h: Union[float, str] = "optimal-exact"
    replications: int = 100
    seed: int = 0
    boundary: BoundaryMode = BoundaryMode.RENORM

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("scenario needs n >= 2")
        if self.m < 1:
            raise ValueError("scenario needs m >= 1")
        if self.replications < 1:
            raise ValueError("scenario needs replications >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if isinstance(self.h, str) and self.h != "optimal-exact":
            raise ValueError("h must be a number or 'optimal-exact'")

    def design(self) -> DesignGrid:
        return design_from_spec(self.design_kind, self.n)


@dataclass(frozen=True)
class Dataset:
    design: DesignGrid
    ybar: np.ndarray
    raw: Optional[np.ndarray] = None


def unit_stream(seed: int, unit: int, replication: int = 0) -> np.random.Generator:
    """Philox generator for one experimental unit of one replication."""
    counter = [0, 0, 0, int(replication)]
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) ^ int(unit), counter=counter))


def sample_gp(model: CovarianceModel, design: DesignGrid, m: int, seed: int, replication: int = 0,
              gram_matrix: Optional[GramMatrix] = None) -> np.ndarray:
    """``m x n`` matrix of independent centered Gaussian paths with covariance ``Gram``."""
    L = (gram_matrix or gram(model, design)).factor
    z = np.stack([unit_stream(seed, j, replication).standard_normal(design.n) for j in range(m)])
    return z @ L.T


def make_dataset(scenario: Scenario, replication: int = 0, keep_raw: bool = False,
                 gram_matrix: Optional[GramMatrix] = None) -> Dataset:
    design = scenario.design()
    raw = scenario.curve(design.points) + sample_gp(
        scenario.model, design, scenario.m, scenario.seed, replication, gram_matrix
    )
    return Dataset(design, raw.mean(axis=0), raw if keep_raw else None)


@dataclass(frozen=True)
class MonteCarloResult:
    empirical_mise: float
    ise: np.ndarray
    sd: float
    grid: np.ndarray
    mean_curve: np.ndarray
    h: float
    seed: int

    @property
    def standard_error(self) -> float:
        return self.sd / np.sqrt(self.ise.size)


def resolve_bandwidth(scenario: Scenario, method: str, grid=201) -> float:
    if scenario.h != "optimal-exact":
        return float(scenario.h)
    h, _ = optimal_bandwidth_exact(
        method, scenario.model, scenario.curve, kernel_from_name(scenario.kernel), scenario.design(),
        scenario.m, grid=grid, boundary=scenario.boundary,
    )
    return h


def monte_carlo_mise(scenario: Scenario, method: str = "pro", grid=201, w_density: Optional[Callable] = None,
                     threads: int = 1) -> MonteCarloResult:
    """Average integrated squared error of ``method`` over the scenario's replications.

    Weights are built once; each replication only costs one data draw and a
    matrix-vector product. Results are reduced in replication order.
    """
    design = scenario.design()
    gm = gram(scenario.model, design)
    h = resolve_bandwidth(scenario, method, grid)
    xs = x_grid(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    W = weight_matrix(method, scenario.model, kernel_from_name(scenario.kernel), design, h, xs,
                      scenario.boundary, gram_matrix=gm)
    gx = scenario.curve(xs)
    w = np.ones_like(xs) if w_density is None else w_density(xs)

    def one(rep: int) -> np.ndarray:
        return W @ make_dataset(scenario, rep, gram_matrix=gm).ybar

    reps = range(scenario.replications)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            curves = np.array(list(pool.map(one, reps)))
    else:
        curves = np.array([one(r) for r in reps])
    ise = simpson((curves - gx) ** 2 * w, x=xs, axis=1)
    sd = float(ise.std(ddof=1)) if ise.size > 1 else 0.0
    return MonteCarloResult(float(ise.mean()), ise, sd, xs, curves.mean(axis=0), h, scenario.seed)


@dataclass(frozen=True)
class NormalityResult:
    statistic: float
    threshold: float
    passed: bool
    variance_ratio: float


def ks_normality(z) -> NormalityResult:
    """Kolmogorov-Smirnov distance of ``z`` to N(0, 1), judged at ``1.63 / sqrt(len(z))``."""
    z = np.asarray(z, dtype=float)
    stat = float(stats.kstest(z, "norm").statistic)
    threshold = KS_CRITICAL / np.sqrt(z.size)
    return NormalityResult(stat, float(threshold), bool(stat < threshold), float(np.mean(z**2)))


def normality_diagnostic(scenario: Scenario, x: float, method: str = "pro", h: Optional[float] = None) -> NormalityResult:
    """Standardize ``sqrt(m) (ghat(x) - g(x)) / sqrt(R(x, x))`` over replications and test it.

    ``h`` defaults to ``m^{-1/3}``, the regime where the bias is negligible
    against the ``1/sqrt(m)`` noise.
    """
    design = scenario.design()
    gm = gram(scenario.model, design)
    h = float(scenario.m ** (-1.0 / 3.0)) if h is None else h
    w = weight_matrix(method, scenario.model, kernel_from_name(scenario.kernel), design, h, [x],
                      scenario.boundary, gram_matrix=gm)[0]
    est = np.array([w @ make_dataset(scenario, r, gram_matrix=gm).ybar for r in range(scenario.replications)])
    scale = np.sqrt(scenario.m / float(scenario.model.variance(np.array([x]))[0]))
    return ks_normality(scale * (est - float(scenario.curve(np.array([x]))[0])))
