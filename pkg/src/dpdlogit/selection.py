"""Data-driven choice of the penalty (AIC) and the robustness tuning (iterated AMISE)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .divergence import Link, as_link, loss_eta
from .model import DesignMatrices, FitConfig, FitResult, edf, fit_design

__all__ = [
    "SelectionError",
    "SelectionConfig",
    "LambdaSelection",
    "KappaStep",
    "KappaSelection",
    "aic",
    "select_lambda",
    "amise",
    "select_kappa",
]


class SelectionError(RuntimeError):
    pass


def _default_kappa_grid():
    return np.linspace(0.0, 2.0, 20)


def _default_lambda_grid():
    return np.logspace(-8, 2, 30)


@dataclass(frozen=True)
class SelectionConfig:
    kappa_grid: np.ndarray = field(default_factory=_default_kappa_grid)
    lambda_grid: np.ndarray = field(default_factory=_default_lambda_grid)
    max_outer_iter: int = 20
    pilot_kappa: float = 2.0
    # every kappa fit warm-starts from the fit at this kappa
    init_kappa: float = 2.0
    link: Link = Link("logit")
    tol: float = 1e-8
    max_iter: int = 100

    def __post_init__(self):
        kg = np.sort(np.asarray(self.kappa_grid, dtype=float).ravel())
        lg = np.sort(np.asarray(self.lambda_grid, dtype=float).ravel())
        if kg.size == 0 or lg.size == 0:
            raise ValueError("kappa and lambda grids must be nonempty")
        if np.any(kg < 0) or np.any(lg < 0):
            raise ValueError("grid values must be nonnegative")
        if not kg[0] <= self.pilot_kappa <= kg[-1]:
            raise ValueError(
                f"pilot kappa {self.pilot_kappa} lies outside the grid range [{kg[0]}, {kg[-1]}]"
            )
        if self.max_outer_iter < 1:
            raise ValueError("max_outer_iter must be at least 1")
        object.__setattr__(self, "kappa_grid", kg)
        object.__setattr__(self, "lambda_grid", lg)
        object.__setattr__(self, "link", as_link(self.link))


def aic(y, result: FitResult, design: DesignMatrices, kappa=None, lam=None) -> float:
    """2 * sum of losses + 2 * effective degrees of freedom."""
    kappa = result.kappa if kappa is None else kappa
    lam = result.lam if lam is None else lam
    df = result.edf if (kappa == result.kappa and lam == result.lam) else np.nan
    if not np.isfinite(df):
        df = edf(result, design, y, kappa, lam)
    return float(2 * np.sum(loss_eta(y, result.eta, kappa, result.link)) + 2 * df)


@dataclass(frozen=True)
class LambdaSelection:
    lambda_hat: float
    fit: FitResult
    # rows in input grid order: (lam, aic, edf, converged, stationary)
    table: list

    @property
    def n_converged(self) -> int:
        return sum(row[3] for row in self.table)

    @property
    def n_nonstationary(self) -> int:
        return sum(1 for row in self.table if row[3] and not row[4])


def select_lambda(
    design: DesignMatrices,
    y,
    kappa: float,
    lambda_grid,
    *,
    link="logit",
    init: Optional[np.ndarray] = None,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> LambdaSelection:
    """Minimize AIC over `lambda_grid`.

    Fits run from the largest penalty down, each warm-started at the previous
    solution, so the result does not depend on the order of the grid. Ties go
    to the smaller penalty.
    """
    grid = np.asarray(lambda_grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    y = np.asarray(y, dtype=float)
    link = as_link(link)
    fits = {}
    start = init
    for lam in sorted(set(grid.tolist()), reverse=True):
        res = fit_design(design, y, FitConfig(kappa, lam, link, tol, max_iter, start))
        fits[lam] = res
        if np.all(np.isfinite(res.coef)):
            start = res.coef

    table = []
    for lam in grid.tolist():
        res = fits[lam]
        score = aic(y, res, design) if np.isfinite(res.edf) else np.nan
        table.append((lam, score, res.edf, res.converged, res.stationary))
    ok = [(row[1], row[0]) for row in table if row[3] and np.isfinite(row[1])]
    if not ok:
        raise SelectionError(
            f"no fit converged for kappa={kappa}: "
            + ", ".join(f"lam={row[0]:g} (converged={row[3]})" for row in table)
        )
    _, lam_hat = min(ok)
    return LambdaSelection(lam_hat, fits[lam_hat], table)


def amise(candidate_theta, pilot_theta, P0, cov_bb) -> float:
    """Squared P0-distance to the pilot plus the P0-weighted variance trace."""
    d = np.asarray(candidate_theta, float) - np.asarray(pilot_theta, float)
    P0 = np.asarray(P0, float)
    cov_bb = np.asarray(cov_bb, float)
    if P0.shape != (d.size, d.size) or cov_bb.shape != P0.shape:
        raise ValueError("dimension mismatch between coefficients, P0 and covariance")
    return float(d @ P0 @ d + np.sum(P0 * cov_bb.T))


@dataclass(frozen=True)
class KappaStep:
    pilot_kappa: float
    amise: np.ndarray
    kappa_min: float


@dataclass(frozen=True)
class KappaSelection:
    kappa_hat: float
    lambda_hat: float
    fit: FitResult
    trace: list
    converged: bool
    cycled: bool
    paths: dict

    @property
    def n_nonstationary(self) -> int:
        return sum(p.n_nonstationary for p in self.paths.values())


def select_kappa(design: DesignMatrices, y, config: SelectionConfig = SelectionConfig()) -> KappaSelection:
    """Iterated AMISE minimization over the kappa grid.

    Each kappa gets its own AIC-selected penalty. The pilot starts at
    `config.pilot_kappa` and is replaced by the current minimizer until the
    minimizer repeats. A cycle of length > 1 returns the member with the
    smallest AMISE and sets `cycled`.
    """
    y = np.asarray(y, dtype=float)
    kw = dict(link=config.link, tol=config.tol, max_iter=config.max_iter)
    paths = {}

    def path(kappa, init=None):
        if kappa not in paths:
            paths[kappa] = select_lambda(design, y, kappa, config.lambda_grid, init=init, **kw)
        return paths[kappa]

    anchor = path(float(config.init_kappa)).fit.coef
    grid = [float(k) for k in config.kappa_grid]
    for k in grid:
        path(k, anchor)
    path(float(config.pilot_kappa), anchor)

    P0 = design.P0

    def variance_term(res):
        if res.cov is None:
            return None
        return res.cov[1:, 1:]

    trace = []
    pilot = float(config.pilot_kappa)
    converged = cycled = False
    kappa_hat = pilot
    for _ in range(config.max_outer_iter):
        pilot_theta = paths[pilot].fit.theta
        values = np.array(
            [
                np.inf
                if variance_term(paths[k].fit) is None
                else amise(paths[k].fit.theta, pilot_theta, P0, variance_term(paths[k].fit))
                for k in grid
            ]
        )
        kmin = grid[int(np.argmin(values))]
        trace.append(KappaStep(pilot, values, kmin))
        kappa_hat = kmin
        if kmin == pilot:
            converged = True
            break
        earlier = [i for i, step in enumerate(trace[:-1]) if step.pilot_kappa == kmin]
        if earlier:
            window = trace[earlier[0] :]
            best = min(window, key=lambda s: (float(np.min(s.amise)), s.kappa_min))
            kappa_hat = best.kappa_min
            cycled = True
            break
        pilot = kmin

    chosen = paths[kappa_hat]
    return KappaSelection(
        kappa_hat=kappa_hat,
        lambda_hat=chosen.lambda_hat,
        fit=chosen.fit,
        trace=trace,
        converged=converged,
        cycled=cycled,
        paths=paths,
    )
