"""Penalized minimum density power divergence fits for functional logistic regression.

The objective minimized is the sum form

    sum_i l_kappa(Y_i, H(alpha + <X_i, beta>)) + lam * theta' P theta

with beta = sum_k theta_k B_k. Dividing by n recovers the mean form with
penalty lam / n (see `FitConfig.from_mean_form`). Each Fisher-scoring update
is a penalized weighted least-squares solve, followed by step halving until
the objective does not increase.

Linear algebra runs in the eigenbasis of the penalty, where the penalty is
diagonal and Jacobi scaling keeps the normal equations well conditioned even
for very large `lam`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special
from scipy.linalg import lapack

from .basis import (
    BSplineBasis,
    Grid,
    curve_basis_inner_products,
    eval_basis,
    gram_matrix,
    penalty_matrix,
)
from .divergence import Link, as_link, fisher_weight, loss_d1, loss_d2, loss_eta

__all__ = [
    "SingularDesignError",
    "NearSingularWarning",
    "FunctionalDataset",
    "DesignMatrices",
    "FitConfig",
    "FitResult",
    "build_design",
    "make_design",
    "irls_weights",
    "penalized_objective",
    "penalized_gradient",
    "fit",
    "fit_design",
    "covariance",
    "edf",
    "predict",
]

COND_LIMIT = 1e12
NULL_EIG_RTOL = 1e-9
MAX_HALVINGS = 10


class SingularDesignError(np.linalg.LinAlgError):
    pass


class NearSingularWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class FunctionalDataset:
    """n curves sampled on a common grid with binary labels."""

    curves: np.ndarray
    labels: np.ndarray
    grid: Grid

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.curves, dtype=float))
        y = np.asarray(self.labels).ravel()
        if X.shape[0] < 1:
            raise ValueError("dataset needs at least one curve")
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} curves but {y.size} labels")
        if X.shape[1] != len(self.grid):
            raise ValueError(
                f"curves have {X.shape[1]} sample points but the grid has {len(self.grid)}"
            )
        if np.any((y != 0) & (y != 1)):
            raise ValueError("labels must be 0 or 1")
        X.setflags(write=False)
        y = y.astype(float)
        y.setflags(write=False)
        object.__setattr__(self, "curves", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.labels.size


@dataclass(frozen=True)
class DesignMatrices:
    """Augmented design [1 | <X_i, theta_k>], zero-padded penalty and Gram matrix.

    `rotation` and `penalty_eigenvalues` diagonalize `Pstar`; eigenvalues below
    a relative threshold are set to exactly zero so the polynomial null space
    of the derivative penalty is reproduced without round-off.
    """

    Bstar: np.ndarray
    Pstar: np.ndarray
    P0: np.ndarray
    rotation: np.ndarray
    penalty_eigenvalues: np.ndarray
    Brot: np.ndarray

    @property
    def n_coef(self) -> int:
        return self.Bstar.shape[1]


def make_design(B, P, P0=None) -> DesignMatrices:
    """Assemble design matrices from inner products `B` (n x K) and penalty `P`."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    P = np.asarray(P, dtype=float)
    K = B.shape[1]
    if P.shape != (K, K):
        raise ValueError(f"penalty must be {K} x {K}, got {P.shape}")
    if P0 is None:
        P0 = np.eye(K)
    P0 = np.asarray(P0, dtype=float)
    if P0.shape != (K, K):
        raise ValueError(f"Gram matrix must be {K} x {K}, got {P0.shape}")
    ev, V = np.linalg.eigh((P + P.T) / 2)
    top = ev.max() if ev.size else 0.0
    ev = np.where(ev > NULL_EIG_RTOL * max(top, 0.0), ev, 0.0)
    rot = np.zeros((K + 1, K + 1))
    rot[0, 0] = 1.0
    rot[1:, 1:] = V
    evs = np.concatenate([[0.0], ev])
    Pstar = (rot * evs) @ rot.T
    Bstar = np.column_stack([np.ones(B.shape[0]), B])
    return DesignMatrices(Bstar, Pstar, P0, rot, evs, Bstar @ rot)


def build_design(dataset: FunctionalDataset, basis: BSplineBasis, penalty_order: int = 2) -> DesignMatrices:
    if basis.dimension > dataset.n:
        warnings.warn(
            f"basis dimension {basis.dimension} exceeds the sample size {dataset.n}",
            stacklevel=2,
        )
    B = curve_basis_inner_products(dataset.curves, basis, dataset.grid)
    P = penalty_matrix(basis, dataset.grid, penalty_order).entries
    P0 = gram_matrix(basis, dataset.grid).entries
    return make_design(B, P, P0)


@dataclass(frozen=True)
class FitConfig:
    kappa: float = 0.0
    lam: float = 0.0
    link: Link = Link("logit")
    tol: float = 1e-8
    max_iter: int = 100
    init: Optional[np.ndarray] = None

    def __post_init__(self):
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError("kappa must be finite and nonnegative")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError("lam must be finite and nonnegative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        object.__setattr__(self, "link", as_link(self.link))

    @classmethod
    def from_mean_form(cls, kappa, lam_mean, n, **kw):
        """Config for the averaged objective (1/n) sum l + lam_mean * J."""
        return cls(kappa=kappa, lam=lam_mean * n, **kw)


@dataclass(frozen=True)
class FitResult:
    alpha: float
    theta: np.ndarray
    eta: np.ndarray
    probs: np.ndarray
    cov: Optional[np.ndarray]
    edf: float
    objective: float
    converged: bool
    iterations: int
    kappa: float
    lam: float
    link: Link
    grad_norm: float
    grad_norm_init: float
    history: tuple = field(default=(), repr=False)

    @property
    def coef(self) -> np.ndarray:
        return np.concatenate([[self.alpha], self.theta])

    @property
    def stationary(self) -> bool:
        return self.grad_norm < 1e-6 * (1.0 + self.grad_norm_init)

    def beta(self, basis: BSplineBasis, grid) -> np.ndarray:
        """Coefficient function evaluated on `grid`."""
        return eval_basis(basis, grid) @ self.theta


def irls_weights(y, eta, kappa, link="logit"):
    """Fisher-scoring weights w and working responses z.

    For kappa = 0 and the logit link these are the textbook IRLS quantities
    w = p(1-p) and z = eta + (y-p)/(p(1-p)).
    """
    link = as_link(link)
    w = fisher_weight(eta, kappa, link)
    if np.any(~(w > 0)):
        raise FloatingPointError("degenerate IRLS weight (w <= 0)")
    z = np.asarray(eta, dtype=float) - loss_d1(y, eta, kappa, link) / w
    return w, z


def penalized_objective(coef, design: DesignMatrices, y, kappa, lam, link="logit") -> float:
    coef = np.asarray(coef, dtype=float)
    eta = design.Bstar @ coef
    return float(np.sum(loss_eta(y, eta, kappa, link)) + lam * coef @ design.Pstar @ coef)


def penalized_gradient(coef, design: DesignMatrices, y, kappa, lam, link="logit") -> np.ndarray:
    coef = np.asarray(coef, dtype=float)
    eta = design.Bstar @ coef
    return design.Bstar.T @ loss_d1(y, eta, kappa, link) + 2 * lam * design.Pstar @ coef


class _ScaledFactor:
    """Factorization of a symmetric matrix after Jacobi scaling.

    Condition numbers come from the LAPACK 1-norm estimators; above
    `COND_LIMIT` a small ridge is added and a warning issued.
    """

    def __init__(self, A, *, spd, what="normal equations"):
        d = np.sqrt(np.abs(np.diag(A)))
        d[d == 0] = 1.0
        self.d = d
        self.spd = spd
        self.what = what
        As = A / np.outer(d, d)
        self.cond = self._factor(As)
        if self.cond > COND_LIMIT:
            warnings.warn(
                f"{what} are near singular (condition number {self.cond:.3g}); adding a ridge",
                NearSingularWarning,
                stacklevel=3,
            )
            As = As + 1e-8 * np.mean(np.abs(np.diag(As))) * np.eye(As.shape[0])
            if self._factor(As) == np.inf:
                raise SingularDesignError(f"{what} are singular (condition number {self.cond:.3g})")

    def _factor(self, As):
        anorm = np.abs(As).sum(axis=0).max()
        if self.spd:
            c, info = lapack.dpotrf(As, lower=0, clean=1)
            if info == 0:
                rcond, _ = lapack.dpocon(c, anorm)
                self._kind, self._fac = "chol", c
                return np.inf if rcond == 0 else 1.0 / rcond
        lu, piv, info = lapack.dgetrf(As)
        if info != 0:
            return np.inf
        rcond, _ = lapack.dgecon(lu, anorm)
        self._kind, self._fac = "lu", (lu, piv)
        return np.inf if rcond == 0 else 1.0 / rcond

    def solve(self, rhs):
        d = self.d if rhs.ndim == 1 else self.d[:, None]
        r = rhs / d
        if self._kind == "chol":
            x, info = lapack.dpotrs(self._fac, r, lower=0)
        else:
            x, info = lapack.dgetrs(self._fac[0], self._fac[1], r)
        if info != 0 or not np.all(np.isfinite(x)):
            raise SingularDesignError(f"{self.what} are singular (condition number {self.cond:.3g})")
        return x / d


def _default_init(y, n_coef, link):
    ybar = np.clip(np.mean(y), 0.01, 0.99)
    if link.kind == "logit":
        a0 = special.logit(ybar)
    elif link.kind == "probit":
        a0 = special.ndtri(ybar)
    else:
        a0 = np.log(-np.log1p(-ybar))
    c = np.zeros(n_coef)
    c[0] = a0
    return c


def fit_design(design: DesignMatrices, y, config: FitConfig) -> FitResult:
    """Fit on precomputed design matrices (used by the selection loops)."""
    y = np.asarray(y, dtype=float)
    kappa, lam, link = float(config.kappa), float(config.lam), config.link
    U, evs, Br = design.rotation, design.penalty_eigenvalues, design.Brot
    pen = 2 * lam * evs

    if config.init is None:
        c = _default_init(y, design.n_coef, link)
    else:
        c = np.asarray(config.init, dtype=float).copy()
        if c.shape != (design.n_coef,):
            raise ValueError(f"init must have length {design.n_coef}")
    a = U.T @ c

    def objective(a, eta):
        return float(np.sum(loss_eta(y, eta, kappa, link)) + lam * np.sum(evs * a * a))

    eta = Br @ a
    obj = objective(a, eta)
    grad0 = np.abs(penalized_gradient(c, design, y, kappa, lam, link)).max()
    history = [obj]
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        # B'Wz written as B'(w*eta - l') so saturated rows with w ~ 0 stay finite
        w = fisher_weight(eta, kappa, link)
        A = Br.T @ (Br * w[:, None])
        A[np.diag_indices_from(A)] += pen
        rhs = Br.T @ (w * eta - loss_d1(y, eta, kappa, link))
        a_new = _ScaledFactor(A, spd=True).solve(rhs)
        step = a_new - a
        s = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            a_try = a + s * step
            eta_try = Br @ a_try
            obj_try = objective(a_try, eta_try)
            if obj_try <= obj + 1e-12 * (1.0 + abs(obj)):
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        change = s * np.linalg.norm(step)
        a, eta, obj = a_try, eta_try, obj_try
        history.append(obj)
        if change <= config.tol * (1.0 + np.linalg.norm(a)):
            converged = True
            break

    c = U @ a
    eta = design.Bstar @ c
    obj = penalized_objective(c, design, y, kappa, lam, link)
    grad = np.abs(penalized_gradient(c, design, y, kappa, lam, link)).max()
    if not converged and grad < 1e-6 * (1.0 + grad0):
        # step halving stalls only at round-off level once the score vanishes
        converged = True
    p, _ = link.probs(eta)
    cov, df = None, np.nan
    try:
        cov, df = _sandwich(design, y, a, eta, kappa, lam, link)
    except SingularDesignError:
        pass
    return FitResult(
        alpha=float(c[0]),
        theta=c[1:],
        eta=eta,
        probs=p,
        cov=cov,
        edf=df,
        objective=obj,
        converged=converged,
        iterations=it,
        kappa=kappa,
        lam=lam,
        link=link,
        grad_norm=float(grad),
        grad_norm_init=float(grad0),
        history=tuple(history),
    )


def fit(dataset: FunctionalDataset, basis: BSplineBasis, config: FitConfig, penalty_order: int = 2) -> FitResult:
    if np.unique(dataset.labels).size < 2:
        warnings.warn("only one label value present; the fit is degenerate", stacklevel=2)
    design = build_design(dataset, basis, penalty_order)
    return fit_design(design, dataset.labels, config)


def _sandwich(design, y, a, eta, kappa, lam, link):
    Br = design.Brot
    d1 = loss_d1(y, eta, kappa, link)
    d2 = loss_d2(y, eta, kappa, link)
    BDB = Br.T @ (Br * d2[:, None])
    bread = BDB.copy()
    bread[np.diag_indices_from(bread)] += 2 * lam * design.penalty_eigenvalues
    meat = Br.T @ (Br * (d1**2)[:, None])
    fac = _ScaledFactor(bread, spd=False, what="sandwich bread matrix")
    half = fac.solve(meat)
    cov_rot = fac.solve(half.T)
    cov_rot = (cov_rot + cov_rot.T) / 2
    df = float(np.trace(fac.solve(BDB)))
    U = design.rotation
    return U @ cov_rot @ U.T, df


def covariance(result: FitResult, design: DesignMatrices, y, kappa=None, lam=None) -> np.ndarray:
    """Sandwich covariance of (alpha, theta) with observed curvature in the bread."""
    kappa = result.kappa if kappa is None else kappa
    lam = result.lam if lam is None else lam
    a = design.rotation.T @ result.coef
    return _sandwich(design, np.asarray(y, float), a, result.eta, kappa, lam, result.link)[0]


def edf(result: FitResult, design: DesignMatrices, y, kappa=None, lam=None) -> float:
    """Trace of [B*' D B* + 2 lam P*]^-1 B*' D B*."""
    kappa = result.kappa if kappa is None else kappa
    lam = result.lam if lam is None else lam
    a = design.rotation.T @ result.coef
    return _sandwich(design, np.asarray(y, float), a, result.eta, kappa, lam, result.link)[1]


def predict(result: FitResult, basis: BSplineBasis, new_curves, grid: Grid) -> np.ndarray:
    """Success probabilities H(alpha + <X, beta>) for new curves on the fitting grid."""
    B = curve_basis_inner_products(new_curves, basis, grid)
    coef = np.concatenate([[result.alpha], result.theta])
    eta = np.column_stack([np.ones(B.shape[0]), B]) @ coef
    return result.link.probs(eta)[0]
