"""Clamped B-spline bases on [0, 1], quadrature grids and penalty matrices.

Inner products are trapezoid sums over a shared evaluation grid. Derivatives of
the basis come from the analytic recurrence, and the roughness penalty is
integrated with the same grid weights as the design matrix so both sides of
the fit see one quadrature rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "BSplineBasis",
    "PenaltyMatrix",
    "make_uniform_grid",
    "grid_from_points",
    "make_basis",
    "default_dimension",
    "eval_basis",
    "gram_matrix",
    "penalty_matrix",
    "curve_basis_inner_products",
]


@dataclass(frozen=True)
class Grid:
    """Evaluation abscissae in [0, 1] with their quadrature weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pts.ndim != 1 or pts.shape != wts.shape:
            raise ValueError("grid points and weights must be 1-d arrays of equal length")
        if pts.size < 2:
            raise ValueError("a grid needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise ValueError("grid points must lie in [0, 1]")
        if np.any(wts < 0):
            raise ValueError("quadrature weights must be nonnegative")
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    def __len__(self):
        return self.points.size

    def integrate(self, values):
        """Riemann sum of `values` (last axis runs over the grid)."""
        return np.asarray(values, dtype=float) @ self.weights


def _trapezoid_weights(points):
    gaps = np.diff(points)
    wts = np.zeros_like(points)
    wts[:-1] += gaps / 2
    wts[1:] += gaps / 2
    return wts


def make_uniform_grid(m: int) -> Grid:
    """`m` equidistant points spanning [0, 1] with trapezoid weights.

    Interior weights are 1/(m-1) and the two endpoints get half of that, so
    the weights sum to 1 and inner products with the clamped boundary basis
    functions converge at the same rate as interior ones.
    """
    if int(m) != m or m < 2:
        raise ValueError(f"grid size must be an integer >= 2, got {m!r}")
    points = np.linspace(0.0, 1.0, int(m))
    return Grid(points, _trapezoid_weights(points))


def grid_from_points(points) -> Grid:
    """Grid for arbitrary increasing abscissae in [0, 1] (trapezoid weights)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 1 or pts.size < 2:
        raise ValueError("need at least two grid points")
    return Grid(pts, _trapezoid_weights(pts))


@dataclass(frozen=True)
class BSplineBasis:
    """Clamped B-spline basis of a given order (4 = cubic) on [0, 1]."""

    order: int
    interior_knots: np.ndarray

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 2:
            raise ValueError("spline order must be an integer >= 2")
        knots = np.asarray(self.interior_knots, dtype=float).ravel()
        if knots.size and (knots[0] <= 0.0 or knots[-1] >= 1.0):
            raise ValueError("interior knots must lie strictly inside (0, 1)")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("interior knots must be strictly increasing")
        knots.setflags(write=False)
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "interior_knots", knots)

    @property
    def dimension(self) -> int:
        return self.interior_knots.size + self.order

    @property
    def knots(self) -> np.ndarray:
        """Full knot vector with boundary knots repeated `order` times."""
        k = self.order
        return np.concatenate([np.zeros(k), self.interior_knots, np.ones(k)])

    def evaluate(self, t, deriv: int = 0) -> np.ndarray:
        """Matrix of basis functions (or their derivatives) at points `t`."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.ndim != 1:
            raise ValueError("evaluation points must be 1-d")
        if np.any(t < 0.0) or np.any(t > 1.0) or np.any(~np.isfinite(t)):
            raise ValueError("evaluation points must lie in [0, 1]")
        if deriv < 0 or deriv >= self.order:
            raise ValueError(f"derivative order must be in [0, {self.order - 1}]")
        return _bspline_design(self.knots, self.order, t, deriv)


def _bspline_design(knots, order, x, deriv):
    n_span = knots.size - 1
    # order-1 indicators; x == 1 falls into the last non-degenerate span
    span = np.searchsorted(knots, x, side="right") - 1
    last = np.flatnonzero(knots[1:] > knots[:-1]).max()
    span = np.clip(span, 0, last)
    B = np.zeros((x.size, n_span))
    B[np.arange(x.size), span] = 1.0

    def ratio(num, den):
        out = np.zeros_like(num)
        np.divide(num, den, out=out, where=den > 0)
        return out

    for k in range(2, order - deriv + 1):
        n_fun = knots.size - k
        left = knots[:n_fun]
        right = knots[k : k + n_fun]
        a = ratio(x[:, None] - left, knots[k - 1 : k - 1 + n_fun] - left)
        b = ratio(right - x[:, None], right - knots[1 : 1 + n_fun])
        B = a * B[:, :n_fun] + b * B[:, 1 : 1 + n_fun]

    for k in range(order - deriv + 1, order + 1):
        n_fun = knots.size - k
        d_left = knots[k - 1 : k - 1 + n_fun] - knots[:n_fun]
        d_right = knots[k : k + n_fun] - knots[1 : 1 + n_fun]
        inv_l = ratio(np.ones(n_fun), d_left)
        inv_r = ratio(np.ones(n_fun), d_right)
        B = (k - 1) * (B[:, :n_fun] * inv_l - B[:, 1 : 1 + n_fun] * inv_r)
    return B


@dataclass(frozen=True)
class PenaltyMatrix:
    """Symmetric K x K matrix of integrated products of q-th derivatives.

    `factor` (optional) satisfies entries = factor' factor; quadratic forms
    use it to avoid cancellation on null-space vectors.
    """

    entries: np.ndarray
    derivative_order: int = 2
    factor: np.ndarray | None = None

    def quadratic_form(self, v) -> float:
        v = np.asarray(v, dtype=float)
        if self.factor is not None:
            r = self.factor @ v
            return float(r @ r)
        return float(v @ self.entries @ v)


def _weighted_products(D, weights):
    F = D * np.sqrt(weights)[:, None]
    M = F.T @ F
    return (M + M.T) / 2, F


def make_basis(K_target: int, order: int = 4) -> BSplineBasis:
    """Basis of dimension exactly `K_target` with equidistant interior knots."""
    if order < 2:
        raise ValueError("spline order must be >= 2")
    if K_target < order:
        raise ValueError(f"basis dimension {K_target} is below the spline order {order}")
    n_interior = int(K_target) - int(order)
    knots = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    return BSplineBasis(order, knots)


def default_dimension(n: int, order: int = 4) -> int:
    """floor(min(30, n/4)), never below the spline order."""
    return max(int(np.floor(min(30.0, n / 4.0))), order)


def _points(grid):
    return grid.points if isinstance(grid, Grid) else np.asarray(grid, dtype=float)


def eval_basis(basis: BSplineBasis, grid) -> np.ndarray:
    """|grid| x K matrix with entry (j, k) = theta_k(t_j)."""
    return basis.evaluate(_points(grid))


def gram_matrix(basis: BSplineBasis, grid: Grid) -> PenaltyMatrix:
    G, F = _weighted_products(basis.evaluate(grid.points), grid.weights)
    return PenaltyMatrix(G, derivative_order=0, factor=F)


def penalty_matrix(basis: BSplineBasis, grid: Grid, q: int = 2) -> PenaltyMatrix:
    if q < 0 or q >= basis.order:
        raise ValueError(f"penalty order {q} must be below the spline order {basis.order}")
    P, F = _weighted_products(basis.evaluate(grid.points, deriv=q), grid.weights)
    return PenaltyMatrix(P, derivative_order=q, factor=F)


def curve_basis_inner_products(curves, basis: BSplineBasis, grid: Grid) -> np.ndarray:
    """n x K matrix of Riemann-sum inner products <X_i, theta_k>."""
    X = np.atleast_2d(np.asarray(curves, dtype=float))
    if X.shape[1] != len(grid):
        raise ValueError(
            f"curves have {X.shape[1]} sample points but the grid has {len(grid)}"
        )
    Phi = basis.evaluate(grid.points)
    return (X * grid.weights) @ Phi
