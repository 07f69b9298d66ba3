"""Anscombe residuals for Bernoulli fits and the |r| >= threshold outlier rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .divergence import PROB_EPS

__all__ = [
    "ResidualReport",
    "incomplete_beta",
    "regularized_incomplete_beta",
    "anscombe_residuals",
]

_CF_MAX_ITER = 500
_CF_EPS = 1e-16
_TINY = 1e-300


def _betacf(x, a, b):
    """Modified Lentz evaluation of the incomplete beta continued fraction."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"continued fraction did not converge for x={x}, a={a}, b={b}")


def _reg_ibeta_scalar(x, a, b):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = a * np.log(x) + b * np.log1p(-x) - betaln(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        return float(np.exp(log_front) * _betacf(x, a, b) / a)
    return float(1.0 - np.exp(log_front) * _betacf(1.0 - x, b, a) / b)


def _validate(x, a, b):
    if not (a > 0 and b > 0):
        raise ValueError("incomplete beta parameters must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(~((x >= 0) & (x <= 1))):
        raise ValueError("x must lie in [0, 1]")
    return x


def regularized_incomplete_beta(x, a, b):
    """I_x(a, b), the incomplete beta integral divided by B(a, b)."""
    x = _validate(x, a, b)
    out = np.vectorize(_reg_ibeta_scalar, otypes=[float])(x, float(a), float(b))
    return out[()] if out.ndim == 0 else out


def incomplete_beta(x, a, b):
    """Unregularized integral of t^(a-1) (1-t)^(b-1) over [0, x]."""
    return regularized_incomplete_beta(x, a, b) * np.exp(betaln(a, b))


@dataclass(frozen=True)
class ResidualReport:
    residuals: np.ndarray
    flagged: np.ndarray
    threshold: float = 2.0


def anscombe_residuals(y, fitted, threshold: float = 2.0) -> ResidualReport:
    """Bernoulli Anscombe residuals from labels and fitted probabilities.

    `fitted` is a vector of probabilities or any object with a `probs`
    attribute (a `FitResult`). Probabilities at 0 or 1 are clamped.
    """
    mu = np.asarray(getattr(fitted, "probs", fitted), dtype=float)
    y = np.asarray(y, dtype=float)
    if mu.shape != y.shape:
        raise ValueError("labels and fitted values differ in length")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be 0 or 1")
    mu = np.clip(mu, PROB_EPS, 1.0 - PROB_EPS)
    ab = 2.0 / 3.0
    num = incomplete_beta(y, ab, ab) - incomplete_beta(mu, ab, ab)
    r = num / (mu * (1.0 - mu)) ** (1.0 / 6.0)
    r = np.atleast_1d(r)
    flagged = np.flatnonzero(np.abs(r) >= threshold)
    return ResidualReport(r, flagged, float(threshold))
