"""Density power divergence for Bernoulli densities and the per-observation loss.

The loss for tuning parameter kappa > 0 is

    l_kappa(y, p) = p**(1+kappa) + (1-p)**(1+kappa) - (1 + 1/kappa) * f_p(y)**kappa

and kappa = 0 is the negative log-likelihood. Derivatives with respect to the
linear predictor are written through the link ratios H'/H and H'/(1-H) so no
division by p(1-p) occurs; they stay finite for saturated predictors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "PROB_EPS",
    "Link",
    "DivergenceParams",
    "clamp_prob",
    "bernoulli_density",
    "dpd",
    "loss",
    "loss_eta",
    "loss_d1",
    "loss_d2",
    "fisher_weight",
    "score_expectation",
]

PROB_EPS = 1e-10
LINKS = ("logit", "probit", "cloglog")


def clamp_prob(p):
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


@dataclass(frozen=True)
class Link:
    """Inverse link H mapping the real line onto (0, 1)."""

    kind: str = "logit"

    def __post_init__(self):
        if self.kind not in LINKS:
            raise ValueError(f"unknown link {self.kind!r}; choose from {LINKS}")

    def __call__(self, eta):
        return self.probs(eta)[0]

    def probs(self, eta):
        """(H(eta), 1 - H(eta)), each computed without cancellation."""
        eta = np.asarray(eta, dtype=float)
        if self.kind == "logit":
            return special.expit(eta), special.expit(-eta)
        if self.kind == "probit":
            return special.ndtr(eta), special.ndtr(-eta)
        e = np.exp(eta)
        return -np.expm1(-e), np.exp(-e)

    def log_probs(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.kind == "logit":
            return -np.logaddexp(0.0, -eta), -np.logaddexp(0.0, eta)
        if self.kind == "probit":
            return special.log_ndtr(eta), special.log_ndtr(-eta)
        e = np.exp(eta)
        with np.errstate(divide="ignore"):
            return np.log(-np.expm1(-e)), -e

    def deriv(self, eta):
        """H'(eta)."""
        eta = np.asarray(eta, dtype=float)
        if self.kind == "logit":
            return special.expit(eta) * special.expit(-eta)
        if self.kind == "probit":
            return np.exp(-0.5 * eta**2) / np.sqrt(2 * np.pi)
        return np.exp(eta - np.exp(eta))

    def ratios(self, eta):
        """(H'/H, H'/(1-H)) evaluated stably."""
        eta = np.asarray(eta, dtype=float)
        if self.kind == "logit":
            return special.expit(-eta), special.expit(eta)
        if self.kind == "probit":
            logphi = -0.5 * eta**2 - 0.5 * np.log(2 * np.pi)
            return (
                np.exp(logphi - special.log_ndtr(eta)),
                np.exp(logphi - special.log_ndtr(-eta)),
            )
        e = np.exp(eta)
        with np.errstate(over="ignore", invalid="ignore"):
            r1 = np.where(e > 0, e / np.expm1(e), 1.0)
        return np.nan_to_num(r1, nan=0.0), e

    def curvature(self, eta):
        """H''/H', so that H'' = H' * curvature."""
        eta = np.asarray(eta, dtype=float)
        if self.kind == "logit":
            return -np.tanh(eta / 2)
        if self.kind == "probit":
            return -eta
        return 1.0 - np.exp(eta)


def as_link(link) -> Link:
    return link if isinstance(link, Link) else Link(link)


@dataclass(frozen=True)
class DivergenceParams:
    kappa: float = 0.0
    link: Link = Link("logit")

    def __post_init__(self):
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError("kappa must be a finite nonnegative number")
        object.__setattr__(self, "link", as_link(self.link))


def _check_prob(p, name="p"):
    p = np.asarray(p, dtype=float)
    if np.any(~(p >= 0.0) | ~(p <= 1.0)):
        raise ValueError(f"{name} must lie in [0, 1]")
    return p


def _check_label(y):
    y = np.asarray(y)
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be 0 or 1")
    return y.astype(float)


def bernoulli_density(p, y):
    p = _check_prob(p)
    y = _check_label(y)
    return np.where(y == 1, p, 1.0 - p)


def dpd(p_h, p_f, kappa):
    """Density power divergence d_kappa(h, f) between Bernoulli(p_h) and Bernoulli(p_f).

    For kappa = 0 this is the Kullback-Leibler divergence; it is +inf when h
    puts mass on an outcome that f rules out.
    """
    p_h = _check_prob(p_h, "p_h")
    p_f = _check_prob(p_f, "p_f")
    kappa = np.asarray(kappa, dtype=float)
    if np.any(~(kappa >= 0)):
        raise ValueError("kappa must be nonnegative")
    p_h, p_f, kappa = np.broadcast_arrays(p_h, p_f, kappa)
    h = np.stack([p_h, 1.0 - p_h])
    f = np.stack([p_f, 1.0 - p_f])
    with np.errstate(divide="ignore", invalid="ignore"):
        kl = np.where(h > 0, h * (np.log(h) - np.log(f)), 0.0).sum(axis=0)
        k = np.where(kappa > 0, kappa, 1.0)
        power = (f ** (1 + k) - (1 + 1 / k) * h * f**k + h ** (1 + k) / k).sum(axis=0)
    out = np.where(kappa > 0, power, kl)
    return out[()] if out.ndim == 0 else out


def loss(y, p, kappa):
    """Per-observation loss l_kappa(y, p); kappa = 0 gives -log f_p(y)."""
    y = _check_label(y)
    p = _check_prob(p)
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if kappa == 0:
        if np.any((p == 0) | (p == 1)):
            raise ValueError("kappa = 0 needs p strictly inside (0, 1)")
        out = -(y * np.log(p) + (1 - y) * np.log1p(-p))
    else:
        q = 1.0 - p
        fy = np.where(y == 1, p, q)
        out = p ** (1 + kappa) + q ** (1 + kappa) - (1 + 1 / kappa) * fy**kappa
    return out[()] if np.ndim(out) == 0 else out


def loss_eta(y, eta, kappa, link="logit"):
    """Loss as a function of the linear predictor (no validation; hot path)."""
    link = as_link(link)
    y = np.asarray(y, dtype=float)
    if kappa == 0:
        lp, lq = link.log_probs(eta)
        return -(y * lp + (1 - y) * lq)
    p, q = link.probs(eta)
    fy = y * p + (1 - y) * q
    return p ** (1 + kappa) + q ** (1 + kappa) - (1 + 1 / kappa) * fy**kappa


def _pieces(eta, kappa, link):
    p, q = link.probs(eta)
    r1, r0 = link.ratios(eta)
    dH = link.deriv(eta)
    pk = p**kappa
    qk = q**kappa
    return p, q, r1, r0, dH, pk, qk


def loss_d1(y, eta, kappa, link="logit"):
    """d l_kappa / d eta."""
    link = as_link(link)
    y = np.asarray(y, dtype=float)
    p, q, r1, r0, dH, pk, qk = _pieces(eta, kappa, link)
    return (1 + kappa) * (dH * (pk - qk) - y * pk * r1 + (1 - y) * qk * r0)


def loss_d2(y, eta, kappa, link="logit"):
    """Observed second derivative d^2 l_kappa / d eta^2."""
    link = as_link(link)
    y = np.asarray(y, dtype=float)
    p, q, r1, r0, dH, pk, qk = _pieces(eta, kappa, link)
    g = link.curvature(eta)
    curv = kappa * dH * (pk * r1 + qk * r0)
    conc = (kappa - 1) * (y * pk * r1**2 + (1 - y) * qk * r0**2)
    slope = dH * (pk - qk) - y * pk * r1 + (1 - y) * qk * r0
    return (1 + kappa) * (curv - conc + g * slope)


def fisher_weight(eta, kappa, link="logit"):
    """Expected second derivative of the loss in eta under Bernoulli(H(eta)).

    Equals (1+kappa) E{f^kappa(Y) (Y-p)^2} H'^2 / (p(1-p))^2.
    """
    link = as_link(link)
    p, q, r1, r0, dH, pk, qk = _pieces(eta, kappa, link)
    return (1 + kappa) * dH * (pk * r1 + qk * r0)


def score_expectation(p, kappa):
    """E_p{f_p^kappa(Y) (Y - p) / (p(1-p))} = p^kappa - (1-p)^kappa."""
    p = np.asarray(p, dtype=float)
    return p**kappa - (1.0 - p) ** kappa
