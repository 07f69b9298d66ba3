import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpdlogit.divergence import (
    DivergenceParams,
    Link,
    bernoulli_density,
    dpd,
    fisher_weight,
    loss,
    loss_d1,
    loss_d2,
    loss_eta,
    score_expectation,
)

LINKS = ["logit", "probit", "cloglog"]


@pytest.mark.parametrize("p,y,expected", [(0.5, 1, 0.5), (1.0, 0, 0.0), (0.8, 0, 0.2)])
def test_bernoulli_density(p, y, expected):
    assert bernoulli_density(p, y) == pytest.approx(expected, abs=1e-15)


def test_bernoulli_density_domain():
    with pytest.raises(ValueError):
        bernoulli_density(1.2, 1)
    with pytest.raises(ValueError):
        bernoulli_density(0.5, 2)


def test_dpd_examples():
    assert dpd(0.3, 0.3, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert dpd(1.0, 0.0, 1.0) == pytest.approx(2.0, abs=1e-15)
    assert dpd(0.8, 0.5, 1.0) == pytest.approx(0.18, abs=1e-14)


def test_dpd_zero_kappa_is_kl():
    ph, pf = 0.7, 0.4
    kl = ph * np.log(ph / pf) + (1 - ph) * np.log((1 - ph) / (1 - pf))
    assert dpd(ph, pf, 0.0) == pytest.approx(kl, rel=1e-14)
    assert dpd(1.0, 0.0, 0.0) == np.inf
    assert dpd(0.0, 0.0, 0.0) == 0.0


def test_dpd_rejects_bad_input():
    with pytest.raises(ValueError):
        dpd(0.5, 0.5, -1.0)
    with pytest.raises(ValueError):
        dpd(-0.1, 0.5, 1.0)


def test_dpd_vectorized_bounds():
    rng = np.random.default_rng(0)
    ph, pf = rng.random(10_000), rng.random(10_000)
    kappa = rng.uniform(1e-3, 1.0, 10_000)
    d = dpd(ph, pf, kappa)
    assert np.all(d >= -1e-12)
    assert np.all(d <= 1 + 1 / kappa + 1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_dpd_continuity_at_zero(ph, pf):
    assert abs(dpd(ph, pf, 1e-6) - dpd(ph, pf, 0.0)) < 1e-3


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 1.0))
def test_dpd_nonnegative_and_bounded(ph, pf, kappa):
    d = dpd(ph, pf, kappa)
    assert -1e-12 <= d <= 1 + 1 / kappa + 1e-12


def test_loss_examples():
    assert loss(1, 0.5, 1.0) == pytest.approx(-0.5, abs=1e-15)
    assert loss(1, 0.5, 0.0) == pytest.approx(np.log(2), abs=1e-15)
    assert loss(1, 1.0, 1.0) == pytest.approx(-1.0, abs=1e-15)


def test_loss_domain_errors():
    with pytest.raises(ValueError):
        loss(1, 1.0, 0.0)
    with pytest.raises(ValueError):
        loss(1, 1.5, 1.0)
    with pytest.raises(ValueError):
        loss(0.5, 0.5, 1.0)
    with pytest.raises(ValueError):
        loss(1, 0.5, -0.2)


def test_loss_differs_from_divergence_by_constant():
    # d_kappa(f_y, f_p) and the loss share all p-dependent terms
    p = np.linspace(0.05, 0.95, 19)
    for kappa in (0.5, 1.0, 2.0):
        for y in (0, 1):
            diff = dpd(float(y), p, kappa) - loss(y, p, kappa)
            assert np.ptp(diff) < 1e-12


@pytest.mark.parametrize("kappa", [0.25, 1.0, 2.0])
@pytest.mark.parametrize("y", [0, 1])
def test_loss_minimized_at_label(kappa, y):
    p = np.linspace(0, 1, 2001)
    values = loss(y, p, kappa)
    assert p[np.argmin(values)] == y


@pytest.mark.parametrize("link", LINKS)
def test_loss_eta_matches_loss(link):
    eta = np.linspace(-4, 2, 13)
    p = Link(link)(eta)
    for kappa in (0.0, 0.7, 2.0):
        for y in (0, 1):
            np.testing.assert_allclose(
                loss_eta(np.full_like(eta, y), eta, kappa, link), loss(y, p, kappa), rtol=1e-12, atol=1e-14
            )


def test_logit_score_at_zero_kappa():
    rng = np.random.default_rng(1)
    eta = rng.normal(0, 3, 50)
    y = rng.integers(0, 2, 50).astype(float)
    p = Link("logit")(eta)
    np.testing.assert_allclose(loss_d1(y, eta, 0.0), -(y - p), atol=1e-15)


def test_derivatives_against_central_differences():
    rng = np.random.default_rng(2)
    h = 1e-5
    for link in LINKS:
        for _ in range(100):
            y = float(rng.integers(0, 2))
            eta = rng.uniform(-3, 3)
            kappa = rng.choice([0.0, rng.uniform(0.05, 2.0)])

            def f(e):
                return float(loss_eta(y, e, kappa, link))

            fd1 = (f(eta + h) - f(eta - h)) / (2 * h)
            d1 = float(loss_d1(y, eta, kappa, link))
            assert abs(d1 - fd1) <= 1e-5 * max(1.0, abs(fd1))

            def g(e):
                return float(loss_d1(y, e, kappa, link))

            fd2 = (g(eta + h) - g(eta - h)) / (2 * h)
            d2 = float(loss_d2(y, eta, kappa, link))
            assert abs(d2 - fd2) <= 1e-5 * max(1.0, abs(fd2))


@pytest.mark.parametrize("kappa", [0.0, 0.5, 1.0, 2.0])
def test_label_swap_symmetry(kappa):
    eta = np.linspace(-5, 5, 21)
    np.testing.assert_allclose(
        loss_d1(1.0, eta, kappa), -loss_d1(0.0, -eta, kappa), rtol=1e-13, atol=1e-15
    )
    np.testing.assert_allclose(loss_d2(1.0, eta, kappa), loss_d2(0.0, -eta, kappa), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("link", LINKS)
@pytest.mark.parametrize("kappa", [0.0, 0.4, 1.0, 2.0])
def test_fisher_weight_is_expected_curvature(link, kappa):
    eta = np.linspace(-3, 3, 13)
    p = Link(link)(eta)
    expected = p * loss_d2(1.0, eta, kappa, link) + (1 - p) * loss_d2(0.0, eta, kappa, link)
    np.testing.assert_allclose(fisher_weight(eta, kappa, link), expected, rtol=1e-10, atol=1e-15)
    # the score has mean zero under the model
    mean_score = p * loss_d1(1.0, eta, kappa, link) + (1 - p) * loss_d1(0.0, eta, kappa, link)
    np.testing.assert_allclose(mean_score, 0.0, atol=1e-14)


def test_fisher_weight_examples():
    assert fisher_weight(0.0, 0.0) == pytest.approx(0.25, abs=1e-15)
    assert fisher_weight(0.0, 1.0) == pytest.approx(0.25, abs=1e-15)


def test_fisher_weight_closed_form():
    # (1+k)[p^(1+k)(1-p)^2 + (1-p)^(1+k)p^2] H'^2 / (p(1-p))^2
    for link in LINKS:
        L = Link(link)
        eta = np.linspace(-2.5, 2.5, 11)
        p, dH = L(eta), L.deriv(eta)
        for kappa in (0.3, 1.0, 2.0):
            bracket = p ** (1 + kappa) * (1 - p) ** 2 + (1 - p) ** (1 + kappa) * p**2
            ref = (1 + kappa) * bracket * dH**2 / (p * (1 - p)) ** 2
            np.testing.assert_allclose(fisher_weight(eta, kappa, link), ref, rtol=1e-9)


def test_score_expectation_against_direct_sum():
    p = np.linspace(0.02, 0.98, 25)
    for kappa in (0.0, 0.5, 1.0, 2.0):
        # sum over y of f_p(y) * f_p(y)^kappa * (y - p) / (p(1-p))
        direct = (p * p**kappa * (1 - p) + (1 - p) * (1 - p) ** kappa * (-p)) / (p * (1 - p))
        np.testing.assert_allclose(score_expectation(p, kappa), direct, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("link", LINKS)
def test_derivatives_finite_when_saturated(link):
    eta = np.array([-40.0, -15.0, 15.0, 40.0])
    for kappa in (0.0, 0.5, 2.0):
        for y in (0.0, 1.0):
            assert np.all(np.isfinite(loss_d1(y, eta, kappa, link)))
            assert np.all(np.isfinite(loss_d2(y, eta, kappa, link)))
        assert np.all(fisher_weight(eta, kappa, link) >= 0)


@pytest.mark.parametrize("link", LINKS)
def test_link_properties(link):
    L = Link(link)
    eta = np.linspace(-8, 3 if link == "cloglog" else 8, 111)
    p, q = L.probs(eta)
    assert np.all(np.diff(p) > 0)
    assert np.all((p > 0) & (p < 1))
    np.testing.assert_allclose(p + q, 1.0, atol=1e-15)
    assert np.all(L.deriv(eta) > 0)
    assert L.deriv(eta).max() < 0.5
    r1, r0 = L.ratios(eta)
    np.testing.assert_allclose(r1 * p, L.deriv(eta), rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(r0 * q, L.deriv(eta), rtol=1e-12, atol=1e-300)
    h = 1e-5
    fd = (L.deriv(eta + h) - L.deriv(eta - h)) / (2 * h)
    np.testing.assert_allclose(L.curvature(eta) * L.deriv(eta), fd, rtol=1e-6, atol=1e-9)


def test_link_and_params_validation():
    with pytest.raises(ValueError):
        Link("loglog")
    with pytest.raises(ValueError):
        DivergenceParams(kappa=-1.0)
    with pytest.raises(ValueError):
        DivergenceParams(kappa=np.inf)
    assert DivergenceParams(0.5, "probit").link == Link("probit")
