import numpy as np
import pytest

from terc import (BasisConfig, EstimateConfig, PanelDataset, SimConfig, beta_bar, beta_vw, beta_x, cross_section,
                  estimate, estimate_period, eval_g, fit_beta_x, fit_control, fit_g, fit_second_moments, gen_dgp,
                  vhat_all)
from terc.coefficients import BetaVWModel, quadratic_regressors
from terc.errors import UnsupportedDimension
from terc.panel import CrossSection
from terc.simulation import TRUE_BAR, _uniform
from terc.sufficient import WStatistic, build_w

from conftest import linear_panel


def _pipeline(panel, t=0, eps=1e-8, y=None, p=BasisConfig(2, (0.5,), 1), w_degree=1):
    w = build_w(panel, w_degree)
    cross = cross_section(panel, t)
    if y is not None:
        cross = CrossSection(t, y, cross.x_t, cross.z_t)
    v = vhat_all(fit_control(cross, w, BasisConfig(1, (), 1)), cross, w)
    g = fit_g(cross, v, w, p, eps)
    return cross, w, v, BetaVWModel(g)


def test_constant_coefficients_recovered():
    cross, w, v, bvw = _pipeline(linear_panel(300), eps=0.0)
    b = beta_vw(bvw, v, w.w)
    assert np.max(np.abs(b - [2.0, 3.0])) < 1e-6


def test_beta_is_x_gradient_of_g(fit_small):
    _, _, w, fit = fit_small
    g = fit.outcome
    rng = np.random.default_rng(0)
    for _ in range(100):
        i, v = rng.integers(400), rng.uniform()
        x = rng.standard_normal(3)
        b = beta_vw(fit.bvw, v, w.w[i])
        for d in range(3):
            e = np.zeros(3)
            e[d] = 1e-3
            fd = (eval_g(g, x + e, v, w.w[i]) - eval_g(g, x - e, v, w.w[i])) / 2e-3
            assert abs(fd - b[d]) <= 1e-10 * max(abs(b[d]), 1.0)


def test_histogram_of_beta_l_centres_near_truth(dgp_1000):
    panel, truth = dgp_1000
    fit = estimate_period(panel, 0)
    centre = np.median(fit.bhat[:, 1])
    # the period's conditional mean differs from 115/24 by the macro shock
    assert abs(centre - TRUE_BAR[1]) < 0.1 * TRUE_BAR[1]
    assert abs(centre - truth.period_means()[0, 1]) < 0.05 * TRUE_BAR[1]


def test_constant_coefficient_beta_x_flat():
    cross, w, v, bvw = _pipeline(linear_panel(400))
    bx = fit_beta_x(bvw, v, w, cross, BasisConfig(2, (0.5,), 2))
    grid = np.column_stack([np.linspace(cross.x_t[:, 0].min(), cross.x_t[:, 0].max(), 50), np.ones(50)])
    vals = np.array([beta_x(bx, g) for g in grid])
    assert np.max(np.abs(vals - vals.mean(axis=0))) < 1e-4


def test_constant_r_gives_mean(fit_small):
    _, _, w, fit = fit_small
    bx = fit_beta_x(fit.bvw, fit.vhat, w, fit.cross, BasisConfig(0, ()), ridge_eps=0.0)
    mean = beta_bar(fit.bvw, fit.vhat, w)
    for x in fit.cross.x_t[:5]:
        np.testing.assert_allclose(beta_x(bx, x), mean, rtol=1e-13)
    np.testing.assert_array_equal(mean, fit.beta_bar)


def test_scaling_equivariance(fit_small):
    panel, _, w, fit = fit_small
    c = 3.5
    cross = fit.cross
    scaled = CrossSection(0, cross.y_t * c, cross.x_t, cross.z_t)
    g = fit_g(scaled, fit.vhat, w)
    b = beta_vw(BetaVWModel(g), fit.vhat, w.w)
    np.testing.assert_allclose(b, c * fit.bhat, rtol=1e-9, atol=1e-9)
    bx = fit_beta_x(BetaVWModel(g), fit.vhat, w, scaled, EstimateConfig().r)
    np.testing.assert_allclose(bx.eta, c * fit.betax.eta, rtol=1e-9, atol=1e-9)


def test_beta_bar_mean_identity(fit_small):
    _, _, w, fit = fit_small
    np.testing.assert_array_equal(beta_bar(fit.bvw, fit.vhat, w), fit.bhat.mean(axis=0))


def _knn_oracle(eta2, points, n_draws=10**6, k=400, seed=99):
    """E[beta | X_K, X_L] at ``points``: average over the ``k`` nearest of ``n_draws`` simulated firms."""
    from scipy.spatial import cKDTree

    a = _uniform(seed, 0, "A", 0, n_draws, 1.0, 2.0)
    u = a * _uniform(seed, 0, "eta1", 0, n_draws, 1.0, 1.5) + eta2
    r, wage, p = (_uniform(seed, 0, v, 0, n_draws, 1.0, 3.0) for v in ("R", "W", "P"))
    bk, bl = a + u, a * u
    den = bk + bl - 1
    xk = ((1 - bl) * np.log(r / bk) + bl * np.log(wage / bl) - np.log(u * p)) / den
    xl = ((1 - bk) * np.log(wage / bl) + bk * np.log(r / bk) - np.log(u * p)) / den
    sims = np.column_stack([xk, xl])
    sd = sims.std(axis=0)
    _, idx = cKDTree(sims / sd).query(points / sd, k=k)
    return np.column_stack([bk, bl, u])[idx].mean(axis=1)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="E[beta|X] is rough in X: even the population projection on the default "
                   "8-term r basis is 0.09 from the oracle")
def test_beta_x_against_simulation_oracle(dgp_1000):
    panel, truth = dgp_1000
    fit = estimate_period(panel, 0)
    x = fit.cross.x_t
    oracle = _knn_oracle(truth.eta2_t[0], x[:, :2])
    est = np.array([beta_x(fit.betax, xi) for xi in x])
    assert np.mean(np.sum((est - oracle) ** 2, axis=1)) < 0.05


def _scalar_panel(n=2000, T=3, seed=0, random_beta=True):
    """Scalar endogenous regressor plus intercept; beta = A + U and omega = U, or fixed (1.5, 0.7)."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(1, 2, n)
    u = a[:, None] * rng.uniform(1, 1.5, (n, T))
    z = rng.uniform(1, 3, (n, T, 1))
    x1 = z[..., 0] + u
    b, om = (a[:, None] + u, u) if random_beta else (np.full((n, T), 1.5), np.full((n, T), 0.7))
    x = np.stack([x1, np.ones_like(x1)], axis=-1)
    return PanelDataset(y=b * x1 + om, x=x, z=z, intercept_included=True), b, om


def test_second_moments_deterministic():
    panel, b, om = _scalar_panel(800, random_beta=False)
    w = build_w(panel, 1)
    cross = cross_section(panel, 0)
    v = vhat_all(fit_control(cross, w, BasisConfig(1, (), 1)), cross, w)
    sm = fit_second_moments(cross, v, w, ridge_eps=0.0)
    vw = (v, w.w)
    assert np.max(np.abs(sm.m2b(*vw) - 1.5**2)) < 1e-4
    assert np.max(np.abs(sm.m11(*vw) - 1.5 * 0.7)) < 1e-4
    assert np.max(np.abs(sm.m2w(*vw) - 0.7**2)) < 1e-4


def _known_control_section(n, noise, seed=0):
    """Scalar regressor with beta = A + V + noise, omega = A V; (V, W = A) handed to the estimator."""
    rng = np.random.default_rng(seed)
    a, v = rng.uniform(1, 2, n), rng.uniform(0, 1, n)
    zeta = noise * rng.uniform(-1, 1, n)
    z = rng.uniform(1, 3, n)
    x1 = z + v + a
    y = (a + v + zeta) * x1 + a * v
    cross = CrossSection(0, y, np.column_stack([x1, np.ones(n)]), z[:, None])
    return cross, v, WStatistic(w=a[:, None], exponents=((1,),), variables=("a",)), a


def test_second_moments_recover_smooth_random_coefficients():
    cross, v, w, a = _known_control_section(2000, 0.0)
    spec = BasisConfig(4, (), 4)  # omega^2 = A^2 V^2 has total degree 4
    sm = fit_second_moments(cross, v, w, spec, ridge_eps=0.0)
    b, om = a + v, a * v
    assert np.max(np.abs(sm.m2b(v, w.w) - b**2)) < 1e-4
    assert np.max(np.abs(sm.m11(v, w.w) - b * om)) < 1e-4
    assert np.max(np.abs(sm.m2w(v, w.w) - om**2)) < 1e-4
    b1 = beta_vw(BetaVWModel(fit_g(cross, v, w, spec, ridge_eps=0.0)), v, w.w)[:, 0]
    # beta is deterministic given (v, w): the conditional variance is zero
    assert np.min(sm.m2b(v, w.w) - b1**2) >= -1e-6


def test_second_moment_quadratic_identity():
    panel, _, _ = _scalar_panel(800)
    w = build_w(panel, 1)
    cross = cross_section(panel, 1)
    v = vhat_all(fit_control(cross, w, BasisConfig(1, (), 1)), cross, w)
    sm = fit_second_moments(cross, v, w)
    design = sm.basis.evaluate(quadratic_regressors(cross.x_t[:, 0]), np.column_stack([v, w.w]))
    np.testing.assert_allclose(sm.conditional_y2(cross.x_t[:, 0], v, w.w), design @ sm.coef.reshape(-1),
                               rtol=1e-12, atol=1e-10)


@pytest.mark.xfail(strict=True, reason="pointwise noise of the Y^2 regression (rMSE of m2b about 7 at n=4000) "
                   "swamps a conditional variance of 1/3")
def test_conditional_variance_nonnegative():
    cross, v, w, _ = _known_control_section(4000, 1.0)
    spec = BasisConfig(3, (), 3)
    sm = fit_second_moments(cross, v, w, spec)
    b1 = beta_vw(BetaVWModel(fit_g(cross, v, w, spec)), v, w.w)[:, 0]
    assert np.min(sm.m2b(v, w.w) - b1**2) >= -1e-6


def test_second_moments_need_scalar_regressor(fit_small):
    _, _, w, fit = fit_small
    with pytest.raises(UnsupportedDimension):
        fit_second_moments(fit.cross, fit.vhat, w)
