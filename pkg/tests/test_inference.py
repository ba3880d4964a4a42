import dataclasses

import numpy as np
import pytest

from terc import BasisConfig, EstimateConfig, PanelDataset, SimConfig, estimate_period, gen_dgp
from terc.inference import compute_mu_terms, compute_mu_terms_naive, omega1_at, omega2_at, omega3, sigma_part_omega1
from terc.sufficient import build_w

from conftest import linear_panel

SMALL = EstimateConfig(q=BasisConfig(1, (), 1), p=BasisConfig(1, (), 1), r=BasisConfig(1, (), 1), w_degree=1)


def _fit(panel, cfg=None, t=0):
    cfg = cfg or EstimateConfig()
    return estimate_period(panel, t, cfg, build_w(panel, cfg.w_degree))


def _scaled(panel, c):
    return PanelDataset(y=panel.y * c, x=panel.x, z=panel.z, intercept_included=panel.intercept_included)


def test_sigma_part_vanishes_without_residuals():
    fit = _fit(linear_panel(300), dataclasses.replace(SMALL, ridge_eps=0.0))
    assert np.max(np.abs(fit.outcome.residuals)) < 1e-9
    part = sigma_part_omega1(0.5, fit.w.w[0], fit.outcome)
    assert np.max(np.abs(part)) < 1e-12


def test_streamed_equals_naive_mu():
    panel, _ = gen_dgp(SimConfig(n_units=400, n_periods=3, n_reps=1, seed=2), 0)
    sub = PanelDataset(y=panel.y[:50], x=panel.x[:50], z=panel.z[:50], intercept_included=True)
    fit = _fit(sub, SMALL)
    args = (fit.control, fit.outcome, fit.cross, fit.vhat, fit.w, fit.betax.r_matrix)
    fast = compute_mu_terms(*args, block=16)
    slow = compute_mu_terms_naive(*args)
    for a, b in ((fast.mu_I, slow.mu_I), (fast.mu_II, slow.mu_II), (fast.mu_II_const, slow.mu_II_const)):
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12 * max(1.0, np.abs(b).max()))


def test_block_size_does_not_change_mu(fit_small):
    _, _, _, fit = fit_small
    args = (fit.control, fit.outcome, fit.cross, fit.vhat, fit.w, fit.betax.r_matrix)
    a, b = compute_mu_terms(*args, block=400), compute_mu_terms(*args, block=37)
    np.testing.assert_allclose(a.mu_I, b.mu_I, rtol=1e-12, atol=1e-15)


def test_constant_r_omega2_equals_omega3(fit_small):
    panel, _, w, _ = fit_small
    cfg = EstimateConfig(r=BasisConfig(0, ()), ridge_eps=0.0)
    fit = _fit(panel, cfg)
    o2 = fit.omega2_at(fit.cross.x_t[0])
    o3 = fit.omega3()
    np.testing.assert_allclose(o2.estimate, o3.estimate, rtol=1e-12)
    np.testing.assert_allclose(o2.omega, o3.omega, rtol=1e-9, atol=1e-12 * np.abs(o3.omega).max())


def test_symmetry_and_psd(fit_small):
    _, _, w, fit = fit_small
    for rep in (fit.omega1_at(0.5, w.w[0]), fit.omega2_at(fit.cross.x_t[0]), fit.omega3()):
        assert np.max(np.abs(rep.omega - rep.omega.T)) == 0.0
        assert np.all(np.diag(rep.omega) >= 0)
        assert np.linalg.eigvalsh(rep.omega).min() >= -1e-10 * np.abs(rep.omega).max()
        assert np.all(rep.ci_lo <= rep.estimate) and np.all(rep.estimate <= rep.ci_hi)


def test_raw_omega3_psd_on_dgp(fit_small):
    _, _, _, fit = fit_small
    assert fit.omega3().min_eig_raw >= -1e-10


def test_quadratic_in_y_scale(fit_small):
    panel, _, w, fit = fit_small
    c = -2.5
    other = _fit(_scaled(panel, c))
    np.testing.assert_array_equal(other.vhat, fit.vhat)
    pairs = [(fit.omega1_at(0.3, w.w[5]), other.omega1_at(0.3, w.w[5])),
             (fit.omega2_at(fit.cross.x_t[5]), other.omega2_at(fit.cross.x_t[5])),
             (fit.omega3(), other.omega3())]
    for a, b in pairs:
        np.testing.assert_allclose(b.omega, c**2 * a.omega, rtol=1e-7, atol=1e-10 * np.abs(b.omega).max())


def test_noiseless_constant_coefficients_have_tiny_omega2():
    fit = _fit(linear_panel(400, T=3), EstimateConfig(w_degree=1))
    assert np.max(np.abs(fit.betax.xi)) < 1e-4
    rep = fit.omega2_at(fit.cross.x_t[0])
    assert np.max(np.abs(rep.omega)) < 1e-6
    assert np.max(np.abs(fit.omega3().omega)) < 1e-6


@pytest.mark.slow
def test_se_shrinks_like_root_n():
    se = {}
    for n in (500, 1000, 2000):
        vals = []
        for seed in range(3):
            panel, _ = gen_dgp(SimConfig(n_units=n, n_periods=3, n_reps=1, seed=100 + seed), 0)
            vals.append(_fit(panel).omega3().se)
        se[n] = np.mean(vals, axis=0)
    for lo, hi in ((500, 1000), (1000, 2000)):
        ratio = se[lo] / se[hi]
        assert np.all(np.abs(ratio / np.sqrt(2) - 1) <= 0.25), ratio
