from fractions import Fraction

import numpy as np
import pytest

from terc import SimConfig, gen_dgp, metrics, run_montecarlo
from terc.errors import ConfigError, EmptyInput
from terc.simulation import COEF_SUPPORT, TRUE_BAR, TRUE_BAR_EXACT, order_preset


def test_supports():
    panel, truth = gen_dgp(SimConfig(n_units=2000, n_periods=4, n_reps=1, seed=1), 0)
    assert truth.a_i.min() >= 1 and truth.a_i.max() <= 2
    assert truth.u_it.min() >= 2 and truth.u_it.max() <= 4.5
    for d, (lo, hi) in enumerate(COEF_SUPPORT):
        assert lo <= truth.beta_it[..., d].min() and truth.beta_it[..., d].max() <= hi
    np.testing.assert_array_equal(truth.beta_it[..., 2], truth.u_it)
    np.testing.assert_allclose(truth.beta_it[..., 0], truth.a_i[:, None] + truth.u_it)
    np.testing.assert_allclose(truth.beta_it[..., 1], truth.a_i[:, None] * truth.u_it)


def test_population_means_exact():
    ea, ea2, eta = Fraction(3, 2), Fraction(7, 3), Fraction(5, 4)
    eu = ea * eta + eta
    assert (ea + eu, ea2 * eta + ea * eta, eu) == TRUE_BAR_EXACT
    assert TRUE_BAR_EXACT == (Fraction(37, 8), Fraction(115, 24), Fraction(25, 8))
    np.testing.assert_array_equal(TRUE_BAR, [float(f) for f in TRUE_BAR_EXACT])


def test_same_rep_is_bit_identical():
    cfg = SimConfig(n_units=100, n_periods=3, n_reps=1, seed=9)
    a, ta = gen_dgp(cfg, 4)
    b, tb = gen_dgp(cfg, 4)
    assert a == b and np.array_equal(ta.beta_it, tb.beta_it)
    c, _ = gen_dgp(cfg, 5)
    assert not np.array_equal(a.y, c.y)


def test_smaller_panel_is_prefix():
    big, _ = gen_dgp(SimConfig(n_units=200, n_periods=5, n_reps=1, seed=9), 2)
    small, _ = gen_dgp(SimConfig(n_units=120, n_periods=3, n_reps=1, seed=9), 2)
    np.testing.assert_array_equal(big.y[:120, :3], small.y)


def test_macro_shock_shared():
    _, truth = gen_dgp(SimConfig(n_units=300, n_periods=3, n_reps=1, seed=2), 0)
    eta1 = (truth.u_it - truth.eta2_t[None, :]) / truth.a_i[:, None]
    assert eta1.min() >= 1 - 1e-12 and eta1.max() <= 1.5 + 1e-12
    assert len(set(truth.eta2_t.tolist())) == 3


def test_dgp_first_order_conditions():
    panel, truth = gen_dgp(SimConfig(n_units=200, n_periods=2, n_reps=1, seed=3), 0)
    bk, bl, om = (truth.beta_it[..., d] for d in range(3))
    k, l = panel.x[..., 0], panel.x[..., 1]
    r, w, p = (panel.z[..., j] for j in range(3))
    # marginal products equal input prices: P * beta * Y_level / input = price, in logs
    log_y = bk * k + bl * l + np.log(om)
    np.testing.assert_allclose(np.log(p * bk) + log_y - k, np.log(r), atol=1e-10)
    np.testing.assert_allclose(np.log(p * bl) + log_y - l, np.log(w), atol=1e-10)
    np.testing.assert_allclose(panel.y, bk * k + bl * l + om)


def test_metrics_examples():
    t = np.array([2.0, 4.0, 1.0])
    m = metrics([t, t], t)
    assert m["bias"] == [0, 0, 0] and m["rmse"] == [0, 0, 0] and m["rmse_norm"] == 0 and m["mnd"] == 0
    m = metrics([1.1 * t], t)
    np.testing.assert_allclose(m["bias"], [0.1, 0.1, 0.1])
    np.testing.assert_allclose(m["rmse"], [0.1, 0.1, 0.1])
    with pytest.raises(EmptyInput):
        metrics([], t)


def test_metrics_hand_computed():
    truth = np.array([1.0, 2.0])
    est = np.array([[1.5, 2.0], [0.5, 3.0], [1.0, 1.0]])
    m = metrics(est, truth)
    # deviations: (0.5, 0), (-0.5, 1), (0, -1)
    np.testing.assert_allclose(m["bias"], [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(m["rmse"], [np.sqrt(0.5 / 3), np.sqrt(2 / 3) / 2])
    assert m["rmse_norm"] == pytest.approx(np.sqrt((0.25 + 1.25 + 1) / 3 / 5))
    assert m["mnd"] == pytest.approx((0.5 + np.sqrt(1.25) + 1) / 3 / np.sqrt(5))


def test_bias_variance_decomposition():
    rng = np.random.default_rng(0)
    m = metrics(TRUE_BAR + rng.normal(0.1, 0.2, (50, 3)), TRUE_BAR)
    assert np.all(np.array(m["rmse"]) ** 2 - np.array(m["bias"]) ** 2 >= 0)


def test_single_replication_metrics_are_deviations():
    cfg = SimConfig(n_units=400, n_periods=2, n_reps=1, seed=4)
    rep = run_montecarlo(cfg)
    dev = (rep.estimates[0] - TRUE_BAR) / np.abs(TRUE_BAR)
    np.testing.assert_array_equal(rep.metrics["bias"], dev)
    np.testing.assert_allclose(rep.metrics["rmse"], np.abs(dev), rtol=1e-15)
    assert not rep.failures and 0 <= rep.vhat_range[0] <= rep.vhat_range[1] <= 1


def test_failures_are_recorded_not_raised():
    cfg = SimConfig(n_units=60, n_periods=2, n_reps=2, seed=4)  # default bases are too rich for n = 60
    rep = run_montecarlo(cfg)
    assert len(rep.failures) == 2 and "TooFewObservations" in rep.failures[0]["error"]
    assert rep.to_dict()["n_success"] == 0


def test_thread_count_does_not_change_results():
    cfg = SimConfig(n_units=400, n_periods=2, n_reps=3, seed=6)
    a, b = run_montecarlo(cfg, threads=1), run_montecarlo(cfg, threads=2)
    assert a.to_dict() == b.to_dict()


def test_histograms_count_every_observation():
    cfg = SimConfig(n_units=400, n_periods=2, n_reps=2, seed=6, hist_bins=10)
    rep = run_montecarlo(cfg)
    for (name, t), h in rep.hist.items():
        assert h["true"].sum() == 2 * 400
        assert h["est"].sum() + h["under"] + h["over"] == 2 * 400


def test_config_validation_and_presets():
    with pytest.raises(ConfigError):
        SimConfig(n_units=10)
    with pytest.raises(ConfigError):
        SimConfig.from_dict({"n_units": 100, "unknown": 1})
    cfg = order_preset(1)
    assert cfg.estimation.q.degree == 1 and cfg.estimation.p.knot_quantiles == () and cfg.estimation.w_degree == 1
    assert order_preset(2) == SimConfig()
    assert SimConfig.from_dict(SimConfig().to_dict()) == SimConfig()


def test_report_round_trip_keys():
    rep = run_montecarlo(SimConfig(n_units=400, n_periods=2, n_reps=1, seed=4).replace(inference=True))
    d = rep.to_dict()
    assert set(d["coverage"]) == {"betaK", "betaL", "omega"}
    assert len(rep.ci[0]) == 2 and all(c["min_eig_raw"] >= -1e-10 for c in rep.ci[0])
