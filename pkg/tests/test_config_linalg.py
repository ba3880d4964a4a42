import json

import numpy as np
import pytest

from terc import BasisConfig, EstimateConfig
from terc.config import dump_json, load_estimate_config
from terc.errors import ConfigError, SingularGram
from terc.linalg import MAX_RIDGE, factor_gram, series_fit


def test_config_json_round_trip(tmp_path):
    cfg = EstimateConfig(q=BasisConfig(3, (0.25, 0.75), 2), inference=True, periods=(0, 2),
                         x_grid=((1.0, 2.0, 1.0),), endogenous_x=(0,), ridge_eps=1e-7)
    dump_json(cfg.to_dict(), tmp_path / "c.json")
    assert load_estimate_config(tmp_path / "c.json") == cfg


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        EstimateConfig.from_dict({"q_degree": 2, "bogus": 1})
    with pytest.raises(ConfigError):
        BasisConfig(2, (1.5,))
    with pytest.raises(ConfigError):
        EstimateConfig(ci_level=1.2)
    with pytest.raises(ConfigError):
        EstimateConfig(monotone_coord=2).validate(d_x=3, n_periods=3, intercept=True)
    with pytest.raises(ConfigError):
        EstimateConfig(periods=(5,)).validate(d_x=3, n_periods=3, intercept=True)
    (tmp_path / "broken.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_estimate_config(tmp_path / "broken.json")


def test_dump_json_floats_round_trip(tmp_path):
    vals = [0.1, 1 / 3, 2.0**-1074, 1e308, -0.0]
    dump_json({"v": vals}, tmp_path / "f.json")
    assert json.loads((tmp_path / "f.json").read_text())["v"] == vals


def test_ridge_ladder_escalates_on_singular_gram():
    x = np.random.default_rng(0).standard_normal((50, 3))
    design = np.column_stack([x, x[:, 0]])  # exact collinearity
    coef, solver = series_fit(design, x @ [1.0, 2.0, 3.0], eps=0.0)
    assert 0.0 < solver.eps <= MAX_RIDGE
    np.testing.assert_allclose(design @ coef, x @ [1.0, 2.0, 3.0], atol=1e-3)


def test_well_conditioned_gram_keeps_requested_ridge():
    g = np.diag([1.0, 2.0, 3.0])
    assert factor_gram(g, 1e-8).eps == 1e-8
    np.testing.assert_allclose(factor_gram(g, 0.0).solve(np.ones(3)), [1.0, 0.5, 1 / 3])


def test_singular_gram_raises():
    with pytest.raises(SingularGram):
        factor_gram(np.zeros((3, 3)))
    with pytest.raises(SingularGram):
        factor_gram(np.array([[1.0, np.nan], [np.nan, 1.0]]))
