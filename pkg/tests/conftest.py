import numpy as np
import pytest

from terc import PanelDataset, SimConfig, gen_dgp
from terc.sufficient import build_w

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def linear_panel(n=200, T=2, seed=0, coef=(2.0, 3.0), noise=0.0):
    """Exogenous constant-coefficient panel ``Y = coef[0] * X1 + coef[1]`` with an intercept column."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(0.0, 1.0, (n, T, 1))
    x1 = z[..., 0] + rng.uniform(0.0, 1.0, (n, T))
    x = np.stack([x1, np.ones_like(x1)], axis=-1)
    y = coef[0] * x1 + coef[1] + noise * rng.standard_normal((n, T))
    return PanelDataset(y=y, x=x, z=z, intercept_included=True)


@pytest.fixture(scope="session")
def dgp_small():
    """One draw of the production DGP at N=400, T=3."""
    return gen_dgp(SimConfig(n_units=400, n_periods=3, n_reps=1, seed=11), 0)


@pytest.fixture(scope="session")
def dgp_1000():
    return gen_dgp(SimConfig(n_units=1000, n_periods=3, n_reps=1, seed=12), 0)


@pytest.fixture(scope="session")
def fit_small(dgp_small):
    from terc import EstimateConfig, estimate_period

    panel, truth = dgp_small
    cfg = EstimateConfig()
    w = build_w(panel, cfg.w_degree)
    return panel, truth, w, estimate_period(panel, 0, cfg, w)
