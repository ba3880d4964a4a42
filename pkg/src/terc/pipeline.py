"""Per-period three-step estimation and the pooled report."""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .coefficients import (BetaVWModel, BetaXModel, SecondMomentModel, beta_x, fit_beta_x,
                           fit_second_moments, sample_betas)
from .config import EstimateConfig
from .control import ControlModel, fit_control, monotonicity_violation_rate, vhat_all, vhat_raw
from .inference import CovarianceReport, MuTerms, compute_mu_terms, omega1_at, omega2_at, omega3
from .outcome import OutcomeModel, fit_g
from .panel import CrossSection, PanelDataset, cross_section
from .errors import TercError
from .sufficient import WStatistic, _mask_to_index, build_w


@contextmanager
def _step(name: str, t: int):
    try:
        yield
    except TercError as exc:
        raise type(exc)(f"[{name}, period {t}] {exc}") from exc


@dataclass(eq=False)
class PeriodFit:
    period: int
    cross: CrossSection
    w: WStatistic
    control: ControlModel
    vhat: np.ndarray
    outcome: OutcomeModel
    bvw: BetaVWModel
    bhat: np.ndarray
    beta_bar: np.ndarray
    betax: BetaXModel | None = None
    mu: MuTerms | None = None
    apes: CovarianceReport | None = None
    second: SecondMomentModel | None = None
    diagnostics: dict = field(default_factory=dict)

    def omega1_at(self, v, w, level=0.95) -> CovarianceReport:
        return omega1_at(v, w, self.outcome, self._mu(), level)

    def omega2_at(self, x, level=0.95) -> CovarianceReport:
        return omega2_at(x, self.outcome, self.betax, self._mu(), level)

    def omega3(self, level=0.95) -> CovarianceReport:
        return omega3(self.outcome, self.bhat, self._mu(), level)

    def _mu(self) -> MuTerms:
        if self.mu is None:
            r = self.betax.r_matrix if self.betax is not None else None
            self.mu = compute_mu_terms(self.control, self.outcome, self.cross, self.vhat, self.w, r)
        return self.mu


def prepare_w(panel: PanelDataset, config: EstimateConfig) -> WStatistic:
    endog = None if config.endogenous_x is None else _mask_to_index(config.endogenous_x, panel.d_x)
    return build_w(panel, config.w_degree, endog)


def estimate_period(panel: PanelDataset, t: int, config: EstimateConfig | None = None,
                    w: WStatistic | None = None) -> PeriodFit:
    config = config or EstimateConfig()
    w = w if w is not None else prepare_w(panel, config)
    cross = cross_section(panel, t)
    mc = config.monotone_coord or 0
    eps = config.ridge_eps

    with _step("control_function", t):
        control = fit_control(cross, w, config.q, mc, eps)
        vhat = vhat_all(control, cross, w)
    with _step("outcome_regression", t):
        outcome = fit_g(cross, vhat, w, config.p, eps)
    with _step("coefficients", t):
        bvw = BetaVWModel(outcome)
        bhat = sample_betas(bvw, vhat, w)
        fit = PeriodFit(period=t, cross=cross, w=w, control=control, vhat=vhat, outcome=outcome,
                        bvw=bvw, bhat=bhat, beta_bar=bhat.mean(axis=0))
        fit.betax = fit_beta_x(bvw, vhat, w, cross, config.r, eps, panel.intercept_included)
        if config.estimate_second_moments:
            fit.second = fit_second_moments(cross, vhat, w, config.p, eps, panel.intercept_included)
    if config.inference:
        with _step("inference", t):
            fit.apes = fit.omega3(config.ci_level)

    raw = vhat_raw(control, cross)
    y = cross.y_t
    ss = float(np.sum((y - y.mean()) ** 2))
    fit.diagnostics = {
        "n": cross.n,
        "L": control.n_terms,
        "K": outcome.basis.total_terms,
        "M": fit.betax.r_basis.total_terms,
        "cond_Q": control.q_solver.condition_number(),
        "cond_P": outcome.p_solver.condition_number(),
        "cond_R": fit.betax.r_solver.condition_number(),
        "ridge_Q": control.q_solver.eps,
        "ridge_P": outcome.p_solver.eps,
        "ridge_R": fit.betax.r_solver.eps,
        "trim_rate": float(np.mean((raw < 0) | (raw > 1))),
        "monotonicity_violation_rate": monotonicity_violation_rate(control),
        "r2_g": 1.0 - float(np.sum(outcome.residuals**2)) / ss if ss > 0 else 1.0,
    }
    return fit


@dataclass(eq=False)
class EstimateReport:
    periods: list
    fits: list
    config: EstimateConfig
    unit_ids: tuple
    period_labels: tuple

    @property
    def pooled_beta_bar(self) -> np.ndarray:
        return np.mean([f.beta_bar for f in self.fits], axis=0)

    def to_dict(self) -> dict:
        cfg = self.config
        per = []
        for f in self.fits:
            entry = {
                "period": int(f.period),
                "period_label": _plain(self.period_labels[f.period]),
                "beta_bar": f.beta_bar.tolist(),
                "diagnostics": f.diagnostics,
            }
            if f.apes is not None:
                entry["inference"] = f.apes.to_dict()
            if cfg.x_grid is not None:
                entry["beta_x"] = [{"x": list(map(float, x)), "beta": beta_x(f.betax, np.asarray(x, float)).tolist()}
                                   for x in cfg.x_grid]
                if cfg.inference:
                    for item, x in zip(entry["beta_x"], cfg.x_grid):
                        item["inference"] = f.omega2_at(np.asarray(x, float), cfg.ci_level).to_dict()
            if f.second is not None:
                vw = f.outcome.vw_train
                m2b = f.second.m2b(vw[:, 0], vw[:, 1:])
                entry["second_moments"] = {
                    "mean_m2b": float(np.mean(m2b)),
                    "mean_m11": float(np.mean(f.second.m11(vw[:, 0], vw[:, 1:]))),
                    "mean_m2w": float(np.mean(f.second.m2w(vw[:, 0], vw[:, 1:]))),
                    "mean_var_b": float(np.mean(m2b - f.bhat[:, 0] ** 2)),
                }
            per.append(entry)
        return {
            "config": cfg.to_dict(),
            "n_units": len(self.unit_ids),
            "n_periods_estimated": len(self.fits),
            "pooled_beta_bar": self.pooled_beta_bar.tolist(),
            "per_period": per,
        }

    def per_obs_rows(self):
        """Rows ``(id, t, vhat, beta_1..beta_dX)`` for every unit and estimated period."""
        for f in self.fits:
            label = self.period_labels[f.period]
            for i, uid in enumerate(self.unit_ids):
                yield (uid, label, float(f.vhat[i]), *map(float, f.bhat[i]))


def _plain(v):
    return v.item() if hasattr(v, "item") else v


def estimate(panel: PanelDataset, config: EstimateConfig | None = None) -> EstimateReport:
    """Run the three steps separately in each requested period; pool point estimates by their mean."""
    config = config or EstimateConfig()
    config.validate(panel.d_x, panel.n_periods, panel.intercept_included)
    if config.standardize:
        panel = panel.standardized()
    w = prepare_w(panel, config)
    periods = list(config.periods) if config.periods is not None else list(range(panel.n_periods))
    fits = [estimate_period(panel, t, config, w) for t in periods]
    return EstimateReport(periods=periods, fits=fits, config=config,
                          unit_ids=panel.unit_ids, period_labels=panel.periods)
