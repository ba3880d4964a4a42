"""First step: series estimate of the conditional CDF control variable.

``V(x, z, w) = F(x | z, w)`` for the monotone regressor is estimated by
regressing ``1{X_j <= x}`` on ``q(z_j, w_j)``; the coefficient depends on
``x`` only through how many sample values lie at or below it, so all
coefficients are prefix sums of the sorted ``q`` rows pushed through one
Gram factorisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import TensorBasis, basis_from_data
from .config import BasisConfig
from .errors import DegenerateDenominator, DimensionMismatch, TooFewObservations
from .linalg import GramSolver, factor_gram
from .panel import CrossSection
from .sufficient import WStatistic


def trim(raw):
    """``tau(x) = 1{x >= 0} * min(x, 1)``."""
    return np.clip(raw, 0.0, 1.0)


def trim_deriv(raw):
    """a.e. derivative of ``trim``; zero at and beyond the kinks."""
    raw = np.asarray(raw)
    return ((raw > 0.0) & (raw < 1.0)).astype(float)


@dataclass(frozen=True, eq=False)
class ControlModel:
    q_basis: TensorBasis
    q_matrix: np.ndarray
    q_solver: GramSolver
    x1_sorted: np.ndarray
    gamma_table: np.ndarray  # [n + 1, L]; row c is gamma(x) for any x with c sample values <= x
    monotone_coord: int

    @property
    def n(self) -> int:
        return self.q_matrix.shape[0]

    @property
    def n_terms(self) -> int:
        return self.q_matrix.shape[1]

    def counts(self, x) -> np.ndarray:
        return np.searchsorted(self.x1_sorted, np.asarray(x, dtype=float), side="right")

    def gamma(self, x) -> np.ndarray:
        """Series coefficient ``gamma(x)`` (rows for array input)."""
        return self.gamma_table[self.counts(x)]

    def q(self, z, w) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if z.ndim == 1 and w.ndim == 1:
            return self.q_basis.evaluate(np.concatenate([z, w]))
        return self.q_basis.evaluate(np.column_stack([np.atleast_2d(z), np.atleast_2d(w)]))

    def raw(self, x, z, w) -> float:
        # same reduction as vhat_raw so batched and pointwise values agree bit for bit
        return float(np.sum(self.q(z, w) * self.gamma(x), axis=-1))


def zw_points(cross: CrossSection, w: WStatistic) -> np.ndarray:
    return np.column_stack([cross.z_t, w.w])


def fit_control(cross: CrossSection, w: WStatistic, q_spec: BasisConfig | None = None,
                monotone_coord: int = 0, ridge_eps: float = 1e-8) -> ControlModel:
    q_spec = q_spec or BasisConfig()
    if w.w.shape[0] != cross.n:
        raise DimensionMismatch("W rows do not match the cross-section")
    if not 0 <= monotone_coord < cross.x_t.shape[1]:
        raise DimensionMismatch(f"monotone_coord {monotone_coord} outside X")
    x1 = np.asarray(cross.x_t[:, monotone_coord], dtype=float)
    if np.ptp(x1) == 0:
        raise DegenerateDenominator(f"monotone coordinate {monotone_coord} is constant in this period")
    zw = zw_points(cross, w)
    basis = q_spec.build(zw)
    q = basis.evaluate(zw)
    n, L = q.shape
    if n <= L:
        raise TooFewObservations(f"control basis has L = {L} terms for n = {n} observations")
    solver = factor_gram(q.T @ q / n, ridge_eps)

    order = np.argsort(x1, kind="stable")
    prefix = np.vstack([np.zeros((1, L)), np.cumsum(q[order], axis=0)]) / n
    gamma_table = solver.solve(prefix.T).T
    return ControlModel(
        q_basis=basis,
        q_matrix=q,
        q_solver=solver,
        x1_sorted=x1[order],
        gamma_table=gamma_table,
        monotone_coord=monotone_coord,
    )


def eval_v(model: ControlModel, x: float, z, w) -> float:
    return float(trim(model.raw(x, z, w)))


def vhat_raw(model: ControlModel, cross: CrossSection) -> np.ndarray:
    """Untrimmed fitted CDF at each observation's own point."""
    g = model.gamma(cross.x_t[:, model.monotone_coord])
    return np.sum(model.q_matrix * g, axis=-1)


def vhat_all(model: ControlModel, cross: CrossSection, w: WStatistic | None = None) -> np.ndarray:
    """``V_hat_i`` for every observation of the cross-section the model was fitted on."""
    if cross.n != model.n:
        raise DimensionMismatch("cross-section differs from the fitted one")
    return trim(vhat_raw(model, cross))


def eval_v_cross(model: ControlModel, x_j: float, z_i, w_i) -> float:
    """``F_hat(x_j | z_i, w_i)``, trimmed like ``eval_v``."""
    return eval_v(model, x_j, z_i, w_i)


def cross_cdf_block(model: ControlModel, x_cols, rows=slice(None)) -> np.ndarray:
    """Matrix ``[i, j] = F_hat(x_j | z_i, w_i)`` for sample rows ``rows`` and query values ``x_cols``."""
    g = model.gamma(np.asarray(x_cols, dtype=float))
    return trim(model.q_matrix[rows] @ g.T)


def monotonicity_violation_rate(model: ControlModel, max_units: int = 200, n_grid: int = 21) -> float:
    """Share of decreasing steps of the raw fitted CDF between consecutive sample quantiles of ``X^(1)``.

    Evaluated for a subsample of at most ``max_units`` conditioning points.
    """
    n = model.n
    rows = np.linspace(0, n - 1, min(n, max_units)).astype(int)
    ranks = np.unique(np.linspace(1, n, n_grid).round().astype(int))
    curves = model.q_matrix[rows] @ model.gamma_table[ranks].T
    return float(np.mean(np.diff(curves, axis=1) < -1e-12))
