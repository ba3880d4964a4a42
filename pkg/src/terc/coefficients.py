"""Third step: conditional-mean coefficients, the average partial effect and second moments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import IndexBasis, TensorBasis
from .config import BasisConfig
from .errors import DimensionMismatch, TooFewObservations, UnsupportedDimension
from .linalg import GramSolver, factor_gram
from .outcome import OutcomeModel, vw_points
from .panel import CrossSection
from .sufficient import WStatistic


@dataclass(frozen=True, eq=False)
class BetaVWModel:
    """``beta(v, w)``: the x-gradient of the fitted outcome surface, free of x."""

    outcome: OutcomeModel

    @property
    def d_x(self) -> int:
        return self.outcome.d_x

    def __call__(self, v, w) -> np.ndarray:
        return beta_vw(self, v, w)

    def dv(self, v, w) -> np.ndarray:
        """``d beta(v, w) / dv``, shape ``[d_X]`` or ``[n, d_X]``."""
        dp = self.outcome.basis.inner.derivative(self.outcome.vw(v, w), wrt=0)
        return dp @ self.outcome.alpha_matrix.T


def beta_vw(model: BetaVWModel, v, w) -> np.ndarray:
    """``(I (kron) p(v, w))' alpha``; one point gives ``[d_X]``, arrays give ``[n, d_X]``."""
    inner = model.outcome.basis.inner.evaluate(model.outcome.vw(v, w))
    return inner @ model.outcome.alpha_matrix.T


@dataclass(frozen=True, eq=False)
class BetaXModel:
    eta: np.ndarray  # [M, d_X]
    r_basis: TensorBasis
    r_solver: GramSolver
    r_matrix: np.ndarray
    bhat: np.ndarray
    x_cols: tuple

    def r(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.r_basis.evaluate(x[..., list(self.x_cols)])

    def __call__(self, x) -> np.ndarray:
        return beta_x(self, x)

    @property
    def xi(self) -> np.ndarray:
        """``beta_hat(V_i, W_i) - beta_hat(X_i)`` for every sample row."""
        return self.bhat - self.r_matrix @ self.eta


def free_columns(d_x: int, intercept: bool) -> tuple:
    return tuple(range(d_x - (1 if intercept else 0)))


def sample_betas(bvw: BetaVWModel, vhat, w: WStatistic) -> np.ndarray:
    """Rows ``beta_hat(V_hat_i, W_i)``."""
    return beta_vw(bvw, np.asarray(vhat, dtype=float), w.w)


def fit_beta_x(bvw: BetaVWModel, vhat, w: WStatistic, cross: CrossSection,
               r_spec: BasisConfig | None = None, ridge_eps: float = 1e-8,
               intercept: bool = True) -> BetaXModel:
    """Regress the sample betas on ``r(x)`` over the non-constant regressors.

    ``r_spec=None`` (or degree 0 without knots) gives the constant basis, for
    which ``beta_hat(x)`` is the sample mean of the betas.
    """
    bhat = sample_betas(bvw, vhat, w)
    x_cols = free_columns(cross.x_t.shape[1], intercept)
    xs = cross.x_t[:, list(x_cols)]
    if r_spec is None:
        r_spec = BasisConfig(0, ())
    basis = r_spec.build(xs)
    r = basis.evaluate(xs)
    n = cross.n
    if n <= r.shape[1]:
        raise TooFewObservations(f"r basis has M = {r.shape[1]} terms for n = {n} observations")
    solver = factor_gram(r.T @ r / n, ridge_eps)
    eta = solver.solve(r.T @ bhat / n)
    return BetaXModel(eta=eta, r_basis=basis, r_solver=solver, r_matrix=r, bhat=bhat, x_cols=x_cols)


def beta_x(model: BetaXModel, x) -> np.ndarray:
    """``r(x)' eta`` for a full regressor vector (intercept column ignored)."""
    return model.r(x) @ model.eta


def beta_bar(bvw: BetaVWModel, vhat, w: WStatistic) -> np.ndarray:
    return sample_betas(bvw, vhat, w).mean(axis=0)


@dataclass(frozen=True, eq=False)
class SecondMomentModel:
    """Fitted ``E[Y^2 | x, v, w] = x^2 m2b + 2 x m11 + m2w`` for scalar x plus intercept.

    ``m2b``, ``m11`` and ``m2w`` estimate ``E[b^2 | v, w]``, ``E[b w | v, w]``
    and ``E[w^2 | v, w]`` for slope ``b`` and intercept coefficient ``w``.
    """

    coef: np.ndarray  # [3, K1]
    basis: IndexBasis
    x_col: int

    def _inner(self, v, w):
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        pts = np.concatenate([[float(v)], np.atleast_1d(w)]) if v.ndim == 0 else np.column_stack([v, w])
        return self.basis.inner.evaluate(pts)

    def m2b(self, v, w):
        return self._inner(v, w) @ self.coef[0]

    def m11(self, v, w):
        return self._inner(v, w) @ self.coef[1]

    def m2w(self, v, w):
        return self._inner(v, w) @ self.coef[2]

    def conditional_y2(self, x1, v, w):
        return x1**2 * self.m2b(v, w) + 2 * x1 * self.m11(v, w) + self.m2w(v, w)


def quadratic_regressors(x1) -> np.ndarray:
    x1 = np.asarray(x1, dtype=float)
    return np.stack([x1**2, 2 * x1, np.ones_like(x1)], axis=-1)


def fit_second_moments(cross: CrossSection, vhat, w: WStatistic, p_spec: BasisConfig | None = None,
                       ridge_eps: float = 1e-8, intercept: bool = True) -> SecondMomentModel:
    """Regress ``Y^2`` on ``(x^2, 2x, 1) (kron) p(v, w)``; the three blocks are the moment surfaces."""
    if not intercept or cross.x_t.shape[1] != 2:
        raise UnsupportedDimension("second moments are implemented for one regressor plus the intercept")
    p_spec = p_spec or BasisConfig(2, (0.5,), 1)
    vhat = np.asarray(vhat, dtype=float)
    if vhat.shape != (cross.n,):
        raise DimensionMismatch("vhat length does not match the cross-section")
    vw = vw_points(vhat, w)
    inner = p_spec.build(vw, domains=[(0.0, 1.0)] + [None] * w.d_w)
    basis = IndexBasis(3, inner)
    design = basis.evaluate(quadratic_regressors(cross.x_t[:, 0]), vw)
    n = cross.n
    solver = factor_gram(design.T @ design / n, ridge_eps)
    coef = solver.solve(design.T @ (cross.y_t**2) / n)
    return SecondMomentModel(coef=coef.reshape(3, inner.total_terms), basis=basis, x_col=0)
