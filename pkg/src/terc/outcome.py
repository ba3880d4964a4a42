"""Second step: series regression of Y on the index basis ``x (kron) p(v, w)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import IndexBasis, TensorBasis
from .config import BasisConfig
from .errors import DimensionMismatch, TooFewObservations
from .linalg import GramSolver, factor_gram
from .panel import CrossSection
from .sufficient import WStatistic


@dataclass(frozen=True, eq=False)
class OutcomeModel:
    alpha: np.ndarray
    basis: IndexBasis
    p_hat: np.ndarray
    p_solver: GramSolver
    residuals: np.ndarray
    vw_train: np.ndarray

    @property
    def d_x(self) -> int:
        return self.basis.d_x

    @property
    def alpha_matrix(self) -> np.ndarray:
        """``alpha`` reshaped to ``[d_X, K1]``: row ``a`` multiplies ``x_a``."""
        return self.alpha.reshape(self.d_x, self.basis.k1)

    def vw(self, v, w) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        if v.ndim == 0:
            return np.concatenate([[float(v)], np.atleast_1d(w)])
        return np.column_stack([v, np.atleast_2d(w) if w.ndim == 2 else w[:, None]])

    def fitted(self) -> np.ndarray:
        return self.p_hat @ self.alpha

    def inner_hat(self) -> np.ndarray:
        """Inner basis ``p(V_hat_i, W_i)`` at the training rows, ``[n, K1]``."""
        return self.basis.inner.evaluate(self.vw_train)


def vw_points(vhat, w: WStatistic) -> np.ndarray:
    return np.column_stack([np.asarray(vhat, dtype=float), w.w])


def fit_g(cross: CrossSection, vhat, w: WStatistic, p_spec: BasisConfig | None = None,
          ridge_eps: float = 1e-8, inner: TensorBasis | None = None) -> OutcomeModel:
    """Series fit of ``Y`` on ``x (kron) p(V_hat, W)``.

    ``inner`` overrides the basis that ``p_spec`` would build from the data.
    """
    p_spec = p_spec or BasisConfig(2, (0.5,), 1)
    vhat = np.asarray(vhat, dtype=float)
    if vhat.shape != (cross.n,) or w.w.shape[0] != cross.n:
        raise DimensionMismatch("vhat / W rows do not match the cross-section")
    vw = vw_points(vhat, w)
    # V_hat already lives on [0, 1]; W columns are mapped by their sample range
    if inner is None:
        inner = p_spec.build(vw, domains=[(0.0, 1.0)] + [None] * w.d_w)
    elif inner.dim != vw.shape[1]:
        raise DimensionMismatch(f"inner basis has dimension {inner.dim}, (v, w) has {vw.shape[1]}")
    basis = IndexBasis(cross.x_t.shape[1], inner)
    p_hat = basis.evaluate(cross.x_t, vw)
    n = cross.n
    if n <= p_hat.shape[1]:
        raise TooFewObservations(f"outcome basis has K = {p_hat.shape[1]} terms for n = {n} observations")
    solver = factor_gram(p_hat.T @ p_hat / n, ridge_eps)
    alpha = solver.solve(p_hat.T @ cross.y_t / n)
    return OutcomeModel(alpha=alpha, basis=basis, p_hat=p_hat, p_solver=solver,
                        residuals=cross.y_t - p_hat @ alpha, vw_train=vw)


def eval_g(model: OutcomeModel, x, v, w):
    """``G_hat(x, v, w)``; accepts one point or row-aligned arrays."""
    out = model.basis.evaluate(x, model.vw(v, w)) @ model.alpha
    return float(out) if np.ndim(out) == 0 else out


def eval_g_dv(model: OutcomeModel, x, v, w):
    """Partial derivative of ``G_hat`` in ``v``."""
    vw = model.vw(v, w)
    dp = model.basis.inner.derivative(vw, wrt=0)
    beta_v = np.atleast_2d(dp) @ model.alpha_matrix.T  # [n, d_X]
    x2 = np.atleast_2d(np.asarray(x, dtype=float))
    if x2.shape[1] != model.d_x:
        raise DimensionMismatch(f"|x| = {x2.shape[1]} != d_X = {model.d_x}")
    out = np.sum(x2 * beta_v, axis=1)
    return float(out[0]) if np.ndim(v) == 0 else out
