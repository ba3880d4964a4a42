"""Plug-in asymptotic covariances for beta(v, w), beta(x) and the average partial effect.

All covariances are for ``sqrt(n)`` times the estimation error; standard
errors divide by ``n``. The first-step correction terms

    mu_I_i  = n^-1 sum_j G_v(S_j) tau'(V_j) p_j  q_j' Q^- q_i  v_ji
    mu_II_i = n^-1 sum_j tau'(V_j) r_j beta_v(S_j)'  q_j' Q^- q_i  v_ji

with ``v_ji = 1{x_i <= x_j} - F_hat(x_j | z_i, w_i)`` need the full ``n x n``
cross array; it is streamed in column blocks of ``i`` so memory stays
``O(n (K + L + M d_X))`` beyond one block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .coefficients import BetaVWModel, BetaXModel
from .control import ControlModel, cross_cdf_block, trim_deriv, vhat_raw
from .outcome import OutcomeModel, vw_points
from .panel import CrossSection
from .sufficient import WStatistic

BLOCK = 256


@dataclass(frozen=True, eq=False)
class MuTerms:
    mu_I: np.ndarray  # [n, K]
    mu_II: np.ndarray  # [n, M, d_X]
    mu_II_const: np.ndarray  # [n, d_X], mu_II for the constant r basis


@dataclass(frozen=True)
class CovarianceReport:
    estimate: np.ndarray
    omega: np.ndarray
    se: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    level: float
    n: int
    min_eig_raw: float

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate.tolist(),
            "omega": self.omega.tolist(),
            "se": self.se.tolist(),
            "ci_lo": self.ci_lo.tolist(),
            "ci_hi": self.ci_hi.tolist(),
            "level": self.level,
            "n": self.n,
            "min_eig_raw": self.min_eig_raw,
        }


def psd_project(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Symmetrise, clamp negative eigenvalues to zero; also return the raw minimum eigenvalue."""
    a = 0.5 * (a + a.T)
    vals, vecs = np.linalg.eigh(a)
    out = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return 0.5 * (out + out.T), float(vals.min())


def _report(estimate, omega, n, level) -> CovarianceReport:
    omega, min_eig = psd_project(np.atleast_2d(omega))
    se = np.sqrt(np.clip(np.diag(omega), 0.0, None) / n)
    crit = stats.norm.ppf(0.5 + level / 2)
    estimate = np.asarray(estimate, dtype=float)
    return CovarianceReport(estimate=estimate, omega=omega, se=se, ci_lo=estimate - crit * se,
                            ci_hi=estimate + crit * se, level=level, n=n, min_eig_raw=min_eig)


def first_step_weights(control: ControlModel, outcome: OutcomeModel, cross: CrossSection,
                       vhat, w: WStatistic, r_matrix=None):
    """Per-``j`` weight rows ``[G_v tau' p_j | tau' r_j beta_v' | tau' beta_v']``."""
    bvw = BetaVWModel(outcome)
    vw = vw_points(vhat, w)
    beta_v = np.atleast_2d(bvw.dv(vw[:, 0], vw[:, 1:]))  # [n, d_X]
    tp = trim_deriv(vhat_raw(control, cross))
    g_v = np.sum(cross.x_t * beta_v, axis=1)
    c_I = (g_v * tp)[:, None] * outcome.p_hat
    if r_matrix is None:
        r_matrix = np.ones((cross.n, 1))
    c_II = (tp[:, None, None] * r_matrix[:, :, None] * beta_v[:, None, :]).reshape(cross.n, -1)
    c_II1 = tp[:, None] * beta_v
    return c_I, c_II, c_II1, r_matrix.shape[1], beta_v.shape[1]


def compute_mu_terms(control: ControlModel, outcome: OutcomeModel, cross: CrossSection, vhat,
                     w: WStatistic, r_matrix=None, block: int = BLOCK) -> MuTerms:
    n = cross.n
    c_I, c_II, c_II1, m, d_x = first_step_weights(control, outcome, cross, vhat, w, r_matrix)
    weights = np.concatenate([c_I, c_II, c_II1], axis=1)
    q = control.q_matrix
    qinv_qt = control.q_solver.solve(q.T)  # [L, n]
    x1 = np.asarray(cross.x_t[:, control.monotone_coord], dtype=float)
    out = np.empty((n, weights.shape[1]))
    for start in range(0, n, block):
        rows = slice(start, min(start + block, n))
        a = q @ qinv_qt[:, rows]  # [j, i] = q_j' Q^- q_i
        ind = (x1[rows][None, :] <= x1[:, None]).astype(float)  # [j, i] = 1{x_i <= x_j}
        f = cross_cdf_block(control, x1, rows).T  # [j, i] = F_hat(x_j | z_i, w_i)
        out[rows] = (a * (ind - f)).T @ weights / n
    k = c_I.shape[1]
    return MuTerms(
        mu_I=out[:, :k],
        mu_II=out[:, k:k + m * d_x].reshape(n, m, d_x),
        mu_II_const=out[:, k + m * d_x:],
    )


def compute_mu_terms_naive(control: ControlModel, outcome: OutcomeModel, cross: CrossSection, vhat,
                           w: WStatistic, r_matrix=None) -> MuTerms:
    """Reference double loop over ``(i, j)``; O(n^2) Python, for small ``n`` only."""
    from .control import eval_v_cross

    n = cross.n
    c_I, c_II, c_II1, m, d_x = first_step_weights(control, outcome, cross, vhat, w, r_matrix)
    q = control.q_matrix
    qinv = control.q_solver.inverse()
    x1 = cross.x_t[:, control.monotone_coord]
    mu_I = np.zeros_like(c_I)
    mu_II = np.zeros_like(c_II)
    mu_II1 = np.zeros_like(c_II1)
    for i in range(n):
        for j in range(n):
            a = q[j] @ qinv @ q[i]
            v_ji = float(x1[i] <= x1[j]) - eval_v_cross(control, x1[j], cross.z_t[i], w.w[i])
            mu_I[i] += c_I[j] * a * v_ji
            mu_II[i] += c_II[j] * a * v_ji
            mu_II1[i] += c_II1[j] * a * v_ji
    return MuTerms(mu_I=mu_I / n, mu_II=(mu_II / n).reshape(n, m, d_x), mu_II_const=mu_II1 / n)


def _sigma(outcome: OutcomeModel) -> np.ndarray:
    p = outcome.p_hat
    u2 = outcome.residuals**2
    return (p * u2[:, None]).T @ p / p.shape[0]


def omega1_at(v: float, w, outcome: OutcomeModel, mu: MuTerms | None, level: float = 0.95,
              include_first_step: bool = True) -> CovarianceReport:
    """Covariance of ``beta_hat(v, w)``: ``pbar' P^-1 (Sigma + Sigma_1) P^-1 pbar``."""
    n = outcome.p_hat.shape[0]
    pbar = outcome.basis.dbar(outcome.vw(v, w))  # [K, d_X]
    middle = _sigma(outcome)
    if include_first_step and mu is not None:
        middle = middle + mu.mu_I.T @ mu.mu_I / n
    h = outcome.p_solver.solve(pbar)  # P^-1 pbar
    est = pbar.T @ outcome.alpha
    return _report(est, h.T @ middle @ h, n, level)


def sigma_part_omega1(v: float, w, outcome: OutcomeModel) -> np.ndarray:
    """The heteroskedastic ``Sigma`` contribution alone (no first-step term)."""
    pbar = outcome.basis.dbar(outcome.vw(v, w))
    h = outcome.p_solver.solve(pbar)
    return h.T @ _sigma(outcome) @ h


def _a1(outcome: OutcomeModel, r_x: np.ndarray, r_solver, r_matrix: np.ndarray) -> np.ndarray:
    """``A_1 = r(x)' R^-1 n^-1 sum_i r_i pbar_i'`` as a ``[d_X, K]`` matrix.

    Row ``a`` of ``pbar_i'`` carries ``p(V_i, W_i)`` in block ``a``, so
    ``A_1 = I (kron) (r(x)' R^-1 n^-1 r' p)``.
    """
    n = r_matrix.shape[0]
    h = r_solver.solve(r_matrix.T @ outcome.inner_hat() / n)  # [M, K1]
    return np.kron(np.eye(outcome.d_x), (r_x @ h)[None, :])


def omega2_parts(outcome: OutcomeModel, mu: MuTerms, r_x: np.ndarray, r_solver, r_matrix: np.ndarray,
                 xi: np.ndarray, mu_II: np.ndarray):
    n = r_matrix.shape[0]
    a1 = _a1(outcome, r_x, r_solver, r_matrix)
    g = outcome.p_solver.solve(a1.T)  # P^-1 A_1'
    omega21 = g.T @ _sigma(outcome) @ g
    rr = r_solver.solve(r_x)  # R^-1 r(x)
    second = np.einsum("m,imd->id", rr, mu_II) + (r_matrix @ rr)[:, None] * xi
    psi = mu.mu_I @ g - second
    omega22 = psi.T @ psi / n
    return omega21, omega22


def omega2_at(x, outcome: OutcomeModel, betax: BetaXModel, mu: MuTerms, level: float = 0.95) -> CovarianceReport:
    """Covariance of ``beta_hat(x)``: ``Omega_21 + Omega_22``."""
    r_x = betax.r(x)
    o21, o22 = omega2_parts(outcome, mu, r_x, betax.r_solver, betax.r_matrix, betax.xi, mu.mu_II)
    return _report(r_x @ betax.eta, o21 + o22, betax.r_matrix.shape[0], level)


class _UnitSolver:
    def solve(self, rhs):
        return np.asarray(rhs, dtype=float)


def omega3(outcome: OutcomeModel, bhat: np.ndarray, mu: MuTerms, level: float = 0.95) -> CovarianceReport:
    """Covariance of the average partial effect: the ``r == 1`` case of ``omega2_at``."""
    n = bhat.shape[0]
    bbar = bhat.mean(axis=0)
    o21, o22 = omega2_parts(outcome, mu, np.ones(1), _UnitSolver(), np.ones((n, 1)),
                            bhat - bbar, mu.mu_II_const[:, None, :])
    return _report(bbar, o21 + o22, n, level)
