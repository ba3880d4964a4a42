"""Ridge-stabilised least squares on series Gram matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import SingularGram

#: Ridge ladder: start at the requested epsilon, multiply by 10 up to this cap.
MAX_RIDGE = 1e-4
#: Cholesky factors whose squared diagonal ratio falls below this are rejected.
MIN_RCOND = 1e-15


@dataclass(frozen=True)
class GramSolver:
    """Cholesky factorisation of ``G + eps * diag(G)``.

    ``gram`` is the unregularised sample Gram matrix ``n^-1 B'B``; ``eps`` is
    the ridge actually used after escalation.
    """

    gram: np.ndarray
    eps: float
    factor: tuple

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return la.cho_solve(self.factor, rhs, check_finite=False)

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.dim))

    def condition_number(self) -> float:
        d = np.diag(self.factor[0]) ** 2
        return float(d.max() / d.min())


def factor_gram(gram: np.ndarray, eps: float = 1e-8, max_eps: float = MAX_RIDGE) -> GramSolver:
    """Factor a symmetric Gram matrix, escalating the ridge until it is usable.

    Raises SingularGram when even ``max_eps`` does not yield a well-posed
    Cholesky factor.
    """
    gram = np.asarray(gram, dtype=float)
    gram = 0.5 * (gram + gram.T)
    scale = np.diag(gram)
    if not np.all(np.isfinite(gram)):
        raise SingularGram("Gram matrix has non-finite entries")
    cur = float(eps)
    while True:
        try:
            c, lower = la.cho_factor(gram + cur * np.diag(scale), lower=False, check_finite=False)
            d = np.diag(c) ** 2
            if d.min() > 0 and d.min() / d.max() > MIN_RCOND:
                return GramSolver(gram=gram, eps=cur, factor=(c, lower))
        except la.LinAlgError:
            pass
        if cur >= max_eps * (1 - 1e-12):
            break
        cur = min(cur * 10.0, max_eps) if cur > 0 else 1e-12
    raise SingularGram(
        f"Gram matrix of size {gram.shape[0]} is singular even with ridge {max_eps:g}; "
        "the basis is too rich for the sample"
    )


def series_fit(design: np.ndarray, target: np.ndarray, eps: float = 1e-8) -> tuple[np.ndarray, GramSolver]:
    """Series regression coefficients ``(n^-1 B'B + ridge)^-1 n^-1 B'y``."""
    n = design.shape[0]
    solver = factor_gram(design.T @ design / n, eps)
    coef = solver.solve(design.T @ target / n)
    return coef, solver
