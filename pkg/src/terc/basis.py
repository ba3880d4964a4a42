"""Truncated-power spline bases, their tensor products and the Kronecker index basis.

A one-dimensional spline of degree ``p`` with knots ``k_1 < ... < k_m`` on
``[lo, hi]`` has terms ``1, u, ..., u^p, (u - c_1)_+^p, ..., (u - c_m)_+^p``
where ``u = (x - lo) / (hi - lo)`` and ``c_j`` is knot ``k_j`` mapped the same
way. Multivariate bases multiply one term from each dimension.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class SplineSpec:
    degree: int
    knots: tuple = ()
    domain: tuple = (0.0, 1.0)

    def __post_init__(self):
        lo, hi = map(float, self.domain)
        if not hi > lo:
            raise ValueError(f"empty domain {self.domain}")
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        knots = tuple(float(k) for k in self.knots)
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ValueError("knots must be strictly increasing")
        if knots and not (lo < knots[0] and knots[-1] < hi):
            raise ValueError(f"knots {knots} not strictly inside ({lo}, {hi})")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "domain", (lo, hi))

    @property
    def n_terms(self) -> int:
        return 1 + self.degree + len(self.knots)

    @property
    def term_degrees(self) -> tuple:
        return tuple(range(self.degree + 1)) + (self.degree,) * len(self.knots)

    @property
    def width(self) -> float:
        return self.domain[1] - self.domain[0]

    def scale(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.domain[0]) / self.width

    def evaluate(self, x, deriv: int = 0) -> np.ndarray:
        """Term matrix ``[len(x), n_terms]`` of the ``deriv``-th derivative in ``x``."""
        u = self.scale(x)
        p = self.degree
        cols = [np.ones_like(u) if deriv == 0 else np.zeros_like(u)]
        for k in range(1, p + 1):
            cols.append(_power_deriv(u, k, deriv))
        for c in self.scale(np.array(self.knots)):
            cols.append(_trunc_power_deriv(u - c, p, deriv))
        out = np.stack(cols, axis=-1)
        return out / self.width**deriv if deriv else out


def _falling(k: int, d: int) -> float:
    out = 1.0
    for j in range(d):
        out *= k - j
    return out


def _power_deriv(u, k, d):
    if d > k:
        return np.zeros_like(u)
    return _falling(k, d) * u ** (k - d)


def _trunc_power_deriv(s, p, d):
    if p == 0:
        # step function; derivative is zero almost everywhere
        return (s >= 0).astype(float) if d == 0 else np.zeros_like(s)
    if d > p:
        return np.zeros_like(s)
    if d == p:
        return _falling(p, d) * (s > 0).astype(float)
    return _falling(p, d) * np.maximum(s, 0.0) ** (p - d)


@dataclass(frozen=True)
class TensorBasis:
    """Products of one-dimensional spline terms.

    ``terms`` lists, for each basis function, the local term index used in
    every dimension (0 is the constant). The first term is always the
    all-constant product.
    """

    specs: tuple
    terms: tuple
    _offsets: np.ndarray = field(init=False, repr=False, compare=False)
    _factors: np.ndarray = field(init=False, repr=False, compare=False)
    _involves: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        specs = tuple(self.specs)
        terms = tuple(tuple(int(j) for j in t) for t in self.terms)
        if not terms or any(len(t) != len(specs) for t in terms):
            raise DimensionMismatch("every term needs one local index per dimension")
        if any(j != 0 for j in terms[0]):
            raise ValueError("first term must be the constant")
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "terms", terms)
        sizes = [s.n_terms for s in specs]
        # column 0 of the stacked matrix is a shared column of ones
        offsets = np.concatenate([[1], 1 + np.cumsum(sizes)[:-1]]).astype(int) if specs else np.array([], int)
        width = max([sum(j != 0 for j in t) for t in terms] + [1])
        factors = np.zeros((len(terms), width), dtype=int)
        involves = np.zeros((len(specs), len(terms)), dtype=bool)
        for a, t in enumerate(terms):
            nz = [(d, j) for d, j in enumerate(t) if j != 0]
            for k, (d, j) in enumerate(nz):
                factors[a, k] = offsets[d] + j
                involves[d, a] = True
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "_factors", factors)
        object.__setattr__(self, "_involves", involves)

    @property
    def dim(self) -> int:
        return len(self.specs)

    @property
    def total_terms(self) -> int:
        return len(self.terms)

    @classmethod
    def full(cls, specs: Sequence[SplineSpec]) -> "TensorBasis":
        """Full tensor product in Kronecker order (last dimension varies fastest)."""
        return cls(tuple(specs), tuple(itertools.product(*[range(s.n_terms) for s in specs])))

    @classmethod
    def total_degree(cls, specs: Sequence[SplineSpec], interaction_degree: int | None = None) -> "TensorBasis":
        """Total-degree truncation of the tensor product.

        Keeps every univariate term of every dimension (powers and knot terms)
        plus products of pure powers across two or more dimensions whose
        combined degree is at most ``interaction_degree`` (default: the largest
        per-dimension degree). Terms appear in Kronecker order.
        """
        specs = tuple(specs)
        if interaction_degree is None:
            interaction_degree = max([s.degree for s in specs] + [0])
        terms = []
        for d, s in enumerate(specs):
            for j in range(1, s.n_terms):
                t = [0] * len(specs)
                t[d] = j
                terms.append(tuple(t))

        def grow(start, budget, cur):
            if len(cur) >= 2:
                t = [0] * len(specs)
                for d, e in cur:
                    t[d] = e
                terms.append(tuple(t))
            for d in range(start, len(specs)):
                for e in range(1, min(budget, specs[d].degree) + 1):
                    grow(d + 1, budget - e, cur + [(d, e)])

        grow(0, interaction_degree, [])
        terms = sorted(set(terms))
        return cls(specs, tuple([(0,) * len(specs)] + terms))

    def _stack(self, points: np.ndarray, wrt: int | None = None, order: int = 1) -> np.ndarray:
        blocks = [np.ones((points.shape[0], 1))]
        for d, s in enumerate(self.specs):
            blocks.append(s.evaluate(points[:, d], deriv=order if d == wrt else 0))
        return np.concatenate(blocks, axis=1)

    def _points(self, point) -> tuple[np.ndarray, bool]:
        p = np.asarray(point, dtype=float)
        single = p.ndim <= 1
        p = np.atleast_2d(p) if p.ndim == 1 else (p.reshape(-1, 1) if p.ndim == 0 else p)
        if p.shape[1] != self.dim:
            raise DimensionMismatch(f"point dimension {p.shape[1]} != basis dimension {self.dim}")
        return p, single

    def evaluate(self, point) -> np.ndarray:
        """Basis vector at one point, or ``[n, total_terms]`` matrix for ``[n, dim]`` points."""
        p, single = self._points(point)
        out = np.prod(self._stack(p)[:, self._factors], axis=2)
        return out[0] if single else out

    def derivative(self, point, wrt: int, order: int = 1) -> np.ndarray:
        """Derivative of every basis function with respect to argument ``wrt``."""
        if not 0 <= wrt < self.dim:
            raise DimensionMismatch(f"wrt={wrt} outside basis dimension {self.dim}")
        p, single = self._points(point)
        out = np.prod(self._stack(p, wrt, order)[:, self._factors], axis=2) * self._involves[wrt]
        return out[0] if single else out


def eval_tensor(basis: TensorBasis, point) -> np.ndarray:
    return basis.evaluate(point)


def eval_tensor_deriv(basis: TensorBasis, point, wrt: int, order: int = 1) -> np.ndarray:
    return basis.derivative(point, wrt, order)


def spline_from_data(values, degree: int, knot_quantiles: Sequence[float] = (0.5,), domain=None) -> SplineSpec:
    """Spline whose domain is the sample range and knots are sample quantiles.

    Knots that coincide with each other or with the range ends (discrete or
    heavily tied data) are dropped.
    """
    values = np.asarray(values, dtype=float)
    lo, hi = (float(values.min()), float(values.max())) if domain is None else map(float, domain)
    if not hi > lo:
        hi = lo + 1.0
    knots = []
    for q in knot_quantiles:
        k = float(np.quantile(values, q))
        if lo < k < hi and (not knots or k > knots[-1]):
            knots.append(k)
    return SplineSpec(degree, tuple(knots), (lo, hi))


def basis_from_data(data, degree: int, knot_quantiles: Sequence[float] = (0.5,),
                    interaction_degree: int | None = None, domains=None) -> TensorBasis:
    """Total-degree tensor basis fitted to the columns of ``data`` ``[n, dim]``."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    domains = domains or [None] * data.shape[1]
    specs = [spline_from_data(data[:, d], degree, knot_quantiles, domains[d]) for d in range(data.shape[1])]
    return TensorBasis.total_degree(specs, interaction_degree)


@dataclass(frozen=True)
class IndexBasis:
    """``p(s) = x (kron) inner(v, w)``, linear in ``x`` for fixed ``(v, w)``."""

    d_x: int
    inner: TensorBasis

    @property
    def k1(self) -> int:
        return self.inner.total_terms

    @property
    def total_terms(self) -> int:
        return self.d_x * self.k1

    def _x(self, x, n):
        x = np.asarray(x, dtype=float)
        x2 = np.atleast_2d(x)
        if x2.shape[1] != self.d_x:
            raise DimensionMismatch(f"|x| = {x2.shape[1]} != d_X = {self.d_x}")
        if x2.shape[0] != n:
            raise DimensionMismatch("x and (v, w) have different numbers of rows")
        return x2

    def evaluate(self, x, vw) -> np.ndarray:
        inner = np.atleast_2d(self.inner.evaluate(vw))
        single = np.asarray(x).ndim == 1
        x2 = self._x(x, inner.shape[0])
        out = (x2[:, :, None] * inner[:, None, :]).reshape(inner.shape[0], -1)
        return out[0] if single else out

    def dbar(self, vw) -> np.ndarray:
        """``I_{d_X} (kron) inner(v, w)``: ``[K, d_X]`` (or ``[n, K, d_X]`` for batches)."""
        inner = self.inner.evaluate(vw)
        single = inner.ndim == 1
        inner = np.atleast_2d(inner)
        out = np.einsum("ab,nj->najb", np.eye(self.d_x), inner).reshape(inner.shape[0], self.total_terms, self.d_x)
        return out[0] if single else out


def eval_index(basis: IndexBasis, x, vw) -> np.ndarray:
    return basis.evaluate(x, vw)


def eval_dbar(basis: IndexBasis, vw) -> np.ndarray:
    return basis.dbar(vw)
