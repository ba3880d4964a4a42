"""Time-symmetric sufficient statistic for the unit fixed effect."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .panel import PanelDataset


class DegenerateColumn(UserWarning):
    """A column of W is constant across units."""


@dataclass(frozen=True)
class WStatistic:
    w: np.ndarray
    exponents: tuple
    variables: tuple
    degenerate: tuple = ()

    @property
    def d_w(self) -> int:
        return self.w.shape[1]

    @property
    def names(self) -> list[str]:
        out = []
        for e in self.exponents:
            out.append("*".join(f"{v}^{k}" if k > 1 else v for v, k in zip(self.variables, e) if k))
        return out


def monomial_exponents(n_vars: int, degree: int) -> list[tuple]:
    """Exponent vectors of all monomials of total degree 1..degree.

    Ordered by degree; within a degree pure powers come first (in variable
    order), then mixed products in lexicographic order of the variables used,
    e.g. ``x, z, x^2, z^2, xz``.
    """
    out = []
    for deg in range(1, degree + 1):
        pure, mixed = [], []
        for combo in itertools.combinations_with_replacement(range(n_vars), deg):
            e = [0] * n_vars
            for v in combo:
                e[v] += 1
            (pure if len(set(combo)) == 1 else mixed).append(tuple(e))
        out.extend(pure + mixed)
    return out


def default_endogenous(panel: PanelDataset) -> list[int]:
    return list(range(panel.d_x - (1 if panel.intercept_included else 0)))


def build_w(panel: PanelDataset, degree: int = 2, endogenous_x=None, include_z: bool = True) -> WStatistic:
    """Per-unit time average of within-period monomials of ``(X_it, Z_it)``.

    ``endogenous_x`` selects the X columns entering W (default: every column
    except the intercept). Each unit's per-period values are sorted before
    summation so the result is bit-identical under any permutation of periods.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    cols = default_endogenous(panel) if endogenous_x is None else _mask_to_index(endogenous_x, panel.d_x)
    if panel.intercept_included and (panel.d_x - 1) in cols:
        cols = [c for c in cols if c != panel.d_x - 1]
    base = [panel.x[..., c] for c in cols]
    names = [f"x{c + 1}" for c in cols]
    if include_z:
        base += [panel.z[..., k] for k in range(panel.d_z)]
        names += [f"z{k + 1}" for k in range(panel.d_z)]
    base = np.stack(base, axis=-1)  # [n, T, k]

    exps = monomial_exponents(base.shape[-1], degree)
    vals = np.stack([np.prod(base ** np.array(e), axis=-1) for e in exps], axis=-1)  # [n, T, d_W]
    w = np.sort(vals, axis=1).sum(axis=1) / panel.n_periods

    degenerate = tuple(int(k) for k in np.flatnonzero(np.all(w == w[:1], axis=0)))
    if degenerate:
        warnings.warn(f"W columns {list(degenerate)} are constant across units", DegenerateColumn, stacklevel=2)
    w.flags.writeable = False
    return WStatistic(w=w, exponents=tuple(exps), variables=tuple(names), degenerate=degenerate)


def _mask_to_index(mask, d_x):
    mask = list(mask)
    if mask and all(isinstance(m, (bool, np.bool_)) for m in mask):
        if len(mask) > d_x:
            raise ValueError("endogenous_x mask longer than d_X")
        return [k for k, m in enumerate(mask) if m]
    return [int(m) for m in mask]
