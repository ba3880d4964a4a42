"""Estimation configuration and its JSON representation."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class BasisConfig:
    """Spline degree, knot quantiles and cross-dimension product cap for one series step.

    ``interaction_degree`` bounds the combined degree of products across
    dimensions; ``None`` means ``min(degree, 2)`` and ``1`` gives an additive
    basis.
    """

    degree: int = 2
    knot_quantiles: tuple = (0.5,)
    interaction_degree: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "knot_quantiles", tuple(float(q) for q in self.knot_quantiles))
        if self.degree < 0:
            raise ConfigError("basis degree must be non-negative")
        if any(not 0.0 < q < 1.0 for q in self.knot_quantiles):
            raise ConfigError("knot quantiles must lie in (0, 1)")

    @property
    def interactions(self) -> int:
        if self.interaction_degree is None:
            return min(self.degree, 2)
        return self.interaction_degree

    def build(self, data, domains: Sequence | None = None):
        from .basis import basis_from_data

        return basis_from_data(data, self.degree, self.knot_quantiles, self.interactions, domains)


_BASIS_STEPS = ("q", "p", "r")


@dataclass(frozen=True)
class EstimateConfig:
    """Settings for the three-step estimator.

    ``q`` is the first-step basis over ``(z, w)``, ``p`` the inner basis over
    ``(v, w)`` of the outcome regression and ``r`` the basis over the
    non-constant regressors used for ``beta(x)``.
    """

    q: BasisConfig = field(default_factory=lambda: BasisConfig(2, (0.5,), 2))
    p: BasisConfig = field(default_factory=lambda: BasisConfig(2, (0.5,), 1))
    r: BasisConfig = field(default_factory=lambda: BasisConfig(2, (0.5,), 2))
    w_degree: int = 2
    endogenous_x: tuple | None = None
    monotone_coord: int | None = None
    ridge_eps: float = 1e-8
    ci_level: float = 0.95
    inference: bool = False
    estimate_second_moments: bool = False
    periods: tuple | None = None
    x_grid: tuple | None = None
    standardize: bool = False
    add_intercept: bool = True

    def __post_init__(self):
        if self.w_degree < 1:
            raise ConfigError("w_degree must be >= 1")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigError("ci_level must lie in (0, 1)")
        if self.ridge_eps < 0:
            raise ConfigError("ridge_eps must be non-negative")

    def validate(self, d_x: int, n_periods: int, intercept: bool) -> None:
        free = d_x - (1 if intercept else 0)
        mc = self.monotone_coord if self.monotone_coord is not None else 0
        if not 0 <= mc < free:
            raise ConfigError(f"monotone_coord {mc} must index a non-constant regressor (0..{free - 1})")
        if self.endogenous_x is not None:
            for k in _endog_indices(self.endogenous_x):
                if not 0 <= k < free:
                    raise ConfigError(f"endogenous_x index {k} out of range")
        for t in self.periods or ():
            if not 0 <= t < n_periods:
                raise ConfigError(f"period {t} out of range")
        if self.estimate_second_moments and not (intercept and d_x == 2):
            raise ConfigError("second moments need one regressor plus the intercept")

    # JSON mapping uses flat keys: q_degree, q_knot_quantiles, q_interaction_degree, ...
    def to_dict(self) -> dict:
        out = {}
        for step in _BASIS_STEPS:
            b = getattr(self, step)
            out[f"{step}_degree"] = b.degree
            out[f"{step}_knot_quantiles"] = list(b.knot_quantiles)
            out[f"{step}_interaction_degree"] = b.interaction_degree
        for f in dataclasses.fields(self):
            if f.name in _BASIS_STEPS:
                continue
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateConfig":
        d = dict(d)
        kwargs = {}
        defaults = cls()
        for step in _BASIS_STEPS:
            base = getattr(defaults, step)
            kwargs[step] = BasisConfig(
                int(d.pop(f"{step}_degree", base.degree)),
                tuple(d.pop(f"{step}_knot_quantiles", base.knot_quantiles)),
                d.pop(f"{step}_interaction_degree", base.interaction_degree),
            )
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown estimation config keys: {sorted(unknown)}")
        for k, v in d.items():
            if k in ("endogenous_x", "periods", "x_grid") and v is not None:
                v = tuple(tuple(r) if isinstance(r, list) else r for r in v)
            kwargs[k] = v
        return cls(**kwargs)


def _endog_indices(mask) -> list[int]:
    mask = list(mask)
    if mask and all(isinstance(m, (bool, np.bool_)) for m in mask):
        return [k for k, m in enumerate(mask) if m]
    return [int(m) for m in mask]


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def load_estimate_config(path) -> EstimateConfig:
    return EstimateConfig.from_dict(read_json(path))


def dump_json(obj, path) -> Path:
    """Write JSON; float repr is the shortest string that parses back to the same double."""
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n", encoding="utf-8")
    return path
