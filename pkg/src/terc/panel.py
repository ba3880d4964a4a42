"""Balanced panel container, CSV ingestion and per-period slicing."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import DimensionMismatch, DuplicateKey, NonNumeric, PeriodOutOfRange, UnbalancedPanel


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Balanced panel ``(Y_it, X_it, Z_it)``.

    Arrays are stored unit-major: ``y[i, t]``, ``x[i, t, :]``, ``z[i, t, :]``.
    When ``intercept_included`` is set the last column of ``x`` is the
    constant regressor.
    """

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    unit_ids: tuple = ()
    periods: tuple = ()
    intercept_included: bool = False

    def __post_init__(self):
        y, x, z = _frozen(self.y), _frozen(self.x), _frozen(self.z)
        if y.ndim != 2:
            raise DimensionMismatch("y must be [n_units, n_periods]")
        if x.ndim == 2:
            x = _frozen(x[..., None])
        if z.ndim == 2:
            z = _frozen(z[..., None])
        if x.shape[:2] != y.shape or z.shape[:2] != y.shape:
            raise DimensionMismatch(f"shape mismatch: y{y.shape} x{x.shape} z{z.shape}")
        if y.shape[0] < 1 or y.shape[1] < 2:
            raise DimensionMismatch("need at least one unit and two periods")
        for name, a in (("y", y), ("x", x), ("z", z)):
            if not np.all(np.isfinite(a)):
                raise NonNumeric(f"{name} has non-finite entries")
        if self.intercept_included and not np.all(x[..., -1] == 1.0):
            raise DimensionMismatch("intercept_included but last x column is not identically 1")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        if not self.unit_ids:
            object.__setattr__(self, "unit_ids", tuple(range(y.shape[0])))
        if not self.periods:
            object.__setattr__(self, "periods", tuple(range(y.shape[1])))
        if len(self.unit_ids) != y.shape[0] or len(self.periods) != y.shape[1]:
            raise DimensionMismatch("unit_ids / periods length mismatch")

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def d_x(self) -> int:
        return self.x.shape[2]

    @property
    def d_z(self) -> int:
        return self.z.shape[2]

    def __eq__(self, other):
        if not isinstance(other, PanelDataset):
            return NotImplemented
        return (
            self.intercept_included == other.intercept_included
            and tuple(self.unit_ids) == tuple(other.unit_ids)
            and tuple(self.periods) == tuple(other.periods)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.z, other.z)
        )

    def standardized(self) -> "PanelDataset":
        """Copy with every non-constant X and Z column centred and scaled to unit variance."""
        def _std(a, skip_last=False):
            a = np.array(a)
            k = a.shape[2] - (1 if skip_last else 0)
            flat = a[..., :k].reshape(-1, k)
            sd = flat.std(axis=0)
            sd[sd == 0] = 1.0
            a[..., :k] = (a[..., :k] - flat.mean(axis=0)) / sd
            return a

        return PanelDataset(
            y=self.y,
            x=_std(self.x, self.intercept_included),
            z=_std(self.z),
            unit_ids=self.unit_ids,
            periods=self.periods,
            intercept_included=self.intercept_included,
        )


@dataclass(frozen=True)
class CrossSection:
    period: int
    y_t: np.ndarray
    x_t: np.ndarray
    z_t: np.ndarray

    @property
    def n(self) -> int:
        return self.y_t.shape[0]


def cross_section(panel: PanelDataset, t: int) -> CrossSection:
    """Read-only slice of period ``t`` (0-based position, not the period label)."""
    if not 0 <= t < panel.n_periods:
        raise PeriodOutOfRange(f"period {t} not in [0, {panel.n_periods})")
    # basic slicing of read-only arrays yields read-only views
    return CrossSection(period=t, y_t=panel.y[:, t], x_t=panel.x[:, t, :], z_t=panel.z[:, t, :])


@dataclass(frozen=True)
class ColumnSchema:
    """Column layout of a panel CSV: ``id,t,y,x1..x{d_x},z1..z{d_z}``."""

    d_x: int
    d_z: int
    add_intercept: bool = False
    id_col: str = "id"
    t_col: str = "t"
    y_col: str = "y"
    x_cols: tuple = field(default=())
    z_cols: tuple = field(default=())

    def __post_init__(self):
        if not self.x_cols:
            object.__setattr__(self, "x_cols", tuple(f"x{k + 1}" for k in range(self.d_x)))
        if not self.z_cols:
            object.__setattr__(self, "z_cols", tuple(f"z{k + 1}" for k in range(self.d_z)))

    @property
    def columns(self) -> list[str]:
        return [self.id_col, self.t_col, self.y_col, *self.x_cols, *self.z_cols]

    @classmethod
    def from_header(cls, header: Sequence[str], add_intercept: bool = False) -> "ColumnSchema":
        d_x = sum(bool(re.fullmatch(r"x\d+", h)) for h in header)
        d_z = sum(bool(re.fullmatch(r"z\d+", h)) for h in header)
        return cls(d_x=d_x, d_z=d_z, add_intercept=add_intercept)


def load_csv(path, schema: ColumnSchema | None = None, add_intercept: bool | None = None) -> PanelDataset:
    """Read a balanced panel from CSV; rows may appear in any order.

    Columns are matched by header name. Raises UnbalancedPanel, NonNumeric or
    DuplicateKey on malformed input.
    """
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    if schema is None:
        schema = ColumnSchema.from_header(df.columns, add_intercept=bool(add_intercept))
    elif add_intercept is not None:
        schema = ColumnSchema(schema.d_x, schema.d_z, add_intercept, schema.id_col, schema.t_col,
                              schema.y_col, schema.x_cols, schema.z_cols)
    missing = [c for c in schema.columns if c not in df.columns]
    if missing:
        raise DimensionMismatch(f"CSV header lacks columns {missing}")

    num = {}
    for c in [schema.t_col, schema.y_col, *schema.x_cols, *schema.z_cols]:
        cells = df[c].str.strip()
        if (cells == "").any():
            raise NonNumeric(f"column {c!r} has empty cells")
        try:
            # pandas' fast float parser is not correctly rounded; Python's float() is
            num[c] = pd.to_numeric(cells, errors="raise") if c == schema.t_col else cells.map(float)
        except (ValueError, TypeError) as exc:
            raise NonNumeric(f"column {c!r}: {exc}") from None
    ids = df[schema.id_col].str.strip()
    try:
        ids = pd.to_numeric(ids, errors="raise")
    except (ValueError, TypeError):
        pass
    frame = pd.DataFrame(num)
    frame.insert(0, "_id", ids)

    if frame.duplicated(["_id", schema.t_col]).any():
        dup = frame.loc[frame.duplicated(["_id", schema.t_col]), ["_id", schema.t_col]].iloc[0]
        raise DuplicateKey(f"(id, t) = ({dup['_id']}, {dup[schema.t_col]}) repeated")
    frame = frame.sort_values(["_id", schema.t_col], kind="mergesort")
    unit_ids = pd.unique(frame["_id"])
    periods = np.sort(pd.unique(frame[schema.t_col]))
    counts = frame.groupby("_id", sort=True)[schema.t_col].count()
    if len(frame) != len(unit_ids) * len(periods) or (counts != len(periods)).any():
        bad = counts.index[counts != len(periods)][0]
        raise UnbalancedPanel(f"unit {bad} does not cover all {len(periods)} periods")

    n, T = len(unit_ids), len(periods)
    y = frame[schema.y_col].to_numpy(float).reshape(n, T)
    x = frame[list(schema.x_cols)].to_numpy(float).reshape(n, T, schema.d_x)
    z = frame[list(schema.z_cols)].to_numpy(float).reshape(n, T, schema.d_z)
    if schema.add_intercept:
        x = np.concatenate([x, np.ones((n, T, 1))], axis=2)
    return PanelDataset(
        y=y, x=x, z=z,
        unit_ids=tuple(v.item() if hasattr(v, "item") else v for v in unit_ids),
        periods=tuple(p.item() if hasattr(p, "item") else p for p in periods),
        intercept_included=schema.add_intercept,
    )


def panel_frame(panel: PanelDataset) -> pd.DataFrame:
    """Long-format frame in the CSV column layout (intercept column dropped)."""
    n, T = panel.n_units, panel.n_periods
    dx = panel.d_x - (1 if panel.intercept_included else 0)
    data = {
        "id": np.repeat(np.asarray(panel.unit_ids, dtype=object), T),
        "t": np.tile(np.asarray(panel.periods, dtype=object), n),
        "y": panel.y.reshape(-1),
    }
    for k in range(dx):
        data[f"x{k + 1}"] = panel.x[..., k].reshape(-1)
    for k in range(panel.d_z):
        data[f"z{k + 1}"] = panel.z[..., k].reshape(-1)
    return pd.DataFrame(data)


def write_csv(panel: PanelDataset, path) -> Path:
    """Write ``panel`` so that ``load_csv`` reproduces it bit for bit."""
    path = Path(path)
    panel_frame(panel).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path
