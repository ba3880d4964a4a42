"""Random Cobb-Douglas production DGP and the Monte Carlo harness.

Firms draw a fixed effect ``A ~ U[1, 2]`` and a productivity shock
``U_t = A * eta1_t + eta2_t`` (``eta1`` idiosyncratic, ``eta2`` a macro shock
shared by all firms in a period, both ``U[1, 3/2]``). Coefficients are
``omega = U``, ``beta_K = A + U``, ``beta_L = A * U``; log capital and labour
solve the static profit-maximisation problem at input prices ``(R, W, P)``,
each ``U[1, 3]``.

Every uniform draw comes from its own counter-keyed stream
``(seed, rep, variable, period)`` and unit ``i`` takes the ``i``-th value of
that stream, so replications are order independent and a smaller panel is an
exact prefix of a larger one with the same seed.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from threadpoolctl import threadpool_limits

from .config import EstimateConfig, read_json
from .errors import ConfigError, DegenerateDenominator, EmptyInput, TercError
from .panel import PanelDataset
from .pipeline import estimate

COEF_NAMES = ("betaK", "betaL", "omega")
TRUE_BAR = np.array([37 / 8, 115 / 24, 25 / 8])
TRUE_BAR_EXACT = (Fraction(37, 8), Fraction(115, 24), Fraction(25, 8))
#: supports implied by the uniform draws: beta_K, beta_L, omega
COEF_SUPPORT = ((3.0, 6.5), (2.0, 9.0), (2.0, 4.5))

_VARS = {"A": 0, "eta1": 1, "eta2": 2, "R": 3, "W": 4, "P": 5, "eps": 6}


@dataclass(frozen=True)
class SimConfig:
    n_units: int = 1000
    n_periods: int = 3
    n_reps: int = 100
    seed: int = 20240607
    include_epsilon: bool = False
    estimation: EstimateConfig = field(default_factory=EstimateConfig)
    hist_bins: int = 40
    threads: int = 1

    def __post_init__(self):
        if self.n_units < 50:
            raise ConfigError("n_units must be >= 50")
        if self.n_periods < 2:
            raise ConfigError("n_periods must be >= 2")
        if self.n_reps < 1:
            raise ConfigError("n_reps must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def replace(self, **kw) -> "SimConfig":
        est = {k: kw.pop(k) for k in list(kw) if k not in {f.name for f in dataclasses.fields(self)}}
        out = dataclasses.replace(self, **kw)
        if est:
            out = dataclasses.replace(out, estimation=EstimateConfig.from_dict({**out.estimation.to_dict(), **est}))
        return out

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "estimation"}
        d.update(self.estimation.to_dict())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        own = {f.name for f in dataclasses.fields(cls)} - {"estimation"}
        kwargs = {k: d.pop(k) for k in list(d) if k in own}
        return cls(**kwargs, estimation=EstimateConfig.from_dict(d))


def load_sim_config(path) -> SimConfig:
    return SimConfig.from_dict(read_json(path))


def order_preset(order: int, base: SimConfig | None = None) -> SimConfig:
    """Configuration for a given basis order.

    Order ``k`` uses degree-``k`` splines in all three steps and a sufficient
    statistic of degree ``min(k, 2)``. Order 1 is the plain linear basis
    (no knots); higher orders keep a knot at the median.
    """
    base = base or SimConfig()
    knots = () if order == 1 else (0.5,)
    return base.replace(q_degree=order, p_degree=order, r_degree=order, q_knot_quantiles=knots,
                        p_knot_quantiles=knots, r_knot_quantiles=knots, w_degree=min(order, 2))


@dataclass(frozen=True)
class SimTruth:
    beta_it: np.ndarray  # [N, T, 3] in COEF_NAMES order
    a_i: np.ndarray
    u_it: np.ndarray
    eta2_t: np.ndarray
    true_bar: np.ndarray = field(default_factory=lambda: TRUE_BAR.copy())

    def period_means(self) -> np.ndarray:
        """``E[beta | eta2_t]`` per period, ``[T, 3]`` (the estimand once the macro shock is realised)."""
        e2 = self.eta2_t
        ea, ea2, ee1 = 1.5, 7 / 3, 1.25
        return np.column_stack([ea + ea * ee1 + e2, ea2 * ee1 + ea * e2, ea * ee1 + e2])


def _uniform(seed: int, rep: int, var: str, t: int, size: int, lo: float, hi: float) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(rep), _VARS[var], int(t)))
    return np.random.Generator(np.random.Philox(ss)).uniform(lo, hi, size)


def gen_dgp(config: SimConfig, rep: int) -> tuple[PanelDataset, SimTruth]:
    N, T, s = config.n_units, config.n_periods, config.seed
    a = _uniform(s, rep, "A", 0, N, 1.0, 2.0)
    eta1 = np.column_stack([_uniform(s, rep, "eta1", t, N, 1.0, 1.5) for t in range(T)])
    eta2 = np.array([_uniform(s, rep, "eta2", t, 1, 1.0, 1.5)[0] for t in range(T)])
    u = a[:, None] * eta1 + eta2[None, :]
    omega = u
    bk = a[:, None] + u
    bl = a[:, None] * u
    r, wage, p = (np.column_stack([_uniform(s, rep, v, t, N, 1.0, 3.0) for t in range(T)]) for v in ("R", "W", "P"))

    den = bk + bl - 1.0
    if np.min(np.abs(den)) < 1e-10:
        raise DegenerateDenominator("beta_K + beta_L - 1 vanished")
    xk = ((1 - bl) * np.log(r / bk) + bl * np.log(wage / bl) - np.log(omega * p)) / den
    xl = ((1 - bk) * np.log(wage / bl) + bk * np.log(r / bk) - np.log(omega * p)) / den
    y = xk * bk + xl * bl + omega
    if config.include_epsilon:
        y = y + np.column_stack([_uniform(s, rep, "eps", t, N, -0.5, 0.5) for t in range(T)])

    x = np.stack([xk, xl, np.ones_like(xk)], axis=-1)
    z = np.stack([r, wage, p], axis=-1)
    panel = PanelDataset(y=y, x=x, z=z, intercept_included=True)
    truth = SimTruth(beta_it=np.stack([bk, bl, omega], axis=-1), a_i=a, u_it=u, eta2_t=eta2)
    return panel, truth


def metrics(estimates, truth) -> dict:
    """Normalised bias and rMSE per coordinate, plus vector rMSE and mean normed deviation."""
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise EmptyInput("no estimates")
    est = np.atleast_2d(est)
    truth = np.asarray(truth, dtype=float)
    dev = est - truth
    scale = np.abs(truth)
    tnorm = float(np.linalg.norm(truth))
    return {
        "bias": (dev.mean(axis=0) / scale).tolist(),
        "rmse": (np.sqrt(np.mean(dev**2, axis=0)) / scale).tolist(),
        "rmse_norm": float(np.sqrt(np.mean(np.sum(dev**2, axis=1)) / tnorm**2)),
        "mnd": float(np.mean(np.linalg.norm(dev, axis=1)) / tnorm),
    }


def hist_edges(bins: int) -> list[np.ndarray]:
    out = []
    for lo, hi in COEF_SUPPORT:
        pad = 0.25 * (hi - lo)
        out.append(np.linspace(lo - pad, hi + pad, bins + 1))
    return out


def _counts(values, edges):
    c, _ = np.histogram(values, bins=edges)
    return c, int(np.sum(values < edges[0])), int(np.sum(values > edges[-1]))


def run_replication(config: SimConfig, rep: int) -> dict:
    """Generate one panel, run the estimator and collect everything the report needs."""
    panel, truth = gen_dgp(config, rep)
    out = {"rep": rep, "realized_bar": truth.beta_it.mean(axis=(0, 1)).tolist()}
    try:
        report = estimate(panel, config.estimation)
    except TercError as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
        return out
    out["estimate"] = report.pooled_beta_bar.tolist()
    out["per_period"] = [f.beta_bar.tolist() for f in report.fits]
    out["vhat_min"] = float(min(f.vhat.min() for f in report.fits))
    out["vhat_max"] = float(max(f.vhat.max() for f in report.fits))
    edges = hist_edges(config.hist_bins)
    hist = []
    for f in report.fits:
        per = []
        for d in range(3):
            est_c, est_lo, est_hi = _counts(f.bhat[:, d], edges[d])
            tru_c, _, _ = _counts(truth.beta_it[:, f.period, d], edges[d])
            per.append({"est": est_c.tolist(), "true": tru_c.tolist(), "under": est_lo, "over": est_hi})
        hist.append(per)
    out["hist"] = hist
    if config.estimation.inference:
        cond = truth.period_means()
        out["ci"] = [
            {"lo": f.apes.ci_lo.tolist(), "hi": f.apes.ci_hi.tolist(), "se": f.apes.se.tolist(),
             "min_eig_raw": f.apes.min_eig_raw, "conditional_truth": cond[f.period].tolist()}
            for f in report.fits
        ]
    return out


def _worker(args):
    config, rep = args
    with threadpool_limits(1):
        return run_replication(config, rep)


def resolve_threads(threads: int | None) -> int:
    if threads is None or threads <= 0:
        threads = int(os.environ.get("TERC_THREADS", "1") or 1)
    return max(1, threads)


def run_montecarlo(config: SimConfig, threads: int | None = None, progress=None) -> "McReport":
    """Run ``n_reps`` replications (in parallel processes when ``threads > 1``) and aggregate."""
    threads = resolve_threads(threads if threads is not None else config.threads)
    jobs = [(config, b) for b in range(config.n_reps)]
    if threads == 1:
        results = []
        for job in jobs:
            results.append(_worker(job))
            if progress:
                progress(len(results), len(jobs))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_worker, jobs, chunksize=1))
    return McReport.from_results(config, results)


@dataclass(eq=False)
class McReport:
    config: SimConfig
    estimates: np.ndarray
    realized: np.ndarray
    per_period: np.ndarray
    failures: list
    hist: dict
    vhat_range: tuple
    ci: list | None = None

    @classmethod
    def from_results(cls, config: SimConfig, results: list) -> "McReport":
        ok = [r for r in results if "error" not in r]
        failures = [{"rep": r["rep"], "error": r["error"]} for r in results if "error" in r]
        T = config.n_periods if config.estimation.periods is None else len(config.estimation.periods)
        estimates = np.array([r["estimate"] for r in ok]).reshape(-1, 3)
        edges = hist_edges(config.hist_bins)
        hist = {}
        for t in range(T):
            for d, name in enumerate(COEF_NAMES):
                est = np.sum([r["hist"][t][d]["est"] for r in ok], axis=0) if ok else np.zeros(config.hist_bins)
                tru = np.sum([r["hist"][t][d]["true"] for r in ok], axis=0) if ok else np.zeros(config.hist_bins)
                hist[(name, t)] = {
                    "edges": edges[d],
                    "est": np.asarray(est, dtype=int),
                    "true": np.asarray(tru, dtype=int),
                    "under": int(sum(r["hist"][t][d]["under"] for r in ok)),
                    "over": int(sum(r["hist"][t][d]["over"] for r in ok)),
                }
        return cls(
            config=config,
            estimates=estimates,
            realized=np.array([r["realized_bar"] for r in ok]).reshape(-1, 3),
            per_period=np.array([r["per_period"] for r in ok]).reshape(-1, T, 3),
            failures=failures,
            hist=hist,
            vhat_range=(min((r["vhat_min"] for r in ok), default=np.nan),
                        max((r["vhat_max"] for r in ok), default=np.nan)),
            ci=[r["ci"] for r in ok] if config.estimation.inference else None,
        )

    @property
    def metrics(self) -> dict:
        return metrics(self.estimates, TRUE_BAR)

    def coverage(self, coord: int, conditional: bool = False) -> float:
        """Share of per-period CIs containing the truth (``37/8`` etc., or ``E[beta | eta2_t]``)."""
        if not self.ci:
            raise EmptyInput("no confidence intervals recorded")
        hits = []
        for rep in self.ci:
            for c in rep:
                target = c["conditional_truth"][coord] if conditional else TRUE_BAR[coord]
                hits.append(c["lo"][coord] <= target <= c["hi"][coord])
        return float(np.mean(hits))

    def to_dict(self) -> dict:
        m = self.metrics if len(self.estimates) else None
        out = {
            "config": self.config.to_dict(),
            "coefficients": list(COEF_NAMES),
            "true_bar": TRUE_BAR.tolist(),
            "n_success": int(len(self.estimates)),
            "n_failures": len(self.failures),
            "failures": self.failures,
            "metrics": m,
            "realized_metrics": metrics(self.realized, TRUE_BAR) if len(self.realized) else None,
            "estimates": self.estimates.tolist(),
            "realized_bar": self.realized.tolist(),
            "vhat_range": list(self.vhat_range),
        }
        if self.ci is not None:
            out["coverage"] = {name: self.coverage(d) for d, name in enumerate(COEF_NAMES)}
            out["coverage_conditional"] = {name: self.coverage(d, True) for d, name in enumerate(COEF_NAMES)}
        return out

    def hist_tables(self, period_labels=None):
        """Yield ``(coord, period_label, rows)`` with rows ``(bin_lo, bin_hi, count_estimated, count_true)``."""
        for (name, t), h in self.hist.items():
            label = period_labels[t] if period_labels is not None else t
            e = h["edges"]
            rows = [(float(e[k]), float(e[k + 1]), int(h["est"][k]), int(h["true"][k])) for k in range(len(e) - 1)]
            yield name, label, rows
