"""Monte Carlo moments, bound sweeps and integral cross-validation campaigns.

Randomness is keyed by (seed, stream, index) through :func:`paths.path_rng`,
so every path and every sweep configuration can be regenerated on its own
and results do not depend on how work is split across threads.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from .. import bounds as bnd
from ..errors import DivergenceError, ExperimentError, PreconditionError
from ..integrate import chain_rule_target, relative_difference, rs_integral, zahle_integral
from ..paths import (
    EXHAUSTIVE_LIMIT,
    FbmSpec,
    GridPath,
    holder_seminorm,
    path_rng,
    sample_fbm_array,
    seminorm_batch,
)
from ..solver import VectorField, euler_paths, first_non_finite, matrix_norm
from .config import KIND_FIELDS, ExperimentConfig, linear_slope, make_field, rng_uniform

logger = logging.getLogger(__name__)

# stream identifiers for path_rng
MC_STREAM = 0
DIRECT_STREAM = 5
BOOT_STREAM = 9
SWEEP_STREAMS = {"train": (1, 11), "holdout": (2, 12)}
CROSSVAL_STREAM = 20

DIVERGENCE_BUDGET = 0.01


def ordered_map(func: Callable, items: Sequence, threads: int) -> list:
    """``map`` in input order, on a thread pool when ``threads > 1``."""
    if threads <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def unit_spec(cfg: ExperimentConfig, dimension: int = 1, hurst: float | None = None) -> FbmSpec:
    return FbmSpec(
        hurst=cfg.hurst if hurst is None else hurst,
        n_points=cfg.n_points,
        horizon=1.0,
        dimension=dimension,
        seed=cfg.seed,
        method=cfg.fbm_method,
    )


def fbm_on(cfg: ExperimentConfig, horizon: float, n_paths: int, start: int, stream: int, dimension: int = 1):
    """fBm values on [0, horizon] by self-similarity from unit-horizon samples."""
    spec = unit_spec(cfg, dimension)
    vals = sample_fbm_array(spec, n_paths, start, stream) * horizon**cfg.hurst
    return spec.times * horizon, vals


# ---------------------------------------------------------------------------
# Monte Carlo moments


@dataclass(frozen=True)
class MomentEstimate:
    p: float
    point_estimate: float
    ci_low: float
    ci_high: float
    n_paths: int
    n_divergent: int = 0
    functional: str = "sup_power"

    def __post_init__(self) -> None:
        if not self.ci_low <= self.point_estimate <= self.ci_high:
            raise ValueError("confidence interval must contain the point estimate")

    def overlaps(self, other: MomentEstimate) -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class SupSample:
    """Per-path sup_t |X_t| and driver seminorms; divergent paths excluded."""

    sups: np.ndarray
    seminorms: np.ndarray
    n_divergent: int
    exhaustive: bool

    @property
    def n_paths(self) -> int:
        return int(self.sups.size)


def _chunks(total: int, size: int) -> list[tuple[int, int]]:
    return [(s, min(size, total - s)) for s in range(0, total, size)]


def simulate_sups(
    sigma: VectorField,
    X0,
    cfg: ExperimentConfig,
    n_paths: int | None = None,
    stream: int = MC_STREAM,
    with_seminorm: bool = True,
) -> SupSample:
    """Euler-solve the equation on ``n_paths`` fBm drivers and record sup norms.

    Driver seminorms ‖B‖_{0,T,β} are computed when ``with_seminorm`` (NaN
    otherwise), exhaustively up to the library's size limit.
    """
    n_paths = cfg.n_paths if n_paths is None else n_paths
    x0 = np.broadcast_to(np.asarray(X0, dtype=float), (sigma.d,))
    exhaustive = cfg.n_points <= EXHAUSTIVE_LIMIT

    def work(chunk: tuple[int, int]):
        start, size = chunk
        t, b = fbm_on(cfg, cfg.horizon, size, start, stream, sigma.m)
        x = euler_paths(sigma, x0, np.diff(b, axis=1))
        finite = np.all(np.isfinite(x.reshape(size, -1)), axis=1)
        sups = np.linalg.norm(x, axis=2).max(axis=1)
        semi = (
            seminorm_batch(t, b, cfg.beta, exhaustive=exhaustive)
            if with_seminorm
            else np.full(size, np.nan)
        )
        return sups, semi, finite

    parts = ordered_map(work, _chunks(n_paths, cfg.chunk), cfg.threads)
    sups = np.concatenate([p[0] for p in parts])
    semi = np.concatenate([p[1] for p in parts])
    ok = np.concatenate([p[2] for p in parts])
    n_bad = int((~ok).sum())
    if n_bad > DIVERGENCE_BUDGET * n_paths:
        raise ExperimentError(
            f"{n_bad} of {n_paths} paths diverged, above the {DIVERGENCE_BUDGET:.0%} budget"
        )
    if n_bad:
        logger.warning("excluding %d divergent paths of %d", n_bad, n_paths)
    return SupSample(sups[ok], semi[ok], n_bad, exhaustive)


def bootstrap_mean(
    values: np.ndarray, n_boot: int, rng: np.random.Generator, level: float = 0.95
) -> tuple[float, float, float]:
    """Sample mean and percentile-bootstrap interval."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ExperimentError("no values to average")
    if np.ptp(values) == 0.0:
        v = float(values[0])
        return v, v, v
    point = float(values.mean())
    means = np.empty(n_boot)
    step = max(1, 2_000_000 // values.size)
    for s in range(0, n_boot, step):
        k = min(step, n_boot - s)
        idx = rng.integers(0, values.size, size=(k, values.size))
        means[s : s + k] = values[idx].mean(axis=1)
    tail = 50.0 * (1.0 - level)
    lo, hi = np.percentile(means, [tail, 100.0 - tail])
    return point, float(min(lo, point)), float(max(hi, point))


def moment_estimate(sample: SupSample, p: float, cfg: ExperimentConfig) -> MomentEstimate:
    rng = path_rng(cfg.seed, 0, BOOT_STREAM)
    with np.errstate(over="ignore"):
        values = sample.sups**p
    if not np.all(np.isfinite(values)):
        raise ExperimentError(f"sup|X|^{p} overflowed on some paths")
    point, lo, hi = bootstrap_mean(values, cfg.n_boot, rng)
    return MomentEstimate(p, point, lo, hi, sample.n_paths, sample.n_divergent)


def mc_sup_moments(
    sigma: VectorField, X0, cfg: ExperimentConfig, p: float | None = None, n_paths: int | None = None
) -> MomentEstimate:
    """E sup_t |X_t|^p over fBm drivers with a 95% bootstrap interval."""
    sample = simulate_sups(sigma, X0, cfg, n_paths, with_seminorm=False)
    return moment_estimate(sample, cfg.p[0] if p is None else p, cfg)


@dataclass(frozen=True)
class TailStatistic:
    """Upper-tail behaviour of the sup against the bounded-coefficient envelope.

    ``k_envelope`` is the smallest k with sup|X| − |X0| ≤ k·envelope on every
    path.  The slopes are least-squares fits of log survival over the top
    ``tail_fraction`` of the sample: the excess against u^{2β} and the driver
    seminorm against u²; negative slopes are consistent with Gaussian-type
    tails.
    """

    k_envelope: Optional[float]
    excess_tail_slope: float
    seminorm_tail_slope: float
    tail_fraction: float
    compatible: bool

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _log_survival_slope(values: np.ndarray, power: float, fraction: float) -> float:
    v = np.sort(values)
    n = v.size
    top = max(5, int(round(fraction * n)))
    if n < top + 1:
        return math.nan
    u = v[n - top : n - 1]
    surv = (n - np.arange(n - top, n - 1)) / n
    x = u**power
    if np.ptp(x) == 0.0:
        return math.nan
    return float(np.polyfit(x, np.log(surv), 1)[0])


def tail_statistic(
    sigma: VectorField, X0, sample: SupSample, cfg: ExperimentConfig, fraction: float = 0.1
) -> TailStatistic:
    meta = sigma.meta
    beta = cfg.beta
    x0n = float(np.linalg.norm(np.atleast_1d(X0)))
    env = (
        cfg.horizon
        * meta.sup_f
        * meta.sup_df ** ((1 - beta) / beta)
        * sample.seminorms ** (1 / beta)
    )
    excess = np.maximum(sample.sups - x0n, 0.0)
    pos = env > 0
    if np.any(excess[~pos] > 1e-12 * max(1.0, x0n)):
        k_env = None
    else:
        k_env = float((excess[pos] / env[pos]).max()) if pos.any() else 0.0
    s1 = _log_survival_slope(excess, 2 * beta, fraction)
    s2 = _log_survival_slope(sample.seminorms, 2.0, fraction)
    ok = k_env is not None and (math.isnan(s1) or s1 < 0) and (math.isnan(s2) or s2 < 0)
    return TailStatistic(k_env, s1, s2, fraction, bool(ok))


@dataclass(frozen=True)
class ExpMomentReport:
    estimate: MomentEstimate
    tail: TailStatistic
    gamma: float
    lambda_exp: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "estimate": self.estimate.to_dict(),
            "tail": self.tail.to_dict(),
            "gamma": self.gamma,
            "lambda_exp": self.lambda_exp,
        }


def mc_exp_moments(
    sigma: VectorField, X0, cfg: ExperimentConfig, n_paths: int | None = None
) -> ExpMomentReport:
    """E exp(λ sup_t |X_t|^γ) for bounded σ, plus the tail statistic."""
    if sigma.meta.sup_f is None:
        raise PreconditionError("exponential moments need a bounded coefficient (declared sup_f)")
    cfg.require_exp_order()
    sample = simulate_sups(sigma, X0, cfg, n_paths)
    rng = path_rng(cfg.seed, 0, BOOT_STREAM)
    with np.errstate(over="ignore"):
        values = np.exp(cfg.lambda_exp * sample.sups**cfg.gamma)
    if not np.all(np.isfinite(values)):
        raise ExperimentError("exp(λ sup|X|^γ) overflowed on some paths")
    point, lo, hi = bootstrap_mean(values, cfg.n_boot, rng)
    est = MomentEstimate(cfg.gamma, point, lo, hi, sample.n_paths, sample.n_divergent, "sup_exp")
    return ExpMomentReport(est, tail_statistic(sigma, X0, sample, cfg), cfg.gamma, cfg.lambda_exp)


def direct_constant_moment(c: float, X0: float, cfg: ExperimentConfig, p: float, n_paths: int | None = None) -> MomentEstimate:
    """E sup|X0 + c B|^p simulated directly from fBm, on a separate stream."""
    n_paths = cfg.n_paths if n_paths is None else n_paths
    _, b = fbm_on(cfg, cfg.horizon, n_paths, 0, DIRECT_STREAM)
    sups = np.abs(X0 + c * b[:, :, 0]).max(axis=1)
    point, lo, hi = bootstrap_mean(sups**p, cfg.n_boot, path_rng(cfg.seed, 1, BOOT_STREAM))
    return MomentEstimate(p, point, lo, hi, n_paths)


def linear_growth_check(
    sigma: VectorField, X0, cfg: ExperimentConfig, n_train: int, n_holdout: int
) -> dict[str, Any]:
    """Per-path log2(sup|X|/(|X0|+1)) against T(‖σ′‖ ∨ |σ(0)|)‖B‖^{1/β}.

    k̂ is the training maximum of the ratio; held-out paths come from a
    separate stream and are counted as violations when they exceed k̂.
    """
    x0n = float(np.linalg.norm(np.atleast_1d(X0)))
    s0 = float(matrix_norm(sigma(np.zeros(sigma.d))))
    rate = cfg.horizon * max(sigma.meta.sup_df, s0)

    def split(stream: int, n: int):
        s = simulate_sups(sigma, X0, cfg, n, stream)
        return np.log2(s.sups / (x0n + 1.0)), rate * s.seminorms ** (1 / cfg.beta)

    lhs, scale = split(SWEEP_STREAMS["train"][0], n_train)
    pos = scale > 0
    k_hat = max(0.0, float((lhs[pos] / scale[pos]).max())) if pos.any() else 0.0
    lhs_h, scale_h = split(SWEEP_STREAMS["holdout"][0], n_holdout)
    violations = int(np.sum(lhs_h > k_hat * scale_h * (1 + 1e-12) + 1e-15))
    return {"k_hat": k_hat, "n_train": n_train, "n_holdout": n_holdout, "holdout_violations": violations}


# ---------------------------------------------------------------------------
# bound sweeps


@dataclass(frozen=True)
class SweepCase:
    split: str
    index: int
    horizon: float
    scale: float
    x0: float
    gap: float


@dataclass
class SweepRow:
    case: SweepCase
    report: bnd.BoundReport
    extras: dict[str, float] = field(default_factory=dict)

    def flat(self) -> dict[str, Any]:
        row: dict[str, Any] = asdict(self.case)
        row.update(
            kind=self.report.kind,
            lhs=self.report.lhs,
            rhs_without_k=self.report.rhs_without_k,
            k_hat=self.report.k_hat,
        )
        row.update({f"factor_{k}": v for k, v in sorted(self.report.factors.items())})
        row.update(self.extras)
        return row


def draw_case(cfg: ExperimentConfig, split: str, index: int) -> SweepCase:
    rng = path_rng(cfg.seed, index, SWEEP_STREAMS[split][1])
    return SweepCase(
        split,
        index,
        rng_uniform(rng, cfg.horizon_range),
        rng_uniform(rng, cfg.scale_range),
        rng_uniform(rng, cfg.x0_range),
        rng_uniform(rng, cfg.gap_range),
    )


def case_driver(cfg: ExperimentConfig, case: SweepCase, m: int = 1) -> GridPath:
    t, b = fbm_on(cfg, case.horizon, 1, case.index, SWEEP_STREAMS[case.split][0], m)
    return GridPath(t, case.scale * b[0])


def _euler(fieldf: VectorField, x0: float, y: GridPath) -> GridPath:
    x = euler_paths(fieldf, np.full(fieldf.d, x0), np.diff(y.values, axis=0)[None])[0]
    bad = first_non_finite(x)
    if bad is not None:
        raise DivergenceError(f"Euler scheme produced a non-finite state at index {bad}", index=bad)
    return GridPath(y.times, x)


def linear_closed_form(slope: float, x0: float, y: GridPath) -> np.ndarray:
    """Exact solution x0·exp(a(y_t − y_0)) of dx = a x dy."""
    return x0 * np.exp(slope * (y.scalar() - y.scalar()[0]))


def evaluate_case(
    kind: str, fieldf: VectorField, case: SweepCase, cfg: ExperimentConfig, slope: float | None = None
) -> SweepRow:
    y = case_driver(cfg, case, fieldf.m)
    semi = holder_seminorm(y, cfg.beta)
    x = _euler(fieldf, case.x0, y)
    lhs = float(np.linalg.norm(x.values, axis=1).max())
    x0n = abs(case.x0)
    extras: dict[str, float] = {}
    if kind == "bounded_24":
        rep = bnd.bound_bounded(fieldf.meta, semi, case.horizon, cfg.beta, x0n, lhs)
    elif kind == "linear_growth_25":
        rep = bnd.bound_linear_growth(fieldf.meta, semi, case.horizon, cfg.beta, x0n, lhs)
        if slope is not None:
            exact = linear_closed_form(slope, case.x0, y)
            extras["lhs_closed_form"] = float(np.abs(exact).max())
    else:
        xt = _euler(fieldf, case.x0 + case.gap, y)
        rep = bnd.stability_bound(fieldf, fieldf, x, xt, y, y, cfg.beta)
        braces = rep.factors["braces"]
        extras["lhs_over_braces"] = rep.lhs / braces if braces > 0 else 0.0
    return SweepRow(case, rep, extras)


def run_bound_sweep(kind: str, cfg: ExperimentConfig) -> dict[str, Any]:
    """Calibrate k on a training sweep and count violations on a held-out sweep.

    Returns a summary and the per-configuration rows; k̂ is written into each
    row's report.
    """
    if kind not in bnd.KINDS:
        raise PreconditionError(f"unknown bound kind {kind!r}")
    name = cfg.field or KIND_FIELDS[kind]
    fieldf = make_field(name)
    slope = linear_slope(name)
    cases = [draw_case(cfg, "train", i) for i in range(cfg.n_train)]
    cases += [draw_case(cfg, "holdout", i) for i in range(cfg.n_holdout)]
    rows = ordered_map(lambda c: evaluate_case(kind, fieldf, c, cfg, slope), cases, cfg.threads)
    train = [r for r in rows if r.case.split == "train"]
    held = [r for r in rows if r.case.split == "holdout"]
    k_hat = bnd.calibrate_k([r.report for r in train])
    for r in rows:
        r.report.k_hat = k_hat
    summary: dict[str, Any] = {
        "kind": kind,
        "field": fieldf.name,
        "beta": cfg.beta,
        "hurst": cfg.hurst,
        "n_steps": cfg.n_steps,
        "k_hat": k_hat,
        "n_train": len(train),
        "n_holdout": len(held),
        "holdout_violations": sum(bnd.violates(r.report, k_hat) for r in held),
    }
    if kind == "linear_growth_25" and slope is not None:
        summary["closed_form_violations"] = sum(
            bnd.violates(r.report, k_hat, r.extras["lhs_closed_form"]) for r in held
        )
    if kind == "stability_32":
        ratios = [r.extras["lhs_over_braces"] for r in rows]
        summary["max_lhs_over_braces"] = max(ratios)
        margins = [r.extras["lhs_over_braces"] / bnd.pow2(k_hat * r.report.scale) for r in held]
        summary["max_holdout_factor_ratio"] = max(margins, default=0.0)
    return {"summary": summary, "rows": rows}


# ---------------------------------------------------------------------------
# cross-validation of the two integration methods


@dataclass(frozen=True)
class PairResult:
    hurst: float
    index: int
    rs: float
    zahle: float
    rel_diff: float
    chain_target: float
    chain_rs_rel: float
    chain_zahle_rel: float
    ones_rs_err: float
    ones_zahle_err: float
    alpha: float


def crossval_pair(cfg: ExperimentConfig, hurst_index: int, index: int) -> PairResult:
    hurst = cfg.hursts[hurst_index]
    spec = unit_spec(cfg, dimension=2, hurst=hurst)
    vals = sample_fbm_array(spec, 1, index, CROSSVAL_STREAM + hurst_index)[0]
    t = spec.times * cfg.horizon
    f = GridPath(t, vals[:, :1] * cfg.horizon**hurst)
    g = GridPath(t, vals[:, 1:] * cfg.horizon**hurst)
    order = cfg.alpha or None
    rs = rs_integral(f, g).scalar
    z = zahle_integral(f, g, order, cfg.oversample)
    target = chain_rule_target(g)
    rs_c = rs_integral(g, g).scalar
    z_c = zahle_integral(g, g, order, cfg.oversample).scalar
    one = g.with_values(np.ones((len(g), 1)))
    inc = float(g.scalar()[-1] - g.scalar()[0])
    rs_1 = rs_integral(one, g).scalar
    z_1 = zahle_integral(one, g, order, cfg.oversample).scalar
    return PairResult(
        hurst,
        index,
        rs,
        z.scalar,
        relative_difference(z.scalar, rs),
        target,
        relative_difference(rs_c, target),
        relative_difference(z_c, target),
        abs(rs_1 - inc),
        abs(z_1 - inc),
        z.order,
    )


def summarize_crossval(results: Iterable[PairResult], hursts: Sequence[float]) -> dict[str, Any]:
    results = list(results)
    out: dict[str, Any] = {"per_hurst": {}}
    for h in hursts:
        rs = [r for r in results if r.hurst == h]
        rel = np.array([r.rel_diff for r in rs])
        out["per_hurst"][repr(h)] = {
            "n_pairs": len(rs),
            "max_rel_diff": float(rel.max()),
            "median_rel_diff": float(np.median(rel)),
            "frac_within_1e-3": float(np.mean(rel <= 1e-3)),
            "max_chain_rs_rel": max(r.chain_rs_rel for r in rs),
            "max_chain_zahle_rel": max(r.chain_zahle_rel for r in rs),
            "max_ones_err": max(max(r.ones_rs_err, r.ones_zahle_err) for r in rs),
        }
    return out


def run_crossval(cfg: ExperimentConfig) -> dict[str, Any]:
    jobs = [(h, i) for h in range(len(cfg.hursts)) for i in range(cfg.n_pairs)]
    results = ordered_map(lambda j: crossval_pair(cfg, *j), jobs, cfg.threads)
    return {"summary": summarize_crossval(results, cfg.hursts), "rows": results}
