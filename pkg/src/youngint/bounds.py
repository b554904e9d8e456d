"""Right-hand sides of the a-priori sup bounds and empirical calibration of k.

Every bound here is evaluated with its universal constant set to 1.  The
constant is recovered afterwards from a sweep by :func:`calibrate_k`, and
:func:`violates` checks a report against a calibrated value.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Literal, Optional

import numpy as np

from .errors import CalibrationError, DomainError, PreconditionError
from .paths import GridPath, holder_seminorm, sup_norm
from .solver import FieldMeta, VectorField, jacobian_norm, matrix_norm

Kind = Literal["bounded_24", "linear_growth_25", "stability_32"]
KINDS: tuple[str, ...] = ("bounded_24", "linear_growth_25", "stability_32")


@dataclass
class BoundReport:
    """One evaluated bound.

    For ``bounded_24`` the right-hand side is ``|x0| + increment``.  For the
    exponential kinds it is ``2**exponent * prefactor``; the exponent and
    prefactor are stored in ``factors``.
    """

    kind: str
    rhs_without_k: float
    factors: dict[str, float]
    lhs: Optional[float] = None
    k_hat: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise DomainError(f"unknown bound kind {self.kind!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.k_hat is None:
            out.pop("k_hat")
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> BoundReport:
        return cls(
            kind=data["kind"],
            rhs_without_k=float(data["rhs_without_k"]),
            factors={k: float(v) for k, v in data["factors"].items()},
            lhs=None if data.get("lhs") is None else float(data["lhs"]),
            k_hat=None if data.get("k_hat") is None else float(data["k_hat"]),
        )

    # pieces used by calibration
    @property
    def base(self) -> float:
        return self.factors["x0_norm"] if self.kind == "bounded_24" else self.factors["prefactor"]

    @property
    def scale(self) -> float:
        """The quantity multiplied by k: the increment, or the exponent."""
        return self.factors["increment"] if self.kind == "bounded_24" else self.factors["exponent"]


def pow2(e: float) -> float:
    try:
        return 2.0**e
    except OverflowError:
        return math.inf


def rhs_from_factors(report: BoundReport, k: float = 1.0) -> float:
    """Re-evaluate a report's right-hand side from its factors with constant k."""
    f = report.factors
    beta = f["beta"]
    if report.kind == "bounded_24":
        inc = f["T"] * f["sup_f"] * f["sup_df"] ** ((1 - beta) / beta) * f["y_seminorm"] ** (1 / beta)
        return f["x0_norm"] + k * inc
    if report.kind == "linear_growth_25":
        expo = f["T"] * max(f["sup_df"], f["a0"], f["a1"]) ** (1 / beta) * f["y_seminorm"] ** (1 / beta)
        return pow2(k * expo) * (f["x0_norm"] + 1.0)
    expo = f["D"] ** (1 / beta) * f["y_seminorm"] ** (1 / beta) * f["T"]
    return pow2(k * expo) * f["braces"]


def _check_common(
    y_seminorm: float, T: float, beta: float, x0_norm: float, beta_max_inclusive: bool = False
) -> None:
    if not (0.0 < beta < 1.0 or (beta_max_inclusive and beta == 1.0)):
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if y_seminorm < 0 or T <= 0 or x0_norm < 0:
        raise DomainError("seminorm and |x0| must be nonnegative, T positive")


def bound_bounded(
    meta: FieldMeta,
    y_seminorm: float,
    T: float,
    beta: float,
    x0_norm: float,
    lhs: float | None = None,
) -> BoundReport:
    """|x0| + T‖f‖∞‖f′‖∞^{(1−β)/β}‖y‖^{1/β} for bounded f."""
    _check_common(y_seminorm, T, beta, x0_norm)
    if meta.sup_f is None:
        raise PreconditionError("the bounded-coefficient estimate needs a declared sup_f")
    factors = {
        "x0_norm": x0_norm,
        "T": T,
        "beta": beta,
        "y_seminorm": y_seminorm,
        "sup_f": meta.sup_f,
        "sup_df": meta.sup_df,
    }
    report = BoundReport("bounded_24", 0.0, factors, lhs)
    report.rhs_without_k = rhs_from_factors(report)
    factors["increment"] = report.rhs_without_k - x0_norm
    return report


def bound_linear_growth(
    meta: FieldMeta,
    y_seminorm: float,
    T: float,
    beta: float,
    x0_norm: float,
    lhs: float | None = None,
) -> BoundReport:
    """2^{T[‖f′‖∞ ∨ a0 ∨ a1]^{1/β}‖y‖^{1/β}} (|x0| + 1) for f of linear growth."""
    _check_common(y_seminorm, T, beta, x0_norm)
    expo = T * max(meta.sup_df, meta.a0, meta.a1) ** (1 / beta) * y_seminorm ** (1 / beta)
    factors = {
        "x0_norm": x0_norm,
        "T": T,
        "beta": beta,
        "y_seminorm": y_seminorm,
        "sup_df": meta.sup_df,
        "a0": meta.a0,
        "a1": meta.a1,
        "exponent": expo,
        "prefactor": x0_norm + 1.0,
    }
    report = BoundReport("linear_growth_25", 0.0, factors, lhs)
    report.rhs_without_k = rhs_from_factors(report)
    return report


def sampling_box(paths: Iterable[GridPath], pad: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate-wise hull of all visited states, widened by ``pad`` of its extent."""
    vals = np.concatenate([p.values for p in paths], axis=0)
    lo, hi = vals.min(axis=0), vals.max(axis=0)
    width = np.maximum(hi - lo, 1e-12 * np.maximum(1.0, np.abs(hi)))
    return lo - pad * width, hi + pad * width


def box_points(lo: np.ndarray, hi: np.ndarray, n: int = 2001, seed: int = 0) -> np.ndarray:
    if lo.size == 1:
        return np.linspace(lo[0], hi[0], n)[:, None]
    rng = np.random.default_rng(seed)
    corners = np.stack([lo, hi])
    return np.concatenate([rng.uniform(lo, hi, size=(n, lo.size)), corners])


def stability_bound(
    field_f: VectorField,
    field_tilde: VectorField,
    x: GridPath,
    x_tilde: GridPath,
    y: GridPath,
    y_tilde: GridPath,
    beta: float,
    n_box: int = 2001,
) -> BoundReport:
    """Dependence of the solution on (x0, f, y), with constants set to 1.

    Coefficient sup norms that are not declared, and the differences
    ‖f − f̃‖∞, ‖f′ − f̃′‖∞, are estimated on a box around all visited
    states padded by 10%.
    """
    if field_f.meta.sup_ddf is None:
        raise PreconditionError("the stability estimate needs a declared bound on f''")
    for p in (x_tilde, y, y_tilde):
        if not np.array_equal(p.times, x.times):
            raise DomainError("all paths must share one grid")
    T = x.end - x.start
    y_semi = holder_seminorm(y, beta)
    dy_semi = holder_seminorm(y - y_tilde, beta)
    x_semi = holder_seminorm(x, beta)
    xt_semi = holder_seminorm(x_tilde, beta)
    x_sup = sup_norm(x)
    pts = box_points(*sampling_box([x, x_tilde]), n=n_box)
    fx, ftx = field_f(pts), field_tilde(pts)
    sup_f = field_f.meta.sup_f if field_f.meta.sup_f is not None else float(matrix_norm(fx).max())
    sup_ft = (
        field_tilde.meta.sup_f
        if field_tilde.meta.sup_f is not None
        else float(matrix_norm(ftx).max())
    )
    diff_f = float(matrix_norm(fx - ftx).max())
    diff_df = float(jacobian_norm(field_f.jac(pts) - field_tilde.jac(pts)).max())
    sup_df, sup_ddf = field_f.meta.sup_df, field_f.meta.sup_ddf
    D = max(sup_df, sup_df * y_semi + sup_ddf * (x_semi + xt_semi) * T**beta)
    x0_gap = float(np.linalg.norm(x.values[0] - x_tilde.values[0]))
    braces = x0_gap + y_semi * (diff_f + x_semi * diff_df) + (sup_f + sup_ft * x_sup) * dy_semi
    expo = D ** (1 / beta) * y_semi ** (1 / beta) * T
    lhs = float(np.linalg.norm(x.values - x_tilde.values, axis=1).max())
    factors = {
        "T": T,
        "beta": beta,
        "y_seminorm": y_semi,
        "y_diff_seminorm": dy_semi,
        "x_seminorm": x_semi,
        "x_tilde_seminorm": xt_semi,
        "x_sup": x_sup,
        "sup_f": sup_f,
        "sup_f_tilde": sup_ft,
        "sup_df": sup_df,
        "sup_ddf": sup_ddf,
        "f_diff_sup": diff_f,
        "df_diff_sup": diff_df,
        "x0_gap": x0_gap,
        "D": D,
        "braces": braces,
        "exponent": expo,
        "prefactor": braces,
    }
    report = BoundReport("stability_32", 0.0, factors, lhs)
    report.rhs_without_k = rhs_from_factors(report)
    return report


@dataclass(frozen=True)
class SubdivisionPlan:
    delta: float
    n_intervals: int
    A: float
    B: float
    C: float
    D_contraction: float
    F_offset: float
    beta: float
    horizon: float
    bounds: tuple[float, ...] = field(default_factory=tuple)

    def bound_at(self, j: int) -> float:
        """Bound on sup_{r ≤ min(jΔ, T)} |x_r| from the unrolled recursion."""
        return self.bounds[j]

    def endpoints(self) -> np.ndarray:
        return np.minimum(self.delta * np.arange(self.n_intervals + 1), self.horizon)


def subdivision_plan(
    meta: FieldMeta, y_seminorm: float, T: float, beta: float, x0_norm: float = 0.0
) -> SubdivisionPlan:
    """Step Δ = (1/(3(A ∨ B ∨ C)))^{1/β} and the recursion Z_j ≤ D Z_{j−1} + F.

    A = ‖f′‖∞‖y‖, B = a0‖y‖, C = a1‖y‖ with the constant set to 1.  When
    A = B = C = 0 the plan is a single interval with D = 1 and F = 0.
    β = 1 (Lipschitz drivers) is accepted here.
    """
    _check_common(y_seminorm, T, beta, x0_norm, beta_max_inclusive=True)
    A, B, C = meta.sup_df * y_seminorm, meta.a0 * y_seminorm, meta.a1 * y_seminorm
    top = max(A, B, C)
    if top == 0.0:
        return SubdivisionPlan(T, 1, A, B, C, 1.0, 0.0, beta, T, (x0_norm, x0_norm))
    delta = (1.0 / (3.0 * top)) ** (1.0 / beta)
    while top * delta**beta > 1.0 / 3.0:
        delta = math.nextafter(delta, 0.0)
    db = delta**beta
    shrink = 1.0 / (1.0 - A * db)
    D = 1.0 / (1.0 - shrink * C * db)
    F = D * B * shrink * db
    n = max(1, math.ceil(T / delta - 1e-12))
    bounds = [x0_norm]
    for _ in range(n):
        bounds.append(D * bounds[-1] + F)
    return SubdivisionPlan(delta, n, A, B, C, D, F, beta, T, tuple(bounds))


# ---------------------------------------------------------------------------
# calibration


def _ratio(report: BoundReport) -> float | None:
    """k needed for this report alone; None when no finite k can work."""
    if report.lhs is None:
        raise CalibrationError("report has no measured lhs")
    base, scale = report.base, report.scale
    if report.kind == "bounded_24":
        num = report.lhs - base
        if scale > 0:
            return num / scale
        return 0.0 if num <= 1e-12 * max(1.0, base) else None
    if report.lhs <= base:
        return 0.0
    if base <= 0.0 or scale <= 0.0:
        return None
    return math.log2(report.lhs / base) / scale


def calibrate_k(sweep: list[BoundReport]) -> float:
    """Smallest k under which every report of the sweep holds.

    Bounded kind: max of (lhs − |x0|)/(rhs − |x0|).  Exponential kinds:
    max of log2(lhs/prefactor)/exponent, clamped below at 0.  Reports with
    a vanishing denominator count as 0 when already satisfied and are
    skipped otherwise.
    """
    if not sweep:
        raise CalibrationError("empty sweep")
    kinds = {r.kind for r in sweep}
    if len(kinds) != 1:
        raise CalibrationError(f"mixed kinds in sweep: {sorted(kinds)}")
    ratios = [r for r in (_ratio(rep) for rep in sweep) if r is not None]
    if not ratios:
        raise CalibrationError("every report in the sweep is degenerate")
    k = max(ratios)
    return max(k, 0.0) if sweep[0].kind != "bounded_24" else k


def violates(report: BoundReport, k: float, lhs: float | None = None, rtol: float = 1e-12) -> bool:
    """Whether the measured lhs exceeds the bound evaluated with constant k."""
    lhs = report.lhs if lhs is None else lhs
    rhs = rhs_from_factors(report, k)
    return lhs > rhs * (1.0 + rtol) + 1e-300
