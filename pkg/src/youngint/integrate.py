"""Young integrals ∫ f dg by Riemann-Stieltjes sums and by the fractional (Zähle) formula."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from . import fraccalc
from .errors import DomainError, PreconditionError, YoungWarning
from .fraccalc import FracOrder
from .paths import GridPath, estimate_holder_exponent

Rule = Literal["trapezoid", "left"]


@dataclass(frozen=True)
class IntegralResult:
    value: np.ndarray
    method: str
    resolution: int
    est_error: float
    order: Optional[float] = None

    def __post_init__(self) -> None:
        if self.est_error < 0 or self.resolution < 2:
            raise DomainError("est_error must be >= 0 and resolution >= 2")

    @property
    def scalar(self) -> float:
        return float(self.value.reshape(-1)[0])


def _paired(f: GridPath, g: GridPath) -> tuple[np.ndarray, np.ndarray]:
    """Return f as (n, d, m) and g as (n, m) under the row-by-column pairing."""
    if len(f) != len(g) or not np.array_equal(f.times, g.times):
        raise DomainError("integrand and integrator must share the same grid")
    if len(f) < 2:
        raise DomainError("need at least two grid points")
    m = g.dimension
    if f.dimension % m:
        raise DomainError(f"integrand dimension {f.dimension} is not a multiple of {m}")
    return f.values.reshape(len(f), f.dimension // m, m), g.values


def _rs_sum(fv: np.ndarray, gv: np.ndarray, rule: Rule) -> np.ndarray:
    dg = np.diff(gv, axis=0)
    if rule == "left":
        tag = fv[:-1]
    elif rule == "trapezoid":
        tag = 0.5 * (fv[:-1] + fv[1:])
    else:
        raise DomainError(f"unknown Riemann-Stieltjes rule {rule!r}")
    return np.einsum("kij,kj->i", tag, dg)


def _check_young_pair(f: GridPath, g: GridPath) -> tuple[float, float]:
    lam = estimate_holder_exponent(f)
    mu = estimate_holder_exponent(g)
    if lam + mu <= 1.0:
        warnings.warn(
            f"estimated Hölder exponents {lam:.3f} + {mu:.3f} do not exceed 1; "
            "the Young integral may not exist",
            YoungWarning,
            stacklevel=3,
        )
    return lam, mu


def rs_integral(f: GridPath, g: GridPath, rule: Rule = "trapezoid") -> IntegralResult:
    """Riemann-Stieltjes sum of ∫ f dg on the full grid and on every other point.

    ``rule="left"`` uses Σ f(t_i)(g(t_{i+1}) − g(t_i)); ``"trapezoid"`` tags
    each cell with the mean of its end values, which is the exact integral
    of the piecewise-linear interpolants.  Both converge to the Young
    integral; ``est_error`` is the norm of the full/half-resolution gap.
    """
    fv, gv = _paired(f, g)
    _check_young_pair(f, g)
    full = _rs_sum(fv, gv, rule)
    if len(f) >= 3:
        idx = np.unique(np.append(np.arange(0, len(f), 2), len(f) - 1))
        half = _rs_sum(fv[idx], gv[idx], rule)
        err = float(np.linalg.norm(full - half))
    else:
        err = 0.0
    return IntegralResult(full, "riemann_stieltjes", len(f), err)


def rs_cumulative(f: GridPath, g: GridPath, rule: Rule = "left") -> GridPath:
    """Running sums t_k ↦ Σ_{i<k} (tagged f)(g(t_{i+1}) − g(t_i)); starts at 0."""
    fv, gv = _paired(f, g)
    dg = np.diff(gv, axis=0)
    tag = fv[:-1] if rule == "left" else 0.5 * (fv[:-1] + fv[1:])
    inc = np.einsum("kij,kj->ki", tag, dg)
    out = np.zeros((len(f), inc.shape[1]))
    np.cumsum(inc, axis=0, out=out[1:])
    return GridPath(f.times, out)


def _refine(times: np.ndarray, cols: np.ndarray, factor: int) -> tuple[np.ndarray, np.ndarray]:
    if factor == 1:
        return times, cols
    frac = np.arange(factor) / factor
    fine_t = (times[:-1, None] + np.diff(times)[:, None] * frac[None, :]).reshape(-1)
    fine_t = np.append(fine_t, times[-1])
    fine = np.column_stack([np.interp(fine_t, times, c) for c in cols.T])
    return fine_t, fine


def _zahle_value(times: np.ndarray, fv: np.ndarray, gv: np.ndarray, alpha: float, oversample: int) -> np.ndarray:
    n, d, m = fv.shape
    t, fcols = _refine(times, fv.reshape(n, d * m), oversample)
    _, gcols = _refine(times, gv, oversample)
    f_a = fcols[0]
    # D_{a+}^α f = f(a)(t−a)^{−α}/Γ(1−α) + D_{a+}^α (f − f(a)); the second part vanishes at a
    df = fraccalc._weyl_left_array(t, fcols - f_a, alpha)
    dg = fraccalc._weyl_right_array(t, gcols - gcols[-1], 1.0 - alpha)
    df = df.reshape(-1, d, m)
    smooth = np.trapezoid(df * dg[:, None, :], t, axis=0)
    # ∫ (t−a)^{−α} G(t) dt / Γ(1−α): weights exact against the interpolant of G
    rt, rg = fraccalc._reflect(t, dg)
    edge = fraccalc._rl_left_at(rt, rg, 1.0 - alpha, t.size - 1)
    singular = f_a.reshape(d, m) * edge[None, :]
    # (−1)^α · (−1)^{1−α} = −1 once the real parts are paired
    return -(smooth + singular).sum(axis=1)


def admissible_order(lam: float, mu: float) -> FracOrder:
    """Midpoint of the admissible interval 1 − μ < α < λ."""
    lo, hi = 1.0 - mu, lam
    if not lo < hi:
        raise PreconditionError(
            f"no admissible order: need λ + μ > 1, got λ={lam:.3f}, μ={mu:.3f}", lam=lam, mu=mu
        )
    return FracOrder(min(max(0.5 * (lo + hi), 1e-3), 1 - 1e-3))


def richardson_exponents(alpha: float, count: int = 2, merge: float = 0.05) -> list[float]:
    """Leading error exponents of the refined outer quadrature.

    The integrand has cusps of order 1 − α and α at the original nodes,
    which gives error terms h^{1+α}, h^{2−α}, h^{2+α}, h^{3−α}; exponents
    closer than ``merge`` are treated as one.
    """
    out: list[float] = []
    for p in sorted((1.0 + alpha, 2.0 - alpha, 2.0 + alpha, 3.0 - alpha)):
        if not out or p - out[-1] > merge:
            out.append(p)
    return out[:count]


def _zahle_extrapolated(
    times: np.ndarray, fv: np.ndarray, gv: np.ndarray, alpha: float, oversample: int, extrapolate: bool
) -> np.ndarray:
    if not extrapolate:
        return _zahle_value(times, fv, gv, alpha, oversample)
    levels = [_zahle_value(times, fv, gv, alpha, oversample * 2**j) for j in range(3)]
    for p in richardson_exponents(alpha):
        w = 2.0**p
        levels = [(w * fine - coarse) / (w - 1.0) for coarse, fine in zip(levels[:-1], levels[1:])]
    return levels[0]


def zahle_integral(
    f: GridPath,
    g: GridPath,
    order: FracOrder | float | None = None,
    oversample: int = 8,
    extrapolate: bool = True,
) -> IntegralResult:
    """∫ f dg = −∫ D_{a+}^α f(t) D_{b−}^{1−α} g_{b−}(t) dt with real-valued operators.

    Both Weyl derivatives are evaluated exactly for the piecewise-linear
    interpolants on a grid refined ``oversample`` times; the outer integral
    uses the trapezoid rule, except for the (t − a)^{−α} boundary part of
    D_{a+}^α f, which is integrated exactly.  With ``extrapolate`` the
    outer quadrature is repeated at 2× and 4× the refinement and the two
    leading error terms are removed by Richardson extrapolation (see
    :func:`richardson_exponents`).  Without
    ``order`` the midpoint of the admissible interval (1 − μ̂, λ̂) is used, where λ̂, μ̂ are the
    estimated Hölder exponents of f and g.
    """
    fv, gv = _paired(f, g)
    lam, mu = _check_young_pair(f, g)
    if order is None:
        order = admissible_order(lam, mu)
    alpha = fraccalc._as_order(order)
    if not (lam > alpha and mu > 1.0 - alpha):
        raise PreconditionError(
            f"order α={alpha} needs λ̂ > α and μ̂ > 1 − α, measured λ̂={lam:.3f}, μ̂={mu:.3f}",
            lam=lam,
            mu=mu,
            alpha=alpha,
        )
    full = _zahle_extrapolated(f.times, fv, gv, alpha, oversample, extrapolate)
    err = 0.0
    if len(f) >= 3:
        idx = np.unique(np.append(np.arange(0, len(f), 2), len(f) - 1))
        half = _zahle_extrapolated(f.times[idx], fv[idx], gv[idx], alpha, oversample, extrapolate)
        err = float(np.linalg.norm(full - half))
    return IntegralResult(full, "zahle", len(f), err, alpha)


def chain_rule_target(g: GridPath) -> float:
    """(g(b)² − g(a)²)/2 for a scalar path."""
    v = g.scalar()
    return 0.5 * (v[-1] ** 2 - v[0] ** 2)


def relative_difference(value: float, reference: float) -> float:
    """|value − reference| / |reference|; 0 when both vanish, inf when only the reference does."""
    gap = abs(value - reference)
    if reference == 0.0:
        return 0.0 if gap == 0.0 else float("inf")
    return gap / abs(reference)


__all__ = [
    "IntegralResult",
    "rs_integral",
    "rs_cumulative",
    "zahle_integral",
    "admissible_order",
    "chain_rule_target",
    "relative_difference",
]
