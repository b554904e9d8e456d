"""Euler and Picard solvers for x_t = x_0 + ∫_0^t f(x_r) dy_r."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .errors import DivergenceError, DomainError, YoungWarning
from .integrate import rs_cumulative
from .paths import GridPath, covariance_rh, estimate_holder_exponent, holder_seminorm

Array = np.ndarray


@dataclass(frozen=True)
class FieldMeta:
    """Declared norms of a coefficient f; ``None`` means "not bounded / unknown"."""

    sup_df: float
    a0: float
    a1: float
    sup_f: Optional[float] = None
    sup_ddf: Optional[float] = None
    lam: float = 1.0

    def __post_init__(self) -> None:
        for name in ("sup_df", "a0", "a1", "sup_f", "sup_ddf"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise DomainError(f"{name} must be nonnegative, got {v}")
        if not 0.0 < self.lam <= 1.0:
            raise DomainError(f"Hölder exponent of f' must lie in (0, 1], got {self.lam}")


@dataclass(frozen=True)
class VectorField:
    """Coefficient f: R^d → R^{d×m}.

    ``func`` must broadcast: an array of shape (..., d) maps to (..., d, m).
    ``jacobian`` (optional) maps (..., d) to (..., d, m, d).
    """

    func: Callable[[Array], Array]
    d: int
    m: int
    meta: FieldMeta
    jacobian: Optional[Callable[[Array], Array]] = None
    name: str = "field"

    def __call__(self, x: Array) -> Array:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def jac(self, x: Array, eps: float = 1e-6) -> Array:
        x = np.asarray(x, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x), dtype=float)
        return fd_jacobian(self, x, eps)

    def check(self, rng: np.random.Generator, n_samples: int = 200, radius: float = 10.0) -> None:
        """Validate the declared metadata at random points; raises DomainError."""
        x = rng.uniform(-radius, radius, size=(n_samples, self.d))
        fx = self(x)
        if fx.shape != (n_samples, self.d, self.m):
            raise DomainError(f"{self.name}: expected values of shape (..., {self.d}, {self.m})")
        norms = matrix_norm(fx)
        xn = np.linalg.norm(x, axis=-1)
        slack = 1e-9 * (1 + norms)
        if np.any(norms > self.meta.a0 + self.meta.a1 * xn + slack):
            raise DomainError(f"{self.name}: linear growth bound a0 + a1|x| violated")
        if self.meta.sup_f is not None and np.any(norms > self.meta.sup_f + slack):
            raise DomainError(f"{self.name}: declared sup_f violated")
        j = self.jac(x)
        if np.any(jacobian_norm(j) > self.meta.sup_df * (1 + 1e-9) + 1e-12):
            raise DomainError(f"{self.name}: declared sup_df violated")
        if self.jacobian is not None:
            fd = fd_jacobian(self, x, 1e-6)
            scale = np.maximum(np.abs(fd), 1.0)
            if np.any(np.abs(fd - j) > 1e-5 * scale):
                raise DomainError(f"{self.name}: jacobian disagrees with central differences")


def fd_jacobian(field: VectorField, x: Array, eps: float = 1e-6) -> Array:
    """Central-difference Jacobian, shape (..., d, m, d)."""
    cols = []
    for k in range(field.d):
        e = np.zeros(field.d)
        e[k] = eps
        cols.append((field(x + e) - field(x - e)) / (2 * eps))
    return np.stack(cols, axis=-1)


def matrix_norm(a: Array) -> Array:
    """Spectral norm over the last two axes (absolute value for 1×1)."""
    if a.shape[-2:] == (1, 1):
        return np.abs(a[..., 0, 0])
    return np.linalg.norm(a, ord=2, axis=(-2, -1))


def jacobian_norm(j: Array) -> Array:
    """Norm of v ↦ Σ_k J[..., :, :, k] v_k from R^d to (R^{d×m}, Frobenius)."""
    if j.shape[-3:] == (1, 1, 1):
        return np.abs(j[..., 0, 0, 0])
    flat = j.reshape(j.shape[:-3] + (-1, j.shape[-1]))
    return np.linalg.norm(flat, ord=2, axis=(-2, -1))


# ---------------------------------------------------------------------------
# stock fields, all with d = m = 1


def constant_field(c: float | Array, d: int = 1, m: int = 1) -> VectorField:
    mat = np.broadcast_to(np.asarray(c, dtype=float), (d, m)).copy()
    size = float(matrix_norm(mat))
    meta = FieldMeta(sup_df=0.0, a0=size, a1=0.0, sup_f=size, sup_ddf=0.0)
    return VectorField(
        lambda x: np.broadcast_to(mat, x.shape[:-1] + (d, m)),
        d,
        m,
        meta,
        jacobian=lambda x: np.zeros(x.shape[:-1] + (d, m, d)),
        name=f"constant({c})",
    )


def linear_field(a: float = 1.0, b: float = 0.0) -> VectorField:
    """f(x) = a x + b."""
    meta = FieldMeta(sup_df=abs(a), a0=abs(b), a1=abs(a), sup_ddf=0.0)
    return VectorField(
        lambda x: (a * x + b)[..., None],
        1,
        1,
        meta,
        jacobian=lambda x: np.full(x.shape + (1, 1), float(a)),
        name=f"linear({a}, {b})",
    )


def sine_field(offset: float = 2.0, scale: float = 1.0) -> VectorField:
    """f(x) = scale · (offset + sin x)."""
    s = abs(scale)
    top = s * (abs(offset) + 1.0)
    meta = FieldMeta(sup_df=s, a0=top, a1=0.0, sup_f=top, sup_ddf=s)
    return VectorField(
        lambda x: (scale * (offset + np.sin(x)))[..., None],
        1,
        1,
        meta,
        jacobian=lambda x: (scale * np.cos(x))[..., None, None],
        name=f"sine({offset}, {scale})",
    )


def shifted(field: VectorField, eps: float) -> VectorField:
    """f + ε (constant shift of every entry)."""
    old = field.meta
    shift = abs(eps) * np.sqrt(field.d * field.m)
    meta = FieldMeta(
        sup_df=old.sup_df,
        a0=old.a0 + shift,
        a1=old.a1,
        sup_f=None if old.sup_f is None else old.sup_f + shift,
        sup_ddf=old.sup_ddf,
        lam=old.lam,
    )
    return VectorField(
        lambda x: field(x) + eps, field.d, field.m, meta, field.jacobian, f"{field.name}+{eps}"
    )


# ---------------------------------------------------------------------------
# solvers


@dataclass(frozen=True)
class SolveConfig:
    refinement_levels: int = 2
    tolerance: float = 1e-2
    picard_max_iter: int = 50

    def __post_init__(self) -> None:
        if self.refinement_levels < 1 or not self.tolerance > 0 or self.picard_max_iter < 0:
            raise DomainError("invalid SolveConfig")


@dataclass(frozen=True)
class SolveResult:
    path: GridPath
    beta_hat: float
    coarse_gap: float
    converged: bool
    messages: tuple[str, ...] = field(default_factory=tuple)


def euler_paths(field: VectorField, x0: Array, increments: Array) -> Array:
    """Batched Euler recursion x_{k+1} = x_k + f(x_k) Δy_k.

    ``increments`` has shape (P, n−1, m); returns states of shape (P, n, d).
    Non-finite states are left in place for the caller to inspect.
    """
    inc = np.asarray(increments, dtype=float)
    p, steps, m = inc.shape
    if m != field.m:
        raise DomainError(f"driver dimension {m} does not match field m={field.m}")
    x = np.empty((p, steps + 1, field.d))
    x[:, 0] = np.broadcast_to(np.asarray(x0, dtype=float), (p, field.d))
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            x[:, k + 1] = x[:, k] + np.einsum("pij,pj->pi", field(x[:, k]), inc[:, k])
    return x


def first_non_finite(x: Array) -> int | None:
    bad = ~np.all(np.isfinite(x.reshape(x.shape[0], -1)), axis=1)
    return int(np.argmax(bad)) if bad.any() else None


def _euler_single(field: VectorField, x0: Array, y: GridPath) -> Array:
    x = euler_paths(field, x0, np.diff(y.values, axis=0)[None])[0]
    bad = first_non_finite(x)
    if bad is not None:
        raise DivergenceError(f"non-finite state at grid index {bad}", index=bad)
    return x


def solve_young_euler(
    field: VectorField, x0, y: GridPath, config: SolveConfig | None = None
) -> SolveResult:
    """Euler scheme on the grid of ``y`` with a dyadic-coarsening check.

    The equation is also solved on every 2nd, 4th, ... point of the driver
    (``config.refinement_levels`` levels in total); the sup gap between
    the two finest levels at shared points is compared with
    ``config.tolerance``.
    """
    config = config or SolveConfig()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (field.d,):
        raise DomainError(f"x0 must have shape ({field.d},)")
    messages = []
    beta_hat = estimate_holder_exponent(y)
    if beta_hat <= 0.5:
        messages.append(f"driver roughness estimate {beta_hat:.3f} is not above 1/2")
    elif field.meta.lam <= 1.0 / beta_hat - 1.0:
        messages.append(
            f"f' Hölder exponent {field.meta.lam} does not exceed 1/β̂ − 1 = {1 / beta_hat - 1:.3f}"
        )
    x = _euler_single(field, x0, y)
    gap = 0.0
    converged = True
    if config.refinement_levels >= 2 and len(y) >= 3:
        coarse = y.subsample(2)
        xc = _euler_single(field, x0, coarse)
        idx = np.searchsorted(y.times, coarse.times)
        gap = float(np.linalg.norm(x[idx] - xc, axis=1).max())
        converged = gap <= config.tolerance
        if not converged:
            messages.append(f"coarsening gap {gap:.3e} exceeds tolerance {config.tolerance:.3e}")
    for msg in messages:
        warnings.warn(msg, YoungWarning, stacklevel=2)
    return SolveResult(GridPath(y.times, x), beta_hat, gap, converged, tuple(messages))


@dataclass(frozen=True)
class PicardResult:
    path: GridPath
    distance: float
    history: tuple[float, ...]


def field_along(field: VectorField, x: GridPath) -> GridPath:
    """t ↦ f(x_t) flattened to dimension d·m."""
    fx = field(x.values)
    return GridPath(x.times, fx.reshape(len(x), -1))


def picard_refine(
    field: VectorField, x0, y: GridPath, initial: GridPath, iters: int
) -> PicardResult:
    """Iterate x ↦ x0 + ∫_0^· f(x) dy with left-point sums.

    The fixed point of this discrete map is the Euler solution.  Raises
    DivergenceError if the sup distance between iterates grows three times
    in a row.
    """
    if not np.array_equal(initial.times, y.times):
        raise DomainError("initial guess must live on the driver's grid")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    x = initial
    history: list[float] = []
    growth = 0
    for _ in range(iters):
        integral = rs_cumulative(field_along(field, x), y, rule="left")
        new = GridPath(y.times, x0[None, :] + integral.values)
        dist = float(np.linalg.norm(new.values - x.values, axis=1).max())
        if not np.isfinite(dist):
            raise DivergenceError("Picard iterate became non-finite")
        growth = growth + 1 if history and dist > history[-1] else 0
        history.append(dist)
        x = new
        if growth >= 3:
            raise DivergenceError("Picard distances grew for 3 consecutive iterations")
        if dist == 0.0:
            break
    return PicardResult(x, history[-1] if history else 0.0, tuple(history))


# ---------------------------------------------------------------------------
# drivers across refinement levels


def dyadic_levels(y: GridPath, levels: int) -> list[GridPath]:
    """[y, y on every 2nd point, every 4th point, ...], finest first."""
    if (len(y) - 1) % 2 ** (levels - 1):
        raise DomainError("grid intervals must be divisible by 2^(levels-1)")
    return [y.subsample(2**j) if j else y for j in range(levels)]


def refine_linear(y: GridPath, factor: int = 2) -> GridPath:
    """Insert equally spaced points by piecewise-linear interpolation."""
    frac = np.arange(factor) / factor
    t = (y.times[:-1, None] + np.diff(y.times)[:, None] * frac).reshape(-1)
    t = np.append(t, y.times[-1])
    vals = np.column_stack([np.interp(t, y.times, c) for c in y.values.T])
    return GridPath(t, vals)


def refine_fbm_midpoints(y: GridPath, hurst: float, rng: np.random.Generator) -> GridPath:
    """Insert cell midpoints drawn from the exact fBm law conditional on all of y.

    Starts from time 0 with y(0) = 0 per coordinate.  Costs O(n³); meant
    for grids of a few thousand points.
    """
    t = y.times
    if t[0] != 0.0 or np.any(y.values[0] != 0.0):
        raise DomainError("conditional refinement needs an fBm path started at 0")
    tc = t[1:]
    tm = 0.5 * (t[:-1] + t[1:])
    c_cc = covariance_rh(tc[:, None], tc[None, :], hurst)
    c_mc = covariance_rh(tm[:, None], tc[None, :], hurst)
    c_mm = covariance_rh(tm[:, None], tm[None, :], hurst)
    chol = linalg.cho_factor(c_cc, lower=True)
    gain = linalg.cho_solve(chol, c_mc.T).T
    cond = c_mm - gain @ c_mc.T
    cond = 0.5 * (cond + cond.T)
    w, v = np.linalg.eigh(cond)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    mids = gain @ y.values[1:] + root @ rng.standard_normal((tm.size, y.dimension))
    times = np.empty(2 * t.size - 1)
    vals = np.empty((times.size, y.dimension))
    times[0::2], times[1::2] = t, tm
    vals[0::2], vals[1::2] = y.values, mids
    return GridPath(times, vals)


def empirical_order(resolutions, errors) -> float:
    """Least-squares slope of −log(error) against log(resolution)."""
    r = np.log(np.asarray(resolutions, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    return float(-np.polyfit(r, e, 1)[0])


def intermediate_holder_constant(
    x: GridPath, y: GridPath, beta: float, sup_f: float, sup_df: float, blocks: int = 8
) -> float:
    """Smallest k with ‖x‖_{s,t,β} ≤ k‖y‖_β[‖f‖∞ + ‖f′‖∞‖x‖_{s,t,β}(t−s)^β] on dyadic blocks."""
    y_semi = holder_seminorm(y, beta)
    if y_semi == 0.0:
        return 0.0
    edges = np.linspace(0, len(x) - 1, blocks + 1).astype(int)
    worst = 0.0
    for i0, i1 in zip(edges[:-1], edges[1:]):
        s, t = x.times[i0], x.times[i1]
        xs = holder_seminorm(x, beta, s, t)
        denom = y_semi * (sup_f + sup_df * xs * (t - s) ** beta)
        if denom > 0:
            worst = max(worst, xs / denom)
    return worst
