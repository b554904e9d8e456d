"""Riemann-Liouville integrals and Weyl (Marchaud) derivatives of sampled functions.

Every operator acts on the piecewise-linear interpolant of the samples and
integrates the singular kernel exactly on each grid cell, so values at grid
points carry no quadrature error beyond the interpolation itself.

The unimodular factors (−1)^{±α} of the right-sided operators are dropped:
all functions here return the real part of the defining expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import DomainError
from .paths import GridPath, holder_seminorm


def gamma_fn(z: float) -> float:
    """Euler gamma function for z > 0."""
    if not z > 0:
        raise DomainError(f"gamma_fn needs z > 0, got {z}")
    return math.gamma(z)


@dataclass(frozen=True)
class FracOrder:
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"fractional order must lie in (0, 1), got {self.alpha}")

    @property
    def dual(self) -> FracOrder:
        return FracOrder(1.0 - self.alpha)


def default_order(beta: float) -> FracOrder:
    """An order α with 1 − β < α < β, for use with β-Hölder data (β > 1/2).

    Starts from (2 − β)/2 and, when that leaves the admissible interval,
    moves a quarter of the interval width inside its upper end.
    """
    if not 0.5 < beta < 1.0:
        raise DomainError(f"beta must lie in (1/2, 1), got {beta}")
    lo, hi = 1.0 - beta, beta
    alpha = (2.0 - beta) / 2.0
    if not lo < alpha < hi:
        alpha = hi - (hi - lo) / 4.0
    return FracOrder(alpha)


def _as_order(order: FracOrder | float) -> float:
    return order.alpha if isinstance(order, FracOrder) else FracOrder(float(order)).alpha


# ---------------------------------------------------------------------------
# kernel moments


def _dpow(k: np.ndarray, p: float) -> np.ndarray:
    """k^p − (k − 1)^p for integer k ≥ 1, accurate for large k."""
    k = np.asarray(k, dtype=float)
    out = np.empty_like(k)
    one = k == 1
    out[one] = 1.0 if p > 0 else np.inf
    big = ~one
    kb = k[big]
    out[big] = -(kb**p) * np.expm1(p * np.log1p(-1.0 / kb))
    return out


def _uniform(times: np.ndarray) -> bool:
    if times.size < 3:
        return True
    dt = np.diff(times)
    return bool(np.allclose(dt, dt[0], rtol=1e-10, atol=0.0))


def _causal_conv(w: np.ndarray, f: np.ndarray) -> np.ndarray:
    """(w * f)[i] = Σ_{k=0}^{i} w[k] f[i−k] for i < len(f); f is (n, c)."""
    n = f.shape[0]
    return signal.convolve(f, w[:n, None], mode="full")[:n]


# ---------------------------------------------------------------------------
# left-sided operators on arrays; values has shape (n, c)


def _rl_left_uniform(h: float, f: np.ndarray, alpha: float) -> np.ndarray:
    n = f.shape[0]
    k = np.arange(1, n + 1, dtype=float)
    d1 = _dpow(k, alpha + 1.0) / (alpha + 1.0)
    d0 = _dpow(k, alpha) / alpha
    a_w = np.concatenate([[0.0], d1 - (k - 1.0) * d0])  # weights of f_{i-k}, k >= 1
    b_w = k * d0 - d1  # weights of f_{i-k+1}, index k-1
    out = _causal_conv(a_w, f) + _causal_conv(b_w, f)
    # the second sum runs over k <= i only, drop its k = i + 1 term
    out -= b_w[:n, None] * f[0][None, :]
    out[0] = 0.0
    return out * h**alpha / math.gamma(alpha)


def _rl_left_at(times: np.ndarray, f: np.ndarray, alpha: float, i: int) -> np.ndarray:
    if i == 0:
        return np.zeros(f.shape[1])
    t = times[: i + 1]
    u_hi = times[i] - t[:-1]
    u_lo = times[i] - t[1:]
    h = np.diff(t)
    m0 = (u_hi**alpha - u_lo**alpha) / alpha
    m1 = (u_hi ** (alpha + 1) - u_lo ** (alpha + 1)) / (alpha + 1)
    wa = (m1 - u_lo * m0) / h
    wb = (u_hi * m0 - m1) / h
    return (wa @ f[:i] + wb @ f[1 : i + 1]) / math.gamma(alpha)


def _rl_left_array(times: np.ndarray, f: np.ndarray, alpha: float) -> np.ndarray:
    if _uniform(times):
        return _rl_left_uniform(times[1] - times[0], f, alpha) if times.size > 1 else np.zeros_like(f)
    return np.stack([_rl_left_at(times, f, alpha, i) for i in range(times.size)])


def _marchaud_left_uniform(h: float, f: np.ndarray, alpha: float) -> np.ndarray:
    """α ∫_a^{t_i} (f(t_i) − f(s)) (t_i − s)^{−α−1} ds for every i ≥ 1."""
    n = f.shape[0]
    out = np.zeros_like(f)
    if n < 2:
        return out
    diff1 = f[1:] - f[:-1]
    out[1:] = diff1 / (1.0 - alpha)
    if n > 2:
        k = np.arange(2, n, dtype=float)
        dm = -_dpow(k, -alpha) / alpha  # ((k-1)^{-a} - k^{-a}) / a
        d1 = _dpow(k, 1.0 - alpha) / (1.0 - alpha)
        p_w = np.concatenate([[0.0, 0.0], d1 - (k - 1.0) * dm])  # f_{i-k}
        q_w = np.concatenate([[0.0], k * dm - d1])  # f_{i-k+1}, index k-1
        i = np.arange(n, dtype=float)
        s = np.zeros(n)
        s[1:] = (1.0 - i[1:] ** -alpha) / alpha
        conv = _causal_conv(p_w, f) + _causal_conv(q_w, f)
        # q sum runs over k <= i only
        tail = np.zeros(n)
        tail[: q_w.size] = q_w
        conv -= tail[:, None] * f[0][None, :]
        out += s[:, None] * f - conv
    out[0] = 0.0
    return alpha * out * h**-alpha


def _marchaud_left_at(times: np.ndarray, f: np.ndarray, alpha: float, i: int) -> np.ndarray:
    if i == 0:
        return np.zeros(f.shape[1])
    h_last = times[i] - times[i - 1]
    total = (f[i] - f[i - 1]) * h_last**-alpha / (1.0 - alpha)
    if i >= 2:
        t = times[:i]
        u_hi = times[i] - t[:-1]
        u_lo = times[i] - t[1:]
        h = np.diff(t)
        m0 = (u_lo**-alpha - u_hi**-alpha) / alpha
        m1 = (u_hi ** (1 - alpha) - u_lo ** (1 - alpha)) / (1 - alpha)
        wa = (m1 - u_lo * m0) / h
        wb = (u_hi * m0 - m1) / h
        total = total + m0.sum() * f[i] - (wa @ f[: i - 1] + wb @ f[1:i])
    return alpha * total


def _weyl_left_array(times: np.ndarray, f: np.ndarray, alpha: float) -> np.ndarray:
    """D_{a+}^α on every grid point; row 0 is the limit value (0 or ±inf)."""
    f0 = f[0][None, :]
    g = f - f0
    if _uniform(times) and times.size > 1:
        integral = _marchaud_left_uniform(times[1] - times[0], g, alpha)
    else:
        integral = np.stack([_marchaud_left_at(times, g, alpha, i) for i in range(times.size)])
    dt = times - times[0]
    out = np.empty_like(f)
    with np.errstate(divide="ignore"):
        base = dt[1:] ** -alpha
    out[1:] = (f[1:] * base[:, None] + integral[1:]) / math.gamma(1.0 - alpha)
    out[0] = np.where(f[0] == 0.0, 0.0, np.copysign(np.inf, f[0]))
    return out


def _reflect(times: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return (times[0] + times[-1]) - times[::-1], f[::-1]


def _rl_right_array(times: np.ndarray, f: np.ndarray, alpha: float) -> np.ndarray:
    rt, rf = _reflect(times, f)
    return _rl_left_array(rt, rf, alpha)[::-1]


def _weyl_right_array(times: np.ndarray, f: np.ndarray, alpha: float) -> np.ndarray:
    rt, rf = _reflect(times, f)
    return _weyl_left_array(rt, rf, alpha)[::-1]


def _scalar_values(f: GridPath) -> np.ndarray:
    if f.dimension != 1:
        raise DomainError("fractional operators act on scalar sampled functions")
    return f.values


# ---------------------------------------------------------------------------
# public operators


def rl_integral_left(f: GridPath, order: FracOrder | float) -> GridPath:
    """I_{a+}^α f at every grid point (exact for the linear interpolant)."""
    alpha = _as_order(order)
    return f.with_values(_rl_left_array(f.times, _scalar_values(f), alpha))


def rl_integral_right(f: GridPath, order: FracOrder | float) -> GridPath:
    """Real part of I_{b−}^α f, i.e. (1/Γ(α)) ∫_t^b (s − t)^{α−1} f(s) ds."""
    alpha = _as_order(order)
    return f.with_values(_rl_right_array(f.times, _scalar_values(f), alpha))


def weyl_derivative_left(f: GridPath, order: FracOrder | float, t: float) -> float:
    """D_{a+}^α f(t) at a grid point a < t ≤ b, via the Marchaud form."""
    alpha = _as_order(order)
    i = f.index_of(t)
    if i == 0:
        raise DomainError("the left Weyl derivative is singular at t = a")
    vals = _scalar_values(f)
    g = vals - vals[0]
    integral = _marchaud_left_at(f.times, g, alpha, i)[0]
    return float((vals[i, 0] * (f.times[i] - f.times[0]) ** -alpha + integral) / math.gamma(1 - alpha))


def weyl_derivative_right(f: GridPath, order: FracOrder | float, t: float) -> float:
    """Real part of D_{b−}^α f(t) at a grid point a ≤ t < b."""
    alpha = _as_order(order)
    i = f.index_of(t)
    if i == len(f) - 1:
        raise DomainError("the right Weyl derivative is singular at t = b")
    rt, rf = _reflect(f.times, _scalar_values(f))
    return weyl_derivative_left(GridPath(rt, rf), alpha, rt[len(f) - 1 - i])


def weyl_derivative_left_grid(f: GridPath, order: FracOrder | float) -> GridPath:
    """D_{a+}^α f on all grid points strictly after a."""
    alpha = _as_order(order)
    d = _weyl_left_array(f.times, _scalar_values(f), alpha)
    return GridPath(f.times[1:], d[1:])


def weyl_derivative_right_grid(f: GridPath, order: FracOrder | float) -> GridPath:
    """Real part of D_{b−}^α f on all grid points strictly before b."""
    alpha = _as_order(order)
    d = _weyl_right_array(f.times, _scalar_values(f), alpha)
    return GridPath(f.times[:-1], d[:-1])


def inner_product(f: GridPath, g: GridPath) -> float:
    """Trapezoid approximation of ∫_a^b f(t) g(t) dt on a shared grid."""
    if not np.array_equal(f.times, g.times):
        raise DomainError("inner product needs a shared grid")
    return float(np.trapezoid(f.scalar() * g.scalar(), f.times))


def right_derivative_ratio(y: GridPath, alpha: float, beta: float, r: float, t: float) -> float:
    """|D_{t−}^{1−α} y_{t−}(r)| / (‖y‖_{r,t,β} (t − r)^{α+β−1}).

    The numerator depends only on y restricted to [r, t].  Returns 0 when
    y is constant on the window.
    """
    piece = y.window(r, t)
    if piece.dimension != 1:
        raise DomainError("ratio is defined for scalar drivers")
    shifted = piece.with_values(piece.values - piece.values[-1])
    num = abs(weyl_derivative_right(shifted, 1.0 - alpha, r))
    semi = holder_seminorm(piece, beta)
    if semi == 0.0:
        return 0.0
    return num / (semi * (t - r) ** (alpha + beta - 1.0))
