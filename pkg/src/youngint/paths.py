"""Sampled paths, Hölder and sup norms, and fractional Brownian motion."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from scipy import linalg

from .errors import DomainError, NumericalError

logger = logging.getLogger(__name__)

#: Above this many points the seminorm switches to the stride-limited estimator.
EXHAUSTIVE_LIMIT = 2**13
#: Largest grid size sampled by Cholesky under ``method="auto"``.
CHOLESKY_LIMIT = 2**11

FbmMethod = Literal["cholesky", "circulant_embedding", "auto"]


@dataclass(frozen=True)
class GridPath:
    """A vector-valued path sampled on a strictly increasing time grid.

    ``values`` always has shape ``(n, m)``; scalar input is promoted.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise DomainError("times must be a non-empty 1-d sequence")
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != t.size or v.shape[1] < 1:
            raise DomainError(
                f"values of shape {v.shape} do not match {t.size} time points"
            )
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise DomainError("times and values must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise DomainError("times must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.times.size

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def is_uniform(self) -> bool:
        if self.times.size < 3:
            return True
        dt = np.diff(self.times)
        return bool(np.allclose(dt, dt[0], rtol=1e-10, atol=0.0))

    def scalar(self) -> np.ndarray:
        """Values of a one-dimensional path as a flat array."""
        if self.dimension != 1:
            raise DomainError(f"expected a scalar path, got dimension {self.dimension}")
        return self.values[:, 0]

    def index_of(self, t: float) -> int:
        """Index of grid point ``t``; raises if ``t`` is not (close to) a grid point."""
        i = int(np.searchsorted(self.times, t))
        scale = max(1.0, abs(self.end), abs(self.start))
        for j in (i - 1, i):
            if 0 <= j < self.times.size and abs(self.times[j] - t) <= 1e-12 * scale:
                return j
        raise DomainError(f"t={t!r} is not a grid point of [{self.start}, {self.end}]")

    def window(self, a: float | None = None, b: float | None = None) -> GridPath:
        ia, ib = _window_indices(self, a, b)
        return GridPath(self.times[ia : ib + 1], self.values[ia : ib + 1])

    def subsample(self, stride: int) -> GridPath:
        """Every ``stride``-th point; the final point is always kept."""
        idx = np.arange(0, self.times.size, stride)
        if idx[-1] != self.times.size - 1:
            idx = np.append(idx, self.times.size - 1)
        return GridPath(self.times[idx], self.values[idx])

    def with_values(self, values: np.ndarray) -> GridPath:
        return GridPath(self.times, values)

    def __add__(self, other: GridPath) -> GridPath:
        _require_same_grid(self, other)
        return GridPath(self.times, self.values + other.values)

    def __sub__(self, other: GridPath) -> GridPath:
        _require_same_grid(self, other)
        return GridPath(self.times, self.values - other.values)

    def scaled(self, c: float) -> GridPath:
        return GridPath(self.times, c * self.values)

    @classmethod
    def from_function(cls, func, times: Sequence[float] | np.ndarray) -> GridPath:
        t = np.asarray(times, dtype=float)
        return cls(t, np.asarray(func(t), dtype=float))

    @classmethod
    def uniform(cls, values: np.ndarray, horizon: float = 1.0, start: float = 0.0) -> GridPath:
        values = np.asarray(values, dtype=float)
        t = np.linspace(start, start + horizon, values.shape[0])
        return cls(t, values)

    def to_csv(self, path: str | Path) -> None:
        header = ",".join(["t"] + [f"v{j + 1}" for j in range(self.dimension)])
        data = np.column_stack([self.times, self.values])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")

    @classmethod
    def from_csv(cls, path: str | Path) -> GridPath:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:])


def _require_same_grid(x: GridPath, y: GridPath) -> None:
    if x.times.shape != y.times.shape or not np.array_equal(x.times, y.times):
        raise DomainError("paths must share the same time grid")


def _window_indices(path: GridPath, a: float | None, b: float | None) -> tuple[int, int]:
    ia = 0 if a is None else path.index_of(a)
    ib = path.times.size - 1 if b is None else path.index_of(b)
    if ia >= ib:
        raise DomainError(f"empty window [{a}, {b}]")
    return ia, ib


@dataclass(frozen=True)
class HolderEstimate:
    beta: float
    window_start: float
    window_end: float
    seminorm: float
    sup_norm: float
    exhaustive: bool = True


def _lags(n: int, exhaustive: bool) -> np.ndarray:
    if exhaustive or n <= 1025:
        return np.arange(1, n)
    dense = np.arange(1, 1025)
    sparse = np.unique(np.geomspace(1025, n - 1, 512).astype(int))
    return np.concatenate([dense, sparse])


def seminorm_batch(
    times: np.ndarray,
    values: np.ndarray,
    beta: float,
    exhaustive: bool | None = None,
) -> np.ndarray:
    """Discrete β-Hölder seminorm of many paths sharing one grid.

    ``values`` has shape ``(..., n, m)``; the result has shape ``(...)``.
    """
    times = np.asarray(times, dtype=float)
    values = np.moveaxis(np.asarray(values, dtype=float), -2, -1)  # (..., m, n)
    n = times.size
    if exhaustive is None:
        exhaustive = n <= EXHAUSTIVE_LIMIT
    dt = np.diff(times)
    uniform = n < 3 or np.allclose(dt, dt[0], rtol=1e-10, atol=0)
    best = np.zeros(values.shape[:-2])
    for k in _lags(n, exhaustive):
        inc = values[..., k:] - values[..., :-k]
        mag = np.abs(inc[..., 0, :]) if inc.shape[-2] == 1 else np.sqrt(np.sum(inc * inc, axis=-2))
        if uniform:
            ratio = mag.max(axis=-1) / (times[k] - times[0]) ** beta
        else:
            ratio = (mag / (times[k:] - times[:-k]) ** beta).max(axis=-1)
        np.maximum(best, ratio, out=best)
    return best


def holder_seminorm(
    path: GridPath,
    beta: float,
    a: float | None = None,
    b: float | None = None,
    exhaustive: bool | None = None,
) -> float:
    """Discrete ‖x‖_{a,b,β}: the max of |x_r − x_θ| / (r − θ)^β over grid pairs.

    This is a lower estimate of the continuous seminorm.  For more than
    ``EXHAUSTIVE_LIMIT`` points the default switches to a stride-limited
    scan (all lags up to 1024 plus 512 geometric lags), which is a further
    lower bound; pass ``exhaustive=True`` to force the full O(n²) scan.
    """
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    ia, ib = _window_indices(path, a, b)
    t = path.times[ia : ib + 1]
    v = path.values[ia : ib + 1]
    if exhaustive is None and t.size > EXHAUSTIVE_LIMIT:
        logger.info("seminorm over %d points uses the stride-limited scan", t.size)
    return float(seminorm_batch(t, v, beta, exhaustive=exhaustive))


def sup_norm(path: GridPath, a: float | None = None, b: float | None = None) -> float:
    """max over grid points in [a, b] of the Euclidean norm of the value."""
    if a is None and b is None:
        v = path.values
    else:
        ia, ib = _window_indices(path, a, b)
        v = path.values[ia : ib + 1]
    return float(np.sqrt(np.sum(v * v, axis=1)).max())


def holder_estimate(
    path: GridPath, beta: float, a: float | None = None, b: float | None = None
) -> HolderEstimate:
    ia, ib = _window_indices(path, a, b)
    n = ib - ia + 1
    return HolderEstimate(
        beta=beta,
        window_start=float(path.times[ia]),
        window_end=float(path.times[ib]),
        seminorm=holder_seminorm(path, beta, path.times[ia], path.times[ib]),
        sup_norm=sup_norm(path, path.times[ia], path.times[ib]),
        exhaustive=n <= EXHAUSTIVE_LIMIT,
    )


def estimate_holder_exponent(path: GridPath, max_level: int | None = None) -> float:
    """Roughness exponent from the scaling of mean squared increments.

    Regresses log E|x_{t+kh} − x_t|² on log k for dyadic lags k and returns
    half the slope, clipped to (0, 1].  Intended for uniform grids; a smooth
    path gives 1.
    """
    v = path.values
    n = v.shape[0]
    if n < 3:
        return 1.0
    top = int(math.log2((n - 1) / 8)) if n > 17 else 1
    levels = range(0, max(1, min(top, max_level if max_level is not None else 6)) + 1)
    lags, msq = [], []
    for j in levels:
        k = 2**j
        if k >= n:
            break
        inc = v[k:] - v[:-k]
        m2 = float(np.mean(np.sum(inc * inc, axis=1)))
        if m2 <= 0.0:
            continue
        lags.append(k)
        msq.append(m2)
    if len(lags) < 2:
        return 1.0
    slope = np.polyfit(np.log(lags), np.log(msq), 1)[0]
    return float(min(1.0, max(1e-6, slope / 2.0)))


# ---------------------------------------------------------------------------
# fractional Brownian motion


def covariance_rh(t, s, hurst: float):
    """R_H(t, s) = ½(t^{2H} + s^{2H} − |t − s|^{2H}); broadcasts over arrays."""
    if not 0.0 < hurst < 1.0:
        raise DomainError(f"hurst must lie in (0, 1), got {hurst}")
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise DomainError("covariance_rh needs nonnegative times")
    h2 = 2.0 * hurst
    r = 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)
    return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class FbmSpec:
    """Uniform-grid fBm request: ``n_points`` points on [0, horizon]."""

    hurst: float
    n_points: int
    horizon: float = 1.0
    dimension: int = 1
    seed: int = 0
    method: FbmMethod = "auto"

    def __post_init__(self) -> None:
        if not 0.5 < self.hurst < 1.0:
            raise DomainError(f"hurst must lie in (1/2, 1), got {self.hurst}")
        if self.n_points < 2:
            raise DomainError("an fBm grid needs at least 2 points")
        if self.horizon <= 0 or self.dimension < 1:
            raise DomainError("horizon must be positive and dimension >= 1")
        if self.method not in ("cholesky", "circulant_embedding", "auto"):
            raise DomainError(f"unknown fBm method {self.method!r}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_points)

    @property
    def resolved_method(self) -> str:
        if self.method != "auto":
            return self.method
        return "cholesky" if self.n_points <= CHOLESKY_LIMIT else "circulant_embedding"


def path_rng(seed: int, path_index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one path, derived from (seed, stream, path_index)."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(stream), int(path_index)))
    return np.random.Generator(np.random.PCG64(ss))


@lru_cache(maxsize=16)
def _cholesky_factor(hurst: float, n_points: int, horizon: float) -> np.ndarray:
    t = np.linspace(0.0, horizon, n_points)[1:]
    cov = covariance_rh(t[:, None], t[None, :], hurst)
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        w = np.linalg.eigvalsh(cov)
        raise NumericalError(
            f"fBm covariance not positive definite (H={hurst}, n={n_points}, "
            f"smallest eigenvalue {w[0]:.3e}); use circulant_embedding"
        ) from exc


def _fgn_autocov(hurst: float, k: np.ndarray) -> np.ndarray:
    k = np.abs(k).astype(float)
    h2 = 2.0 * hurst
    return 0.5 * ((k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


@lru_cache(maxsize=16)
def _circulant_sqrt_eigs(hurst: float, n_inc: int) -> np.ndarray:
    g = _fgn_autocov(hurst, np.arange(n_inc + 1))
    row = np.concatenate([g, g[-2:0:-1]])  # length 2 n_inc
    lam = np.fft.fft(row).real
    neg = lam < 0
    if np.any(neg):
        mass = float(-lam[neg].sum())
        trace = float(np.abs(lam).sum())
        if mass > 1e-8 * trace:
            raise NumericalError(
                f"circulant embedding has negative eigenvalues of total mass {mass:.3e} "
                f"(trace {trace:.3e}) for H={hurst}, n={n_inc}"
            )
        logger.warning("clipping %d negative embedding eigenvalues (mass %.2e)", neg.sum(), mass)
        lam = np.where(neg, 0.0, lam)
    return np.sqrt(lam / row.size)


def _sample_increments(spec: FbmSpec, rng: np.random.Generator, method: str) -> np.ndarray:
    """Draw one path's values at times[1:], shape (m, n_points - 1)."""
    m, n_inc = spec.dimension, spec.n_points - 1
    if method == "cholesky":
        lower = _cholesky_factor(spec.hurst, spec.n_points, spec.horizon)
        z = rng.standard_normal((m, n_inc))
        return z @ lower.T
    sq = _circulant_sqrt_eigs(spec.hurst, n_inc)
    z = rng.standard_normal((m, 2 * sq.size))
    xi = z[:, : sq.size] + 1j * z[:, sq.size :]
    fgn = np.fft.fft(sq * xi, axis=-1).real[:, :n_inc]
    return np.cumsum(fgn, axis=-1) * (spec.horizon / n_inc) ** spec.hurst


def sample_fbm_array(
    spec: FbmSpec, n_paths: int = 1, start_index: int = 0, stream: int = 0
) -> np.ndarray:
    """Sample paths ``start_index .. start_index+n_paths-1``; shape (P, n, m).

    Path ``i`` depends only on (seed, stream, i, method, grid).
    """
    method = spec.resolved_method
    out = np.zeros((n_paths, spec.n_points, spec.dimension))
    if method == "cholesky":
        # same draws as _sample_increments, multiplied in one batch
        m, n_inc = spec.dimension, spec.n_points - 1
        z = np.stack(
            [path_rng(spec.seed, start_index + p, stream).standard_normal((m, n_inc)) for p in range(n_paths)]
        )
        lower = _cholesky_factor(spec.hurst, spec.n_points, spec.horizon)
        out[:, 1:, :] = np.einsum("pmk,jk->pjm", z, lower)
        return out
    for p in range(n_paths):
        rng = path_rng(spec.seed, start_index + p, stream)
        out[p, 1:, :] = _sample_increments(spec, rng, method).T
    return out


def sample_fbm(spec: FbmSpec, path_index: int = 0, stream: int = 0) -> GridPath:
    """One m-dimensional fBm path with independent coordinates and B_0 = 0."""
    vals = sample_fbm_array(spec, 1, path_index, stream)[0]
    return GridPath(spec.times, vals)
