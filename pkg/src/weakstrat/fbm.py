"""Exact fractional Brownian motion on the uniform grid ``j/n``.

Paths are drawn by Cholesky factorization of the covariance of
``(B(1/n), ..., B(m/n))``. Self-similarity, ``B(j/n) = n^{-H} B(j)`` in law,
means one factor per grid size ``m`` serves every ``n``; it is cached.

Random numbers come from the Philox4x64-10 counter-based generator. Path ``i``
of a batch seeded with ``seed`` uses key ``seed ^ i``, and standard normals
are produced by the inverse normal CDF applied to 53-bit uniforms.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import cholesky
from scipy.special import ndtri

HURST = 1.0 / 6.0
MAX_STEPS = 8192
_MASK64 = (1 << 64) - 1


class FactorizationError(RuntimeError):
    """The covariance matrix was not numerically positive definite."""


def covariance(s, t, hurst: float = HURST):
    """``E[B(s)B(t)] = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2``.

    Works elementwise on arrays. Negative times raise ``ValueError``.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("times must be non-negative")
    e = 2.0 * hurst
    out = 0.5 * (np.power(s, e) + np.power(t, e) - np.power(np.abs(t - s), e))
    return float(out) if out.ndim == 0 else out


def num_steps(n: int, T: float) -> int:
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    if T <= 0:
        raise ValueError("horizon T must be positive")
    # guard against T*n landing just below an integer, e.g. 0.29*100
    return int(math.floor(n * T + 1e-9))


@lru_cache(maxsize=8)
def _unit_factor(m: int, hurst: float) -> np.ndarray:
    # Lower Cholesky factor of Cov(B(i), B(j)), 1 <= i, j <= m.
    j = np.arange(1, m + 1, dtype=float)
    e = 2.0 * hurst
    p = np.power(j, e)
    cov = np.abs(j[:, None] - j[None, :])
    np.power(cov, e, out=cov)
    np.subtract(p[:, None], cov, out=cov)
    cov += p[None, :]
    cov *= 0.5
    try:
        L = cholesky(cov, lower=True, overwrite_a=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"covariance of size {m} is not positive definite") from exc
    L.setflags(write=False)
    return L


def cholesky_factor(n: int, T: float, hurst: float = HURST) -> np.ndarray:
    """Lower factor ``L`` with ``L @ L.T`` the covariance of ``B(j/n)``, ``1 <= j <= nT``."""
    m = num_steps(n, T)
    if m < 1:
        raise ValueError("grid must contain at least one step (n*T >= 1)")
    if m > MAX_STEPS:
        raise ValueError(f"n*T = {m} exceeds the Cholesky cap of {MAX_STEPS} steps")
    return _unit_factor(m, float(hurst)) * float(n) ** (-hurst)


def standard_normals(seed: int, size: int) -> np.ndarray:
    """``size`` standard normals from Philox keyed by ``seed``."""
    bitgen = np.random.Philox(key=int(seed) & _MASK64)
    bits = bitgen.random_raw(size)
    u = ((bits >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53
    return ndtri(u)


@dataclass(frozen=True)
class Path:
    """Samples of ``B`` at ``j/n`` for ``j = 0..floor(nT)``."""

    n: int
    T: float
    values: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) / self.n

    def __len__(self):
        return len(self.values)

    def increments(self) -> np.ndarray:
        return increments(self)

    def to_csv(self, fh=None) -> str | None:
        """Write ``t,B`` rows with 17 significant digits."""
        return write_csv(fh, ("t", "B"), self.times, self.values)


def write_csv(fh, header, times, values):
    buf = io.StringIO() if fh is None else fh
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for t, v in zip(times, values):
        writer.writerow((f"{t:.17g}", f"{v:.17g}"))
    return buf.getvalue() if fh is None else None


def path_seeds(seed: int, num_paths: int) -> list[int]:
    return [(int(seed) ^ i) & _MASK64 for i in range(num_paths)]


def sample_paths(n: int, T: float, num_paths: int, seed: int, hurst: float = HURST) -> np.ndarray:
    """Array of shape ``(num_paths, floor(nT) + 1)``; row ``i`` uses key ``seed ^ i``."""
    L = cholesky_factor(n, T, hurst)
    m = L.shape[0]
    Z = np.empty((num_paths, m))
    for i, s in enumerate(path_seeds(seed, num_paths)):
        Z[i] = standard_normals(s, m)
    out = np.zeros((num_paths, m + 1))
    out[:, 1:] = Z @ L.T
    return out


def sample_path(n: int, T: float, seed: int, hurst: float = HURST) -> Path:
    """One exact sample path, deterministic in ``(n, T, seed)``."""
    values = sample_paths(n, T, 1, seed, hurst)[0]
    return Path(n=n, T=T, values=values, seed=int(seed))


def increments(path) -> np.ndarray:
    """``B(t_j) - B(t_{j-1})`` for ``j = 1..floor(nT)``; accepts a Path or an array."""
    values = path.values if isinstance(path, Path) else np.asarray(path, dtype=float)
    return np.diff(values, axis=-1)
