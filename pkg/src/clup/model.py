"""Random linear system ``y = A x_sol + sigma v`` and solution-quality metrics.

Random draw order (fixed, so seeds replay across implementations of the same
generator): a ``numpy.random.PCG64`` stream seeded with the 64-bit seed yields
the entries of ``A`` in row-major order, then the ``m`` entries of ``v``, then
``n`` sign bits for ``x_sol`` (only in ``random_signs`` mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from clup.errors import ConfigurationError

RNG_DESCRIPTION = (
    "numpy PCG64(seed); draws: A row-major standard normals, then v standard "
    "normals, then x_sol sign bits via integers(0, 2)"
)


@dataclass(frozen=True)
class SystemDims:
    n: int
    m: int
    alpha: float

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ConfigurationError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")

    @classmethod
    def from_alpha(cls, n: int, alpha: float) -> "SystemDims":
        """``m = round(alpha * n)`` with halves rounded up."""
        if n < 1:
            raise ConfigurationError(f"n must be >= 1, got {n}")
        if not alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {alpha}")
        m = int(math.floor(alpha * n + 0.5))
        if m < 1:
            raise ConfigurationError(f"alpha={alpha} with n={n} gives m={m} < 1")
        return cls(n=int(n), m=m, alpha=float(alpha))


@dataclass(frozen=True, eq=False)
class SystemInstance:
    dims: SystemDims
    A: np.ndarray
    x_sol: np.ndarray
    v: np.ndarray
    sigma: float
    y: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return self.dims.n

    @property
    def m(self) -> int:
        return self.dims.m

    @property
    def bound(self) -> float:
        return 1.0 / math.sqrt(self.dims.n)


@dataclass(frozen=True)
class OverlapStats:
    c1: float
    c2: float


def snr_db_to_sigma(snr_db: float) -> float:
    """Noise scale for an SNR given as ``1/sigma^2`` in dB; ``inf`` maps to 0."""
    if snr_db == math.inf:
        return 0.0
    return 10.0 ** (-snr_db / 20.0)


def generate_instance(dims: SystemDims, sigma: float, seed: int,
                      x_sol_mode: str = "random_signs") -> SystemInstance:
    if sigma < 0 or not math.isfinite(sigma):
        raise ConfigurationError(f"sigma must be finite and >= 0, got {sigma}")
    if x_sol_mode not in ("random_signs", "all_plus"):
        raise ConfigurationError(f"unknown x_sol_mode {x_sol_mode!r}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    n, m = dims.n, dims.m
    rng = np.random.Generator(np.random.PCG64(seed))
    A = rng.standard_normal((m, n))
    v = rng.standard_normal(m)
    if x_sol_mode == "random_signs":
        signs = 2.0 * rng.integers(0, 2, size=n) - 1.0
    else:
        signs = np.ones(n)
    x_sol = signs / math.sqrt(n)
    y = A @ x_sol + sigma * v
    for arr in (A, x_sol, v, y):
        arr.setflags(write=False)
    return SystemInstance(dims=dims, A=A, x_sol=x_sol, v=v, sigma=float(sigma), y=y, seed=seed)


def _check_lengths(x, x_sol):
    x = np.asarray(x, dtype=float)
    x_sol = np.asarray(x_sol, dtype=float)
    if x.shape != x_sol.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {x_sol.shape}")
    return x, x_sol


def overlap_stats(x, x_sol) -> OverlapStats:
    x, x_sol = _check_lengths(x, x_sol)
    return OverlapStats(c1=float(x_sol @ x), c2=float(x @ x))


def _signs(x):
    # sign(0) counts as +
    return np.where(x >= 0, 1.0, -1.0)


def bit_error_count(x, x_sol) -> int:
    x, x_sol = _check_lengths(x, x_sol)
    return int(np.count_nonzero(_signs(x) != _signs(x_sol)))


def bit_error_fraction(x, x_sol) -> float:
    x, x_sol = _check_lengths(x, x_sol)
    return bit_error_count(x, x_sol) / x.size


def round_to_corner(x, n: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if n is None:
        n = x.size
    if x.shape != (n,):
        raise ValueError(f"expected a vector of length {n}, got shape {x.shape}")
    return _signs(x) / math.sqrt(n)
