"""Closed-form ML objective over the overlap ``c1`` and its stationary points.

    xi(alpha, sigma; c1) = sqrt(alpha) sqrt(2 - 2 c1 + sigma^2) - sqrt(2/pi) exp(-erfinv(-c1)^2)

For ``alpha = 0.6`` the function has two local minima over a wide SNR range:
a low-overlap one and a high-overlap one just below ``c1 = 1``. Which of the
two is global flips at a single SNR (the glitch).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc

from clup.errors import ConfigurationError, DomainError
from clup.model import snr_db_to_sigma

SQRT_PI = math.sqrt(math.pi)
C1_EDGE = 1.0 - 1e-12


def _giles(p):
    # single-precision rational start (Giles 2010), about 1e-7 relative
    w = -np.log((1.0 - p) * (1.0 + p))
    small = w < 5.0
    ws = w - 2.5
    ps = 2.81022636e-08
    for c in (3.43273939e-07, -3.5233877e-06, -4.39150654e-06, 0.00021858087,
              -0.00125372503, -0.00417768164, 0.246640727, 1.50140941):
        ps = c + ps * ws
    wl = np.sqrt(np.where(small, 5.0, w)) - 3.0
    pl = -0.000200214257
    for c in (0.000100950558, 0.00134934322, -0.00367342844, 0.00573950773,
              -0.0076224613, 0.00943887047, 1.00167406, 2.83297682):
        pl = c + pl * wl
    return np.where(small, ps, pl) * p


def erfinv(p):
    """Inverse error function on (-1, 1), accurate to a few ulps.

    A rational starting value is refined to float resolution: Halley steps on
    ``erf(x) - p`` in the center, Newton steps on ``log erfc(x) - log(1 - p)``
    above 0.5 (``1 - p`` is exact there, so the tails keep full relative
    accuracy). Odd symmetry holds exactly.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~(np.abs(arr) < 1.0)):
        raise DomainError("erfinv is defined on the open interval (-1, 1)")
    a = np.abs(arr)
    x = _giles(a)
    tail = a > 0.5
    log_q = np.log(np.where(tail, 1.0 - a, 1.0))
    for _ in range(50):
        dens = (2.0 / SQRT_PI) * np.exp(-x * x)
        with np.errstate(divide="ignore", invalid="ignore"):
            ec = erfc(x)
            f = erf(x) - a
            step = np.where(tail, -(np.log(ec) - log_q) * ec / dens, f / (dens + x * f))
        step = np.where(np.isfinite(step) & (a > 0), step, 0.0)
        x = x - step
        if np.all(np.abs(step) <= 1e-15 * np.abs(x)):
            break
    out = np.copysign(x, arr)
    return float(out) if np.ndim(p) == 0 else out


def _check(alpha, sigma, c1):
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if not sigma >= 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    c = np.asarray(c1, dtype=float)
    if np.any(~(np.abs(c) < 1.0)):
        raise DomainError("c1 must lie in (-1, 1)")
    s = 2.0 - 2.0 * c + sigma * sigma
    if np.any(s <= 0):
        raise DomainError("2 - 2 c1 + sigma^2 must be positive")
    return c, s


def _out(v, c1):
    return float(v) if np.ndim(c1) == 0 else v


def xi_ml(alpha, sigma, c1):
    c, s = _check(alpha, sigma, c1)
    u = erfinv(-c)
    return _out(math.sqrt(alpha) * np.sqrt(s) - math.sqrt(2.0 / math.pi) * np.exp(-u * u), c1)


def xi_ml_d1(alpha, sigma, c1):
    c, s = _check(alpha, sigma, c1)
    return _out(-math.sqrt(alpha) / np.sqrt(s) - math.sqrt(2.0) * erfinv(-c), c1)


def xi_ml_d2(alpha, sigma, c1):
    c, s = _check(alpha, sigma, c1)
    u = erfinv(-c)
    return _out(-math.sqrt(alpha) / s ** 1.5 + math.sqrt(math.pi / 2.0) * np.exp(u * u), c1)


@dataclass(frozen=True)
class TheoryPoint:
    alpha: float
    sigma: float
    c1: float
    xi: float
    d1: float
    d2: float
    kind: str


def _point(alpha, sigma, c1, kind=None):
    d2 = xi_ml_d2(alpha, sigma, c1)
    if kind is None:
        kind = "local_min" if d2 > 0 else "local_max"
    return TheoryPoint(alpha, sigma, float(c1), xi_ml(alpha, sigma, c1),
                       xi_ml_d1(alpha, sigma, c1), d2, kind)


def _grid(lo, hi, grid_n):
    # uniform grid plus points crowding toward the ends: the high-overlap
    # minimum sits within 1e-6 of c1 = 1 at high SNR
    pts = [np.linspace(lo, hi, grid_n)]
    k = np.arange(1.0, 12.01, 0.125)
    pts.append(1.0 - 10.0 ** -k)
    pts.append(-1.0 + 10.0 ** -k)
    g = np.unique(np.concatenate(pts))
    return g[(g >= lo) & (g <= hi)]


def find_stationary_points(alpha, sigma, c1_lo=-C1_EDGE, c1_hi=C1_EDGE, grid_n=20001):
    """All roots of the first derivative on [c1_lo, c1_hi], classified by the second.

    Endpoints where the function decreases toward the boundary are appended
    with ``kind="boundary"``.
    """
    if not -1 < c1_lo < c1_hi < 1:
        raise ConfigurationError(f"need -1 < c1_lo < c1_hi < 1, got {c1_lo}, {c1_hi}")
    if grid_n < 100:
        raise ConfigurationError("grid_n must be >= 100")
    g = _grid(c1_lo, c1_hi, grid_n)
    d = xi_ml_d1(alpha, sigma, g)
    roots = []
    for i in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)[0]:
        a, b_ = g[i], g[i + 1]
        fa, fb = d[i], d[i + 1]
        if fa == 0:
            roots.append(a)
            continue
        if fb == 0:
            continue
        # near c1 = 1 the slope of d1 is ~1e5, so a 1e-12 bracket is not
        # enough for |d1| <= 1e-9; keep halving down to float resolution
        while True:
            mid = 0.5 * (a + b_)
            fm = xi_ml_d1(alpha, sigma, mid)
            if abs(fm) <= 1e-9 or mid in (a, b_):
                roots.append(mid)
                break
            if math.copysign(1.0, fm) == math.copysign(1.0, fa):
                a, fa = mid, fm
            else:
                b_ = mid
    merged = []
    for r in sorted(roots):
        if not merged or r - merged[-1] > 1e-8:
            merged.append(r)
    points = [_point(alpha, sigma, r) for r in merged]
    if d[0] > 0:
        points.insert(0, _point(alpha, sigma, g[0], kind="boundary"))
    if d[-1] < 0:
        points.append(_point(alpha, sigma, g[-1], kind="boundary"))
    return points


def global_and_local_min(alpha, sigma, **kw):
    """(global minimizer, highest-overlap local minimizer); may be the same point."""
    mins = [p for p in find_stationary_points(alpha, sigma, **kw) if p.kind == "local_min"]
    if not mins:
        raise ConfigurationError(f"no stationary minimum for alpha={alpha}, sigma={sigma}")
    glob = min(mins, key=lambda p: p.xi)
    high = max(mins, key=lambda p: p.c1)
    return glob, high


def _global_is_high(alpha, snr_db):
    glob, high = global_and_local_min(alpha, snr_db_to_sigma(snr_db))
    return glob.c1 == high.c1


def find_glitch_snr(alpha, snr_lo_db=13.0, snr_hi_db=16.0, tol_db=0.01):
    """SNR (dB) where the global minimizer jumps to the high-overlap branch."""
    if not snr_lo_db < snr_hi_db:
        raise ConfigurationError("need snr_lo_db < snr_hi_db")
    if not tol_db > 0:
        raise ConfigurationError("tol_db must be > 0")
    lo, hi = float(snr_lo_db), float(snr_hi_db)
    f_lo, f_hi = _global_is_high(alpha, lo), _global_is_high(alpha, hi)
    if f_lo == f_hi:
        raise ConfigurationError(
            f"global minimizer stays on the {'high' if f_lo else 'low'} branch over "
            f"[{lo}, {hi}] dB at alpha={alpha}; no glitch in this bracket")
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if _global_is_high(alpha, mid) == f_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CurvePoint:
    snr_db: float
    c1: float
    xi: float
    branch: str


def ml_curve(alpha, snr_grid_db, mode="global"):
    if mode not in ("global", "local_high_branch"):
        raise ConfigurationError(f"unknown mode {mode!r}")
    grid = list(snr_grid_db)
    if not grid:
        raise ConfigurationError("snr grid is empty")
    rows = []
    for snr in grid:
        try:
            glob, high = global_and_local_min(alpha, snr_db_to_sigma(snr))
        except ConfigurationError as exc:
            raise ConfigurationError(f"at snr_db={snr}: {exc}") from exc
        p = glob if mode == "global" else high
        rows.append(CurvePoint(float(snr), p.c1, p.xi, "high" if p.c1 == high.c1 else "low"))
    return rows
