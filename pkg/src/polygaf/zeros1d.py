"""Zeros of one-variable truncated GAFs: roots, argument-principle counts, hole tests."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .sampler import GafSample, circle_values

KAPPA = 10.0
MARGIN = 0.01
CONTOUR_CLEARANCE = 1e-9
RADIUS_JITTER = 1e-6
N_START = 32
N_CAP = 2**16
AGREEMENT = 0.05


class ZeroCountError(RuntimeError):
    pass


class HoleOutcome(str, Enum):
    HOLE = "hole"
    NO_HOLE = "no_hole"
    UNCERTAIN = "uncertain"


def _one_variable(s: GafSample) -> np.ndarray:
    if s.n != 1:
        raise ValueError("zero location is implemented for n = 1 only")
    return s.scaled


def _trim(b: np.ndarray) -> np.ndarray:
    nz = np.nonzero(b)[0]
    if nz.size == 0:
        raise ValueError("the truncated polynomial is identically zero")
    return b[: nz[-1] + 1]


def root_residuals(b: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """|p(root)| / sum_k |b_k| |root|^k (normwise backward error)."""
    b = np.asarray(b)
    p = np.polyval(b[::-1], roots)
    scale = np.polyval(np.abs(b[::-1]), np.abs(roots))
    return np.abs(p) / scale


def polynomial_roots(s: GafSample, polish: int = 2) -> np.ndarray:
    """All roots of the truncated f_L (companion matrix in the variable z / eval_radius)."""
    b = _trim(_one_variable(s))
    if b.size == 1:
        return np.empty(0, dtype=complex)
    rho = float(s.eval_radius[0])
    q = b * rho ** np.arange(b.size)
    y = np.roots(q[::-1])
    z = y * rho
    # Newton polishing in the original variable
    db = b[1:] * np.arange(1, b.size)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(polish):
            p = np.polyval(b[::-1], z)
            dp = np.polyval(db[::-1], z)
            step = np.where(dp != 0, p / np.where(dp != 0, dp, 1), 0)
            cand = z - step
            better = np.abs(np.polyval(b[::-1], cand)) < np.abs(p)
            z = np.where(better, cand, z)
    return z


def _start_nodes(b: np.ndarray, radius: float) -> int:
    """Power of two >= twice the last degree whose term on |z| = radius is not negligible."""
    k = np.arange(b.shape[-1])
    with np.errstate(under="ignore", divide="ignore"):
        mag = np.max(np.abs(b), axis=0) * radius**k
    live = np.nonzero(mag > 1e-17 * mag.max())[0]
    d = int(live[-1]) if live.size else 0
    return 1 << max(0, (2 * d + 1)).bit_length()


def winding_numbers(b: np.ndarray, radius: float, n_start: int = N_START, n_cap: int = N_CAP):
    """Argument-principle counts for a batch of coefficient rows b (B, M+1).

    Trapezoidal rule for (1/2 pi i) contour integral of f'/f on |z| = radius.
    The first node count covers twice the effective degree of f on the contour;
    it is doubled per row until two successive estimates round to the same
    integer and both lie within AGREEMENT of it.

    Returns (counts, min_modulus, converged); counts is -1 where not converged.
    """
    b = np.atleast_2d(b)
    B = b.shape[0]
    counts = np.full(B, -1, dtype=np.int64)
    minmod = np.full(B, np.nan)
    converged = np.zeros(B, dtype=bool)
    active = np.arange(B)
    prev = None
    N = max(n_start, _start_nodes(b, radius))
    while active.size and N <= n_cap:
        f, g = circle_values(b[active], radius, N, derivative=True)
        absf = np.abs(f)
        with np.errstate(divide="ignore", invalid="ignore"):
            est = np.mean(g / f, axis=-1).real
        mm = absf.min(axis=-1)
        minmod[active] = mm
        rounded = np.round(est)
        good = np.isfinite(est) & (np.abs(est - rounded) < AGREEMENT)
        if prev is not None:
            prev_r = np.round(prev)
            ok = good & np.isfinite(prev) & (np.abs(prev - prev_r) < AGREEMENT) & (prev_r == rounded)
            done = active[ok]
            counts[done] = rounded[ok].astype(np.int64)
            converged[done] = True
            active = active[~ok]
            prev = est[~ok]
        else:
            prev = est
        N *= 2
    return counts, minmod, converged


def _count_at(b: np.ndarray, radius: float, scale: float):
    counts, minmod, conv = winding_numbers(b[None], radius)
    clear = minmod[0] > CONTOUR_CLEARANCE * scale
    return int(counts[0]), float(minmod[0]), bool(conv[0]) and clear


def count_zeros_in_disk(s: GafSample, radius: float, retries: int = 3, return_min: bool = False):
    """Number of zeros of the truncated f_L in |z| < radius by the argument principle.

    If f comes within the clearance of the contour, the radius is nudged by
    +-1e-6 (up to ``retries`` times).  Raises ZeroCountError on failure.
    """
    b = _one_variable(s)
    if radius > s.eval_radius[0] * (1 + 1e-14):
        raise ValueError("contour lies outside the certified radius")
    scale = (1 - radius**2) ** (-s.L[0] / 2)
    radii = [radius] + [radius + (-1) ** k * RADIUS_JITTER * (k // 2 + 1) for k in range(retries)]
    for rho in radii:
        rho = min(rho, float(s.eval_radius[0]))
        count, mm, ok = _count_at(b, rho, scale)
        if ok:
            return (count, mm) if return_min else count
    raise ZeroCountError(f"argument principle failed on |z| = {radius}")


def count_zeros_by_roots(s: GafSample, radius: float) -> int:
    return int(np.sum(np.abs(polynomial_roots(s)) < radius))


def _classify(count, minmod, tail_bound, kappa):
    guard = minmod > kappa * np.sqrt(tail_bound)
    out = np.where(count == 0, 0, 1)
    return np.where(guard, out, 2)


def hole_test(s: GafSample, r: float, kappa: float = KAPPA, margin: float = MARGIN) -> HoleOutcome:
    """Decide whether the zero set misses |z| < r, with a Rouche-style guard.

    The truncation error cannot change the winding number as long as
    min_{|z|=r} |f| exceeds kappa * sqrt(tail variance); otherwise UNCERTAIN.
    """
    if s.eval_radius[0] + 1e-12 < r + margin:
        raise ValueError("eval_radius must exceed r by the margin band")
    count, mm = count_zeros_in_disk(s, r, return_min=True)
    code = int(_classify(np.array(count), np.array(mm), s.tail_variance_bound, kappa))
    return (HoleOutcome.HOLE, HoleOutcome.NO_HOLE, HoleOutcome.UNCERTAIN)[code]


def hole_codes(b: np.ndarray, r: float, tail_bound: float, kappa: float = KAPPA, L: float = 1.0):
    """Vectorized hole test over rows of b: 0 hole, 1 no hole, 2 uncertain, 3 failed."""
    counts, minmod, conv = winding_numbers(b, r)
    scale = (1 - r**2) ** (-L / 2)
    ok = conv & (minmod > CONTOUR_CLEARANCE * scale)
    codes = np.full(b.shape[0], 3, dtype=np.int64)
    codes[ok] = _classify(counts[ok], minmod[ok], tail_bound, kappa)
    # rows that failed on the first contour get the single-sample retry path
    for i in np.nonzero(~ok)[0]:
        rows = b[i]
        for k in range(3):
            rho = r + (-1) ** k * RADIUS_JITTER * (k // 2 + 1)
            c, mm, good = _count_at(rows, rho, scale)
            if good:
                codes[i] = int(_classify(np.array(c), np.array(mm), tail_bound, kappa))
                break
    return codes, counts
