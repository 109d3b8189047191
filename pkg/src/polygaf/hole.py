"""Hole and large-deviation probabilities by plain Monte Carlo, and decay fits."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import partial

import numpy as np

from .geometry import as_intensity
from .results import wilson_interval
from .runner import DEFAULT_CHUNK, run_chunks
from .sampler import (
    DEFAULT_TOL,
    HOLE_TOL,
    BasisCoefficientTable,
    draw_coefficients,
    iter_coefficients,
    polar_grid_values,
    tail_variance_bound,
    truncation_degree,
)
from .zeros1d import KAPPA, MARGIN, hole_codes, winding_numbers

MAX_UNCERTAIN = 0.01


class HoleEstimateError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProbabilityEstimate:
    """Binomial estimate with a Wilson interval.

    ``excluded`` counts trials left out of both numerator and denominator
    (guard failures and contour failures); ``heuristic`` marks estimates
    without a certified event test.
    """

    L: tuple
    radius: float
    trials: int
    events: int
    used: int
    excluded: int
    probability: float
    ci_low: float
    ci_high: float
    heuristic: bool = False

    @property
    def excluded_fraction(self) -> float:
        return self.excluded / self.trials if self.trials else 0.0

    @property
    def log_probability(self) -> float:
        return float(np.log(self.probability)) if self.probability > 0 else float("-inf")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["L"] = list(self.L)
        d["excluded_fraction"] = self.excluded_fraction
        return d


def _estimate(L, radius, trials, events, excluded, heuristic=False) -> ProbabilityEstimate:
    used = trials - excluded
    if used <= 0:
        raise HoleEstimateError("every trial was excluded")
    lo, hi = wilson_interval(events, used)
    return ProbabilityEstimate(tuple(float(x) for x in L), float(radius), int(trials), int(events),
                               int(used), int(excluded), events / used, lo, hi, heuristic)


# ----------------------------------------------------------------------------
# n = 1 hole events


@dataclass(frozen=True)
class HoleSetup:
    L: float
    r: float
    box: int
    tail: float
    kappa: float

    @classmethod
    def build(cls, L: float, r: float, tol: float = HOLE_TOL, kappa: float = KAPPA, margin: float = MARGIN):
        R = r + margin
        box = truncation_degree([L], [R], tol)
        return cls(float(L), float(r), int(box[0]), tail_variance_bound([L], box, [R]), float(kappa))


def hole_chunk(setup: HoleSetup, seed: int, lo: int, hi: int) -> np.ndarray:
    """Outcome codes for trials lo..hi-1: 0 hole, 1 no hole, 2 uncertain, 3 contour failure."""
    table = BasisCoefficientTable.build(np.array([setup.L]), (setup.box,)).coefficients
    b = draw_coefficients(seed, np.arange(lo, hi), (setup.box,)) * table
    codes, _ = hole_codes(b, setup.r, setup.tail, setup.kappa, setup.L)
    return codes


def hole_probability_mc(L, r: float, trials: int, seed: int, tol: float = HOLE_TOL, kappa: float = KAPPA,
                        workers: int | None = 1, chunk: int = DEFAULT_CHUNK, max_uncertain: float = MAX_UNCERTAIN,
                        return_codes: bool = False):
    """P[no zero of f_L in |z| < r] for n = 1, from ``trials`` independent samples.

    Uncertain trials (Rouche guard failed) and contour failures are excluded
    from numerator and denominator and reported; more than ``max_uncertain``
    of them raises HoleEstimateError.
    """
    Lv = as_intensity(L)
    if Lv.size != 1:
        raise ValueError("hole_probability_mc is for n = 1; use hole_probability_grid")
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    setup = HoleSetup.build(float(Lv[0]), r, tol, kappa)
    codes = np.concatenate(run_chunks(partial(hole_chunk, setup, seed), trials, chunk, workers))
    counts = np.bincount(codes, minlength=4)
    est = _estimate(Lv, r, trials, int(counts[0]), int(counts[2] + counts[3]))
    if est.excluded_fraction > max_uncertain:
        raise HoleEstimateError(f"uncertain fraction {est.excluded_fraction:.4f} exceeds {max_uncertain}")
    return (est, codes) if return_codes else est


# ----------------------------------------------------------------------------
# n = 1 deviation events


@dataclass(frozen=True)
class CountSetup:
    L: float
    r: float
    box: int

    @classmethod
    def build(cls, L: float, r: float, tol: float = DEFAULT_TOL, margin: float = MARGIN):
        return cls(float(L), float(r), int(truncation_degree([L], [r + margin], tol)[0]))


def count_chunk(setup: CountSetup, seed: int, lo: int, hi: int) -> np.ndarray:
    """Zero counts in |z| < r for trials lo..hi-1 (-1 where the contour integral failed)."""
    table = BasisCoefficientTable.build(np.array([setup.L]), (setup.box,)).coefficients
    b = draw_coefficients(seed, np.arange(lo, hi), (setup.box,)) * table
    counts, _, conv = winding_numbers(b, setup.r)
    return np.where(conv, counts, -1)


def zero_counts(L: float, r: float, trials: int, seed: int, tol: float = DEFAULT_TOL,
                workers: int | None = 1, chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    setup = CountSetup.build(L, r, tol)
    return np.concatenate(run_chunks(partial(count_chunk, setup, seed), trials, chunk, workers))


def deviation_probability_mc(r: float, delta: float, L, trials: int, seed: int, tol: float = DEFAULT_TOL,
                             workers: int | None = 1, chunk: int = DEFAULT_CHUNK) -> ProbabilityEstimate:
    """P[| N(E(0,r)) / L - nu(E(0,r)) | > delta] for n = 1, N the zero count."""
    Lv = as_intensity(L)
    if Lv.size != 1:
        raise ValueError("deviation_probability_mc is for n = 1")
    counts = zero_counts(float(Lv[0]), r, trials, seed, tol, workers, chunk)
    ok = counts >= 0
    nu = r * r / (1 - r * r)
    events = int(np.sum(np.abs(counts[ok] / Lv[0] - nu) > delta))
    return _estimate(Lv, r, trials, events, int(np.sum(~ok)))


# ----------------------------------------------------------------------------
# n >= 2: grid heuristic


def grid_hole_decision(b: np.ndarray, L: np.ndarray, r, density: int) -> bool:
    """Heuristic hole test for n >= 2 on a polar grid over E(0, r).

    A zero inside a grid cell forces |f^| at the nearby nodes down to about
    (distance to the zero) x |grad f^|.  The event is declared "no hole" when
    some node has |f^| <= half the local cell diameter times the local
    gradient estimate (finite differences along every radial and angular axis);
    otherwise "hole".  Returns True for a hole.
    """
    n = b.ndim
    r = np.broadcast_to(np.atleast_1d(np.asarray(r, float)), (n,))
    radii = [np.linspace(0.0, r[j], density) for j in range(n)]
    n_ang = 4 * density
    f = polar_grid_values(b, radii, [n_ang] * n)
    scale = 1.0
    for j in range(n):
        shape = [1] * (2 * n)
        shape[j] = density
        scale = scale * ((1 - radii[j] ** 2) ** (L[j] / 2)).reshape(shape)
    fh = np.abs(f * scale)
    grad_sq = 0.0
    diam_sq = 0.0
    for j in range(n):
        dr = r[j] / (density - 1)
        dth = 2 * np.pi / n_ang
        shape = [1] * (2 * n)
        shape[j] = density
        rj = radii[j].reshape(shape)
        g_r = np.abs(np.gradient(fh, dr, axis=j))
        # angular axis is periodic: centred difference with wrap-around
        d_th = np.abs(np.roll(fh, -1, axis=n + j) - np.roll(fh, 1, axis=n + j)) / (2 * dth)
        with np.errstate(divide="ignore", invalid="ignore"):
            g_t = np.where(rj > 0, d_th / rj, 0.0)
        grad_sq = grad_sq + g_r**2 + g_t**2
        diam_sq = diam_sq + dr**2 + (np.maximum(rj, dr) * dth) ** 2
    return not bool(np.any(fh <= 0.5 * np.sqrt(diam_sq) * np.sqrt(grad_sq)))


def grid_chunk(L: np.ndarray, r, box: tuple, density: int, seed: int, lo: int, hi: int) -> np.ndarray:
    table = BasisCoefficientTable.build(L, box).coefficients
    return np.array([grid_hole_decision(ai * table, L, r, density)
                     for _, ai in iter_coefficients(seed, lo, hi, box)], dtype=np.int64)


def hole_probability_grid(L, r, trials: int, seed: int, grid_density: int = 12, tol: float = DEFAULT_TOL,
                          workers: int | None = 1, chunk: int = 200) -> ProbabilityEstimate:
    """Heuristic hole probability for n >= 2 (no certification; flagged as heuristic)."""
    Lv = as_intensity(L)
    if Lv.size < 2:
        raise ValueError("hole_probability_grid is for n >= 2; use hole_probability_mc")
    rv = np.broadcast_to(np.atleast_1d(np.asarray(r, float)), Lv.shape)
    box = truncation_degree(Lv, rv + MARGIN, tol)
    fn = partial(grid_chunk, Lv, tuple(rv), box, int(grid_density), seed)
    holes = np.concatenate(run_chunks(fn, trials, chunk, workers))
    return _estimate(Lv, float(rv.max()), trials, int(holes.sum()), 0, heuristic=True)


# ----------------------------------------------------------------------------
# decay fits


@dataclass(frozen=True)
class DecayFit:
    beta: float
    c: float
    residuals: tuple
    scale: str

    def to_dict(self) -> dict:
        return {"beta": self.beta, "c": self.c, "residuals": list(self.residuals), "scale": self.scale}


def decay_fit(pairs) -> DecayFit:
    """Least squares for log P = -c x^beta, i.e. log(-log P) = log c + beta log x.

    x = L for scalar intensities, x = (sum L)(prod L) for intensity vectors.
    Pairs with log P not finite and negative are dropped.
    """
    xs, ys = [], []
    vector = any(np.ndim(L) > 0 and np.size(L) > 1 for L, _ in pairs)
    for L, logp in pairs:
        if not np.isfinite(logp) or logp >= 0:
            continue
        Lv = np.atleast_1d(np.asarray(L, float))
        x = float(Lv.sum() * Lv.prod()) if vector else float(Lv[0])
        xs.append(np.log(x))
        ys.append(np.log(-logp))
    if len(xs) < 3:
        raise ValueError("decay_fit needs at least 3 usable points")
    X = np.column_stack([np.ones(len(xs)), xs])
    coef, *_ = np.linalg.lstsq(X, np.array(ys), rcond=None)
    resid = np.array(ys) - X @ coef
    return DecayFit(float(coef[1]), float(np.exp(coef[0])), tuple(float(v) for v in resid),
                    "sumL*prodL" if vector else "L")
