"""Experiment drivers shared by the command line and the acceptance suite.

Every driver is a pure function of its configuration and seed; trials run in
fixed chunks through ``runner.run_chunks`` so results do not depend on the
number of worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from . import forms
from .geometry import MoebiusAutomorphism, as_intensity, pseudo_distance
from .hole import zero_counts
from .kernel import covariance, covariance_series, dilog, normalized_kernel_sq
from .quadrature import PolarGrid
from .results import ExperimentResult, reduce_results
from .runner import DEFAULT_CHUNK, run_chunks
from .sampler import (
    DEFAULT_TOL,
    BasisCoefficientTable,
    GafSample,
    draw_coefficients,
    iter_coefficients,
    tail_variance_bound,
    truncation_degree,
)
from .stats import (
    bipotential_variance,
    clt_diagnostic,
    expected_statistic,
    mean_value_sides,
    predicted_variance,
    statistic_zeros,
    stokes_batch_1d,
    stokes_fluctuation,
)
from .zeros1d import MARGIN


@dataclass(frozen=True)
class FormSpec:
    """Picklable recipe for a product test form: kind in {"smooth", "polynomial"}."""

    kind: str
    radius: tuple

    @property
    def n(self) -> int:
        return len(self.radius)

    def build(self) -> forms.TestForm:
        if self.kind == "smooth":
            return forms.smooth_bump(self.radius, self.n)
        if self.kind == "polynomial":
            return forms.polynomial_bump(self.radius, self.n)
        raise ValueError(f"unknown test form {self.kind!r}")


def resolve_box(L, radius, tol: float, relative: bool = False) -> tuple:
    """Truncation box at ``radius``; with ``relative`` the tolerance is tol * K_L(r, r)."""
    L = as_intensity(L)
    r = np.broadcast_to(np.atleast_1d(np.asarray(radius, float)), L.shape)
    if relative:
        tol = tol * float(np.exp(-np.sum(L * np.log1p(-r**2))))
    return truncation_degree(L, r, tol)


@dataclass(frozen=True)
class StokesSetup:
    L: tuple
    form: FormSpec
    box: tuple
    eval_radius: tuple
    n_radial: int
    n_angular: int

    @classmethod
    def build(cls, L, form: FormSpec, grid, tol: float = DEFAULT_TOL, relative: bool = False, margin: float = MARGIN):
        L = as_intensity(L)
        R = np.asarray(form.radius) + margin
        box = resolve_box(L, R, tol, relative)
        return cls(tuple(float(x) for x in L), form, box, tuple(float(x) for x in R), int(grid[0]), int(grid[1]))

    @property
    def grid(self) -> PolarGrid:
        return PolarGrid(self.form.radius, self.n_radial, self.n_angular)


def stokes_chunk(setup: StokesSetup, seed: int, lo: int, hi: int) -> np.ndarray:
    """Stokes fluctuations I - E[I] for trials lo..hi-1."""
    L = np.array(setup.L)
    form = setup.form.build()
    table = BasisCoefficientTable.build(L, setup.box).coefficients
    if L.size == 1:
        a = draw_coefficients(seed, np.arange(lo, hi), setup.box)
        return stokes_batch_1d(a * table, float(L[0]), form, setup.grid)
    tail = tail_variance_bound(L, setup.box, setup.eval_radius)
    out = np.empty(hi - lo)
    for trial, ai in iter_coefficients(seed, lo, hi, setup.box):
        s = GafSample(L, setup.box, ai, seed, trial, tail, np.array(setup.eval_radius))
        out[trial - lo] = stokes_fluctuation(s, form, setup.grid)
    return out


def stokes_values(setup: StokesSetup, trials: int, seed: int, workers=1, chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    return np.concatenate(run_chunks(partial(stokes_chunk, setup, seed), trials, chunk, workers))


def _moments(values, chunk: int, **diag) -> ExperimentResult:
    parts = [ExperimentResult.from_values(values[i : i + chunk]) for i in range(0, len(values), chunk)]
    res = reduce_results(parts)
    return ExperimentResult(res.trials, res.mean, res.m2, dict(diag))


# ----------------------------------------------------------------------------


def intensity_counts(L: float, r: float, trials: int, seed: int, workers=1, chunk: int = DEFAULT_CHUNK) -> dict:
    """Mean zero count in |z| < r (n = 1) against L r^2 / (1 - r^2)."""
    counts = zero_counts(L, r, trials, seed, DEFAULT_TOL, workers, chunk)
    ok = counts >= 0
    res = _moments(counts[ok].astype(float), chunk, failed=int(np.sum(~ok)))
    expected = L * r * r / (1 - r * r)
    return {
        "kind": "zero-count",
        "expected": expected,
        "mean": res.mean,
        "standard_error": res.standard_error,
        "z_score": (res.mean - expected) / res.standard_error,
        "trials": res.trials,
        "failed": int(np.sum(~ok)),
    }


def intensity_stokes(setup: StokesSetup, trials: int, seed: int, workers=1, chunk: int = DEFAULT_CHUNK) -> dict:
    """Monte Carlo mean of the Stokes statistic against its expected value."""
    form = setup.form.build()
    e = expected_statistic(form, setup.L)
    fl = stokes_values(setup, trials, seed, workers, chunk)
    res = _moments(e + fl, chunk)
    return {
        "kind": "stokes",
        "expected": e,
        "mean": res.mean,
        "standard_error": res.standard_error,
        "z_score": (res.mean - e) / res.standard_error,
        "trials": res.trials,
    }


def cross_route_chunk(setup: StokesSetup, seed: int, lo: int, hi: int) -> np.ndarray:
    """(stokes, zeros) statistic pairs for trials lo..hi-1 (n = 1)."""
    L = np.array(setup.L)
    form = setup.form.build()
    e = expected_statistic(form, L)
    table = BasisCoefficientTable.build(L, setup.box).coefficients
    a = draw_coefficients(seed, np.arange(lo, hi), setup.box)
    st = e + stokes_batch_1d(a * table, float(L[0]), form, setup.grid)
    tail = tail_variance_bound(L, setup.box, setup.eval_radius)
    zs = np.empty(hi - lo)
    for i, ai in enumerate(a):
        s = GafSample(L, setup.box, ai, seed, lo + i, tail, np.array(setup.eval_radius))
        zs[i] = statistic_zeros(s, form)
    return np.column_stack([st, zs])


def cross_route(setup: StokesSetup, trials: int, seed: int, workers=1, chunk: int = 100) -> np.ndarray:
    return np.concatenate(run_chunks(partial(cross_route_chunk, setup, seed), trials, chunk, workers))


def variance_chain(setup: StokesSetup, trials: int, seed: int, workers=1, chunk: int = DEFAULT_CHUNK,
                   n_radial: int = 160, m_terms: int = 32) -> tuple:
    """MC variance of the Stokes statistic, bipotential and predicted variances."""
    form = setup.form.build()
    fl = stokes_values(setup, trials, seed, workers, chunk)
    res = _moments(fl, chunk)
    bip = bipotential_variance(form, setup.L, n_radial=n_radial, m_terms=m_terms)
    pred = predicted_variance(form, setup.L)
    summary = {
        "trials": res.trials,
        "mc_variance": res.variance,
        "mc_variance_se": res.variance_standard_error,
        "mc_mean_fluctuation": res.mean,
        "bipotential_variance": bip,
        "predicted_variance": pred,
        "mc_over_bipotential": res.variance / bip,
        "bipotential_over_predicted": bip / pred,
    }
    return summary, fl


def clt_run(setup: StokesSetup, trials: int, seed: int, workers=1, chunk: int = DEFAULT_CHUNK,
            n_radial: int = 160, m_terms: int = 32) -> tuple:
    """Fluctuations scaled by the bipotential standard deviation, with a KS test."""
    form = setup.form.build()
    bip = bipotential_variance(form, setup.L, n_radial=n_radial, m_terms=m_terms)
    fl = stokes_values(setup, trials, seed, workers, chunk)
    z = fl / np.sqrt(bip)
    d, p = clt_diagnostic(z)
    summary = {
        "trials": trials,
        "bipotential_variance": bip,
        "ks_distance": d,
        "ks_pvalue": p,
        "normalized_mean": float(np.mean(z)),
        "normalized_variance": float(np.var(z, ddof=1)),
    }
    return summary, z


def deviation_curve(r: float, delta: float, Ls, trials: int, seed: int, workers=1, chunk: int = DEFAULT_CHUNK):
    from .hole import deviation_probability_mc

    return [deviation_probability_mc(r, delta, L, trials, seed, workers=workers, chunk=chunk) for L in Ls]


def hole_curve(r: float, Ls, trials: int, seed: int, workers=1, chunk: int = DEFAULT_CHUNK, kappa: float | None = None):
    from .hole import hole_probability_mc
    from .zeros1d import KAPPA

    return [hole_probability_mc(L, r, trials, seed, kappa=KAPPA if kappa is None else kappa,
                                workers=workers, chunk=chunk) for L in Ls]


def mean_value_chunk(L: tuple, s_radius: tuple, center: tuple, box: tuple, eval_radius: tuple,
                     seed: int, lo: int, hi: int) -> np.ndarray:
    """(lhs, rhs, err) of the mean-value inequality for trials lo..hi-1."""
    Lv = np.array(L)
    tail = tail_variance_bound(Lv, box, eval_radius)
    out = np.empty((hi - lo, 3))
    for trial, ai in iter_coefficients(seed, lo, hi, box):
        s = GafSample(Lv, box, ai, seed, trial, tail, np.array(eval_radius))
        out[trial - lo] = mean_value_sides(s, np.array(center, dtype=complex), np.array(s_radius))
    return out


def mean_value_sweep(L, s_radius, trials: int, seed: int, center=None, tol: float = DEFAULT_TOL,
                     workers=1, chunk: int = 100) -> np.ndarray:
    Lv = as_intensity(L)
    sr = np.broadcast_to(np.atleast_1d(np.asarray(s_radius, float)), Lv.shape)
    c = np.zeros(Lv.size, dtype=complex) if center is None else np.asarray(center, dtype=complex)
    far = (np.abs(c) + sr) / (1 + np.abs(c) * sr) + MARGIN
    box = truncation_degree(Lv, far, tol)
    fn = partial(mean_value_chunk, tuple(Lv), tuple(sr), tuple(c), box, tuple(far), seed)
    return np.concatenate(run_chunks(fn, trials, chunk, workers))


# ----------------------------------------------------------------------------
# kernel identities


def kernel_identities(pairs: int, seed: int, max_modulus: float = 0.9, L_range=(0.5, 5.0)) -> list:
    """Residuals of the closed-form kernel identities on random (z, w, L), n in {1, 2, 3}.

    Rows: (n, series_rel_err, product_rel_err, moebius_rel_err).  Summing the
    series at x = z conj(w) loses about ((1+|x|)/(1-|x|))^L_j ulps per coordinate
    to cancellation, which bounds the useful L range for a 1e-10 comparison.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(pairs):
        n = 1 + i % 3
        L = rng.uniform(*L_range, size=n)
        z = _random_points(rng, n, max_modulus)
        w = _random_points(rng, n, max_modulus)
        deg = truncation_degree(L, np.maximum(np.abs(z), np.abs(w)), 1e-22)
        k = covariance(z, w, L)
        ks = covariance_series(z, w, L, deg)
        t2 = normalized_kernel_sq(z, w, L)
        prod = float(np.prod((1 - pseudo_distance(z, w) ** 2) ** L))
        moved = MoebiusAutomorphism(w)(z)
        t2m = normalized_kernel_sq(moved, np.zeros(n), L)
        rows.append((n, abs(ks - k) / abs(k), abs(t2 - prod) / prod, abs(t2 - t2m) / t2))
    return rows


def dilog_bounds(points: int = 10_000) -> float:
    """min over x in (0, 1] of min(Li2(x) - x, 2x - Li2(x)); non-negative when the bounds hold."""
    x = np.linspace(0.0, 1.0, points + 1)[1:]
    li = dilog(x)
    return float(min(np.min(li - x), np.min(2 * x - li)))


def _random_points(rng, n: int, max_modulus: float) -> np.ndarray:
    rad = max_modulus * np.sqrt(rng.uniform(size=n))
    return rad * np.exp(2j * np.pi * rng.uniform(size=n))
