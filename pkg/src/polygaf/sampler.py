"""Truncated GAF realizations with a certified tail, and their evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .geometry import as_coords, as_intensity, check_dims
from .kernel import log_series_coefficients
from .rng import complex_normals

DEFAULT_TOL = 1e-18
HOLE_TOL = 1e-24
DEGREE_CAP = 5000
UNDERFLOW_LOG = -745.0
# coefficient counters pack each alpha_j into 16 bits of a 64-bit index
_INDEX_BITS = 16


class TruncationError(RuntimeError):
    pass


def basis_logsq(alpha, L) -> float:
    """log of prod_j Gamma(L_j + alpha_j) / (alpha_j! Gamma(L_j))."""
    L = as_intensity(L)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < 0):
        raise ValueError("multi-index entries must be non-negative")
    out = np.sum(gammaln(L + alpha) - gammaln(alpha + 1) - gammaln(L), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class BasisCoefficientTable:
    L: np.ndarray
    box: tuple
    logsq: np.ndarray

    @classmethod
    def build(cls, L, box) -> "BasisCoefficientTable":
        L = as_intensity(L)
        box = tuple(int(m) for m in np.broadcast_to(np.atleast_1d(box), L.shape))
        logsq = np.zeros(tuple(m + 1 for m in box))
        for j, (Lj, Mj) in enumerate(zip(L, box)):
            shape = [1] * L.size
            shape[j] = Mj + 1
            logsq = logsq + log_series_coefficients(Lj, Mj).reshape(shape)
        return cls(L, box, logsq)

    @cached_property
    def coefficients(self) -> np.ndarray:
        """c_alpha = exp(logsq / 2); entries whose square underflows are exactly 0."""
        c = np.exp(0.5 * self.logsq)
        c[self.logsq < UNDERFLOW_LOG] = 0.0
        return c


def _tail_terms(Lj: float, rj: float, cap: int) -> np.ndarray:
    """Terms c_k r^(2k) / K(r, r), k = 0..K, extended until negligible or K = cap + 1.

    Normalising by the kernel keeps every term in [0, 1] even when the
    unnormalised series overflows.
    """
    if rj == 0:
        return np.array([1.0])
    K = 64
    while True:
        logt = log_series_coefficients(Lj, K) + 2 * np.arange(K + 1) * np.log(rj)
        peak = int(np.argmax(logt))
        # beyond the peak the terms decrease geometrically
        if logt[-1] < logt[peak] - 120 and K > peak + 8 or K > cap:
            return np.exp(logt + Lj * np.log1p(-rj**2))
        K *= 2


def _suffix_tails(terms: np.ndarray) -> np.ndarray:
    """tails[M] = sum_{k > M} terms[k] summed from the small end."""
    rev = np.cumsum(terms[::-1])[::-1]
    return np.append(rev[1:], 0.0)


def tail_variance_bound(L, box, radius) -> float:
    """K_L(r, r) minus the box partial sum of its series at r = radius.

    Computed from directly summed one-variable tails, which avoids the
    cancellation of subtracting two large numbers.
    """
    L = as_intensity(L)
    box = np.broadcast_to(np.atleast_1d(box), L.shape)
    r = np.broadcast_to(np.atleast_1d(np.asarray(radius, float)), L.shape)
    log_k = 0.0
    log_keep = 0.0
    for Lj, Mj, rj in zip(L, box, r):
        terms = _tail_terms(Lj, rj, max(int(Mj) + 64, 64))
        kj = -Lj * np.log1p(-rj**2)
        tail = _suffix_tails(terms)[int(Mj)] if Mj < terms.size else 0.0
        log_k += kj
        log_keep += np.log1p(-min(tail, 1.0))
    return float(np.exp(log_k) * -np.expm1(log_keep))


def truncation_degree(L, radius, tol: float, cap: int = DEGREE_CAP) -> tuple:
    """Smallest per-coordinate box whose tail variance at ``radius`` is <= tol.

    For n > 1 the budget is split evenly: coordinate j gets tol / (n prod_{k!=j} K_k),
    which bounds the combined tail by tol.
    """
    L = as_intensity(L)
    r = np.broadcast_to(np.atleast_1d(np.asarray(radius, float)), L.shape)
    if np.any(r < 0) or np.any(r >= 1):
        raise ValueError("radius entries must lie in [0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = L.size
    log_kj = -L * np.log1p(-r**2)
    box = []
    for j in range(n):
        budget = tol / n * np.exp(-log_kj.sum())
        terms = _tail_terms(L[j], r[j], cap)
        tails = _suffix_tails(terms)
        ok = np.nonzero(tails <= budget)[0]
        if ok.size == 0 or ok[0] > cap:
            raise TruncationError(
                f"coordinate {j}: degree for tol={tol:g} at r={r[j]:g} exceeds cap {cap}"
            )
        box.append(int(ok[0]))
    return tuple(box)


def max_certified_radius(L, box, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Largest radius (same in every coordinate) with tail variance <= tol, by bisection."""
    lo, hi = 0.0, 1.0 - 1e-9
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if tail_variance_bound(L, box, mid) <= tol:
            lo = mid
        else:
            hi = mid
    return np.full(as_intensity(L).size, lo)


def coefficient_index(box) -> np.ndarray:
    """Box-independent counter for every alpha in the box (alpha_j packed in 16-bit fields)."""
    box = tuple(int(m) for m in box)
    if len(box) * _INDEX_BITS > 64 or max(box) >= 2**_INDEX_BITS:
        raise ValueError("box too large for the coefficient counter layout (n <= 4, degree < 65536)")
    idx = np.zeros(tuple(m + 1 for m in box), dtype=np.uint64)
    for j, m in enumerate(box):
        shape = [1] * len(box)
        shape[j] = m + 1
        idx = idx | (np.arange(m + 1, dtype=np.uint64) << np.uint64(_INDEX_BITS * j)).reshape(shape)
    return idx


def draw_coefficients(seed: int, trials, box) -> np.ndarray:
    """i.i.d. N_C(0,1) coefficients, shape (len(trials), *box+1).

    a_alpha depends only on (seed, trial, alpha): enlarging the box keeps the
    coefficients already drawn.
    """
    trials = np.atleast_1d(np.asarray(trials, dtype=np.uint64))
    idx = coefficient_index(box)
    return complex_normals(seed, trials.reshape((-1,) + (1,) * idx.ndim), idx[None])


def iter_coefficients(seed: int, lo: int, hi: int, box, max_elements: int = 1 << 22):
    """Yield (trial, coefficients) for trials lo..hi-1, drawing in memory-bounded batches."""
    size = int(np.prod([int(m) + 1 for m in np.atleast_1d(box)]))
    step = max(1, max_elements // size)
    for start in range(lo, hi, step):
        batch = draw_coefficients(seed, np.arange(start, min(hi, start + step)), box)
        for i, a in enumerate(batch):
            yield start + i, a


@dataclass(frozen=True, eq=False)
class GafSample:
    L: np.ndarray
    box: tuple
    coefficients: np.ndarray
    seed: int
    trial_index: int
    tail_variance_bound: float
    eval_radius: np.ndarray

    @property
    def n(self) -> int:
        return self.L.size

    @cached_property
    def table(self) -> BasisCoefficientTable:
        return BasisCoefficientTable.build(self.L, self.box)

    @cached_property
    def scaled(self) -> np.ndarray:
        """a_alpha c_alpha, the monomial coefficients of the truncated f_L."""
        return self.coefficients * self.table.coefficients

    def replace_coefficients(self, coefficients) -> "GafSample":
        """Same truncation metadata, different coefficient array (for fixtures)."""
        a = np.asarray(coefficients, dtype=complex)
        if a.shape != self.coefficients.shape:
            raise ValueError("coefficient array does not match the box")
        return GafSample(self.L, self.box, a, self.seed, self.trial_index, self.tail_variance_bound, self.eval_radius)


def draw_sample(L, M, seed: int, trial_index: int, eval_radius=None, tol: float = DEFAULT_TOL) -> GafSample:
    """One truncated realization on the box M.

    Without ``eval_radius`` the certified region is the largest radius at which
    the tail variance stays below ``tol``.
    """
    L = as_intensity(L)
    box = tuple(int(m) for m in np.broadcast_to(np.atleast_1d(M), L.shape))
    if eval_radius is None:
        r = max_certified_radius(L, box, tol)
    else:
        r = np.broadcast_to(np.atleast_1d(np.asarray(eval_radius, float)), L.shape).copy()
    a = draw_coefficients(seed, [trial_index], box)[0]
    return GafSample(L, box, a, int(seed), int(trial_index), tail_variance_bound(L, box, r), r)


def certified_sample(L, eval_radius, seed: int, trial_index: int, tol: float = DEFAULT_TOL) -> GafSample:
    """Draw a sample whose box is the certified truncation degree at eval_radius."""
    box = truncation_degree(L, eval_radius, tol)
    return draw_sample(L, box, seed, trial_index, eval_radius)


def constant_sample(L, eval_radius, a0: complex = 1.0) -> GafSample:
    """Deterministic sample with only the constant coefficient set."""
    L = as_intensity(L)
    box = (0,) * L.size
    r = np.broadcast_to(np.atleast_1d(np.asarray(eval_radius, float)), L.shape).copy()
    a = np.full((1,) * L.size, a0, dtype=complex)
    return GafSample(L, box, a, 0, 0, tail_variance_bound(L, box, r), r)


def horner(b: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Evaluate sum_alpha b_alpha z^alpha at points z of shape (..., n), nested Horner."""
    n = b.ndim
    lead = z.shape[:-1]
    pts = z.reshape(-1, n)
    acc = np.broadcast_to(b, (pts.shape[0],) + b.shape)
    for j in range(n):
        # acc has shape (P, M_j+1, ..., M_n+1); collapse axis 1 with z_j
        zj = pts[:, j].reshape((-1,) + (1,) * (acc.ndim - 2))
        out = acc[:, -1]
        for k in range(acc.shape[1] - 2, -1, -1):
            out = out * zj + acc[:, k]
        acc = out
    return acc.reshape(lead)


def evaluate(s: GafSample, z):
    z = as_coords(z)
    check_dims(z, s.n)
    if np.any(np.abs(z) > s.eval_radius * (1 + 1e-14)):
        raise ValueError("evaluation point lies outside the certified radius")
    out = horner(s.scaled, z)
    return out.item() if out.ndim == 0 else out


def log_normalized_sq(s: GafSample, z):
    """log|f(z)|^2 + sum_j L_j log(1 - |z_j|^2); -inf where f vanishes exactly."""
    z = as_coords(z)
    f = np.asarray(evaluate(s, z))
    with np.errstate(divide="ignore"):
        out = np.log(np.abs(f) ** 2) + np.sum(s.L * np.log1p(-np.abs(z) ** 2), axis=-1)
    return out.item() if np.ndim(out) == 0 else out


def fold_coefficients(b: np.ndarray, sizes, axes) -> np.ndarray:
    """Alias coefficients modulo ``sizes`` along ``axes`` (for FFT evaluation on circles)."""
    for ax, N in zip(axes, sizes):
        ax = ax % b.ndim
        m = b.shape[ax]
        pad = (-m) % N
        if pad:
            widths = [(0, 0)] * b.ndim
            widths[ax] = (0, pad)
            b = np.pad(b, widths)
        shape = b.shape[:ax] + (b.shape[ax] // N, N) + b.shape[ax + 1 :]
        b = b.reshape(shape).sum(axis=ax)
    return b


def circle_values(b: np.ndarray, radius: float, n_nodes: int, offset: float = 0.0, derivative: bool = False):
    """f on the circle |z| = radius for a batch of one-variable coefficient rows.

    b has shape (..., M+1).  Nodes are radius * exp(i (2 pi j / n_nodes + offset)).
    With ``derivative`` also returns z f'(z) at the same nodes.
    """
    k = np.arange(b.shape[-1])
    with np.errstate(under="ignore"):
        scale = radius**k * np.exp(1j * offset * k)
    bs = b * scale
    f = n_nodes * np.fft.ifft(fold_coefficients(bs, [n_nodes], [-1]), axis=-1)
    if not derivative:
        return f
    g = n_nodes * np.fft.ifft(fold_coefficients(bs * k, [n_nodes], [-1]), axis=-1)
    return f, g


def polar_grid_values(b: np.ndarray, radii: list, n_angles: list, offsets=None) -> np.ndarray:
    """f on a tensor polar grid, coordinate by coordinate.

    b: coefficient array with n axes.  radii[j]: 1-d radial nodes for coordinate j;
    n_angles[j]: number of equispaced angles, offset by offsets[j].  Returns shape
    (len(radii[0]), ..., len(radii[n-1]), n_angles[0], ..., n_angles[n-1]).

    Writing k = m + q N, the m-th angular mode on radius r is
    r^m sum_q b_{m+qN} (r^N)^q, a small matrix product per coordinate; the
    angular values then come from one FFT.
    """
    n = b.ndim
    offsets = [0.0] * n if offsets is None else list(offsets)
    out = b
    for j in range(n):
        # layout so far: (r_0, t_0, ..., r_{j-1}, t_{j-1}, alpha_j, ..., alpha_{n-1})
        out = np.moveaxis(out, 2 * j, -1)
        N = int(n_angles[j])
        Q = -(-out.shape[-1] // N)
        pad = Q * N - out.shape[-1]
        if pad:
            out = np.concatenate([out, np.zeros(out.shape[:-1] + (pad,), dtype=complex)], axis=-1)
        r = np.asarray(radii[j], dtype=float)
        m = np.arange(N)
        with np.errstate(under="ignore"):
            powers = (r[None, :] ** N * np.exp(1j * offsets[j] * N)) ** np.arange(Q)[:, None]
            head = r[:, None] ** m * np.exp(1j * offsets[j] * m)
        c = np.swapaxes(out.reshape(out.shape[:-1] + (Q, N)), -1, -2)
        out = np.swapaxes(c @ powers, -1, -2) * head
        out = np.moveaxis(out, [-2, -1], [2 * j, 2 * j + 1])
    angle_axes = list(range(1, 2 * n, 2))
    out = np.prod(n_angles) * np.fft.ifftn(out, axes=angle_axes)
    return np.transpose(out, list(range(0, 2 * n, 2)) + angle_axes)


def radial_grid_batch(b: np.ndarray, radii, n_angles: int, offset: float = 0.0) -> np.ndarray:
    """One-variable rows b (B, M+1) on the polar grid radii x angles: shape (B, R, N).

    The result is a transposed view of an array laid out as (B, N, R).
    """
    N = int(n_angles)
    B, m1 = b.shape
    Q = -(-m1 // N)
    if Q * N != m1:
        b = np.concatenate([b, np.zeros((B, Q * N - m1), dtype=complex)], axis=-1)
    r = np.asarray(radii, dtype=float)
    m = np.arange(N)
    with np.errstate(under="ignore"):
        powers = (r[None, :] ** N * np.exp(1j * offset * N)) ** np.arange(Q)[:, None]
        head = (r[:, None] ** m * np.exp(1j * offset * m)).T
    c = b.reshape(B, Q, N).transpose(0, 2, 1).reshape(B * N, Q)
    modes = (c @ powers).reshape(B, N, r.size) * head
    return np.swapaxes(N * np.fft.ifft(modes, axis=1), 1, 2)
