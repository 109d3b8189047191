"""Linear statistics of the zero set and their variance oracles."""

from __future__ import annotations

import numpy as np
from scipy import stats as sps

from .forms import TestForm, dphi, dphi_radial
from .geometry import MoebiusAutomorphism, PseudoHyperbolicPolydisk, as_coords, as_intensity, nu_volume
from .kernel import log_covariance
from .quadrature import PolarGrid, QuadratureError, quadrature, radial_rule
from .sampler import GafSample, evaluate, horner, polar_grid_values, radial_grid_batch
from .zeros1d import polynomial_roots

# log-singularity guard: nodes where |f|^2/K falls below this are jittered
NODE_CLEARANCE = 1e-24
# default Stokes grids (radial GL nodes, angles) per dimension
STOKES_GRID = {1: (128, 128), 2: (32, 48), 3: (12, 16)}


def zeta_constant(s: int) -> float:
    """Riemann zeta at an integer s >= 2: partial sum plus Euler-Maclaurin tail."""
    if s < 2 or int(s) != s:
        raise ValueError("zeta_constant needs an integer s >= 2")
    N = 32
    head = np.sum(1.0 / np.arange(1, N, dtype=float) ** s)
    # tail sum_{m >= N} m^-s
    tail = N ** (1 - s) / (s - 1) + 0.5 * N**-s
    # Bernoulli corrections B_2k / (2k)! * (s)_(2k-1) N^(-s-2k+1)
    bern = [1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66]
    rising = float(s)
    fact = 2.0
    for k, B in enumerate(bern, start=1):
        tail += B / fact * rising * N ** (-s - 2 * k + 1)
        rising *= (s + 2 * k - 1) * (s + 2 * k)
        fact *= (2 * k + 1) * (2 * k + 2)
    return float(head + tail)


def epsilon_mean_value(t):
    """((1+u) log(1+u) - u) / u with u = t^2 / (1 - t^2)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t >= 1):
        raise ValueError("t must lie in (0, 1)")
    u = t**2 / (1 - t**2)
    small = u < 1e-3
    us = np.where(small, u, 0.0)
    # alternating series sum_{k>=2} (-1)^k u^(k-1) / (k (k-1))
    series = us / 2 - us**2 / 6 + us**3 / 12 - us**4 / 20 + us**5 / 30
    ul = np.where(small, 1.0, u)
    closed = ((1 + ul) * np.log1p(ul) - ul) / ul
    out = np.where(small, series, closed)
    return float(out) if out.ndim == 0 else out


def _integrate_form(form: TestForm, fn_radial, fn_points, rtol=1e-10):
    if form.polyradial:
        return quadrature(fn_radial, form.support, scheme="radial", rtol=rtol, n_radial=16)
    return quadrature(fn_points, form.support, scheme="polar", rtol=rtol, n_radial=16, n_angular=16)


def integrate_psi(form: TestForm) -> float:
    return _integrate_form(
        form,
        lambda t: form.psi(t.astype(complex)),
        form.psi,
    )


def expected_statistic(form: TestForm, L) -> float:
    """(sum_j L_j) * integral psi dnu."""
    L = as_intensity(L)
    return float(L.sum() * integrate_psi(form))


def dphi_sq_integral(form: TestForm) -> float:
    return _integrate_form(
        form,
        lambda t: dphi_radial(form, t) ** 2,
        lambda z: dphi(form, z) ** 2,
    )


def predicted_variance(form: TestForm, L) -> float:
    """Leading-order variance zeta(n+2) / prod L_j * integral D(phi)^2 dnu."""
    L = as_intensity(L)
    return zeta_constant(L.size + 2) / float(np.prod(L)) * dphi_sq_integral(form)


# ----------------------------------------------------------------------------
# the statistic by Stokes' theorem


def stokes_grid(form: TestForm, n_radial=None, n_angular=None) -> PolarGrid:
    nr, na = STOKES_GRID.get(form.n, (8, 8))
    return PolarGrid(form.support, n_radial or nr, n_angular or na)


def _grid_dphi_weights(form: TestForm, grid: PolarGrid):
    """D(phi) times nu-weights on the polar grid, shape (Nr,)*n + (Na,)*n."""
    n = form.n
    ts, ws = zip(*(grid.radial(j) for j in range(n)))
    tmesh = np.stack(np.meshgrid(*ts, indexing="ij"), axis=-1)
    wr = np.prod(np.stack(np.meshgrid(*ws, indexing="ij"), axis=-1), axis=-1) / grid.n_angular**n
    if form.polyradial:
        d = dphi_radial(form, tmesh)
        return (d * wr).reshape(wr.shape + (1,) * n)
    angles = [grid.angles(j) for j in range(n)]
    shape = wr.shape + (grid.n_angular,) * n
    z = np.empty(shape + (n,), dtype=complex)
    for j in range(n):
        rs = [1] * (2 * n)
        rs[j] = ts[j].size
        as_ = [1] * (2 * n)
        as_[n + j] = angles[j].size
        z[..., j] = ts[j].reshape(rs) * np.exp(1j * angles[j]).reshape(as_)
    return dphi(form, z) * wr.reshape(wr.shape + (1,) * n)


def _log_kernel_diag(L, grid: PolarGrid):
    """sum_j L_j log(1 - t_j^2) on the radial mesh, broadcastable to the full grid."""
    n = L.size
    out = 0.0
    for j in range(n):
        t, _ = grid.radial(j)
        shape = [1] * (2 * n)
        shape[j] = t.size
        out = out + L[j] * np.log1p(-(t**2)).reshape(shape)
    return out


def stokes_fluctuation(s: GafSample, form: TestForm, grid: PolarGrid | None = None, _weights=None) -> float:
    """integral of log|f^|^2 D(phi) dnu over the support of psi."""
    grid = grid or stokes_grid(form)
    if np.any(np.asarray(grid.radii) > s.eval_radius * (1 + 1e-14)):
        raise ValueError("support of psi exceeds the certified radius of the sample")
    dw = _weights if _weights is not None else _grid_dphi_weights(form, grid)
    logk = _log_kernel_diag(s.L, grid)
    radii = [grid.radial(j)[0] for j in range(s.n)]
    offsets = [0.0] * s.n
    for attempt in range(4):
        f = polar_grid_values(s.scaled, radii, [grid.n_angular] * s.n, offsets)
        with np.errstate(divide="ignore", under="ignore"):
            lf = np.log(np.abs(f) ** 2) + logk
        if np.all(lf > np.log(NODE_CLEARANCE)):
            break
        # a node sits on (or next to) a zero: rotate the angular grid slightly
        offsets = [o + np.pi * (np.sqrt(2) - 1) / grid.n_angular for o in offsets]
    lf = np.maximum(lf, np.log(NODE_CLEARANCE))
    return float(np.sum(lf * dw))


def statistic_stokes(s: GafSample, form: TestForm, L_expected: float | None = None, grid=None) -> float:
    """E[I_L(psi)] + integral log|f^|^2 D(phi) dnu."""
    e = expected_statistic(form, s.L) if L_expected is None else L_expected
    return e + stokes_fluctuation(s, form, grid)


def stokes_batch_1d(b: np.ndarray, L: float, form: TestForm, grid: PolarGrid | None = None,
                    batch: int = 128) -> np.ndarray:
    """Stokes fluctuation for many one-variable coefficient rows b (B, M+1) at once."""
    grid = grid or stokes_grid(form)
    dw = _grid_dphi_weights(form, grid)
    t, _ = grid.radial(0)
    N = grid.n_angular
    logk = L * np.log1p(-(t**2))[:, None]
    floor = np.log(NODE_CLEARANCE)
    out = np.empty(b.shape[0])
    for lo in range(0, b.shape[0], batch):
        offset = 0.0
        todo = np.arange(lo, min(lo + batch, b.shape[0]))
        for attempt in range(4):
            f = radial_grid_batch(b[todo], t, N, offset)
            with np.errstate(divide="ignore", under="ignore"):
                lf = np.log(f.real**2 + f.imag**2) + logk
            clear = np.all(lf > floor, axis=(1, 2))
            if attempt == 3:
                clear[:] = True
            out[todo[clear]] = np.sum(np.maximum(lf[clear], floor) * dw, axis=(1, 2))
            todo = todo[~clear]
            if todo.size == 0:
                break
            # a node sits on (or next to) a zero: rotate the angular grid slightly
            offset += np.pi * (np.sqrt(2) - 1) / N
    return out


# ----------------------------------------------------------------------------
# the statistic by summing over zeros (n = 1)


def statistic_zeros(s: GafSample, form: TestForm, roots=None) -> float:
    """sum of psi over the zeros of f_L (n = 1)."""
    if s.n != 1 or form.n != 1:
        raise ValueError("statistic_zeros is defined for n = 1")
    if form.support[0] > s.eval_radius[0] * (1 + 1e-14):
        raise ValueError("support of psi exceeds the certified radius of the sample")
    roots = polynomial_roots(s) if roots is None else roots
    inside = roots[np.abs(roots) < form.support[0]]
    if inside.size == 0:
        return 0.0
    return float(np.sum(form.psi(inside[:, None])))


# ----------------------------------------------------------------------------
# variance oracles


def _angular_power_means(t: np.ndarray, s: np.ndarray, mL: float, n_delta: int) -> np.ndarray:
    """(1/2pi) integral over delta of q(t, s, delta)^mL, q = (1-t^2)(1-s^2)/|1 - t s e^{i delta}|^2."""
    # q is even in delta: trapezoid on [0, pi] with end weights 1/2
    d = np.linspace(0.0, np.pi, n_delta // 2 + 1)
    w = np.full(d.size, 2.0)
    w[0] = w[-1] = 1.0
    w /= n_delta
    ts = t[:, None] * s[None, :]
    base = np.log1p(-(t**2))[:, None] + np.log1p(-(s**2))[None, :]
    out = np.zeros(ts.shape)
    for di, wi in zip(d, w):
        logq = base - np.log1p(ts * ts - 2 * ts * np.cos(di))
        out += wi * np.exp(mL * logq)
    return out


def _delta_nodes(mL: float, R: float) -> int:
    # angular peak width ~ (1 - R^2) / (R sqrt(mL)); keep >= 1.5 nodes per width
    sigma = (1 - R * R) / (max(R, 1e-3) * np.sqrt(mL))
    n = int(np.ceil(2 * np.pi * 1.5 / sigma))
    return max(64, 1 << (n - 1).bit_length())


def _series_tail(L: np.ndarray, m_from: int) -> float:
    """sum_{m > m_from} 1 / (m^2 prod_j (m L_j - 1))."""
    m = np.arange(m_from + 1, m_from + 200_001, dtype=float)
    head = np.sum(1.0 / (m**2 * np.prod(m[:, None] * L[None, :] - 1, axis=1)))
    last = m[-1]
    n = L.size
    return float(head + 1.0 / ((n + 1) * last ** (n + 1) * np.prod(L)))


def bipotential_variance(form: TestForm, L, n_radial: int = 160, m_terms: int = 32, return_terms: bool = False,
                         rtol: float = 1e-4, m_max: int = 4096):
    """Exact variance double integral of rho_L(z,w) D(phi)(z) D(phi)(w) dnu dnu.

    Polyradial forms: rho_L = sum_m |theta_L|^(2m) / m^2 is integrated term by
    term.  |theta_L|^(2m) factors over coordinates, its angular average is a
    one-dimensional periodic trapezoid, and the remaining radial double
    integral is a Gauss-Legendre tensor contraction.

    For large m the m-th term approaches a_m = integral D(phi)^2 dnu / (m^2 prod (m L_j - 1))
    from below, with the ratio term_m / a_m increasing in m.  The tail beyond
    the last term is therefore bracketed by [ratio, 1] times sum a_m; at least
    ``m_terms`` terms are summed and more are added until the bracket is below
    rtol * total.  The midpoint of the bracket is used.
    Other forms fall back to bipotential_variance_direct.
    """
    L = as_intensity(L)
    if L.size != form.n:
        raise ValueError("dimension mismatch")
    if not form.polyradial:
        return bipotential_variance_direct(form, L)
    n = form.n
    rules = [radial_rule(form.support[j], n_radial) for j in range(n)]
    ts = [r[0] for r in rules]
    mesh = np.stack(np.meshgrid(*ts, indexing="ij"), axis=-1)
    wmesh = np.prod(np.stack(np.meshgrid(*[r[1] for r in rules], indexing="ij"), axis=-1), axis=-1)
    dw = dphi_radial(form, mesh) * wmesh
    d2 = dphi_sq_integral(form)
    letters = "abcdefgh"
    left = letters[:n]
    right = letters[n : 2 * n]
    spec = ",".join([left] + [left[j] + right[j] for j in range(n)] + [right]) + "->"
    terms = []
    m = 0
    while True:
        m += 1
        mats = []
        cache = {}
        for j in range(n):
            key = (L[j], form.support[j])
            if key not in cache:
                nd = _delta_nodes(m * L[j], form.support[j])
                cache[key] = _angular_power_means(ts[j], ts[j], m * L[j], nd)
            mats.append(cache[key])
        terms.append(np.einsum(spec, dw, *mats, dw, optimize=True) / m**2)
        if m < m_terms:
            continue
        asym_tail = d2 * _series_tail(L, m)
        ratio = min(max(terms[-1] * m**2 * np.prod(m * L - 1) / d2, 0.0), 1.0) if d2 > 0 else 1.0
        head = float(np.sum(terms))
        bracket = (1 - ratio) * asym_tail
        if bracket <= rtol * abs(head) or m >= m_max or d2 == 0:
            break
    tail = (1 + ratio) / 2 * asym_tail
    total = head + tail
    if return_terms:
        return total, np.array(terms), tail
    return total


def bipotential_variance_direct(form: TestForm, L, n_radial: int = 48, n_angular: int = 48, chunk: int = 512) -> float:
    """Brute-force tensor quadrature of log_covariance(z,w) D(phi)(z) D(phi)(w) over support^2.

    Independent of the series route; only practical for n = 1 and moderate L.
    """
    L = as_intensity(L)
    grid = PolarGrid(form.support, n_radial, n_angular, offsets=(0.0,) * form.n)
    z, w = grid.points()
    d = dphi(form, z) * w
    keep = d != 0
    z, d = z[keep], d[keep]
    total = 0.0
    for i in range(0, z.shape[0], chunk):
        rho = log_covariance(z[i : i + chunk, None, :], z[None, :, :], L)
        total += float(d[i : i + chunk] @ rho @ d)
    return total


# ----------------------------------------------------------------------------
# mean-value inequality


def _log_distance_average(b: np.ndarray, s: float) -> np.ndarray:
    """Exact nu-average of log|u - b|^2 over the disk |u| < s, for each b.

    The angular mean at radius t is 2 log max(t, |b|); the radial integral of
    log(v) / (1 - v)^2 in v = t^2 has the primitive v log v / (1 - v) + log(1 - v).
    """
    m = np.abs(np.asarray(b, dtype=complex))
    S = s * s
    inner = np.minimum(m, s) ** 2
    part = 2 * np.log(np.maximum(m, 1e-300)) * inner / (1 - inner)

    def prim(v):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(v > 0, v * np.log(v) / (1 - v), 0.0) + np.log1p(-v)

    outer = np.where(m < s, prim(S) - prim(np.minimum(m, s) ** 2), 0.0)
    return (part + outer) / (S / (1 - S))


def _disk_average(s: GafSample, center, radii, n_radial: int, n_angular: int, moved_zeros=None) -> float:
    """(1/nu(E)) integral over E(center, radii) of log|f^|^2 dnu, polar rule in the moved variable.

    For n = 1, ``moved_zeros`` (zeros of f mapped by the automorphism taking
    ``center`` to 0) have their log singularities subtracted from the integrand
    and added back through their exact disk averages.
    """
    n = s.n
    grid = PolarGrid(tuple(radii), n_radial, n_angular)
    vol = nu_volume(PseudoHyperbolicPolydisk(np.zeros(n), radii))
    center = as_coords(center)
    if n == 1 and moved_zeros is not None and len(moved_zeros):
        u, w = grid.points()
        u = u[:, 0]
        z = MoebiusAutomorphism(center).inverse(u[:, None])
        with np.errstate(divide="ignore"):
            lf = np.log(np.abs(horner(s.scaled, z)) ** 2) + s.L[0] * np.log1p(-np.abs(z[:, 0]) ** 2)
            lf -= np.sum(np.log(np.abs(u[:, None] - moved_zeros[None, :]) ** 2), axis=1)
        return float(np.sum(lf * w) / vol + np.sum(_log_distance_average(moved_zeros, float(radii[0]))))
    if np.all(center == 0):
        rs = [grid.radial(j)[0] for j in range(n)]
        f = polar_grid_values(s.scaled, rs, [n_angular] * n)
        with np.errstate(divide="ignore"):
            lf = np.log(np.abs(f) ** 2) + _log_kernel_diag(s.L, grid)
        wr = np.prod(np.stack(np.meshgrid(*[grid.radial(j)[1] for j in range(n)], indexing="ij"), -1), -1)
        wr = wr.reshape(wr.shape + (1,) * n) / n_angular**n
        return float(np.sum(lf * wr) / vol)
    u, w = grid.points()
    z = MoebiusAutomorphism(center).inverse(u)
    step = max(1, 2_000_000 // s.scaled.size)
    total = 0.0
    for i in range(0, z.shape[0], step):
        zi = z[i : i + step]
        with np.errstate(divide="ignore"):
            lf = np.log(np.abs(horner(s.scaled, zi)) ** 2) + np.sum(s.L * np.log1p(-np.abs(zi) ** 2), axis=-1)
        total += float(np.sum(lf * w[i : i + step]))
    return total / vol


def mean_value_sides(s: GafSample, center, radii, rtol: float = 1e-8, start=None, cap=None):
    """Both sides of log|f^(c)|^2 <= avg_{E(c,s)} log|f^|^2 dnu + sum_j L_j eps(s_j).

    Returns (lhs, rhs, err) where err is the last change under node doubling.
    Default grids: start (32, 64) and cap (512, 1024) for n = 1, (8, 16) and
    (16, 32) per coordinate otherwise.
    """
    if start is None:
        start = (32, 64) if s.n == 1 else (8, 16)
    if cap is None:
        cap = (512, 1024) if s.n == 1 else (16, 32)
    radii = np.broadcast_to(np.atleast_1d(np.asarray(radii, float)), (s.n,))
    center = as_coords(center)
    far = (np.abs(center) + radii) / (1 + np.abs(center) * radii)
    if np.any(far > s.eval_radius * (1 + 1e-14)):
        raise ValueError("E(center, radii) leaves the certified radius")
    with np.errstate(divide="ignore"):
        lhs = float(np.log(np.abs(evaluate(s, center)) ** 2) + np.sum(s.L * np.log1p(-np.abs(center) ** 2)))
    moved = None
    if s.n == 1:
        # zeros close to E(center, radii) make the integrand nearly singular
        b = MoebiusAutomorphism(center)(polynomial_roots(s)[:, None])[:, 0]
        moved = b[np.abs(b) < radii[0] + 0.25 * (1 - radii[0])]
    nr, na = start
    prev = None
    err = np.inf
    while nr <= cap[0] and na <= cap[1]:
        avg = _disk_average(s, center, radii, nr, na, moved)
        if prev is not None:
            err = abs(avg - prev)
            if err <= rtol * max(1.0, abs(avg)):
                break
        prev = avg
        nr *= 2
        na *= 2
    rhs = avg + float(np.sum(s.L * epsilon_mean_value(radii)))
    return lhs, rhs, err


def mean_value_inequality_check(s: GafSample, center, radii, tol: float = 1e-6) -> bool:
    lhs, rhs, _ = mean_value_sides(s, center, radii)
    return bool(lhs <= rhs + tol)


# ----------------------------------------------------------------------------
# normality


def clt_diagnostic(values, min_samples: int = 500):
    """One-sample KS distance and asymptotic p-value against N(0, 1).

    ``values`` must already be centred and scaled by the variance oracle.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size < min_samples:
        raise ValueError(f"need at least {min_samples} values, got {v.size}")
    res = sps.kstest(v, "norm", method="asymp")
    return float(res.statistic), float(res.pvalue)


__all__ = [
    "QuadratureError",
    "bipotential_variance",
    "bipotential_variance_direct",
    "clt_diagnostic",
    "dphi",
    "epsilon_mean_value",
    "expected_statistic",
    "mean_value_inequality_check",
    "mean_value_sides",
    "predicted_variance",
    "statistic_stokes",
    "statistic_zeros",
    "stokes_batch_1d",
    "zeta_constant",
]
