"""Closed-form covariance machinery of the hyperbolic GAF on the polydisk."""

from __future__ import annotations

import numpy as np

from .geometry import as_coords, as_intensity, check_dims

PI2_6 = np.pi**2 / 6


def _prepare(z, w, L):
    z = as_coords(z)
    w = as_coords(w)
    L = as_intensity(L)
    check_dims(z, L.size, "z")
    check_dims(w, L.size, "w")
    return z, w, L


def _scalar(x):
    return x.item() if np.ndim(x) == 0 else x


def covariance(z, w, L):
    """K_L(z, w) = prod_j (1 - z_j conj(w_j))^(-L_j), principal branch."""
    z, w, L = _prepare(z, w, L)
    # log-space: L_j up to several hundred overflows the direct power
    log_k = -np.sum(L * np.log(1 - z * np.conj(w)), axis=-1)
    return _scalar(np.exp(log_k))


def log_series_coefficients(L: float, maxdeg: int) -> np.ndarray:
    """log of Gamma(L+k) / (k! Gamma(L)) for k = 0..maxdeg.

    Accumulated from the ratios (L+k)/(k+1) rather than differenced from
    log-Gamma values, which would cancel badly once L + k is large.
    """
    k = np.arange(1, maxdeg + 1)
    return np.concatenate([[0.0], np.cumsum(np.log1p((L - 1) / k))])


def covariance_series(z, w, L, maxdeg):
    """Partial sum of the defining power series of K_L over the box alpha <= maxdeg.

    The box sum factors into a product of one-variable partial sums.
    """
    z, w, L = _prepare(z, w, L)
    M = np.broadcast_to(np.atleast_1d(np.asarray(maxdeg, dtype=int)), L.shape)
    x = z * np.conj(w)
    out = np.ones(np.broadcast_shapes(z.shape, w.shape)[:-1], dtype=complex)
    for j in range(L.size):
        coef = np.exp(log_series_coefficients(L[j], M[j]))
        xj = x[..., j]
        acc = np.zeros_like(xj)
        for c in coef[::-1]:
            acc = acc * xj + c
        out = out * acc
    return _scalar(out)


def normalized_kernel(z, w, L):
    """[1-|z|^2]^(L/2) [1-|w|^2]^(L/2) / [1 - conj(z) w]^L.

    This is the conjugate of K(z,w)/sqrt(K(z,z)K(w,w)); only its modulus enters
    the variance formulas.
    """
    z, w, L = _prepare(z, w, L)
    log_t = np.sum(
        L * (0.5 * np.log1p(-np.abs(z) ** 2) + 0.5 * np.log1p(-np.abs(w) ** 2) - np.log(1 - np.conj(z) * w)),
        axis=-1,
    )
    return _scalar(np.exp(log_t))


def normalized_kernel_sq(z, w, L):
    """|theta_L(z, w)|^2 computed in log space (no complex power)."""
    z, w, L = _prepare(z, w, L)
    log_t = np.sum(
        L * (np.log1p(-np.abs(z) ** 2) + np.log1p(-np.abs(w) ** 2) - 2 * np.log(np.abs(1 - np.conj(z) * w))),
        axis=-1,
    )
    return _scalar(np.minimum(np.exp(log_t), 1.0))


_DILOG_TERMS = 56  # 0.5**56 / 56**2 < 1e-20


def _dilog_series(x: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(x)
    for m in range(_DILOG_TERMS, 0, -1):
        acc = acc * x + 1.0 / (m * m)
    return acc * x


def dilog(x):
    """Li_2(x) = sum x^m / m^2 on [0, 1].

    Direct series for x <= 1/2, reflection Li2(x) + Li2(1-x) = pi^2/6 - log x log(1-x)
    above that.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1) or np.any(np.isnan(x)):
        raise ValueError("dilog is defined here on [0, 1]")
    out = np.empty_like(x)
    low = x <= 0.5
    out[low] = _dilog_series(x[low])
    high = ~low
    if np.any(high):
        xh = x[high]
        y = 1 - xh
        near_one = y < 1e-16
        res = np.full_like(xh, PI2_6)
        ok = ~near_one
        res[ok] = PI2_6 - np.log(xh[ok]) * np.log(y[ok]) - _dilog_series(y[ok])
        out[high] = res
    return _scalar(out)


def log_covariance(z, w, L):
    """rho_L(z, w) = Li_2(|theta_L(z, w)|^2)."""
    return dilog(normalized_kernel_sq(z, w, L))
