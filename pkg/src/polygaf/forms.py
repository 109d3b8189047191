"""Test functions psi and the density D(phi) of (i/2pi) dd^c of psi omega^{n-1}/(n-1)!.

For phi = psi omega^{n-1}/(n-1)! one has

    (i/2pi) d dbar phi = (sum_j (1 - |z_j|^2)^2 d^2 psi / dz_j dzbar_j) dnu,

so D(phi) only needs the diagonal mixed second derivatives of psi.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import MoebiusAutomorphism, as_coords

FD_STEP = 1e-4


@dataclass(frozen=True)
class RadialProfile:
    """g(v) with v = |z|^2, and its first two derivatives in v."""

    g: Callable
    dg: Callable
    d2g: Callable
    radius: float

    def laplacian_quarter(self, v):
        """d^2/dz dzbar of g(|z|^2) = g'(v) + v g''(v)."""
        return self.dg(v) + v * self.d2g(v)


def polynomial_profile(R: float) -> RadialProfile:
    """g(v) = (1 - v/R^2)^2 on v < R^2, else 0.  C^1 across |z| = R."""
    R2 = R * R

    def g(v):
        x = np.asarray(v) / R2
        return np.where(x < 1, (1 - x) ** 2, 0.0)

    def dg(v):
        x = np.asarray(v) / R2
        return np.where(x < 1, -2 * (1 - x) / R2, 0.0)

    def d2g(v):
        x = np.asarray(v) / R2
        return np.where(x < 1, 2 / R2**2, 0.0)

    return RadialProfile(g, dg, d2g, R)


def smooth_profile(R: float) -> RadialProfile:
    """g(v) = exp(1 - 1/(1 - v/R^2)) on v < R^2, else 0 (C-infinity, g(0) = 1)."""
    R2 = R * R

    def _parts(v):
        x = np.asarray(v, dtype=float) / R2
        inside = x < 1
        s = np.where(inside, 1 - x, 1.0)
        e = np.where(inside, np.exp(1 - 1 / s), 0.0)
        return x, s, e

    def g(v):
        return _parts(v)[2]

    def dg(v):
        _, s, e = _parts(v)
        return -e / s**2 / R2

    def d2g(v):
        _, s, e = _parts(v)
        return e * (1 / s**4 - 2 / s**3) / R2**2

    return RadialProfile(g, dg, d2g, R)


@dataclass(frozen=True, eq=False)
class TestForm:
    """A compactly supported weight psi on the polydisk.

    psi(z) and mixed_second(z, j) are vectorized over points of shape (..., n).
    ``support`` holds radii R_j with psi = 0 unless |z_j| < R_j for all j.
    ``profiles`` is set when psi is a product of radial profiles, which lets
    integrals drop the angular variables.
    """

    __test__ = False  # not a pytest class

    n: int
    psi: Callable
    support: tuple
    mixed_second: Callable | None = None
    profiles: tuple | None = None
    label: str = "custom"

    def __post_init__(self):
        sup = tuple(float(r) for r in np.broadcast_to(np.atleast_1d(self.support), (self.n,)))
        if any(not 0 < r < 1 for r in sup):
            raise ValueError("support radii must lie in (0, 1)")
        object.__setattr__(self, "support", sup)

    @property
    def polyradial(self) -> bool:
        return self.profiles is not None

    def second(self, z, j: int):
        z = as_coords(z)
        if self.mixed_second is not None:
            return self.mixed_second(z, j)
        return mixed_second_fd(self.psi, z, j)


def mixed_second_fd(psi, z, j: int, h: float = FD_STEP):
    """Central-difference d^2 psi / dz_j dzbar_j = (1/4) Laplacian in z_j."""
    z = as_coords(z)
    e = np.zeros(z.shape[-1], dtype=complex)
    e[j] = 1.0
    lap = psi(z + h * e) + psi(z - h * e) + psi(z + 1j * h * e) + psi(z - 1j * h * e) - 4 * psi(z)
    return lap / (4 * h * h)


def product_form(profiles, label: str = "product") -> TestForm:
    profiles = tuple(profiles)
    n = len(profiles)

    def psi(z):
        v = np.abs(as_coords(z)) ** 2
        out = 1.0
        for j, p in enumerate(profiles):
            out = out * p.g(v[..., j])
        return out

    def mixed(z, j):
        v = np.abs(as_coords(z)) ** 2
        out = profiles[j].laplacian_quarter(v[..., j])
        for k, p in enumerate(profiles):
            if k != j:
                out = out * p.g(v[..., k])
        return out

    return TestForm(n, psi, tuple(p.radius for p in profiles), mixed, profiles, label)


def polynomial_bump(R, n: int = 1) -> TestForm:
    """prod_j max(0, 1 - |z_j|^2/R_j^2)^2."""
    R = np.broadcast_to(np.atleast_1d(np.asarray(R, float)), (n,))
    return product_form([polynomial_profile(r) for r in R], "polynomial")


def smooth_bump(R, n: int = 1) -> TestForm:
    """prod_j exp(1 - 1/(1 - |z_j|^2/R_j^2)) inside the polydisk of radii R."""
    R = np.broadcast_to(np.atleast_1d(np.asarray(R, float)), (n,))
    return product_form([smooth_profile(r) for r in R], "smooth")


def zero_form(n: int = 1, R: float = 0.5) -> TestForm:
    return TestForm(n, lambda z: np.zeros(as_coords(z).shape[:-1]), (R,) * n,
                    lambda z, j: np.zeros(as_coords(z).shape[:-1]), None, "zero")


def compose_form(form: TestForm, a: MoebiusAutomorphism) -> TestForm:
    """psi o a.  Its D(phi) is D(phi)_psi o a, by conformal invariance."""
    if a.n != form.n:
        raise ValueError("dimension mismatch")
    w = np.abs(a.center)
    R = np.asarray(form.support)
    support = tuple((R + w) / (1 + R * w))

    def psi(z):
        return form.psi(a(z))

    def mixed(z, j):
        z = as_coords(z)
        return form.second(a(z), j) * np.abs(a.derivative(z)[..., j]) ** 2

    return TestForm(form.n, psi, support, mixed, None, f"{form.label}-moved")


def swap_coordinates(form: TestForm, perm=None) -> TestForm:
    perm = np.arange(form.n)[::-1] if perm is None else np.asarray(perm)
    inv = np.argsort(perm)
    support = tuple(np.asarray(form.support)[inv])

    def psi(z):
        return form.psi(as_coords(z)[..., perm])

    def mixed(z, j):
        return form.second(as_coords(z)[..., perm], int(inv[j]))

    profiles = None if form.profiles is None else tuple(form.profiles[i] for i in inv)
    return TestForm(form.n, psi, support, mixed, profiles, f"{form.label}-permuted")


def dphi(form: TestForm, z):
    """sum_j (1 - |z_j|^2)^2 d^2 psi / dz_j dzbar_j at z."""
    z = as_coords(z)
    out = 0.0
    for j in range(form.n):
        out = out + (1 - np.abs(z[..., j]) ** 2) ** 2 * form.second(z, j)
    return out


def dphi_radial(form: TestForm, t):
    """D(phi) as a function of the moduli t (..., n); polyradial forms only."""
    if not form.polyradial:
        raise ValueError("form is not a product of radial profiles")
    return dphi(form, np.asarray(t, dtype=float).astype(complex))
