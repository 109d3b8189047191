"""Geometry of the unit polydisk.

Points are stored as complex arrays whose last axis indexes the coordinate, so
every function here accepts either a single point of shape ``(n,)`` or a batch
of shape ``(..., n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BOUNDARY_GAP = 1e-12


def as_coords(z) -> np.ndarray:
    if isinstance(z, PolydiskPoint):
        return z.coords
    return np.atleast_1d(np.asarray(z, dtype=complex))


def as_intensity(L) -> np.ndarray:
    if isinstance(L, IntensityVector):
        return L.values
    values = np.atleast_1d(np.asarray(L, dtype=float))
    if values.ndim != 1 or values.size == 0:
        raise ValueError("intensity must be a non-empty vector")
    if not np.all(values > 0):
        raise ValueError(f"intensities must be positive, got {values}")
    return values


def check_inside(z: np.ndarray, name: str = "point") -> None:
    if np.any(np.abs(z) > 1 - BOUNDARY_GAP):
        raise ValueError(f"{name} has a coordinate outside the open unit disk")


def check_dims(z: np.ndarray, n: int, name: str = "point") -> None:
    if z.shape[-1] != n:
        raise ValueError(f"{name} has dimension {z.shape[-1]}, expected {n}")


@dataclass(frozen=True, eq=False)
class PolydiskPoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coords, dtype=complex)).copy()
        if c.ndim != 1:
            raise ValueError("a polydisk point is a 1-d array of coordinates")
        check_inside(c)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.coords.size

    @classmethod
    def origin(cls, n: int) -> "PolydiskPoint":
        return cls(np.zeros(n, dtype=complex))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


@dataclass(frozen=True, eq=False)
class IntensityVector:
    values: np.ndarray

    def __post_init__(self):
        v = as_intensity(self.values).copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def total(self) -> float:
        return float(self.values.sum())

    @property
    def product(self) -> float:
        return float(self.values.prod())


def pseudo_distance(zeta, xi):
    """|zeta - xi| / |1 - conj(zeta) xi| for points of the unit disk (vectorized)."""
    a = np.asarray(zeta, dtype=complex)
    b = np.asarray(xi, dtype=complex)
    if np.any(np.abs(a) >= 1) or np.any(np.abs(b) >= 1):
        raise ValueError("pseudo_distance needs arguments in the open unit disk")
    out = np.abs(a - b) / np.abs(1 - np.conj(a) * b)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class MoebiusAutomorphism:
    """The map z -> (exp(i theta_j) (z_j - w_j) / (1 - conj(w_j) z_j))_j."""

    center: np.ndarray
    phases: np.ndarray | None = None

    def __post_init__(self):
        w = as_coords(self.center).copy()
        check_inside(w, "center")
        th = np.zeros(w.size) if self.phases is None else np.atleast_1d(np.asarray(self.phases, float))
        if th.shape != w.shape:
            raise ValueError("phases and center must have the same dimension")
        th = np.mod(th, 2 * np.pi)
        w.setflags(write=False)
        th.setflags(write=False)
        object.__setattr__(self, "center", w)
        object.__setattr__(self, "phases", th)

    @property
    def n(self) -> int:
        return self.center.size

    def __call__(self, z) -> np.ndarray:
        z = as_coords(z)
        check_dims(z, self.n)
        w = self.center
        return np.exp(1j * self.phases) * (z - w) / (1 - np.conj(w) * z)

    def inverse(self, u) -> np.ndarray:
        u = as_coords(u)
        check_dims(u, self.n)
        w = self.center
        v = np.exp(-1j * self.phases) * u
        return (v + w) / (1 + np.conj(w) * v)

    def derivative(self, z) -> np.ndarray:
        """Per-coordinate complex derivative of the map at z."""
        z = as_coords(z)
        w = self.center
        return np.exp(1j * self.phases) * (1 - np.abs(w) ** 2) / (1 - np.conj(w) * z) ** 2

    def jacobian(self, z) -> np.ndarray:
        """Real Jacobian determinant (product of |derivative|^2)."""
        return np.prod(np.abs(self.derivative(z)) ** 2, axis=-1)


def apply_automorphism(a: MoebiusAutomorphism, z) -> np.ndarray:
    z = as_coords(z)
    check_inside(z)
    return a(z)


def invariant_density(z) -> np.ndarray | float:
    """Density of the invariant measure nu against Lebesgue measure."""
    z = as_coords(z)
    n = z.shape[-1]
    out = 1.0 / (np.pi**n * np.prod((1 - np.abs(z) ** 2) ** 2, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class PseudoHyperbolicPolydisk:
    center: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        w = as_coords(self.center).copy()
        check_inside(w, "center")
        r = np.atleast_1d(np.asarray(self.radii, dtype=float)).copy()
        if r.size == 1 and w.size > 1:
            r = np.full(w.size, r[0])
        if r.shape != w.shape:
            raise ValueError("polyradius and center must have the same dimension")
        if not np.all((r > 0) & (r < 1)):
            raise ValueError("polyradius entries must lie in (0, 1)")
        w.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "center", w)
        object.__setattr__(self, "radii", r)

    @property
    def n(self) -> int:
        return self.center.size

    @classmethod
    def at_origin(cls, radii) -> "PseudoHyperbolicPolydisk":
        r = np.atleast_1d(np.asarray(radii, dtype=float))
        return cls(np.zeros(r.size, dtype=complex), r)

    def contains(self, z) -> np.ndarray:
        z = as_coords(z)
        u = MoebiusAutomorphism(self.center)(z)
        return np.all(np.abs(u) < self.radii, axis=-1)


def nu_volume(E: PseudoHyperbolicPolydisk) -> float:
    r2 = E.radii**2
    return float(np.prod(r2 / (1 - r2)))


def intensity_form_coefficients(z, L) -> np.ndarray:
    """Coefficients L_j / (1 - |z_j|^2)^2 of the first-intensity form."""
    z = as_coords(z)
    L = as_intensity(L)
    check_dims(z, L.size)
    return L / (1 - np.abs(z) ** 2) ** 2
