"""Tensor Gauss-Legendre x trapezoid rules in polar coordinates, weighted by nu.

In each complex coordinate the radius gets Gauss-Legendre nodes on [0, R_j]
and the angle gets equispaced (periodic trapezoid) nodes.  Weights already
include the invariant density, so ``sum(w * f(nodes))`` approximates
``integral f dnu`` over the polydisk {|z_j| < R_j}.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class QuadratureError(RuntimeError):
    pass


@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float, b: float):
    x, w = _leggauss(int(n))
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def radial_rule(radius: float, n: int, panels: int = 1):
    """Nodes t and weights for integral_{|z|<radius} h(|z|) dnu(z) in one coordinate.

    The angular integral is already done: weight = w_t * 2 t / (1 - t^2)^2.
    """
    edges = np.linspace(0.0, radius, panels + 1)
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        t, w = gauss_legendre(n, a, b)
        ts.append(t)
        ws.append(w)
    t = np.concatenate(ts)
    w = np.concatenate(ws)
    return t, w * 2 * t / (1 - t**2) ** 2


@dataclass(frozen=True)
class PolarGrid:
    """Per-coordinate radial nodes/weights and angle counts of a tensor polar rule."""

    radii: tuple
    n_radial: int
    n_angular: int
    offsets: tuple = ()

    @property
    def n(self) -> int:
        return len(self.radii)

    def radial(self, j: int):
        return radial_rule(self.radii[j], self.n_radial)

    def angles(self, j: int) -> np.ndarray:
        off = self.offsets[j] if self.offsets else 0.0
        return 2 * np.pi * np.arange(self.n_angular) / self.n_angular + off

    def points(self):
        """All nodes as an array (P, n) with weights (P,)."""
        coords, weights = [], []
        for j in range(self.n):
            t, w = self.radial(j)
            th = self.angles(j)
            coords.append((t[:, None] * np.exp(1j * th)[None, :]).ravel())
            weights.append(np.repeat(w / self.n_angular, th.size))
        mesh = np.meshgrid(*coords, indexing="ij")
        wmesh = np.meshgrid(*weights, indexing="ij")
        z = np.stack([m.ravel() for m in mesh], axis=-1)
        return z, np.prod([m.ravel() for m in wmesh], axis=0)

    def radial_points(self):
        """Radial tensor nodes (P, n) and weights (P,) with angles integrated out."""
        ts, ws = zip(*(self.radial(j) for j in range(self.n)))
        mesh = np.meshgrid(*ts, indexing="ij")
        wmesh = np.meshgrid(*ws, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1), np.prod([m.ravel() for m in wmesh], axis=0)


def quadrature(
    f,
    box,
    scheme: str = "polar",
    rtol: float = 1e-8,
    atol: float = 0.0,
    n_radial: int = 8,
    n_angular: int = 8,
    max_nodes: int = 4_000_000,
    strict: bool = True,
):
    """Integrate f against nu over {|z_j| < box_j} with adaptive node doubling.

    scheme="polar": f receives complex points (P, n).
    scheme="radial": f is a function of the moduli only and receives (P, n) reals.
    Returns the final estimate; raises QuadratureError when the node cap is hit
    before two successive estimates agree (unless strict=False).
    """
    radii = tuple(float(r) for r in np.atleast_1d(box))
    if any(not 0 < r <= 1 for r in radii):
        raise ValueError("box radii must lie in (0, 1]")
    prev = None
    nr, na = n_radial, n_angular
    while True:
        grid = PolarGrid(radii, nr, na)
        if scheme == "polar":
            z, w = grid.points()
        elif scheme == "radial":
            z, w = grid.radial_points()
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        est = float(np.sum(w * f(z)))
        if prev is not None and abs(est - prev) <= max(rtol * abs(est), atol):
            return est
        prev = est
        nr *= 2
        if scheme == "polar":
            na *= 2
        per_coord = nr * (na if scheme == "polar" else 1)
        if per_coord ** len(radii) > max_nodes:
            if strict:
                raise QuadratureError(f"no convergence before node cap (last estimate {est!r})")
            return est
