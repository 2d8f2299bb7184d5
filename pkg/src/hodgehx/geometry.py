"""Analytic closed hypersurfaces given by a signed distance function.

Points are passed either as a single coordinate vector of shape ``(dim,)``
or as a stack of shape ``(n, dim)``; results follow the same convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MedialAxisError

MEDIAL_TOL = 1e-8


def _as_points(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(1, -1) if x.ndim == 1 else x, x.ndim == 1


class ImplicitSurface:
    """Common interface: ``distance``, ``normal`` and ``project``.

    Subclasses implement the vectorized ``_distance_normal`` returning the
    signed distance and unit outward normal for a point stack.
    """

    ambient_dim: int
    element_dim: int
    name: str

    def _distance_normal(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def distance(self, x):
        pts, single = _as_points(x)
        d, _ = self._distance_normal(pts)
        return float(d[0]) if single else d

    def normal(self, x):
        pts, single = _as_points(x)
        _, n = self._distance_normal(pts)
        return n[0] if single else n

    def project(self, x):
        """Closest point ``a(x) = x - distance(x) * normal(x)``."""
        pts, single = _as_points(x)
        d, n = self._distance_normal(pts)
        y = pts - d[:, None] * n
        return y[0] if single else y


@dataclass(frozen=True)
class Torus(ImplicitSurface):
    """Torus of revolution about the z-axis in R^3."""

    R: float = 2.0
    r: float = 0.5

    ambient_dim = 3
    element_dim = 2
    name = "torus"

    def _distance_normal(self, pts):
        if pts.shape[1] != 3:
            raise ValueError("torus points must live in R^3")
        rho = np.hypot(pts[:, 0], pts[:, 1])
        if np.any(rho < MEDIAL_TOL):
            raise MedialAxisError("point on the torus symmetry axis")
        s = rho - self.R
        tube = np.hypot(s, pts[:, 2])
        if np.any(tube < MEDIAL_TOL):
            raise MedialAxisError("point on the torus core circle")
        normal = np.column_stack(
            (s / tube * pts[:, 0] / rho, s / tube * pts[:, 1] / rho, pts[:, 2] / tube)
        )
        return tube - self.r, normal

    def parametrize(self, theta, phi):
        """Point at major angle ``theta`` and minor angle ``phi``."""
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        ring = self.R + self.r * np.cos(phi)
        return np.stack((ring * np.cos(theta), ring * np.sin(theta), self.r * np.sin(phi)), axis=-1)


@dataclass(frozen=True)
class Sphere(ImplicitSurface):
    """Round sphere centred at the origin; ``ambient_dim=4`` gives S^3."""

    radius: float = 1.0
    dim: int = 4

    name = "sphere"

    @property
    def ambient_dim(self):  # type: ignore[override]
        return self.dim

    @property
    def element_dim(self):  # type: ignore[override]
        return self.dim - 1

    def _distance_normal(self, pts):
        if pts.shape[1] != self.dim:
            raise ValueError(f"sphere points must live in R^{self.dim}")
        norm = np.linalg.norm(pts, axis=1)
        if np.any(norm < MEDIAL_TOL):
            raise MedialAxisError("point at the sphere centre")
        return norm - self.radius, pts / norm[:, None]


def Sphere3(radius: float = 1.0) -> Sphere:
    return Sphere(radius=radius, dim=4)


def make_surface(name: str) -> ImplicitSurface:
    """Surface used by the experiments: ``"torus"`` (R=2, r=0.5) or ``"s3"``."""
    if name == "torus":
        return Torus(2.0, 0.5)
    if name in ("s3", "sphere3"):
        return Sphere3(1.0)
    if name in ("s2", "sphere2"):
        return Sphere(1.0, dim=3)
    raise ValueError(f"unknown surface {name!r}")
