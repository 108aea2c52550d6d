"""Geometry of the unit sphere: unit vectors, frames, oriented great circles.

Points are plain numpy arrays of shape ``(3,)`` or ``(n, 3)``. An oriented
great circle is carried by a right-handed frame ``(u, v, p)``: the circle is
``gamma(t) = cos t u + sin t v`` and ``p`` is its pole.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

# poles closer than this to +-e3 use the e1 tie-break
POLAR_TOL = 1e-9


def normalize(x) -> np.ndarray:
    """Scale ``x`` (``(3,)`` or ``(n, 3)``) onto the unit sphere."""
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(nrm == 0.0):
        raise ValueError("cannot normalize the zero vector")
    return x / nrm


def as_unit(x, tol: float = 1e-12) -> np.ndarray:
    """Validate that ``x`` already lies on the sphere and return it as float array."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError(f"expected trailing dimension 3, got shape {x.shape}")
    err = np.abs(np.einsum("...i,...i->...", x, x) - 1.0)
    if np.any(err > tol):
        raise ValueError(f"not a unit vector (| |x|^2 - 1 | = {np.max(err):.3e})")
    return x


def spherical_to_cartesian(phi, theta) -> np.ndarray:
    """Colatitude ``phi`` and azimuth ``theta`` to ``(..., 3)`` unit vectors."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sp = np.sin(phi)
    return np.stack([sp * np.cos(theta), sp * np.sin(theta), np.cos(phi) + 0.0 * theta], axis=-1)


def cartesian_to_spherical(x):
    x = np.asarray(x, dtype=float)
    phi = np.arccos(np.clip(x[..., 2], -1.0, 1.0))
    theta = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2 * np.pi)
    return phi, theta


def geodesic_distance(p, q):
    """Great-circle distance in ``[0, pi]``; broadcasts over leading axes."""
    d = np.einsum("...i,...i->...", np.asarray(p, float), np.asarray(q, float))
    return np.arccos(np.clip(d, -1.0, 1.0))


def circle_point_distance(pole, q):
    """Distance from ``q`` to the great circle with the given pole, in ``[0, pi/2]``."""
    d = np.einsum("...i,...i->...", np.asarray(pole, float), np.asarray(q, float))
    return np.abs(np.arcsin(np.clip(d, -1.0, 1.0)))


@dataclass(frozen=True)
class Frame:
    """Right-handed orthonormal triple; ``p`` is the pole of the circle spanned by ``u, v``."""

    u: np.ndarray
    v: np.ndarray
    p: np.ndarray

    def matrix(self) -> np.ndarray:
        """Columns ``u, v, p``: the rotation taking ``(e1, e2, e3)`` to this frame."""
        return np.column_stack([self.u, self.v, self.p])

    def rotated(self, R) -> "Frame":
        R = np.asarray(R, float)
        return Frame(R @ self.u, R @ self.v, R @ self.p)

    def in_plane_rotated(self, angle: float) -> "Frame":
        """Same pole, circle parameter origin shifted by ``angle``."""
        c, s = np.cos(angle), np.sin(angle)
        return Frame(c * self.u + s * self.v, -s * self.u + c * self.v, self.p)


def frame_for_pole(p) -> Frame:
    """Deterministic right-handed frame with third axis ``p``.

    ``u = normalize(e3 x p)`` in general; within ``POLAR_TOL`` of the poles
    ``u`` is ``e1`` projected onto the tangent plane. In both cases
    ``v = p x u``, so ``e3 -> (e1, e2, e3)`` and ``-e3 -> (e1, -e2, -e3)``.
    """
    p = np.asarray(p, dtype=float)
    if abs(p[2]) > 1.0 - POLAR_TOL:
        u = E1 - p[0] * p
    else:
        u = np.cross(E3, p)
    u = u / np.linalg.norm(u)
    v = np.cross(p, u)
    return Frame(u, v, p.copy())


def frames_for_poles(P) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``frame_for_pole``: returns stacked ``(U, V)`` of shape ``(m, 3)``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    U = np.empty_like(P)
    V = np.empty_like(P)
    for j, p in enumerate(P):
        f = frame_for_pole(p)
        U[j], V[j] = f.u, f.v
    return U, V


def rotation_to_pole(p) -> np.ndarray:
    """Rotation ``R`` with ``R e3 = p`` that carries the equator frame onto ``frame_for_pole(p)``."""
    return frame_for_pole(p).matrix()


@dataclass(frozen=True)
class OrientedGreatCircle:
    frame: Frame

    @classmethod
    def from_pole(cls, p) -> "OrientedGreatCircle":
        return cls(frame_for_pole(p))

    @property
    def pole(self) -> np.ndarray:
        return self.frame.p

    def point(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return np.cos(t) * self.frame.u + np.sin(t) * self.frame.v

    def tangent(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return -np.sin(t) * self.frame.u + np.cos(t) * self.frame.v


def circle_point(c: OrientedGreatCircle, t):
    return c.point(t)


def circle_tangent(c: OrientedGreatCircle, t):
    return c.tangent(t)


def tangent_basis(x) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent vectors at ``x`` (the ``u, v`` of the frame with pole ``x``)."""
    f = frame_for_pole(x)
    return f.u, f.v


def exp_map(x, w) -> np.ndarray:
    """Follow the geodesic from ``x`` along tangent vector ``w`` for length ``|w|``."""
    x = np.asarray(x, float)
    w = np.asarray(w, float)
    s = np.linalg.norm(w)
    if s == 0.0:
        return x.copy()
    y = np.cos(s) * x + np.sin(s) * (w / s)
    return y / np.linalg.norm(y)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of SO(3) (QR of a Gaussian matrix, sign-fixed)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
