"""Real orthonormal spherical harmonics by the normalized Legendre recurrence.

Columns are ordered ``l*l + l + k`` for ``-l <= k <= l``. For ``k > 0`` the
function is ``sqrt(2) Pbar_l^k(cos phi) cos(k theta)``, for ``k < 0`` it is
``sqrt(2) Pbar_l^|k|(cos phi) sin(|k| theta)``; ``Pbar`` carries no
Condon-Shortley phase and is normalized so every column has unit L2 norm.
"""
from __future__ import annotations

import numpy as np


def index(l: int, k: int) -> int:
    return l * l + l + k


def normalized_legendre(lmax: int, t, s=None) -> np.ndarray:
    """``Pbar[l, k]`` at ``t = cos(phi)``; shape ``(lmax+1, lmax+1, n)``.

    ``s = sin(phi) >= 0`` may be passed to avoid ``sqrt(1 - t^2)`` cancellation.
    Entries with ``k > l`` are zero.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = np.sqrt(np.maximum(0.0, 1.0 - t * t)) if s is None else np.atleast_1d(np.asarray(s, float))
    P = np.zeros((lmax + 1, lmax + 1, t.size))
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for k in range(1, lmax + 1):
        P[k, k] = np.sqrt((2 * k + 1) / (2.0 * k)) * s * P[k - 1, k - 1]
    for k in range(0, lmax):
        P[k + 1, k] = np.sqrt(2.0 * k + 3.0) * t * P[k, k]
    for k in range(0, lmax + 1):
        for l in range(k + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - k * k))
            b = np.sqrt(((l - 1.0) ** 2 - k * k) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[l, k] = a * (t * P[l - 1, k] - b * P[l - 2, k])
    return P


def real_sph_harm(lmax: int, x) -> np.ndarray:
    """All real orthonormal harmonics up to degree ``lmax`` at unit vectors ``x``.

    Returns an array of shape ``(n, (lmax+1)**2)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rho = np.hypot(x[:, 0], x[:, 1])
    t = x[:, 2]
    theta = np.arctan2(x[:, 1], x[:, 0])
    P = normalized_legendre(lmax, t, rho)
    out = np.empty((x.shape[0], (lmax + 1) ** 2))
    ks = np.arange(1, lmax + 1)
    cos_k = np.cos(np.outer(theta, ks))
    sin_k = np.sin(np.outer(theta, ks))
    r2 = np.sqrt(2.0)
    for l in range(lmax + 1):
        out[:, index(l, 0)] = P[l, 0]
        for k in range(1, l + 1):
            out[:, index(l, k)] = r2 * P[l, k] * cos_k[:, k - 1]
            out[:, index(l, -k)] = r2 * P[l, k] * sin_k[:, k - 1]
    return out
