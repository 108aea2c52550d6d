"""Integration on S^2, on great circles, and over the space of oriented great circles.

The sphere rule is a product of Gauss-Legendre in ``cos(phi)`` and the
trapezoid rule in ``theta``; it is exact for every polynomial of total degree
at most ``degree`` restricted to the sphere.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Optional

import numpy as np

from .sphere import OrientedGreatCircle, frames_for_poles

FOUR_PI = 4.0 * np.pi


def gauss_legendre(n: int, tol: Optional[float] = None, maxiter: int = 100, dtype=np.float64):
    """Nodes (ascending) and weights of the ``n``-point Gauss-Legendre rule on [-1, 1].

    Newton iteration on the three-term recurrence for ``P_n``, started from
    Tricomi's asymptotic guess; stops once every Newton update is below ``tol``
    (default ``1e-15`` in double, ``10 eps`` otherwise). ``dtype=np.longdouble``
    gives extended-precision nodes.
    """
    if n < 1:
        raise ValueError("need at least one node")
    if tol is None:
        tol = 1e-15 if dtype == np.float64 else 10 * float(np.finfo(dtype).eps)
    k = np.arange(1, n + 1).astype(dtype)
    x = np.cos(_pi(dtype) * (k - dtype(0.25)) / (n + dtype(0.5))) * (1 - dtype(n - 1) / (dtype(8) * n**3))
    for _ in range(maxiter):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < tol:
            break
    else:
        raise RuntimeError(f"Gauss-Legendre Newton iteration did not converge for n={n}")
    # weights from the derivative at the converged nodes
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


@dataclass(frozen=True)
class SphereRule:
    """Product rule: ``n_phi`` Gauss-Legendre nodes in ``t = cos(phi)``, ``n_theta`` in ``theta``."""

    degree: int
    t: np.ndarray
    t_weights: np.ndarray
    theta: np.ndarray

    @property
    def n_phi(self) -> int:
        return self.t.size

    @property
    def n_theta(self) -> int:
        return self.theta.size

    @property
    def size(self) -> int:
        return self.n_phi * self.n_theta

    @cached_property
    def nodes(self) -> np.ndarray:
        s = np.sqrt((1.0 - self.t) * (1.0 + self.t))
        x = np.empty((self.n_phi, self.n_theta, 3), dtype=self.t.dtype)
        x[..., 0] = s[:, None] * np.cos(self.theta)[None, :]
        x[..., 1] = s[:, None] * np.sin(self.theta)[None, :]
        x[..., 2] = self.t[:, None]
        return x.reshape(-1, 3)

    @cached_property
    def weights(self) -> np.ndarray:
        w_theta = 2 * _pi(self.t.dtype) / self.n_theta
        return np.repeat(self.t_weights * w_theta, self.n_theta)


def sphere_rule_size(degree: int) -> tuple[int, int]:
    n_phi = (degree + 2) // 2  # ceil((degree + 1) / 2)
    return n_phi, degree + 1


def _pi(dtype):
    return np.float64(np.pi) if dtype == np.float64 else 4 * np.arctan(np.ones((), dtype))


@lru_cache(maxsize=8)
def sphere_rule(degree: int, dtype=np.float64) -> SphereRule:
    """Product rule exact to ``degree``; ``dtype=np.longdouble`` for extended precision."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    n_phi, n_theta = sphere_rule_size(degree)
    t, w = gauss_legendre(n_phi, dtype=dtype)
    theta = 2 * _pi(dtype) * np.arange(n_theta, dtype=dtype) / n_theta
    return SphereRule(degree, t, w, theta)


def predicted_rule_bytes(degree: int) -> int:
    """Bytes held by ``sphere_rule(degree)`` once nodes and weights are materialized."""
    n_phi, n_theta = sphere_rule_size(degree)
    n = n_phi * n_theta
    return 8 * (3 * n + n + 2 * n_phi + n_theta)


def rule_nbytes(rule: SphereRule) -> int:
    return rule.nodes.nbytes + rule.weights.nbytes + rule.t.nbytes + rule.t_weights.nbytes + rule.theta.nbytes


def integrate_sphere(f, rule: SphereRule):
    """Weighted node sum of ``f``; ``f`` is a callable on ``(n, 3)`` nodes or an array of values.

    ``np.sum`` reduces pairwise in a fixed order, so results do not depend on
    how the caller produced the values.
    """
    vals = f(rule.nodes) if callable(f) else np.asarray(f)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"non-finite integrand at node {i}: x = {rule.nodes[i].tolist()}")
    return np.sum(rule.weights * vals)


@dataclass(frozen=True)
class CircleRule:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("circle rule needs n >= 1")

    @property
    def t(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n) / self.n

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, 2.0 * np.pi / self.n)


@dataclass(frozen=True)
class Observable:
    """Scalar test function on S^2 (``kind="position"``) or on the unit tangent bundle (``"phase"``).

    ``func(x)`` or ``func(x, xi)`` receives ``(n, 3)`` arrays; ``degree`` is the
    largest harmonic degree it contains (used to size quadrature rules).
    """

    name: str
    func: Callable
    kind: str = "position"
    degree: int = 0
    liouville: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("position", "phase"):
            raise ValueError(f"unknown observable kind {self.kind!r}")

    @property
    def position_only(self) -> bool:
        return self.kind == "position"

    def __call__(self, x, xi=None):
        x = np.atleast_2d(x)
        if self.kind == "position":
            out = self.func(x)
        else:
            if xi is None:
                raise ValueError(f"phase-space observable {self.name!r} needs a covector")
            out = self.func(x, np.atleast_2d(xi))
        return np.broadcast_to(np.asarray(out, dtype=float), (x.shape[0],))

    def rotated(self, R) -> "Observable":
        """The observable ``a(R^T x, R^T xi)`` (i.e. ``a`` carried along by ``R``)."""
        R = np.asarray(R, float)
        f = self.func
        if self.kind == "position":
            g = lambda x: f(x @ R)
        else:
            g = lambda x, xi: f(x @ R, xi @ R)
        return Observable(self.name + "@R", g, self.kind, self.degree, self.liouville)


def _zonal4(x):
    z2 = x[:, 2] ** 2
    return (35.0 * z2 * z2 - 30.0 * z2 + 3.0) / 8.0


# Liouville values: symmetry for the first five; the product one is the
# Haar moment E[R11^2 R32^2] = 2/15 over SO(3).
BANK = {
    "one": Observable("one", lambda x: np.ones(x.shape[0]), "position", 0, 1.0),
    "x3^2": Observable("x3^2", lambda x: x[:, 2] ** 2, "position", 2, 1.0 / 3.0),
    "x1x2": Observable("x1x2", lambda x: x[:, 0] * x[:, 1], "position", 2, 0.0),
    "zonal4": Observable("zonal4", _zonal4, "position", 4, 0.0),
    "xi3^2": Observable("xi3^2", lambda x, xi: xi[:, 2] ** 2, "phase", 2, 1.0 / 3.0),
    "x1^2*xi3^2": Observable("x1^2*xi3^2", lambda x, xi: x[:, 0] ** 2 * xi[:, 2] ** 2, "phase", 4, 2.0 / 15.0),
}


def observable_bank(names=None) -> list[Observable]:
    if names is None:
        return list(BANK.values())
    try:
        return [BANK[n] for n in names]
    except KeyError as e:
        raise ValueError(f"unknown observable {e.args[0]!r}; known: {sorted(BANK)}") from None


def _circle_samples(U, V, n):
    t = 2.0 * np.pi * np.arange(n) / n
    c, s = np.cos(t), np.sin(t)
    X = c[None, :, None] * U[:, None, :] + s[None, :, None] * V[:, None, :]
    Xi = -s[None, :, None] * U[:, None, :] + c[None, :, None] * V[:, None, :]
    return X.reshape(-1, 3), Xi.reshape(-1, 3)


def circle_averages(U, V, a: Observable, n: int = 256, chunk: int = 4096) -> np.ndarray:
    """``(1/2pi) \\int a dl`` over each circle with frame rows ``(U[j], V[j])``.

    Phase-space observables receive the unit tangent of the circle as covector.
    """
    if n < 4:
        raise ValueError("circle rule needs n >= 4")
    U = np.atleast_2d(U)
    V = np.atleast_2d(V)
    out = np.empty(U.shape[0])
    for s in range(0, U.shape[0], chunk):
        X, Xi = _circle_samples(U[s:s + chunk], V[s:s + chunk], n)
        vals = a(X, Xi).reshape(-1, n)
        out[s:s + chunk] = vals.mean(axis=1)
    return out


def circle_average(c: OrientedGreatCircle, a: Observable, n: int = 256) -> float:
    return float(circle_averages(c.frame.u[None], c.frame.v[None], a, n)[0])


def pole_circle_averages(poles, a: Observable, n: int = 256) -> np.ndarray:
    U, V = frames_for_poles(poles)
    return circle_averages(U, V, a, n)


def liouville_average(a: Observable, pole_rule: Optional[SphereRule] = None, n_circle: int = 256) -> float:
    """Average of ``a`` over the unit cosphere bundle, computed over the space of oriented circles.

    ``(1/4pi) \\int_{S^2} circle_average(G_p, a) dp``; ``a = 1`` gives 1.
    """
    rule = sphere_rule(40) if pole_rule is None else pole_rule
    f = pole_circle_averages(rule.nodes, a, n_circle)
    return float(integrate_sphere(f, rule) / FOUR_PI)


def liouville_average_direct(a: Observable, rule: Optional[SphereRule] = None, n_angle: int = 64) -> float:
    """Independent route: base point ``x`` from a sphere rule, covector uniform on the unit tangent circle."""
    rule = sphere_rule(40) if rule is None else rule
    x = rule.nodes
    # tangent frame (e_phi, e_theta); e_theta undefined only at exact poles, which the GL rule avoids
    rho = np.hypot(x[:, 0], x[:, 1])
    e_th = np.stack([-x[:, 1] / rho, x[:, 0] / rho, np.zeros_like(rho)], axis=1)
    e_ph = np.cross(e_th, x)
    w = 2.0 * np.pi * np.arange(n_angle) / n_angle
    total = np.zeros(x.shape[0])
    for om in w:
        xi = np.cos(om) * e_ph + np.sin(om) * e_th
        total += a(x, xi)
    return float(integrate_sphere(total / n_angle, rule) / FOUR_PI)
