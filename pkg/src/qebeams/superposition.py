"""Superpositions ``F_N = sum_j Q_j`` of Gaussian beams over a pole configuration.

Besides evaluation this module computes the L2 norm two ways (pairwise beam
overlaps and direct quadrature), a grid-plus-refinement estimate of the sup
norm with a certified upper bound, and the partition of the poles by their
distance from a given point.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.ndimage import maximum_filter

from . import _kernels
from .beams import GaussianBeam, log_norm_constant
from .pointsets import Certificate, PointSet, min_separation, verify
from .quadrature import SphereRule, sphere_rule
from .sphere import Frame, circle_point_distance, exp_map, frames_for_poles, normalize, tangent_basis

PRUNE_BOUND = 1e-16
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class CertificateError(RuntimeError):
    """A point set failed verification and no override was given."""


def choose_m(N: int, D: float) -> int:
    """Nearest even integer to ``sqrt(N) / D^2``; exact ties round down; at least 2."""
    if N < 1 or D <= 0:
        raise ValueError("need N >= 1 and D > 0")
    x = math.sqrt(N) / (D * D)
    if x < 1.0:
        raise ValueError(f"sqrt(N)/D^2 = {x:.4g} < 1: N={N} is too small for D={D}; lower D")
    lo = 2.0 * math.floor(x / 2.0)
    m = lo if x - lo <= lo + 2.0 - x else lo + 2.0
    return max(int(m), 2)


@dataclass(frozen=True)
class SupNormRecord:
    value: float
    argmax: list
    grid_resolution: float
    refinement_iterations: int
    certified_gap: float
    grid_max: float
    upper_bound: float
    oversample_factor: int
    top_k: int


@dataclass(frozen=True)
class PoleSums:
    sum_I: float
    sum_II: float
    sum_III: float
    total: float
    counts: tuple

    @property
    def tail(self) -> float:
        return self.sum_II + self.sum_III


@dataclass(frozen=True, eq=False)
class BeamSuperposition:
    """``scale * sum_j A_N (<x,U_j> + i<x,V_j>)^N``; ``scale = 1`` for ``F_N``, ``1/|F_N|`` for ``u_N``."""

    N: int
    D: float
    point_set: PointSet
    U: np.ndarray
    V: np.ndarray
    log_amplitude: float
    scale: float = 1.0
    override: bool = False
    certificate: Optional[Certificate] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def m(self) -> int:
        return self.point_set.m

    @property
    def poles(self) -> np.ndarray:
        return self.point_set.points

    @property
    def beams(self) -> list[GaussianBeam]:
        return [
            GaussianBeam(self.N, Frame(u, v, p), self.log_amplitude)
            for u, v, p in zip(self.U, self.V, self.poles)
        ]

    @property
    def _amp(self) -> float:
        return self.scale * math.exp(self.log_amplitude)

    # ------------------------------------------------------------ evaluation

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        X = np.ascontiguousarray(np.atleast_2d(x))
        out = _kernels.superpose_points(X, self.U, self.V, self._amp, self.N, _kernels.cutoff_r2(self.N))
        return out[0] if x.ndim == 1 else out

    __call__ = eval

    def eval_grid(self, phi, theta) -> np.ndarray:
        """``|F|`` on the tensor grid of colatitudes ``phi`` and azimuths ``theta``."""
        phi = np.asarray(phi, float)
        theta = np.asarray(theta, float)
        return _kernels.superpose_grid_abs(
            np.sin(phi), np.cos(phi), np.cos(theta), np.sin(theta),
            self.U, self.V, self._amp, self.N, _kernels.cutoff_r2(self.N),
        )

    # ------------------------------------------------------------ L2 norms

    def overlap_table(self, prune_below: float = PRUNE_BOUND, rule: Optional[SphereRule] = None,
                      precision: str = "double"):
        """Pairs ``j < k`` with overlap bound ``>= prune_below`` and their ``<Q_j, Q_k>``.

        Returns a list of ``(j, k, beta, bound, overlap)``; ``prune_below = 0``
        keeps every pair. ``precision="extended"`` integrates in ``np.longdouble``.
        """
        if precision not in ("double", "extended"):
            raise ValueError(f"unknown precision {precision!r}")
        P = self.poles
        j_idx, k_idx = np.triu_indices(self.m, 1)
        d = np.clip(np.einsum("ij,ij->i", P[j_idx], P[k_idx]), -1.0, 1.0)
        with np.errstate(divide="ignore"):
            log_bound = self.N * np.log(0.5 * (1.0 + d))
        bound = np.exp(log_bound)
        keep = bound >= prune_below if prune_below > 0 else np.ones(bound.size, bool)
        if not np.any(keep):
            return []
        dtype = np.longdouble if precision == "extended" else np.float64
        if rule is None or rule.t.dtype != dtype:
            rule = sphere_rule(2 * self.N, dtype)
        if rule.degree < 2 * self.N:
            raise ValueError(f"quadrature rule of degree {rule.degree} is too coarse (need >= {2 * self.N})")
        x = rule.nodes
        w = rule.weights
        beams = self.beams
        lim = _kernels.cutoff_r2(self.N)
        amp = math.exp(self.log_amplitude)
        vals = {}
        rows = []
        for j, k, dd, b in zip(j_idx[keep], k_idx[keep], d[keep], bound[keep]):
            for i in (j, k):
                if i in vals:
                    continue
                if precision == "extended":
                    vals[i] = beams[i].eval_extended(x)
                else:
                    vals[i] = _kernels.superpose_points(x, self.U[i:i + 1], self.V[i:i + 1], amp, self.N, lim)
            if precision == "extended":
                (jr, ji), (kr, ki) = vals[j], vals[k]
                ov = complex(float(np.sum(w * (jr * kr + ji * ki))), float(np.sum(w * (ji * kr - jr * ki))))
            else:
                ov = complex(np.sum(w * (vals[j] * np.conj(vals[k]))))
            rows.append((int(j), int(k), float(np.arccos(dd)), float(b), ov))
        return rows

    def l2_norm_analytic(self, prune_below: float = PRUNE_BOUND, rule: Optional[SphereRule] = None):
        """``(|F|^2, offdiagonal_total)`` with ``|F|^2 = m + sum_{j != k} <Q_j, Q_k>`` (times ``scale^2``)."""
        key = ("l2a", prune_below, None if rule is None else rule.degree)
        if key not in self._cache:
            table = self.overlap_table(prune_below, rule)
            off = 2.0 * sum(r[4].real for r in table)
            s2 = self.scale ** 2
            self._cache[key] = (s2 * (self.m + off), s2 * off)
        return self._cache[key]

    def l2_norm_quadrature(self, rule: Optional[SphereRule] = None) -> float:
        """``\\int |F|^2 dA`` by the product rule (evaluated on its tensor grid)."""
        rule = sphere_rule(2 * self.N) if rule is None else rule
        if rule.degree < 2 * self.N:
            raise ValueError(f"quadrature rule of degree {rule.degree} is too coarse (need >= {2 * self.N})")
        key = ("l2q", rule.degree)
        if key not in self._cache:
            phi = np.arccos(rule.t)
            A = self.eval_grid(phi, rule.theta)
            row = np.sum(A * A, axis=1)
            self._cache[key] = float(np.sum(rule.t_weights * row) * (2.0 * np.pi / rule.n_theta))
        return self._cache[key]

    def normalized(self) -> "BeamSuperposition":
        """``u_N = F_N / |F_N|_2`` using the overlap-based norm."""
        n2, _ = self.l2_norm_analytic()
        return replace(self, scale=self.scale / math.sqrt(n2), _cache={})

    # ------------------------------------------------------------ sup norm

    def _grid_candidates(self, K: int, top_k: int, block: int = 256):
        d = np.pi / K
        phi = np.arange(K + 1) * d
        theta = np.arange(2 * K) * d
        cands = []
        gmax = 0.0
        for r0 in range(0, K + 1, block):
            a = max(r0 - 1, 0)
            b = min(r0 + block + 1, K + 1)
            G = self.eval_grid(phi[a:b], theta)
            gmax = max(gmax, float(G.max()))
            # local maxima: 3x3 neighbourhood, periodic in theta
            mf = maximum_filter(G, size=3, mode=("nearest", "wrap"))
            lo, hi = r0 - a, min(r0 + block, K + 1) - a
            ii, jj = np.nonzero((G == mf)[lo:hi])
            v = G[lo:hi][ii, jj]
            sel = np.argsort(-v, kind="stable")[:top_k]
            cands += [(float(v[s]), a + lo + int(ii[s]), int(jj[s])) for s in sel]
        cands.sort(key=lambda c: (-c[0], c[1], c[2]))
        return gmax, [(v, phi[i], theta[j]) for v, i, j in cands[:top_k]]

    def _abs_at(self, x) -> float:
        return float(abs(self.eval(x)))

    def _golden_line(self, x, t_dir, h, tol):
        """Maximize ``|F(exp_x(t t_dir))|`` for ``t`` in ``[-h, h]``; returns (best t, value)."""
        f = lambda t: self._abs_at(exp_map(x, t * t_dir))
        a, b = -h, h
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        fc, fd = f(c), f(d)
        while b - a > tol:
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - GOLDEN * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + GOLDEN * (b - a)
                fd = f(d)
        t = c if fc >= fd else d
        return t, max(fc, fd)

    def _refine(self, x, h, refine_steps, tol):
        best = self._abs_at(x)
        it = 0
        for it in range(1, refine_steps + 1):
            moved = 0.0
            for axis in range(2):
                u, v = tangent_basis(x)
                t, val = self._golden_line(x, u if axis == 0 else v, h, tol)
                if val > best:
                    x, best = exp_map(x, t * (u if axis == 0 else v)), val
                    moved = max(moved, abs(t))
            if moved < tol:
                break
            h = max(2.0 * moved, 8.0 * tol)
        return x, best, it

    def sup_norm(self, oversample_factor: int = 4, refine_steps: int = 50, top_k: int = 32,
                 tol: float = 1e-12) -> SupNormRecord:
        """Grid search with spacing ``pi/(oversample_factor N)``, then golden-section refinement.

        The certified upper bound uses Bernstein's inequality along great
        circles: ``|F|`` restricted to one is a trigonometric polynomial of
        degree ``N`` and ``|F|^2`` one of degree ``2N``, so with ``delta`` the
        covering radius of the grid, ``sup |F| <= g / max(1 - N delta,
        sqrt(1 - 2 N^2 delta^2))`` where ``g`` is the grid maximum.
        """
        if oversample_factor < 2:
            raise ValueError("oversample_factor must be >= 2")
        key = ("sup", oversample_factor, refine_steps, top_k, tol)
        if key in self._cache:
            return self._cache[key]
        K = oversample_factor * self.N
        step = np.pi / K
        gmax, cands = self._grid_candidates(K, top_k)
        best, arg, iters = -1.0, None, 0
        for v, ph, th in cands:
            x0 = np.array([math.sin(ph) * math.cos(th), math.sin(ph) * math.sin(th), math.cos(ph)])
            x, val, it = self._refine(x0, step, refine_steps, tol)
            iters = max(iters, it)
            if val > best:
                best, arg = val, x
        # covering radius of the grid: cell half-widths step/2 in phi and theta
        delta = 2.0 * math.asin(math.sqrt(2.0) * math.sin(step / 4.0))
        nd = self.N * delta
        denom = max(1.0 - nd, math.sqrt(max(0.0, 1.0 - 2.0 * nd * nd)))
        upper = gmax / denom if denom > 0 else math.inf
        upper = max(upper, best)
        rec = SupNormRecord(best, [float(c) for c in arg], step, iters, upper - best, gmax, upper,
                            oversample_factor, top_k)
        self._cache[key] = rec
        return rec

    # ------------------------------------------------------------ diagnostics

    def pole_sum_decomposition(self, x, group_I: Optional[float] = None, group_III: float = 1.0 / 3.0) -> PoleSums:
        """``sum_j cos(alpha_j)^N`` split by ``alpha_j = dist(x, G_j)`` at ``1/m`` and ``1/3``."""
        x = np.asarray(x, float)
        alpha = circle_point_distance(self.poles, x)
        c = np.cos(alpha) ** self.N
        g1 = 1.0 / self.m if group_I is None else group_I
        I = alpha <= g1
        III = alpha > group_III
        II = ~I & ~III
        s1, s2, s3 = float(c[I].sum()), float(c[II].sum()), float(c[III].sum())
        return PoleSums(s1, s2, s3, s1 + s2 + s3, (int(I.sum()), int(II.sum()), int(III.sum())))

    def rotated(self, R) -> "BeamSuperposition":
        """Superposition with every frame carried by the rotation ``R`` (so ``F'(Rx) = F(x)``)."""
        R = np.asarray(R, float)
        P = normalize(self.poles @ R.T)
        ps = PointSet(self.m, P, self.point_set.generator, self.point_set.seed)
        return replace(self, point_set=ps, U=self.U @ R.T, V=self.V @ R.T, _cache={})

    def separation_proxy(self) -> float:
        """``min_separation * N^(1/4)``, the empirical stand-in for ``c_0 D``."""
        if self.m < 2:
            return math.inf
        return min_separation(self.point_set)[0] * self.N ** 0.25

    def provenance(self, sup: Optional[SupNormRecord] = None) -> dict:
        l2a = [v for k, v in self._cache.items() if k[0] == "l2a"]
        l2q = [v for k, v in self._cache.items() if k[0] == "l2q"]
        out = {
            "N": self.N,
            "D": self.D,
            "m": self.m,
            "scale": self.scale,
            "point_set": {
                "generator": self.point_set.generator,
                "seed": self.point_set.seed,
                "m": self.m,
                "sha256": self.point_set.sha256(),
            },
            "override": self.override,
            "certificate_passed": None if self.certificate is None else self.certificate.passed,
            "separation_proxy": self.separation_proxy(),
            "l2_analytic": None if not l2a else {"norm2": l2a[0][0], "offdiagonal": l2a[0][1]},
            "l2_quadrature": l2q[0] if l2q else None,
            "sup_norm": None if sup is None else asdict(sup),
        }
        out["hash"] = hashlib.sha256(json.dumps(out, sort_keys=True).encode()).hexdigest()
        return out


def build(N: int, D: float, ps: PointSet, override: bool = False,
          certificate: Optional[Certificate] = None) -> BeamSuperposition:
    """One beam per pole of ``ps``; ``ps`` must have ``choose_m(N, D)`` points and pass ``verify``.

    ``override`` skips both requirements and is recorded in the provenance.
    """
    if N < 1:
        raise ValueError("beam degree must be >= 1")
    if not override:
        m = choose_m(N, D)
        if ps.m != m:
            raise ValueError(f"point set has {ps.m} points but N={N}, D={D} needs m={m}")
        certificate = verify(ps) if certificate is None else certificate
        if not certificate.passed:
            raise CertificateError(f"point set (m={ps.m}, {ps.generator}) failed verification")
    U, V = frames_for_poles(ps.points)
    return BeamSuperposition(int(N), float(D), ps, U, V, log_norm_constant(N), 1.0, override, certificate)
