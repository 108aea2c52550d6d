"""Pole configurations on S^2 and their certificates.

A certificate measures the three point-set requirements: pairwise separation
of order ``1/sqrt(m)``, a bounded number of points within ``1/m`` of any great
circle, and equidistribution (Weyl sums against spherical harmonics).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .harmonics import real_sph_harm
from .sphere import frame_for_pole, frames_for_poles, normalize

GENERATORS = ("fibonacci", "spiral", "uniform-random", "annealed", "file")
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True, eq=False)
class PointSet:
    m: int
    points: np.ndarray
    generator: str = "file"
    seed: int = 0

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (m, 3), got {pts.shape}")
        if pts.shape[0] != self.m or self.m < 1:
            raise ValueError(f"expected m={self.m} points, got {pts.shape[0]}")
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator tag {self.generator!r}")
        err = np.abs(np.einsum("ij,ij->i", pts, pts) - 1.0)
        if np.any(err > 1e-12):
            raise ValueError(f"point {int(np.argmax(err))} is not a unit vector")
        if self.m > 1 and np.unique(pts, axis=0).shape[0] != self.m:
            raise ValueError("point set contains repeated points")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __eq__(self, other):
        if not isinstance(other, PointSet):
            return NotImplemented
        return (self.m, self.generator, self.seed) == (other.m, other.generator, other.seed) and np.array_equal(
            self.points, other.points
        )

    def __len__(self):
        return self.m

    def sha256(self) -> str:
        h = hashlib.sha256(f"m={self.m} generator={self.generator} seed={self.seed}\n".encode())
        h.update(np.ascontiguousarray(self.points, dtype="<f8").tobytes())
        return h.hexdigest()

    def rotated(self, R) -> "PointSet":
        P = normalize(self.points @ np.asarray(R, float).T)
        return PointSet(self.m, P, self.generator, self.seed)


# ---------------------------------------------------------------- generators


def fibonacci_points(m: int) -> np.ndarray:
    """Golden-angle lattice with heights at the centres of ``m`` equal-area bands."""
    i = np.arange(m)
    z = 1.0 - (2.0 * i + 1.0) / m
    th = i * GOLDEN_ANGLE
    r = np.sqrt((1.0 - z) * (1.0 + z))
    return np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)


def spiral_points(m: int) -> np.ndarray:
    """Generalized spiral (Rakhmanov-Saff-Zhou) points from pole to pole."""
    if m == 1:
        return np.array([[0.0, 0.0, 1.0]])
    k = np.arange(m)
    h = -1.0 + 2.0 * k / (m - 1)
    s = np.sqrt((1.0 - h) * (1.0 + h))
    phi = np.zeros(m)
    step = 3.6 / math.sqrt(m)
    for i in range(1, m - 1):
        phi[i] = (phi[i - 1] + step / s[i]) % (2.0 * np.pi)
    return np.stack([s * np.cos(phi), s * np.sin(phi), h], axis=1)


def random_points(m: int, seed: int) -> np.ndarray:
    g = np.random.default_rng(seed).standard_normal((m, 3))
    return normalize(g)


def generate(kind: str, m: int, seed: int = 0) -> PointSet:
    if m < 1:
        raise ValueError("m must be >= 1")
    if kind == "fibonacci":
        pts = fibonacci_points(m)
    elif kind == "spiral":
        pts = spiral_points(m)
    elif kind == "uniform-random":
        pts = random_points(m, seed)
    else:
        raise ValueError(f"unknown point-set kind {kind!r}; use fibonacci, spiral or uniform-random")
    return PointSet(m, normalize(pts), kind, int(seed))


# ---------------------------------------------------------------- verifiers


def min_separation(ps: PointSet, chunk: int = 2048) -> tuple[float, tuple[int, int]]:
    """Exact minimum pairwise geodesic distance and the lexicographically first pair attaining it."""
    if ps.m < 2:
        raise ValueError("separation needs at least two points")
    P = ps.points
    best = -np.inf
    pair = (0, 1)
    for s in range(0, ps.m, chunk):
        G = P[s:s + chunk] @ P.T
        rows = np.arange(G.shape[0])
        # only pairs i < j
        G[np.arange(ps.m)[None, :] <= (rows + s)[:, None]] = -np.inf
        k = int(np.argmax(G))
        i, j = divmod(k, ps.m)
        if G[i, j] > best:
            best = G[i, j]
            pair = (i + s, j)
    # recompute the winner with a fixed summation order (BLAS may fuse or reorder)
    a, b = P[pair[0]], P[pair[1]]
    dot = float(a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
    return math.acos(min(1.0, max(-1.0, dot))), pair


@dataclass(frozen=True)
class SearchParams:
    """Budget of the great-circle clustering search."""

    grid_factor: int = 100
    refine_top_k: int = 20
    step_min_factor: float = 1e-4  # final hill-climb step is step_min_factor / m
    exact_sweep: bool = True


@dataclass(frozen=True)
class CircleCount:
    count: int
    pole: np.ndarray
    radius: float
    heuristic: bool
    budget: dict = field(default_factory=dict)


def band_count(P, pole, radius: float) -> int:
    """Points of ``P`` within ``radius`` of the great circle with the given pole."""
    s = math.sin(min(radius, math.pi / 2))
    return int(np.count_nonzero(np.abs(np.asarray(P) @ np.asarray(pole)) <= s))


def _family_poles(P, U, V, psi, h):
    g = math.sqrt(max(0.0, 1.0 - h * h))
    return normalize(h * P + g * (np.cos(psi)[:, None] * U + np.sin(psi)[:, None] * V))


def _climb(P, c, s, step0, step_min):
    """Greedy ascent on (count, -gap to the next point outside the band).

    A move that only shrinks the gap must shrink it by a quarter step, so the
    walk cannot creep towards a band edge forever.
    """
    def score(c):
        d = np.abs(P @ c)
        inside = d <= s
        gap = np.min(d[~inside] - s) if not np.all(inside) else 0.0
        return int(inside.sum()), -gap

    best = score(c)
    step = step0
    while step >= step_min:
        f = frame_for_pole(c)
        moved = False
        for t in (f.u, -f.u, f.v, -f.v):
            q = normalize(c + step * t)
            sc = score(q)
            if sc[0] > best[0] or (sc[0] == best[0] and sc[1] > best[1] + 0.25 * step):
                best, c, moved = sc, q, True
                break
        if not moved:
            step *= 0.5
    return best[0], c


def max_circle_count(ps: PointSet, radius: Optional[float] = None, search: Optional[SearchParams] = None) -> CircleCount:
    """Largest number of points within ``radius`` (default ``1/m``) of one great circle.

    Candidates: a Fibonacci grid of ``grid_factor * m`` poles; every great
    circle through a point (sweeping the pencil of circles through ``p_j``,
    which contains every circle through a pair); hill-climbing from the
    ``refine_top_k`` best candidates; and, when ``exact_sweep`` is set, the
    pencil of circles whose band has ``p_j`` on its edge. The optimum region
    of the band arrangement always has such a boundary point, so the last
    family makes the count exact up to floating-point ties. Every reported
    count is recounted at the reported pole.
    """
    search = SearchParams() if search is None else search
    m = ps.m
    radius = 1.0 / m if radius is None else float(radius)
    if radius <= 0:
        raise ValueError("radius must be positive")
    P = ps.points
    budget = asdict(search)
    if radius >= math.pi / 2:
        return CircleCount(m, frame_for_pole(P[0]).u, radius, False, budget)
    s = math.sin(radius)

    M = search.grid_factor * m
    C = fibonacci_points(M)
    counts = _kernels.band_counts(C, P, s)
    cand = [C]
    cand_counts = [counts]

    if m >= 2:
        U, V = frames_for_poles(P)
        hs = [0.0, s] if search.exact_sweep else [0.0]
        for h in hs:
            cnt, psi = _kernels.circle_family_sweep(P, U, V, s, h)
            poles = _family_poles(P, U, V, psi, h)
            cand.append(poles)
            cand_counts.append(_kernels.band_counts(poles, P, s))
    C = np.concatenate(cand)
    counts = np.concatenate(cand_counts)

    # top-k distinct candidates, ties by index
    order = np.lexsort((np.arange(counts.size), -counts))[: search.refine_top_k]
    best_i = int(order[0])
    best, pole = int(counts[best_i]), C[best_i]
    step0 = 1.0 / math.sqrt(m)
    step_min = search.step_min_factor / m
    for i in order:
        c_count, c = _climb(P, C[i], s, step0, step_min)
        if c_count > best:
            best, pole = c_count, c
    budget.update(grid_size=M, candidates=int(counts.size), step_max=step0, step_min=step_min)
    return CircleCount(best, np.asarray(pole), radius, not search.exact_sweep, budget)


def pair_circle_poles(ps: PointSet, tol: float = 1e-12) -> np.ndarray:
    """Poles ``normalize(p_j x p_k)`` of the circles through every pair (degenerate pairs skipped)."""
    P = ps.points
    j, k = np.triu_indices(ps.m, 1)
    X = np.cross(P[j], P[k])
    n = np.linalg.norm(X, axis=1)
    keep = n > tol
    return X[keep] / n[keep, None]


def equidistribution_errors(ps: PointSet, lmax: int = 20) -> np.ndarray:
    """``max_k |m^-1 sum_j Y_l^k(p_j)|`` for ``l = 1..lmax`` (entry ``l - 1``)."""
    if lmax < 1:
        raise ValueError("lmax must be >= 1")
    Y = real_sph_harm(lmax, ps.points)
    mean = np.abs(Y.mean(axis=0))
    return np.array([mean[l * l:(l + 1) ** 2].max() for l in range(1, lmax + 1)])


def cap_discrepancy_estimate(ps: PointSet, n_caps: int = 10_000, seed: int = 0, chunk: int = 1000) -> float:
    """Largest ``|fraction of points in cap - normalized cap area|`` over random caps."""
    rng = np.random.default_rng(seed)
    centers = normalize(rng.standard_normal((n_caps, 3)))
    heights = rng.uniform(-1.0, 1.0, n_caps)
    area = 0.5 * (1.0 - heights)
    worst = 0.0
    for s in range(0, n_caps, chunk):
        inside = (centers[s:s + chunk] @ ps.points.T) >= heights[s:s + chunk, None]
        worst = max(worst, float(np.max(np.abs(inside.mean(axis=1) - area[s:s + chunk]))))
    return worst


@dataclass
class Certificate:
    m: int
    min_separation: float
    argmin_pair: tuple
    sep_constant: float
    max_circle_count: int
    worst_pole: list
    circle_radius: float
    circle_count_heuristic: bool
    search_budget: dict
    weyl_sums: list
    cap_discrepancy_estimate: float
    c_floor: Optional[float] = None
    C_ceiling: Optional[int] = None
    weyl_ceiling: Optional[float] = None
    weyl_gated: Optional[bool] = None
    separation_ok: Optional[bool] = None
    clustering_ok: Optional[bool] = None
    weyl_ok: Optional[bool] = None
    passed: Optional[bool] = None

    def to_flat(self) -> dict:
        """Flat dict of scalars and lists (no nested objects)."""
        d = asdict(self)
        budget = d.pop("search_budget")
        d["argmin_pair"] = list(d["argmin_pair"])
        for k, v in budget.items():
            d[f"search_{k}"] = v
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_flat(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        d = json.loads(text)
        budget = {k[len("search_"):]: d.pop(k) for k in list(d) if k.startswith("search_")}
        d["argmin_pair"] = tuple(d["argmin_pair"])
        return cls(search_budget=budget, **d)


def certify(ps: PointSet, lmax: int = 20, radius: Optional[float] = None, search: Optional[SearchParams] = None,
            n_caps: int = 10_000) -> Certificate:
    sep, pair = min_separation(ps) if ps.m >= 2 else (math.pi, (0, 0))
    cc = max_circle_count(ps, radius, search)
    return Certificate(
        m=ps.m,
        min_separation=sep,
        argmin_pair=tuple(int(i) for i in pair),
        sep_constant=sep * math.sqrt(ps.m),
        max_circle_count=cc.count,
        worst_pole=[float(v) for v in cc.pole],
        circle_radius=cc.radius,
        circle_count_heuristic=cc.heuristic,
        search_budget=cc.budget,
        weyl_sums=[float(v) for v in equidistribution_errors(ps, lmax)],
        cap_discrepancy_estimate=cap_discrepancy_estimate(ps, n_caps),
    )


def verify(ps: PointSet, c_floor: float = 0.5, C_ceiling: int = 8, weyl_ceiling: float = 0.1,
           weyl_min_m: int = 256, lmax: int = 20, radius: Optional[float] = None,
           search: Optional[SearchParams] = None) -> Certificate:
    """Certificate with pass/fail flags; the Weyl gate applies only once ``m >= weyl_min_m``."""
    cert = certify(ps, lmax, radius, search)
    cert.c_floor, cert.C_ceiling, cert.weyl_ceiling = c_floor, C_ceiling, weyl_ceiling
    cert.weyl_gated = ps.m >= weyl_min_m
    cert.separation_ok = cert.sep_constant >= c_floor
    cert.clustering_ok = cert.max_circle_count <= C_ceiling
    cert.weyl_ok = (not cert.weyl_gated) or max(cert.weyl_sums) <= weyl_ceiling
    cert.passed = cert.separation_ok and cert.clustering_ok and cert.weyl_ok
    return cert


# ---------------------------------------------------------------- annealer


@dataclass(frozen=True)
class AnnealSchedule:
    iters: int = 10_000
    T0: float = 0.5
    T1: float = 0.002
    scale0: Optional[float] = None  # default 0.3 / sqrt(m)
    scale_decay: float = 0.02  # final scale = scale0 * scale_decay
    grid_size: Optional[int] = None  # default min(max(100 m, 16 pi m^2), 200000)


def anneal_grid_size(m: int) -> int:
    return int(min(max(100 * m, math.ceil(16 * math.pi * m * m)), 200_000))


def anneal_declustering(ps: PointSet, schedule: Optional[AnnealSchedule] = None, min_sep_floor: Optional[float] = None,
                        seed: int = 0, radius: Optional[float] = None) -> PointSet:
    """Metropolis search lowering the worst great-circle count on a fixed pole grid.

    The objective is lexicographic: the grid maximum first, then how many grid
    poles attain it. Moves are tangent perturbations of one point; a move that
    would bring two points closer than ``min_sep_floor`` is rejected. The
    best-seen configuration is returned, and the input is returned instead if
    the full ``max_circle_count`` of the result is not at least as good.
    """
    sch = AnnealSchedule() if schedule is None else schedule
    m = ps.m
    if sch.iters <= 0 or m < 2:
        return ps
    floor = 0.0 if min_sep_floor is None else float(min_sep_floor)
    if min_separation(ps)[0] < floor:
        raise ValueError("input point set already violates min_sep_floor")
    radius = 1.0 / m if radius is None else radius
    s = math.sin(radius)
    rng = np.random.default_rng(seed)

    M = anneal_grid_size(m) if sch.grid_size is None else sch.grid_size
    start = max_circle_count(ps, radius)
    C = np.concatenate([fibonacci_points(M), start.pole[None]])
    P = np.array(ps.points)
    cnt = _kernels.band_counts(C, P, s)

    def score(c):
        top = int(c.max())
        return top + np.count_nonzero(c == top) / (C.shape[0] + 1.0)

    obj = score(cnt)
    best, best_P = obj, P.copy()
    scale0 = 0.3 / math.sqrt(m) if sch.scale0 is None else sch.scale0
    for it in range(sch.iters):
        f = it / max(sch.iters - 1, 1)
        T = sch.T0 * (sch.T1 / sch.T0) ** f
        scale = scale0 * sch.scale_decay ** f
        j = int(rng.integers(m))
        g = rng.standard_normal(3)
        g -= (g @ P[j]) * P[j]
        q = P[j] + scale * g / math.sqrt(2.0)
        q /= np.linalg.norm(q)
        others = np.delete(P, j, axis=0) @ q
        if np.arccos(np.clip(others.max(), -1.0, 1.0)) < floor:
            continue
        new_cnt = cnt - (np.abs(C @ P[j]) <= s) + (np.abs(C @ q) <= s)
        new = score(new_cnt)
        if new <= obj or rng.random() < math.exp(-(new - obj) / T):
            P[j] = q
            cnt, obj = new_cnt, new
            if obj < best:
                best, best_P = obj, P.copy()
    out = PointSet(m, best_P, "annealed", int(seed))
    if max_circle_count(out, radius).count > start.count:
        return ps
    return out


# ---------------------------------------------------------------- file format


def write_points(ps: PointSet, path, fmt: str = "hex") -> Path:
    if fmt not in ("hex", "decimal"):
        raise ValueError("fmt must be 'hex' or 'decimal'")
    conv = float.hex if fmt == "hex" else (lambda v: "%.17g" % v)
    lines = [f"m={ps.m} generator={ps.generator} seed={ps.seed}"]
    lines += [" ".join(conv(float(v)) for v in row) for row in ps.points]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def _parse_float(tok: str) -> float:
    return float.fromhex(tok) if "0x" in tok.lower() else float(tok)


def read_points(path) -> PointSet:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty point file")
    header = dict(kv.split("=", 1) for kv in text[0].split())
    try:
        m, gen, seed = int(header["m"]), header["generator"], int(header["seed"])
    except KeyError as e:
        raise ValueError(f"{path}: header is missing {e.args[0]!r}") from None
    rows = [ln.split() for ln in text[1:] if ln.strip()]
    if len(rows) != m or any(len(r) != 3 for r in rows):
        raise ValueError(f"{path}: expected {m} rows of three coordinates")
    pts = np.array([[_parse_float(t) for t in r] for r in rows])
    return PointSet(m, pts, gen, seed)
