"""Equidistribution diagnostics for beam superpositions.

Full matrix elements of a quantized observable are replaced by the two
quantities they reduce to for beam sums: averages of the observable along the
beam circles (diagonal part) and the pairwise beam overlaps (off-diagonal
part). Physical-space matrix elements and a coherent-state (Husimi) density
over the space of oriented circles are reported alongside.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .beams import GaussianBeam, harmonic_space_dim, log_norm_constant
from .pointsets import PointSet, generate
from .quadrature import FOUR_PI, Observable, SphereRule, circle_averages, liouville_average, observable_bank, sphere_rule
from .sphere import frames_for_poles, geodesic_distance
from .superposition import BeamSuperposition, build

_LIOUVILLE_CACHE: dict = {}


def semiclassical_h(N: int, convention: str = "inverse") -> float:
    if convention == "inverse":
        return 1.0 / N
    if convention == "sqrt":
        return 1.0 / math.sqrt(N * (N + 1.0))
    raise ValueError(f"unknown h convention {convention!r}")


def _abs2_on_rule(u, rule: SphereRule) -> np.ndarray:
    if isinstance(u, GaussianBeam):
        return u.abs(rule.nodes) ** 2
    A = u.eval_grid(np.arccos(rule.t), rule.theta)
    return (A * A).ravel()


def physical_matrix_element(u: Union[BeamSuperposition, GaussianBeam], a: Observable,
                            rule: Optional[SphereRule] = None) -> float:
    """``\\int a |u|^2 dA`` for a position observable, by a rule of degree ``>= 2N + deg(a)``."""
    if not a.position_only:
        raise ValueError(f"{a.name!r} depends on the covector; physical matrix elements need a position observable")
    need = 2 * u.N + a.degree
    rule = sphere_rule(need) if rule is None else rule
    if rule.degree < need:
        raise ValueError(f"quadrature rule of degree {rule.degree} is too coarse (need >= {need})")
    return _element(a, _abs2_on_rule(u, rule), rule)


def _element(a: Observable, abs2, rule: SphereRule) -> float:
    return float(np.sum(rule.weights * (a(rule.nodes) * abs2)))


def position_average(a: Observable, rule: Optional[SphereRule] = None) -> float:
    """``(1/4pi) \\int a dA``, the value physical matrix elements should approach."""
    rule = sphere_rule(max(a.degree, 2)) if rule is None else rule
    return float(np.sum(rule.weights * a(rule.nodes)) / FOUR_PI)


def _frames(F):
    if isinstance(F, BeamSuperposition):
        return F.U, F.V
    if isinstance(F, PointSet):
        return frames_for_poles(F.points)
    return frames_for_poles(np.asarray(F, float))


def circle_average_sum(F, a: Observable, n_circle: int = 256) -> float:
    """``(1/m) sum_j (1/2pi) \\int_{G_j} a dl`` over the beam circles (or the circles of given poles)."""
    U, V = _frames(F)
    return float(np.mean(circle_averages(U, V, a, n_circle)))


def liouville_value(a: Observable, pole_rule: Optional[SphereRule] = None, n_circle: int = 256) -> float:
    key = (a.name, id(a.func), None if pole_rule is None else pole_rule.degree, n_circle)
    if key not in _LIOUVILLE_CACHE:
        _LIOUVILLE_CACHE[key] = liouville_average(a, pole_rule, n_circle)
    return _LIOUVILLE_CACHE[key]


def qe_defect(F, a: Observable, pole_rule: Optional[SphereRule] = None, n_circle: int = 256) -> float:
    return abs(circle_average_sum(F, a, n_circle) - liouville_value(a, pole_rule, n_circle))


@dataclass(frozen=True)
class OffdiagScan:
    max_abs: float
    argmax: Optional[tuple]
    table: list  # rows (j, k, beta, bound, |overlap|)
    pruned: bool


def offdiagonal_scan(N: int, ps: PointSet, prune: bool = True, rule: Optional[SphereRule] = None,
                     precision: str = "double") -> OffdiagScan:
    """Largest ``|<Q_j, Q_k>|`` over ``j != k``.

    With ``prune`` pairs whose bound ``cos(beta/2)^(2N)`` is below ``1e-16``
    are skipped (their overlap is then at most that bound). Without pruning,
    tiny overlaps are measured down to the quadrature round-off floor, about
    ``1e-15`` in double and ``1e-18`` with ``precision="extended"``.
    """
    F = build(N, 1.0, ps, override=True)
    rows = F.overlap_table(1e-16 if prune else 0.0, rule, precision)
    table = [(j, k, beta, bound, abs(ov)) for j, k, beta, bound, ov in rows]
    if not table:
        return OffdiagScan(0.0, None, [], prune)
    i = int(np.argmax([r[4] for r in table]))
    return OffdiagScan(float(table[i][4]), (table[i][0], table[i][1]), table, prune)


def husimi_density(u, N: int, pole_grid: Optional[PointSet] = None, rule: Optional[SphereRule] = None) -> np.ndarray:
    """``|<u, Q_p>|^2`` for each pole ``p`` of the grid (default: 4096 Fibonacci poles)."""
    if pole_grid is None:
        pole_grid = generate("fibonacci", 4096)
    rule = sphere_rule(2 * N) if rule is None else rule
    if rule.degree < 2 * N:
        raise ValueError(f"quadrature rule of degree {rule.degree} is too coarse (need >= {2 * N})")
    if u.N != N:
        raise ValueError(f"function has degree {u.N}, expected {N}")
    x = rule.nodes
    f = u.eval(x)
    U, V = frames_for_poles(pole_grid.points)
    amp = math.exp(log_norm_constant(N))
    ov = _kernels.project_onto_beams(x, rule.weights, np.ascontiguousarray(f), U, V, amp, N, _kernels.cutoff_r2(N))
    return np.abs(ov) ** 2


def husimi_mass_near(density, pole_grid: PointSet, centers, radius: float) -> float:
    """Share of the density carried by grid poles within ``radius`` of some center."""
    d = geodesic_distance(pole_grid.points[:, None, :], np.asarray(centers)[None, :, :]).min(axis=1)
    return float(density[d <= radius].sum() / density.sum())


@dataclass
class ObservableRecord:
    name: str
    kind: str
    physical_element: Optional[float]
    position_average: Optional[float]
    circle_average_sum: float
    liouville_value: float
    defect: float


@dataclass
class QEReport:
    N: int
    D: float
    m: int
    h: float
    h_convention: str
    records: list = field(default_factory=list)
    offdiag_max: float = 0.0
    husimi_summary: Optional[dict] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "QEReport":
        d = dict(d)
        d["records"] = [ObservableRecord(**r) for r in d["records"]]
        return cls(**d)

    def csv_rows(self) -> list[dict]:
        return [{"N": self.N, "D": self.D, "m": self.m, **asdict(r)} for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = self.csv_rows()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["N"])
        w.writeheader()
        for r in rows:
            w.writerow({k: ("%.17g" % v if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()


def qe_report(F: BeamSuperposition, observables: Optional[Sequence[Observable]] = None, n_circle: int = 256,
              pole_rule: Optional[SphereRule] = None, h_convention: str = "inverse", physical: bool = True,
              husimi_grid: Optional[PointSet] = None, prune: bool = True) -> QEReport:
    """All diagnostics for ``F`` (normalized internally for the physical elements)."""
    obs = observable_bank() if observables is None else list(observables)
    u = F.normalized()
    rule = abs2 = None
    if physical:
        deg = 2 * F.N + max([a.degree for a in obs if a.position_only] or [0])
        rule = sphere_rule(deg)
        abs2 = _abs2_on_rule(u, rule)
    rep = QEReport(F.N, F.D, F.m, semiclassical_h(F.N, h_convention), h_convention)
    for a in obs:
        cas = circle_average_sum(F, a, n_circle)
        lv = liouville_value(a, pole_rule, n_circle)
        pe = pa = None
        if physical and a.position_only:
            pe = _element(a, abs2, rule)
            pa = position_average(a)
        rep.records.append(ObservableRecord(a.name, a.kind, pe, pa, cas, lv, abs(cas - lv)))
    rep.offdiag_max = offdiagonal_scan(F.N, F.point_set, prune).max_abs if F.m > 1 else 0.0
    if husimi_grid is not None:
        dens = husimi_density(u, F.N, husimi_grid) * harmonic_space_dim(F.N)
        rep.husimi_summary = {
            "grid_size": husimi_grid.m,
            "min": float(dens.min()),
            "max": float(dens.max()),
            "mean": float(dens.mean()),
        }
    return rep
