"""Sweeps over the degree N: configuration, driver, D calibration and report files."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .beams import norm_constant
from .pointsets import AnnealSchedule, PointSet, anneal_declustering, generate, min_separation, verify
from .qe import QEReport, qe_report
from .quadrature import BANK, observable_bank, predicted_rule_bytes
from .superposition import CertificateError, build, choose_m

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

MAX_DEFAULT_N = 1024
MAX_LARGE_N = 4096
POINT_KINDS = ("fibonacci", "spiral", "uniform-random", "annealed")


class ConfigError(ValueError):
    pass


class ResourceGuardError(MemoryError):
    pass


@dataclass
class SweepConfig:
    N_list: tuple = (64, 128, 256, 512, 1024)
    D: Union[float, str] = "calibrate"
    point_kind: str = "fibonacci"
    seed: int = 0
    quad_margin: int = 2
    observables: tuple = tuple(BANK)
    out_dir: str = "runs/sweep"
    threads: Optional[int] = None
    oversample: int = 4
    n_circle: int = 256
    husimi_grid: int = 256
    h_convention: str = "inverse"
    allow_large_N: bool = False
    override: bool = False
    memory_budget: int = 2 * 1024**3
    anneal_iters: int = 10_000
    calibrate_N: int = 256
    calibrate_grid: tuple = (1.0, 1.5, 2.0, 3.0, 4.0)

    def __post_init__(self):
        self.N_list = tuple(int(n) for n in self.N_list)
        self.observables = tuple(self.observables)
        self.calibrate_grid = tuple(float(d) for d in self.calibrate_grid)
        if not isinstance(self.D, str):
            self.D = float(self.D)

    def validate(self, D: Optional[float] = None) -> "SweepConfig":
        """Raise ``ConfigError`` on any inconsistency; ``D`` overrides a pending ``"calibrate"``."""
        if not self.N_list:
            raise ConfigError("N_list is empty")
        if any(b <= a for a, b in zip(self.N_list, self.N_list[1:])):
            raise ConfigError(f"N_list must be strictly ascending, got {list(self.N_list)}")
        if self.N_list[0] < 1:
            raise ConfigError("degrees must be >= 1")
        top = MAX_LARGE_N if self.allow_large_N else MAX_DEFAULT_N
        if self.N_list[-1] > top:
            hint = "" if self.allow_large_N else " (set allow_large_N for up to 4096)"
            raise ConfigError(f"N={self.N_list[-1]} exceeds the limit {top}{hint}")
        if isinstance(self.D, str) and self.D != "calibrate":
            raise ConfigError(f"D must be a number or 'calibrate', got {self.D!r}")
        D = self.D if D is None else D
        if not isinstance(D, str):
            if D <= 0:
                raise ConfigError("D must be positive")
            bad = [N for N in self.N_list if math.sqrt(N) / D**2 < 2.0]
            if bad:
                raise ConfigError(f"sqrt(N)/D^2 < 2 for N in {bad} at D={D}")
        if self.point_kind not in POINT_KINDS:
            raise ConfigError(f"unknown point_kind {self.point_kind!r}")
        unknown = [o for o in self.observables if o not in BANK]
        if unknown:
            raise ConfigError(f"unknown observables {unknown}; known: {sorted(BANK)}")
        if self.oversample < 2:
            raise ConfigError("oversample must be >= 2")
        if self.h_convention not in ("inverse", "sqrt"):
            raise ConfigError("h_convention must be 'inverse' or 'sqrt'")
        if self.quad_margin < 0 or self.n_circle < 4 or self.husimi_grid < 0:
            raise ConfigError("quad_margin >= 0, n_circle >= 4 and husimi_grid >= 0 required")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("N_list", "observables", "calibrate_grid"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_toml(cls, path) -> "SweepConfig":
        try:
            with open(path, "rb") as fh:
                d = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_dict(d)


def quadrature_degree(N: int, config: SweepConfig) -> int:
    obs_deg = max((BANK[o].degree for o in config.observables), default=0)
    return 2 * N + max(config.quad_margin, obs_deg)


def check_resources(N: int, config: SweepConfig) -> int:
    """Predicted bytes of the largest quadrature rule for this ``N``; raises if over budget."""
    if N > MAX_DEFAULT_N:
        return 0  # analytic-only: no full rule is materialized
    need = predicted_rule_bytes(quadrature_degree(N, config))
    if need > config.memory_budget:
        n_phi = quadrature_degree(N, config) // 2 + 1
        raise ResourceGuardError(
            f"N={N}: the quadrature rule needs {need} bytes ({n_phi * (quadrature_degree(N, config) + 1)} nodes), "
            f"over the budget of {config.memory_budget} bytes"
        )
    return need


def make_points(kind: str, m: int, seed: int, anneal_iters: int = 10_000) -> PointSet:
    """Poles for one run; ``annealed`` starts from the Fibonacci lattice."""
    if kind != "annealed":
        return generate(kind, m, seed)
    base = generate("fibonacci", m, seed)
    if m < 3:
        return base
    floor = 0.8 * min_separation(base)[0]
    return anneal_declustering(base, AnnealSchedule(iters=anneal_iters), floor, seed)


@dataclass
class NRecord:
    N: int
    m: int
    C_N: float
    certificate: dict
    l2_analytic: float
    offdiagonal_total: float
    l2_quadrature: Optional[float]
    sup_F: float
    sup_F_record: dict
    sup_u: float
    running_slope: Optional[float]
    pole_sums: dict
    predicted_rule_bytes: int
    qe: dict
    provenance_hash: str


@dataclass
class SweepRecord:
    config: dict
    D: float
    calibration: Optional[dict]
    rows: list
    L: float
    slope: Optional[float]
    c1: float
    meta: dict = field(default_factory=dict, compare=False)

    def numeric_dict(self) -> dict:
        d = asdict(self)
        d.pop("meta")
        return d

    def content_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.numeric_dict(), sort_keys=True).encode()).hexdigest()

    def to_dict(self) -> dict:
        d = self.numeric_dict()
        d["meta"] = dict(self.meta)
        d["hash"] = self.content_hash()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRecord":
        d = dict(d)
        d.pop("hash", None)
        d["rows"] = [NRecord(**r) for r in d["rows"]]
        return cls(**d)


def _plain(x):
    """JSON-shaped copy (tuples become lists) so in-memory records equal their read-back."""
    return json.loads(json.dumps(x))


def loglog_slope(N, y) -> Optional[float]:
    if len(N) < 2:
        return None
    return float(np.polyfit(np.log(np.asarray(N, float)), np.log(np.asarray(y, float)), 1)[0])


@dataclass
class Calibration:
    D: float
    N_probe: int
    table: list  # dicts per D
    monotone: bool

    def to_dict(self) -> dict:
        return asdict(self)


def calibrate_D(N_probe: int = 256, D_grid=(1.0, 1.5, 2.0, 3.0, 4.0), point_kind: str = "fibonacci", seed: int = 0,
                oversample: int = 4, margin: float = 2.0, anneal_iters: int = 10_000) -> Calibration:
    """Smallest D whose Group II + III pole sum at the measured argmax is below ``1 / margin``.

    Also reports whether those tails are nonincreasing along the grid.
    """
    grid = sorted(float(d) for d in D_grid)
    if not grid:
        raise ConfigError("empty D grid; supply candidate values such as 1,1.5,2,3,4")
    table = []
    for D in grid:
        try:
            m = choose_m(N_probe, D)
        except ValueError as e:
            table.append({"D": D, "m": None, "tail": None, "qualifies": False, "note": str(e)})
            continue
        ps = make_points(point_kind, m, seed, anneal_iters)
        F = build(N_probe, D, ps, override=True)
        sup = F.sup_norm(oversample)
        sums = F.pole_sum_decomposition(sup.argmax)
        tail = sums.tail
        table.append({"D": D, "m": m, "sup_F": sup.value, "sum_I": sums.sum_I, "sum_II": sums.sum_II,
                      "sum_III": sums.sum_III, "tail": tail, "qualifies": bool(margin * tail < 1.0)})
    ok = [r for r in table if r["qualifies"]]
    if not ok:
        raise ConfigError(f"no D in {grid} passes the tail test at N={N_probe}; try a larger grid")
    tails = [r["tail"] for r in table if r["tail"] is not None]
    monotone = all(b <= a + 1e-12 for a, b in zip(tails, tails[1:]))
    return Calibration(ok[0]["D"], N_probe, table, monotone)


def _set_threads(n: Optional[int]):
    if n is None:
        return
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def run_sweep(config: SweepConfig, log=print) -> SweepRecord:
    """Full pipeline per N: points, certificate, build, norms, sup norm and QE report."""
    config.validate()
    _set_threads(config.threads)
    t0 = time.time()
    calibration = None
    if config.D == "calibrate":
        calibration = calibrate_D(config.calibrate_N, config.calibrate_grid, config.point_kind, config.seed,
                                  config.oversample, anneal_iters=config.anneal_iters)
        D = calibration.D
        log(f"calibrated D = {D} (tails monotone: {calibration.monotone})")
    else:
        D = float(config.D)
    config.validate(D)
    for N in config.N_list:
        check_resources(N, config)

    obs = observable_bank(config.observables)
    rows, Ns, sups = [], [], []
    for N in config.N_list:
        m = choose_m(N, D)
        ps = make_points(config.point_kind, m, config.seed, config.anneal_iters)
        cert = verify(ps)
        if not cert.passed and not config.override:
            raise CertificateError(
                f"N={N}: point set ({config.point_kind}, m={m}) failed verification "
                f"(separation {cert.separation_ok}, clustering {cert.clustering_ok}, weyl {cert.weyl_ok})"
            )
        F = build(N, D, ps, override=config.override, certificate=cert)
        large = N > MAX_DEFAULT_N
        n2, off = F.l2_norm_analytic()
        l2q = None if large else F.l2_norm_quadrature()
        sup = F.sup_norm(config.oversample)
        sup_u = sup.value / math.sqrt(n2)
        Ns.append(N)
        sups.append(sup_u)
        sums = F.pole_sum_decomposition(sup.argmax)
        husimi = generate("fibonacci", config.husimi_grid) if config.husimi_grid > 0 else None
        rep = qe_report(F, obs, config.n_circle, h_convention=config.h_convention, physical=not large,
                        husimi_grid=husimi)
        rows.append(NRecord(
            N=N, m=m, C_N=norm_constant(N), certificate=_plain(cert.to_flat()), l2_analytic=n2, offdiagonal_total=off,
            l2_quadrature=l2q, sup_F=sup.value, sup_F_record=_plain(asdict(sup)), sup_u=sup_u,
            running_slope=loglog_slope(Ns, sups), pole_sums=_plain(asdict(sums)),
            predicted_rule_bytes=check_resources(N, config), qe=_plain(rep.to_dict()),
            provenance_hash=F.provenance(sup)["hash"],
        ))
        log(f"N={N} m={m} |F|^2={n2:.12g} sup|u_N|={sup_u:.6f} gap={sup.certified_gap:.3g}")
    rec = SweepRecord(
        config=_plain(config.to_dict()), D=D,
        calibration=None if calibration is None else _plain(calibration.to_dict()),
        rows=rows, L=max(sups), slope=loglog_slope(Ns, sups), c1=max(r.C_N for r in rows),
        meta={"elapsed_s": time.time() - t0, "finished": time.strftime("%Y-%m-%dT%H:%M:%S")},
    )
    return rec


# ---------------------------------------------------------------- report files


def _g(v):
    return "%.17g" % v if isinstance(v, float) else ("" if v is None else v)


PER_N_COLUMNS = ("N", "m", "C_N", "l2_analytic", "offdiagonal_total", "l2_quadrature", "sup_F", "sup_u",
                 "running_slope")


def emit_report(record: SweepRecord, out_dir) -> dict:
    """Write ``sweep.json`` (full record), ``per_n.csv``, ``defects.csv`` and ``summary.txt``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {k: out / v for k, v in
                 dict(json="sweep.json", per_n="per_n.csv", defects="defects.csv", summary="summary.txt").items()}
        paths["json"].write_text(json.dumps(record.to_dict(), sort_keys=True, indent=1))
        with open(paths["per_n"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(PER_N_COLUMNS + ("max_circle_count", "sep_constant", "sum_I", "sum_II", "sum_III"))
            for r in record.rows:
                w.writerow([_g(getattr(r, c)) for c in PER_N_COLUMNS] + [
                    r.certificate["max_circle_count"], _g(r.certificate["sep_constant"]),
                    _g(r.pole_sums["sum_I"]), _g(r.pole_sums["sum_II"]), _g(r.pole_sums["sum_III"])])
        with open(paths["defects"], "w", newline="") as fh:
            rows = [row for r in record.rows for row in QEReport.from_dict(r.qe).csv_rows()]
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for row in rows:
                w.writerow({k: _g(v) for k, v in row.items()})
        lines = [f"D = {_g(record.D)}", f"L = max sup|u_N| = {_g(record.L)}",
                 f"slope of log sup|u_N| vs log N = {_g(record.slope)}", f"c1 = max C_N = {_g(record.c1)}",
                 "max_circle_count values are search results, not proofs of a uniform bound",
                 f"hash = {record.content_hash()}"]
        for r in record.rows:
            lines.append(f"N={r.N} m={r.m} sup|u_N|={_g(r.sup_u)} |F|^2={_g(r.l2_analytic)}")
        paths["summary"].write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise OSError(f"cannot write report to {out}: {e}") from e
    return paths


def read_report(out_dir) -> SweepRecord:
    d = json.loads((Path(out_dir) / "sweep.json").read_text())
    return SweepRecord.from_dict(d)
