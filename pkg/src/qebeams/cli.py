"""Command line entry point: ``qebeams <subcommand> ...``.

Exit codes: 0 success, 2 certificate failure, 3 resource guard, 4 bad config.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .experiment import (ConfigError, ResourceGuardError, SweepConfig, calibrate_D, emit_report, make_points,
                         read_report, run_sweep)
from .pointsets import (AnnealSchedule, SearchParams, anneal_declustering, generate, min_separation, read_points,
                        verify, write_points)
from .qe import qe_report
from .quadrature import BANK, observable_bank
from .superposition import CertificateError, build, choose_m

EXIT_OK, EXIT_CERT, EXIT_RESOURCE, EXIT_CONFIG = 0, 2, 3, 4

log = logging.getLogger("qebeams")


def _emit(obj):
    print(json.dumps(obj, sort_keys=True, indent=1))


def _csv_floats(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _csv_ints(s):
    return [int(v) for v in s.split(",") if v.strip()]


def _search(args) -> SearchParams:
    return SearchParams(grid_factor=args.grid_factor, refine_top_k=args.top_k)


def _points_for(args, N: int, D: float):
    if args.points:
        return read_points(args.points)
    return make_points(args.kind, choose_m(N, D), args.seed)


def _superposition(args):
    ps = _points_for(args, args.N, args.D)
    return build(args.N, args.D, ps, override=args.override)


# ---------------------------------------------------------------- subcommands


def cmd_gen_points(args):
    ps = generate(args.kind, args.m, args.seed)
    if args.out:
        write_points(ps, args.out, args.format)
    else:
        sys.stdout.write(f"m={ps.m} generator={ps.generator} seed={ps.seed}\n")
        for row in ps.points:
            sys.stdout.write(" ".join(float(v).hex() for v in row) + "\n")
    return EXIT_OK


def cmd_verify_points(args):
    ps = read_points(args.file)
    cert = verify(ps, args.c_floor, args.C_ceiling, args.weyl_ceiling, radius=args.radius, search=_search(args))
    _emit(cert.to_flat())
    return EXIT_OK if cert.passed else EXIT_CERT


def cmd_anneal(args):
    ps = read_points(args.file)
    floor = args.min_sep_floor if args.min_sep_floor is not None else 0.8 * min_separation(ps)[0]
    out = anneal_declustering(ps, AnnealSchedule(iters=args.iters), floor, args.seed)
    write_points(out, args.out, args.format)
    return EXIT_OK


def cmd_build(args):
    _emit(_superposition(args).provenance())
    return EXIT_OK


def cmd_norms(args):
    F = _superposition(args)
    n2, off = F.l2_norm_analytic()
    out = {"N": F.N, "m": F.m, "l2_analytic": n2, "offdiagonal_total": off}
    if not args.analytic_only:
        out["l2_quadrature"] = F.l2_norm_quadrature()
        out["relative_difference"] = abs(out["l2_quadrature"] - n2) / n2
    _emit(out)
    return EXIT_OK


def cmd_supnorm(args):
    F = _superposition(args)
    rec = F.sup_norm(args.oversample)
    sums = F.pole_sum_decomposition(rec.argmax)
    n2, _ = F.l2_norm_analytic()
    _emit({"sup_norm": asdict(rec), "sup_u": rec.value / n2**0.5, "pole_sums": asdict(sums)})
    return EXIT_OK


def cmd_qe(args):
    F = _superposition(args)
    obs = observable_bank(args.observables.split(",") if args.observables else None)
    rep = qe_report(F, obs, args.n_circle, h_convention=args.h_convention)
    print(rep.to_csv() if args.csv else rep.to_json())
    return EXIT_OK


def _config_from_args(args) -> SweepConfig:
    if args.config:
        cfg = SweepConfig.from_toml(args.config)
    else:
        cfg = SweepConfig()
    over = {
        "N_list": args.N_list, "D": args.D, "point_kind": args.kind, "seed": args.seed, "out_dir": args.out,
        "threads": args.threads, "oversample": args.oversample, "husimi_grid": args.husimi_grid,
        "observables": args.observables.split(",") if args.observables else None,
        "allow_large_N": args.allow_large_N or None, "override": args.override or None,
    }
    d = cfg.to_dict()
    d.update({k: v for k, v in over.items() if v is not None})
    if isinstance(d["D"], str) and d["D"] != "calibrate":
        try:
            d["D"] = float(d["D"])
        except ValueError:
            raise ConfigError(f"D must be a number or 'calibrate', got {d['D']!r}") from None
    return SweepConfig.from_dict(d).validate()


def cmd_sweep(args):
    cfg = _config_from_args(args)
    rec = run_sweep(cfg, log=log.info)
    paths = emit_report(rec, cfg.out_dir)
    print(paths["summary"].read_text(), end="")
    return EXIT_OK


def cmd_calibrate_d(args):
    cal = calibrate_D(args.N_probe, args.D_grid, args.kind, args.seed, args.oversample)
    _emit(cal.to_dict())
    return EXIT_OK


def cmd_report(args):
    rec = read_report(args.dir)
    print(Path(args.dir, "summary.txt").read_text(), end="")
    if rec.content_hash() != json.loads(Path(args.dir, "sweep.json").read_text()).get("hash"):
        log.warning("content hash does not match the stored record")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_points_args(p, with_file=True):
    p.add_argument("--kind", default="fibonacci", choices=["fibonacci", "spiral", "uniform-random", "annealed"])
    p.add_argument("--seed", type=int, default=0)
    if with_file:
        p.add_argument("--points", help="point file (overrides --kind)")


def _add_beam_args(p):
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--override", action="store_true", help="skip the m = choose_m(N, D) and certificate checks")
    _add_points_args(p)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qebeams", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen-points", help="generate a pole configuration")
    p.add_argument("--kind", default="fibonacci", choices=["fibonacci", "spiral", "uniform-random"])
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--format", default="hex", choices=["hex", "decimal"])
    p.set_defaults(func=cmd_gen_points)

    p = sub.add_parser("verify-points", help="certify a point file")
    p.add_argument("file")
    p.add_argument("--c-floor", type=float, default=0.5)
    p.add_argument("--C-ceiling", type=int, default=8)
    p.add_argument("--weyl-ceiling", type=float, default=0.1)
    p.add_argument("--radius", type=float, default=None, help="clustering radius (default 1/m)")
    p.add_argument("--grid-factor", type=int, default=100)
    p.add_argument("--top-k", type=int, default=20)
    p.set_defaults(func=cmd_verify_points)

    p = sub.add_parser("anneal", help="reduce great-circle clustering of a point file")
    p.add_argument("file")
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-sep-floor", type=float, default=None, help="default: 0.8 x input separation")
    p.add_argument("--format", default="hex", choices=["hex", "decimal"])
    p.set_defaults(func=cmd_anneal)

    for name, fn, hlp in [("build", cmd_build, "build F_N and print its provenance"),
                          ("norms", cmd_norms, "L2 norm by overlaps and by quadrature"),
                          ("supnorm", cmd_supnorm, "sup norm with certified gap"),
                          ("qe", cmd_qe, "equidistribution report")]:
        p = sub.add_parser(name, help=hlp)
        _add_beam_args(p)
        p.set_defaults(func=fn)
        if name == "norms":
            p.add_argument("--analytic-only", action="store_true")
        if name == "supnorm":
            p.add_argument("--oversample", type=int, default=4)
        if name == "qe":
            p.add_argument("--observables", help=f"comma list from {sorted(BANK)}")
            p.add_argument("--n-circle", type=int, default=256)
            p.add_argument("--h-convention", default="inverse", choices=["inverse", "sqrt"])
            p.add_argument("--csv", action="store_true")

    p = sub.add_parser("sweep", help="run an N sweep and write reports")
    p.add_argument("--config", help="TOML file with SweepConfig keys")
    p.add_argument("--N-list", type=_csv_ints, default=None)
    p.add_argument("--D", default=None, help="number or 'calibrate'")
    p.add_argument("--kind", default=None, choices=["fibonacci", "spiral", "uniform-random", "annealed"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--oversample", type=int, default=None)
    p.add_argument("--husimi-grid", type=int, default=None)
    p.add_argument("--observables", default=None)
    p.add_argument("--allow-large-N", action="store_true")
    p.add_argument("--override", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate-d", help="choose D by the pole-sum tail test")
    p.add_argument("--N-probe", type=int, default=256)
    p.add_argument("--D-grid", type=_csv_floats, default=[1.0, 1.5, 2.0, 3.0, 4.0])
    p.add_argument("--oversample", type=int, default=4)
    _add_points_args(p, with_file=False)
    p.set_defaults(func=cmd_calibrate_d)

    p = sub.add_parser("report", help="print a stored sweep summary")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:  # argparse uses 2, which is taken by certificate failures
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CertificateError as e:
        print(f"certificate failure: {e}", file=sys.stderr)
        return EXIT_CERT
    except ResourceGuardError as e:
        print(f"resource guard: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, ValueError, OSError) as e:
        print(f"bad configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
