"""Run the default N sweep (or one from a TOML config) and write the report files.

    python scripts/run_sweep.py --out runs/sweep
    python scripts/run_sweep.py --config my.toml
"""
import argparse

from qebeams.experiment import SweepConfig, emit_report, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--out", default=None)
    ap.add_argument("--kind", default=None, choices=["fibonacci", "spiral", "uniform-random", "annealed"])
    args = ap.parse_args()
    cfg = SweepConfig.from_toml(args.config) if args.config else SweepConfig()
    if args.out:
        cfg.out_dir = args.out
    if args.kind:
        cfg.point_kind = args.kind
    rec = run_sweep(cfg.validate())
    paths = emit_report(rec, cfg.out_dir)
    print(paths["summary"].read_text(), end="")


if __name__ == "__main__":
    main()
