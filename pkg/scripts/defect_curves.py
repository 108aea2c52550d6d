"""Circle-average defects against m for Fibonacci (and optionally annealed) pole sets.

Writes a plot-ready CSV with one row per (point kind, m, observable).

    python scripts/defect_curves.py --m 8,16,32,64,128,256,512,1024 --out defects_vs_m.csv
"""
import argparse
import csv

from qebeams.experiment import make_points
from qebeams.pointsets import equidistribution_errors
from qebeams.quadrature import observable_bank
from qebeams.qe import circle_average_sum, liouville_value


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", default="8,16,32,64,128,256,512,1024")
    ap.add_argument("--kinds", default="fibonacci")
    ap.add_argument("--out", default="defects_vs_m.csv")
    args = ap.parse_args()
    ms = [int(v) for v in args.m.split(",")]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "m", "observable", "circle_average_sum", "liouville", "defect", "weyl_max"])
        for kind in args.kinds.split(","):
            for m in ms:
                ps = make_points(kind, m, 0)
                weyl = float(equidistribution_errors(ps, 20).max())
                for a in observable_bank():
                    cas, lv = circle_average_sum(ps, a), liouville_value(a)
                    w.writerow([kind, m, a.name, "%.17g" % cas, "%.17g" % lv, "%.17g" % abs(cas - lv), "%.17g" % weyl])
                    print(f"{kind:10s} m={m:5d} {a.name:12s} defect={abs(cas - lv):.3e}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
