"""Scan D at a probe degree and print the pole-sum tails that decide the calibrated value.

    python scripts/calibrate_d.py --N-probe 256 --grid 1,1.5,2,3,4
"""
import argparse

from qebeams.experiment import calibrate_D


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N-probe", type=int, default=256)
    ap.add_argument("--grid", default="1,1.5,2,3,4")
    ap.add_argument("--kind", default="fibonacci")
    args = ap.parse_args()
    cal = calibrate_D(args.N_probe, [float(v) for v in args.grid.split(",")], args.kind)
    print(f"{'D':>5} {'m':>4} {'sup|F|':>10} {'sum_I':>10} {'sum_II':>10} {'sum_III':>10} {'tail':>10}  ok")
    for r in cal.table:
        if r["m"] is None:
            print(f"{r['D']:5.2f}    -  {r['note']}")
            continue
        print(f"{r['D']:5.2f} {r['m']:4d} {r['sup_F']:10.4f} {r['sum_I']:10.4f} {r['sum_II']:10.4g} "
              f"{r['sum_III']:10.4g} {r['tail']:10.4g}  {r['qualifies']}")
    print(f"calibrated D = {cal.D}; tails nonincreasing in D: {cal.monotone}")


if __name__ == "__main__":
    main()
