"""Recompute the reference values frozen in tests/oracles.py and print them."""
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import numpy as np  # noqa: E402
from oracles import (LIOUVILLE, band_count_bruteforce, beam_abs_direct, circle_average_sum_closed_form,  # noqa: E402
                     fib_points, liouville_monte_carlo, min_separation_chordal, log_norm_constant_mp, min_separation_bruteforce, weyl_sums_scipy)


def main():
    fr = {
        "log_norm_constant": {N: log_norm_constant_mp(N) for N in [1, 2, 10, 100, 1000]},
        "beam_abs_N100_d0.3": beam_abs_direct(100, 0.3),
        "fib_sep_constant": {m: min_separation_chordal(fib_points(m)) * np.sqrt(m) for m in [16, 64, 256, 1024, 4096]},
        "fib_min_separation_m100": min_separation_bruteforce(fib_points(100)),
        "fib_weyl_max": {m: float(weyl_sums_scipy(fib_points(m), 20).max()) for m in [256, 1024, 4096]},
        "fib256_grid1000_count": int(band_count_bruteforce(fib_points(256), fib_points(256_000), 1 / 256).max()),
        "liouville_mc": {a: liouville_monte_carlo(a) for a in ["xi3^2", "x1^2*xi3^2", "x3^2"]},
        "defects": {a: [abs(circle_average_sum_closed_form(a, fib_points(m)) - LIOUVILLE[a]) for m in [8, 32, 128, 512]]
                    for a in LIOUVILLE if a != "one"},
    }
    print(json.dumps(fr, indent=1))


if __name__ == "__main__":
    main()
