"""Hessian determinant of the Z^2 speed on a slope grid, as CSV, with the W comparison."""
import argparse
import csv
import math
import sys

import numpy as np

from dimergrowth import kernel
from dimergrowth.lattice import Slope


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=21)
    ap.add_argument("--extent", type=float, default=0.45)
    a = ap.parse_args()
    w = csv.writer(sys.stdout)
    w.writerow(["rho1", "rho2", "det", "det_psi", "W", "psi1", "theta"])
    for r1 in np.linspace(-a.extent, a.extent, a.n):
        for r2 in np.linspace(-a.extent, a.extent, a.n):
            rep = kernel.hessian_z2(Slope(float(r1), float(r2)))
            w.writerow([f"{r1:.4f}", f"{r2:.4f}", f"{rep.det:.8e}", f"{rep.det_psi:.8e}",
                        f"{rep.W:.8e}", f"{rep.psi1:.6f}", f"{rep.theta:.6f}"])
    print(f"# W(pi/2, 0) = {kernel.W_closed(math.pi / 2, 0.0):.10f}", file=sys.stderr)


if __name__ == "__main__":
    main()
