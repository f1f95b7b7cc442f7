"""Regenerate frozen oracle values in tests/data.

Single-detector rates come from direct 1-D integration of the defining
integral in 40-digit arithmetic (mpmath).  Joint rates come from 2-D
adaptive integration of the bivariate normal density times P1 P2 (scipy
dblquad), which shares no code with the package's 1-D reduction.
"""

import csv
import itertools
import math
from pathlib import Path

import mpmath as mp
from scipy import integrate

OUT = Path(__file__).resolve().parents[1] / "tests" / "data"
mp.mp.dps = 40


def p_single_oracle(m, x, gamma):
    m, x, gamma = mp.mpf(m), mp.mpf(x), mp.mpf(gamma)
    f = lambda y: mp.npdf(y, x, 1) * (1 - mp.exp(-gamma * y))  # noqa: E731
    return mp.quad(f, [m, x, x + 10, mp.inf])


def p_joint_oracle(m, x, gamma, rho):
    c = 1.0 / (2 * math.pi * math.sqrt(1 - rho * rho))

    def f(y2, y1):
        z1, z2 = y1 - x, y2 - x
        q = (z1 * z1 - 2 * rho * z1 * z2 + z2 * z2) / (1 - rho * rho)
        return c * math.exp(-0.5 * q) * -math.expm1(-gamma * y1) * -math.expm1(-gamma * y2)

    val, err = integrate.dblquad(f, m, x + 14, m, x + 14, epsabs=1e-13, epsrel=1e-11)
    return val, err


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    points = list(itertools.product((2, 3, 5), (4, 6, 10), (0.003, 0.01, 0.03)))
    points += [(5, 0, 0.01), (1, 0, 0.5), (0.5, 2, 1.0), (5, 10, 0.001), (3, 8, 2.0)]
    with open(OUT / "p_single_oracle.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "x", "gamma", "p"])
        for m, x, g in points:
            w.writerow([m, x, g, mp.nstr(p_single_oracle(m, x, g), 20)])
    with open(OUT / "p_joint_oracle.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "x", "gamma", "rho", "p", "abs_err"])
        for m, x, g, r in [(3, 6, 0.01, 0.0), (3, 6, 0.01, 0.2), (3, 6, 0.01, 0.5),
                           (3, 6, 0.01, 0.8), (2, 4, 0.3, 0.5), (1, 1, 1.0, -0.4)]:
            val, err = p_joint_oracle(m, x, g, r)
            w.writerow([m, x, g, r, repr(val), f"{err:.2e}"])


if __name__ == "__main__":
    main()
