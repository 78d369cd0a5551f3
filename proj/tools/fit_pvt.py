#!/usr/bin/env python3
"""Fits the PVT delay-scale polynomial used by pfdlab::PvtModel.

s(V, T) = 1 + a*dV + b*dT + c*dV*dT + e*dT^2, dV = V - 1.0, dT = T - 25.

Anchors: mean width ratio 1.1 V / 0.9 V over the temperature grid is 1.10,
100 C / 25 C at nominal supply is 1.055, and a 50 ps nominal pulse spans
44 ps at (-25 C, 0.9 V) to 52 ps at (125 C, 1.1 V).

The plain separable form (1 + a dV)(1 + b dT) cannot meet all four anchors;
run with --separable to see its residuals.
"""
import argparse

import numpy as np
from scipy.optimize import least_squares

TEMPS = np.array([-25.0, 0.0, 25.0, 50.0, 75.0, 100.0, 125.0])
NOMINAL_PS = 50.0


def scale(p, vdd, temp):
    a, b, c, e = p
    dv, dt = vdd - 1.0, temp - 25.0
    return 1 + a * dv + b * dt + c * dv * dt + e * dt * dt


def separable(p, vdd, temp):
    a, b = p
    return (1 + a * (vdd - 1.0)) * (1 + b * (temp - 25.0))


def residuals(f):
    def res(p):
        vr = np.mean(f(p, 1.1, TEMPS) / f(p, 0.9, TEMPS))
        tr = f(p, 1.0, 100.0) / f(p, 1.0, 25.0)
        return [
            (vr - 1.10) / 0.02,
            (tr - 1.055) / 0.01,
            NOMINAL_PS * f(p, 0.9, -25.0) - 44.0,
            NOMINAL_PS * f(p, 1.1, 125.0) - 52.0,
        ]

    return res


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--separable", action="store_true", help="also fit the two-parameter product form")
    args = ap.parse_args()

    fit = least_squares(residuals(scale), [0.5, 1e-3, 0.0, 0.0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    a, b, c, e = fit.x
    print(f"a = {a:.9g}\nb = {b:.9g}\nc = {c:.9g}\ne = {e:.9g}")
    print("residuals:", " ".join(f"{r:.3g}" for r in residuals(scale)(fit.x)))
    if args.separable:
        sep = least_squares(residuals(separable), [0.5, 1e-3])
        print("separable a, b:", " ".join(f"{x:.9g}" for x in sep.x))
        print("separable residuals:", " ".join(f"{r:.3g}" for r in residuals(separable)(sep.x)))


if __name__ == "__main__":
    main()
