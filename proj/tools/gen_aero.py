#!/usr/bin/env python3
"""Write the synthetic aerodynamic tables shipped in data/aero/.

Boost stages: CL/CD on alpha in [-25, 25] deg and Mach in [0, 10]. The
normal-force slope is scaled down above Mach 1.2 (to 45% by Mach 4) to keep
the supersonic lift-to-drag ratio modest; substitute real tables by pointing
the mission config at other CSV files.

Entry vehicle: raw CL/CD at alpha = {10, 15, 20} deg only. The loader extends
these to {0, 5, 10, 15, 20, 25} deg with a per-Mach drag polar fit. The raw
CD values carry a small deterministic perturbation off the polar so the fit is
a genuine least-squares problem.
"""
import math
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "aero")

BOOST_MACH = [0.0, 0.4, 0.8, 0.9, 1.0, 1.1, 1.2, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0]
BOOST_ALPHA = list(range(-25, 26, 5))

ENTRY_MACH = [3.5, 5.0, 8.0, 10.0, 15.0, 20.0, 23.0]
ENTRY_ALPHA = [10, 15, 20]


def cd0_boost(mach):
    if mach <= 0.8:
        return 0.30
    if mach <= 1.1:
        return 0.30 + (mach - 0.8) / 0.3 * 0.25
    return 0.25 + 0.30 * math.exp(-(mach - 1.1) / 1.2)


def cn_alpha_boost(mach):
    base = 3.0 + 0.5 * min(mach, 1.2) / 1.2
    if mach <= 1.2:
        return base
    scale = max(0.45, 1.0 - 0.55 * (mach - 1.2) / 2.8)
    return base * scale


def write_table(name, alphas, machs, fn):
    path = os.path.join(OUT, name)
    with open(path, "w") as f:
        f.write("alpha_deg," + ",".join(f"{m:g}" for m in machs) + "\n")
        for a in alphas:
            f.write(f"{a:g}," + ",".join(f"{fn(a, m):.6f}" for m in machs) + "\n")


def boost(stage, lift_factor, drag_factor):
    def cl(a, m):
        ar = math.radians(a)
        return lift_factor * cn_alpha_boost(m) * math.sin(ar) * math.cos(ar)

    def cd(a, m):
        ar = math.radians(a)
        return drag_factor * cd0_boost(m) + lift_factor * cn_alpha_boost(m) * math.sin(ar) ** 2

    write_table(f"stage{stage}_cl.csv", BOOST_ALPHA, BOOST_MACH, cl)
    write_table(f"stage{stage}_cd.csv", BOOST_ALPHA, BOOST_MACH, cd)


def entry():
    def frac(m):
        return (m - 3.5) / 19.5

    def cl(a, m):
        return 0.0354 * (1.0 - 0.10 * frac(m)) * a

    def cd(a, m):
        cd0 = 0.070 - 0.010 * frac(m)
        k = 0.40 + 0.05 * frac(m)
        wiggle = 0.002 * (1 if a == 15 else -1) * (1.0 + 0.2 * frac(m))
        return cd0 + k * cl(a, m) ** 2 + wiggle

    write_table("entry_cl_raw.csv", ENTRY_ALPHA, ENTRY_MACH, cl)
    write_table("entry_cd_raw.csv", ENTRY_ALPHA, ENTRY_MACH, cd)


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    boost(1, 1.00, 1.00)
    boost(2, 0.95, 0.95)
    boost(3, 0.85, 0.90)
    entry()
