#!/usr/bin/env python3
"""Tabulate the 1962 U.S. Standard Atmosphere (0-200 km, 1 km step).

Output columns: h_km,rho_kgm3,a_kms. Below 90 km the model is defined by
linear molecular-scale temperature segments in geopotential altitude; above
90 km by linear segments in geometric altitude. Pressure follows from the
hydrostatic equation with inverse-square gravity.
"""
import math
import sys

from scipy.integrate import quad

G0 = 9.80665            # m/s^2
M0 = 28.9644            # kg/kmol
RSTAR = 8314.32         # J/(kmol K)
R0 = 6356.766           # km, effective radius for geopotential
P0 = 101325.0           # Pa
T0 = 288.15             # K
GAMMA = 1.4
RHO0 = 1.225          # kg/m^3, sea-level density of the standard

# (base geopotential km', lapse K/km')
LOW = [(0.0, -6.5), (11.0, 0.0), (20.0, 1.0), (32.0, 2.8), (47.0, 0.0),
       (52.0, -2.0), (61.0, -4.0), (79.0, 0.0), (88.743, None)]
# (base geometric km, lapse K/km)
HIGH = [(90.0, 3.0), (100.0, 5.0), (110.0, 10.0), (120.0, 20.0), (150.0, 15.0),
        (160.0, 10.0), (170.0, 7.0), (190.0, 5.0), (230.0, 4.0), (300.0, None)]

GMR = G0 * M0 / RSTAR * 1000.0  # K per km'


def geopotential(z_km):
    return R0 * z_km / (R0 + z_km)


def low_layers():
    layers = []
    t, p = T0, P0
    for (hb, lapse), (ht, _) in zip(LOW[:-1], LOW[1:]):
        layers.append((hb, ht, lapse, t, p))
        if lapse == 0.0:
            p = p * math.exp(-GMR * (ht - hb) / t)
        else:
            t_top = t + lapse * (ht - hb)
            p = p * (t_top / t) ** (-GMR / lapse)
            t = t_top
    return layers, t, p


def low_state(h_geop, layers):
    for hb, ht, lapse, tb, pb in layers:
        if h_geop <= ht + 1e-12:
            if lapse == 0.0:
                return tb, pb * math.exp(-GMR * (h_geop - hb) / tb)
            t = tb + lapse * (h_geop - hb)
            return t, pb * (t / tb) ** (-GMR / lapse)
    raise ValueError(h_geop)


def high_layers(t90, p90):
    layers = []
    t, p = t90, p90
    for (zb, lapse), (zt, _) in zip(HIGH[:-1], HIGH[1:]):
        layers.append((zb, zt, lapse, t, p))
        p = high_pressure(zt, zb, lapse, t, p)
        t = t + lapse * (zt - zb)
    return layers


def high_pressure(z, zb, lapse, tb, pb):
    def integrand(s):
        g_ratio = (R0 / (R0 + s)) ** 2
        return g_ratio / (tb + lapse * (s - zb))
    val, _ = quad(integrand, zb, z, epsabs=0.0, epsrel=1e-13)
    return pb * math.exp(-GMR * val)


def state(z_km, low, high):
    if z_km < 90.0:
        return low_state(geopotential(z_km), low)
    for zb, zt, lapse, tb, pb in high:
        if z_km <= zt:
            return tb + lapse * (z_km - zb), high_pressure(z_km, zb, lapse, tb, pb)
    raise ValueError(z_km)


def main():
    low, t_top, p_top = low_layers()
    high = high_layers(t_top, p_top)
    out = sys.stdout
    out.write("h_km,rho_kgm3,a_kms\n")
    for i in range(0, 201):
        z = float(i)
        t, p = state(z, low, high)
        rho = RHO0 * (p / P0) * (T0 / t)
        a = math.sqrt(GAMMA * RSTAR * t / M0) / 1000.0
        out.write(f"{z:.1f},{rho:.6e},{a:.6f}\n")


if __name__ == "__main__":
    main()
