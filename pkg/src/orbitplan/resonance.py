"""Repeat-ground-track (resonant) orbit computation.

A circular orbit is resonant when D revolutions take exactly N nodal days:
D * T_sat = N * T_nodal, with T_sat = 2*pi / (n + omega_dot) and
T_nodal = 2*pi / (omega_e - Omega_dot). First-order J2 secular rates are
used for the node and perigee drifts; setting j2_scale=0 recovers the
purely Keplerian condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .astro import KM, Body, EARTH

RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class ResonanceEntry:
    altitude_km: float
    revolutions: int  # D
    nodal_days: int  # N
    repetition_rate: float  # 1/N, normalized so the fastest repeat is 1


@dataclass
class ResonanceTable:
    band_km: tuple
    max_nodal_days: int
    inclination: float
    entries: list = field(default_factory=list)

    def altitudes_km(self) -> np.ndarray:
        return np.asarray([e.altitude_km for e in self.entries])

    def rates(self) -> np.ndarray:
        return np.asarray([e.repetition_rate for e in self.entries])

    def write_delimited(self, path):
        with open(path, "w") as fh:
            fh.write("altitude_km\tD\tN\tres\n")
            for e in self.entries:
                fh.write(f"{e.altitude_km:.17g}\t{e.revolutions}\t{e.nodal_days}\t"
                         f"{e.repetition_rate:.17g}\n")


def _secular_rates(a, inclination, body: Body, j2_scale):
    """(n, Omega_dot, omega_dot) for a circular orbit of semimajor axis a."""
    n = np.sqrt(body.mu / a**3)
    k = j2_scale * body.j2 * (body.radius / a) ** 2 * n
    ci = np.cos(inclination)
    raan_dot = -1.5 * k * ci
    argp_dot = 0.75 * k * (5.0 * ci**2 - 1.0)
    return n, raan_dot, argp_dot


def repeat_condition_residual(a, D, N, inclination, body: Body = EARTH, j2_scale=1.0):
    """Relative residual |D*T_sat - N*T_nodal| / T_nodal at semimajor axis a."""
    n, raan_dot, argp_dot = _secular_rates(a, inclination, body, j2_scale)
    t_sat = 2.0 * math.pi / (n + argp_dot)
    t_nodal = 2.0 * math.pi / (body.rotation_rate - raan_dot)
    return abs(D * t_sat - N * t_nodal) / t_nodal


def resonance_altitudes(band_km, max_N, inclination, body: Body = EARTH,
                        j2_scale=1.0) -> ResonanceTable:
    """All coprime (D, N) repeat-ground-track orbits inside an altitude band.

    band_km must lie within [300, 600] km and max_N <= 60. For each pair,
    the balance D * (omega_e - Omega_dot) = N * (n + omega_dot) is solved
    for the semimajor axis by bracketed root-finding.
    """
    lo_km, hi_km = band_km
    if not (300.0 <= lo_km < hi_km <= 600.0):
        raise ValueError("band must lie within [300, 600] km")
    if not (1 <= max_N <= 60):
        raise ValueError("max_N must be in [1, 60]")

    def balance(a, D, N):
        n, raan_dot, argp_dot = _secular_rates(a, inclination, body, j2_scale)
        return D * (body.rotation_rate - raan_dot) - N * (n + argp_dot)

    a_lo = body.radius + lo_km * KM
    a_hi = body.radius + hi_km * KM

    def revs_per_nodal_day(a):
        n, raan_dot, argp_dot = _secular_rates(a, inclination, body, j2_scale)
        return (n + argp_dot) / (body.rotation_rate - raan_dot)

    entries = []
    for N in range(1, max_N + 1):
        # ratio decreases with altitude, so the admissible D range follows
        # from the band edges
        d_min = math.ceil(N * revs_per_nodal_day(a_hi))
        d_max = math.floor(N * revs_per_nodal_day(a_lo))
        for D in range(d_min, d_max + 1):
            if math.gcd(D, N) != 1:
                continue
            f_lo, f_hi = balance(a_lo, D, N), balance(a_hi, D, N)
            if f_lo * f_hi > 0:
                continue  # no root in band
            a_star = optimize.brentq(balance, a_lo, a_hi, args=(D, N),
                                     xtol=1e-6, rtol=1e-15)
            if repeat_condition_residual(a_star, D, N, inclination, body,
                                         j2_scale) >= RESIDUAL_TOL:
                continue
            entries.append(ResonanceEntry(
                altitude_km=(a_star - body.radius) / KM,
                revolutions=D,
                nodal_days=N,
                repetition_rate=1.0 / N,
            ))
    entries.sort(key=lambda e: e.altitude_km)
    return ResonanceTable(band_km=(lo_km, hi_km), max_nodal_days=max_N,
                          inclination=inclination, entries=entries)
