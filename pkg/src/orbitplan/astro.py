"""Orbital environment: altitude relations, drag decay, maneuver costs.

All public functions work in SI units (meters, seconds, kilograms) and
accept numpy arrays wherever a scalar makes sense, which the mission-model
builder relies on for vectorized kernel construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import yaml

KM = 1000.0


class AstroError(ValueError):
    pass


@dataclass(frozen=True)
class Body:
    """Central body constants."""

    mu: float = 3.986004418e14  # m^3/s^2
    radius: float = 6.378137e6  # m
    rotation_rate: float = 7.2921159e-5  # rad/s
    j2: float = 1.08262668e-3

    def __post_init__(self):
        if min(self.mu, self.radius, self.rotation_rate, self.j2) <= 0:
            raise AstroError("body constants must be strictly positive")
        if not (0 < self.j2 < 0.01):
            raise AstroError("j2 out of range")


EARTH = Body()


@dataclass(frozen=True)
class SpacecraftParams:
    mass: float  # kg
    drag_area: float  # m^2
    drag_coeff: float
    isp_seconds: float
    g0: float = 9.80665

    def __post_init__(self):
        if self.mass <= 0 or self.drag_area <= 0 or self.isp_seconds <= 0:
            raise AstroError("spacecraft parameters must be positive")
        if not (1.5 <= self.drag_coeff <= 4.0):
            raise AstroError(f"drag_coeff {self.drag_coeff} outside plausible [1.5, 4.0]")

    @property
    def ballistic_coeff(self) -> float:
        """C_D * A / m in m^2/kg."""
        return self.drag_coeff * self.drag_area / self.mass


class DensityModel:
    """Layered piecewise-exponential thermosphere surrogate.

    Within a layer starting at node altitude a_i with reference density rho_i
    and scale height H_i:  rho(a) = rho_i * exp(-(a - a_i) / H_i),
    scaled by a solar-flux multiplier exp(kappa * (F - F_ref) / F_ref).
    """

    def __init__(self, alt_km, rho, scale_height_km, reference_flux, kappa, version=1):
        self.alt_km = np.asarray(alt_km, dtype=float)
        self.rho = np.asarray(rho, dtype=float)
        self.scale_height_km = np.asarray(scale_height_km, dtype=float)
        self.reference_flux = float(reference_flux)
        self.kappa = float(kappa)
        self.version = version
        if not np.all(np.diff(self.alt_km) > 0):
            raise AstroError("density table altitudes must be increasing")
        if not np.all(np.diff(self.rho) < 0):
            raise AstroError("reference densities must strictly decrease with altitude")
        if np.any(self.rho <= 0) or np.any(self.scale_height_km <= 0):
            raise AstroError("densities and scale heights must be positive")

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            raw = yaml.safe_load(fh)
        layers = raw["layers"]
        return cls(
            alt_km=[r[0] for r in layers],
            rho=[r[1] for r in layers],
            scale_height_km=[r[2] for r in layers],
            reference_flux=raw["reference_flux"],
            kappa=raw["kappa"],
            version=raw.get("version", 1),
        )

    @property
    def coverage_m(self):
        return self.alt_km[0] * KM, self.alt_km[-1] * KM

    def flux_multiplier(self, flux):
        return np.exp(self.kappa * (np.asarray(flux, dtype=float) - self.reference_flux)
                      / self.reference_flux)

    def density(self, altitude, flux):
        """Atmospheric density (kg/m^3) at altitude (m) and F10.7 flux (sfu)."""
        alt = np.asarray(altitude, dtype=float)
        lo, hi = self.coverage_m
        if np.any(alt < lo) or np.any(alt > hi):
            raise AstroError(
                f"altitude outside density coverage [{lo / KM:g}, {hi / KM:g}] km"
            )
        layer = np.clip(np.searchsorted(self.alt_km * KM, alt, side="right") - 1,
                        0, len(self.alt_km) - 1)
        base = self.rho[layer]
        hs = self.scale_height_km[layer] * KM
        rho = base * np.exp(-(alt - self.alt_km[layer] * KM) / hs)
        return rho * self.flux_multiplier(flux)


class VacuumDensityModel(DensityModel):
    """Zero-density stub used by tests and the degenerate no-drag regime."""

    def __init__(self, lo_km=0.0, hi_km=1e6):
        self._cov = (lo_km * KM, hi_km * KM)
        self.reference_flux = 140.0
        self.kappa = 0.0
        self.version = 0

    @property
    def coverage_m(self):
        return self._cov

    def density(self, altitude, flux):
        return np.zeros_like(np.asarray(altitude, dtype=float))


def altitude_from_radius(r, body: Body = EARTH):
    r = np.asarray(r, dtype=float)
    if np.any(r <= body.radius):
        raise AstroError("orbital radius at or below the body surface (deorbited)")
    return r - body.radius


def radius_from_altitude(alt, body: Body = EARTH):
    return np.asarray(alt, dtype=float) + body.radius


def decay_rate(a, flux, sc: SpacecraftParams, body: Body, model: DensityModel):
    """Mean circular-orbit semimajor-axis decay da/dt (m/s, <= 0) from drag."""
    a = np.asarray(a, dtype=float)
    alt = altitude_from_radius(a, body)
    rho = model.density(alt, flux)
    return -np.sqrt(body.mu * a) * rho * sc.ballistic_coeff


def propagate_altitude(alt0, dt, flux, sc: SpacecraftParams, body: Body,
                       model: DensityModel, substep=86400.0):
    """Integrate drag decay over dt seconds with fixed substeps (1 day default).

    flux may be a scalar held constant over the interval, or a sequence with
    one value per substep. Returns (alt1, deorbited); altitudes that fall
    below the density-table floor clamp there and flag deorbit.
    """
    alt = np.array(alt0, dtype=float, copy=True)
    scalar = alt.ndim == 0
    alt = np.atleast_1d(alt)
    floor = model.coverage_m[0]
    deorbited = np.zeros(alt.shape, dtype=bool)
    if dt < 0:
        raise AstroError("negative propagation interval")
    n_steps = max(1, int(np.ceil(dt / substep))) if dt > 0 else 0
    flux_series = np.broadcast_to(np.asarray(flux, dtype=float), (n_steps,)) \
        if np.asarray(flux).ndim <= 1 and np.asarray(flux).size in (1, n_steps) \
        else None
    if n_steps and flux_series is None:
        raise AstroError("flux series length does not match substep count")
    remaining = dt
    for k in range(n_steps):
        step = min(substep, remaining)
        remaining -= step
        live = ~deorbited
        if not live.any():
            break
        a = radius_from_altitude(alt[live], body)
        alt[live] = alt[live] + decay_rate(a, flux_series[k], sc, body, model) * step
        dead = alt < floor
        alt[dead] = floor
        deorbited |= dead
    if scalar:
        return float(alt[0]), bool(deorbited[0])
    return alt, deorbited


def delta_v_for_raise(a, da, body: Body = EARTH):
    """Total two-impulse (Hohmann) delta-v for a small circular raise (m/s).

    Exact two-burn vis-viva evaluation, valid for 0 < da/a < 0.05.
    """
    a = np.asarray(a, dtype=float)
    da = np.asarray(da, dtype=float)
    if np.any(da <= 0):
        raise AstroError("raise must be strictly positive")
    if np.any(da / a >= 0.05):
        raise AstroError("raise outside the small-raise guard (da/a < 0.05)")
    a2 = a + da
    dv1 = np.sqrt(body.mu / a) * (np.sqrt(2.0 * a2 / (a + a2)) - 1.0)
    dv2 = np.sqrt(body.mu / a2) * (1.0 - np.sqrt(2.0 * a / (a + a2)))
    return dv1 + dv2


def fuel_mass_for_delta_v(dv, sc: SpacecraftParams):
    """Propellant mass (kg) for a delta-v via the rocket equation."""
    dv = np.asarray(dv, dtype=float)
    if np.any(dv < 0):
        raise AstroError("delta-v must be non-negative")
    return sc.mass * (1.0 - np.exp(-dv / (sc.g0 * sc.isp_seconds)))
