"""State-space discretization for the orbit-maintenance mission model.

States are (altitude bin, fuel bin, maneuver cooldown) triples plus one
absorbing deorbited state; the codec maps them bijectively to flat indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEORBITED = -1


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class BandGrid:
    """Uniform band discretization: bin j covers [lo + j*R, lo + (j+1)*R)."""

    lo: float
    hi: float
    n_bins: int

    def __post_init__(self):
        if self.hi <= self.lo or self.n_bins < 1:
            raise DomainError("grid needs hi > lo and at least one bin")

    @property
    def band_width(self) -> float:
        return (self.hi - self.lo) / self.n_bins

    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.n_bins) + 0.5) * self.band_width

    def center(self, j) -> float:
        return self.lo + (np.asarray(j) + 0.5) * self.band_width

    def bin(self, value):
        """Bin index; values below the floor map to DEORBITED, values at or
        above the ceiling clamp to the top bin. Exact band edges go up."""
        value = np.asarray(value, dtype=float)
        j = np.floor((value - self.lo) / self.band_width).astype(np.int64)
        j = np.where(value < self.lo, DEORBITED, np.minimum(j, self.n_bins - 1))
        return j if j.ndim else int(j)


class AltitudeGrid(BandGrid):
    """Altitude bands in km."""


class FuelGrid(BandGrid):
    """Fuel bands; kg under the delta-v cost mode, km of cumulative raise
    under the altitude-budget mode."""


@dataclass(frozen=True)
class DomainState:
    alt_bin: int
    fuel_bin: int
    cooldown: int
    deorbited: bool = False


class StateCodec:
    """Bijective (alt, fuel, cooldown) <-> flat index mapping.

    Flat layout: idx = (alt * N_f + fuel) * (K + 1) + cooldown, and the
    absorbing deorbited state takes the final index.
    """

    def __init__(self, alt_grid: AltitudeGrid, fuel_grid: FuelGrid, cooldown_max: int):
        if cooldown_max < 0:
            raise DomainError("cooldown_max must be >= 0")
        self.alt_grid = alt_grid
        self.fuel_grid = fuel_grid
        self.cooldown_max = cooldown_max
        self.n_cool = cooldown_max + 1
        self.num_states = alt_grid.n_bins * fuel_grid.n_bins * self.n_cool + 1
        self.deorbited_index = self.num_states - 1

    def encode(self, state: DomainState) -> int:
        if state.deorbited:
            return self.deorbited_index
        if not (0 <= state.alt_bin < self.alt_grid.n_bins
                and 0 <= state.fuel_bin < self.fuel_grid.n_bins
                and 0 <= state.cooldown <= self.cooldown_max):
            raise DomainError(f"state out of range: {state}")
        return ((state.alt_bin * self.fuel_grid.n_bins + state.fuel_bin)
                * self.n_cool + state.cooldown)

    def decode(self, index: int) -> DomainState:
        if index == self.deorbited_index:
            return DomainState(0, 0, 0, deorbited=True)
        if not (0 <= index < self.deorbited_index):
            raise DomainError(f"state index {index} out of range")
        index, cool = divmod(index, self.n_cool)
        alt, fuel = divmod(index, self.fuel_grid.n_bins)
        return DomainState(alt, fuel, cool)

    def encode_arrays(self, alt, fuel, cool, dead):
        idx = (np.asarray(alt) * self.fuel_grid.n_bins + np.asarray(fuel)) \
            * self.n_cool + np.asarray(cool)
        return np.where(dead, self.deorbited_index, idx)


@dataclass(frozen=True)
class ManeuverActionSet:
    """Action 0 is no-burn; action k >= 1 raises by ceil(gamma^(k-1)) bins."""

    n_raises: int
    gamma_hat: float

    def __post_init__(self):
        if self.gamma_hat <= 1.0:
            raise DomainError("gamma_hat must exceed 1")
        if self.n_raises < 1:
            raise DomainError("need at least one raise action")
        steps = self.raise_bins()
        if np.any(np.diff(steps[1:]) <= 0):
            raise DomainError("raises must strictly increase with action index; "
                              "pick a larger gamma_hat or fewer actions")

    @property
    def num_actions(self) -> int:
        return self.n_raises + 1

    def raise_bins(self) -> np.ndarray:
        """Raise size per action in altitude bins; entry 0 is no-burn."""
        ks = np.arange(self.n_raises)
        return np.concatenate(([0], np.ceil(self.gamma_hat ** ks).astype(np.int64)))

    def raise_km(self, alt_grid: AltitudeGrid) -> np.ndarray:
        return self.raise_bins() * alt_grid.band_width


@dataclass(frozen=True)
class RewardParams:
    """Resonance-penalty shaping of the altitude reward."""

    alpha: float = 0.5
    beta: float = 0.25
    res_max: float = 1.0
    max_nodal_days: int = 10
    crossed_interval: bool = True  # penalize resonances crossed during decay,
    # not just the state's own band

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise DomainError("alpha and beta must be non-negative")
        if self.alpha + self.beta > 1.0:
            raise DomainError("alpha + beta must not exceed 1 (penalty factor <= 1)")
