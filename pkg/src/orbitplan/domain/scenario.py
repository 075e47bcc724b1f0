"""Solar-activity scenarios and thrust-realization uncertainty.

A scenario mixes solar-cycle intensity classes (low/medium/high priors)
with a per-class, per-step flux distribution given as percentile nodes.
The percentile nodes double as the quadrature support: by default the
(p05, p25, p50, p75, p95) values carry midpoint weights
(0.1, 0.2, 0.4, 0.2, 0.1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .grids import DomainError

PERCENTILE_COLUMNS = ("p05", "p25", "p50", "p75", "p95")
DEFAULT_QUADRATURE = (0.1, 0.2, 0.4, 0.2, 0.1)
WEIGHT_TOL = 1e-12


@dataclass
class SolarScenario:
    """Mixture of intensity classes with percentile-parameterized flux paths."""

    class_names: tuple  # e.g. ("low", "medium", "high")
    priors: np.ndarray  # (n_classes,)
    flux_nodes: np.ndarray  # (n_classes, H, Q) percentile values, sfu
    quadrature: np.ndarray = field(
        default_factory=lambda: np.asarray(DEFAULT_QUADRATURE))

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=float)
        self.flux_nodes = np.asarray(self.flux_nodes, dtype=float)
        self.quadrature = np.asarray(self.quadrature, dtype=float)
        if len(self.class_names) != len(self.priors):
            raise DomainError("one prior per intensity class required")
        if abs(self.priors.sum() - 1.0) > WEIGHT_TOL or np.any(self.priors < 0):
            raise DomainError("intensity priors must form a distribution")
        if abs(self.quadrature.sum() - 1.0) > WEIGHT_TOL or np.any(self.quadrature < 0):
            raise DomainError("quadrature weights must form a distribution")
        if self.flux_nodes.ndim != 3 or self.flux_nodes.shape[0] != len(self.priors):
            raise DomainError("flux_nodes must have shape (classes, steps, nodes)")
        if self.flux_nodes.shape[2] != len(self.quadrature):
            raise DomainError("one quadrature weight per percentile node required")
        if np.any(np.diff(self.flux_nodes, axis=2) < 0):
            raise DomainError("percentile values must be non-decreasing")

    @property
    def horizon(self) -> int:
        return self.flux_nodes.shape[1]

    def branches(self, h: int):
        """Flux support points and weights at step h, mixing classes and nodes.

        Returns (flux_values, weights) of length n_classes * Q; weights sum
        to 1. Order is (class-major, percentile-minor) and is part of the
        reproducibility contract.
        """
        flux = self.flux_nodes[:, h, :].ravel()
        w = (self.priors[:, None] * self.quadrature[None, :]).ravel()
        return flux, w

    def collapsed(self, class_name="medium") -> "SolarScenario":
        """Deterministic variant: the named class's median path with weight 1."""
        i = self.class_names.index(class_name)
        median = self.flux_nodes[i, :, len(self.quadrature) // 2]
        return SolarScenario(
            class_names=(class_name,),
            priors=np.asarray([1.0]),
            flux_nodes=median[None, :, None],
            quadrature=np.asarray([1.0]),
        )


def load_flux_csv(path):
    """Read a per-class flux forecast: columns date, p05, p25, p50, p75, p95."""
    dates, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"date", *PERCENTILE_COLUMNS} - set(reader.fieldnames or ())
        if missing:
            raise DomainError(f"{path}: missing columns {sorted(missing)}")
        for rec in reader:
            dates.append(datetime.fromisoformat(rec["date"]))
            rows.append([float(rec[c]) for c in PERCENTILE_COLUMNS])
    if not rows:
        raise DomainError(f"{path}: empty flux forecast")
    order = np.argsort([d.timestamp() for d in dates])
    return [dates[i] for i in order], np.asarray(rows)[order]


def scenario_from_files(paths_by_class, priors, time_grid,
                        quadrature=DEFAULT_QUADRATURE,
                        max_gap_days=16.0) -> SolarScenario:
    """Assemble a scenario from one forecast file per intensity class.

    Each decision step maps to the forecast row nearest in time; a gap larger
    than max_gap_days means the files do not cover the horizon.
    """
    names = tuple(paths_by_class)
    nodes = []
    for name in names:
        dates, values = load_flux_csv(paths_by_class[name])
        stamps = np.asarray([d.timestamp() for d in dates])
        per_step = []
        for h in range(time_grid.horizon_steps):
            t = time_grid.date_at(h).timestamp()
            i = int(np.argmin(np.abs(stamps - t)))
            if abs(stamps[i] - t) > max_gap_days * 86400.0:
                raise DomainError(
                    f"{paths_by_class[name]}: no forecast row within "
                    f"{max_gap_days:g} days of step {h} "
                    f"({time_grid.date_at(h).date()})")
            per_step.append(values[i])
        nodes.append(per_step)
    return SolarScenario(class_names=names, priors=np.asarray(priors, dtype=float),
                         flux_nodes=np.asarray(nodes), quadrature=np.asarray(quadrature))


@dataclass
class ThrustModel:
    """Multiplicative thrust realization: achieved raise = eta * commanded."""

    factors: np.ndarray = field(default_factory=lambda: np.asarray([0.9, 1.0, 1.1]))
    weights: np.ndarray = field(default_factory=lambda: np.asarray([0.2, 0.6, 0.2]))

    def __post_init__(self):
        self.factors = np.asarray(self.factors, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.factors.shape != self.weights.shape:
            raise DomainError("one weight per thrust factor required")
        if np.any(self.factors <= 0):
            raise DomainError("thrust factors must be positive")
        if abs(self.weights.sum() - 1.0) > WEIGHT_TOL or np.any(self.weights < 0):
            raise DomainError("thrust weights must form a distribution")
        mean = float(self.factors @ self.weights)
        if not (0.8 <= mean <= 1.2):
            raise DomainError(f"mean thrust factor {mean:g} outside [0.8, 1.2]")

    @classmethod
    def exact(cls) -> "ThrustModel":
        return cls(factors=np.asarray([1.0]), weights=np.asarray([1.0]))
