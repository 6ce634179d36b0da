"""Elastic energy stored in the rubber-band leg spring.

Specific energy is the area under the stress–strain curve divided by the
material density. Only summary values of the band's curve are published, so
:func:`reference_curve` is a synthetic piecewise-linear curve built to hit
them: 1.2 MPa at strain 2.1 (the operating strain), 11.2 MPa at strain 6.2
(failure), 1307.9 J/kg stored at 2.1 and 15800.3 J/kg at 6.2. The density
follows from the first energy anchor and the knee stress from the second.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

OPERATING_STRAIN = 2.1
OPERATING_STRESS = 1.2e6
FAILURE_STRAIN = 6.2
FAILURE_STRESS = 11.2e6
OPERATING_SPECIFIC_ENERGY = 1307.9
MAX_SPECIFIC_ENERGY = 15800.3
KNEE_STRAIN = 5.0
BAND_MASS_TOTAL = 0.01227
ROBOT_MASS = 0.69655


@dataclass(frozen=True)
class StressStrainCurve:
    strain: np.ndarray
    stress: np.ndarray  # Pa
    density: float  # kg/m^3

    def __post_init__(self):
        e = np.asarray(self.strain, dtype=float)
        s = np.asarray(self.stress, dtype=float)
        object.__setattr__(self, "strain", e)
        object.__setattr__(self, "stress", s)
        if e.ndim != 1 or e.shape != s.shape or len(e) < 2:
            raise ValueError("strain and stress must be 1-D arrays of equal length >= 2")
        if e[0] != 0.0:
            raise ValueError("strain must start at 0")
        if np.any(np.diff(e) <= 0):
            raise ValueError("strain must be strictly increasing")
        if np.any(s < 0):
            raise ValueError("stress must be non-negative")
        if not self.density > 0:
            raise ValueError("density must be positive")

    @classmethod
    def from_points(cls, points: Sequence[tuple[float, float]], density: float) -> "StressStrainCurve":
        pts = np.asarray(points, dtype=float)
        return cls(pts[:, 0], pts[:, 1], density)

    @classmethod
    def from_csv(cls, path: str | Path, density: float) -> "StressStrainCurve":
        """Read a ``strain,stress_Pa`` CSV."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["strain", "stress_Pa"]:
            raise ValueError(f"{path}: expected header 'strain,stress_Pa'")
        pts = []
        for i, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{i}: expected 2 columns, got {len(row)}")
            try:
                pts.append((float(row[0]), float(row[1])))
            except ValueError as exc:
                raise ValueError(f"{path}:{i}: {exc}") from None
        return cls.from_points(pts, density)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["strain", "stress_Pa"])
            for e, s in zip(self.strain, self.stress):
                w.writerow([repr(float(e)), repr(float(s))])


def reference_curve() -> StressStrainCurve:
    """Synthetic band curve matching the published anchors (see module docstring)."""
    density = 0.5 * OPERATING_STRAIN * OPERATING_STRESS / OPERATING_SPECIFIC_ENERGY
    # energy density still to be stored between the operating and failure strains
    rest = MAX_SPECIFIC_ENERGY * density - 0.5 * OPERATING_STRAIN * OPERATING_STRESS
    a = KNEE_STRAIN - OPERATING_STRAIN
    b = FAILURE_STRAIN - KNEE_STRAIN
    knee_stress = (2.0 * rest - a * OPERATING_STRESS - b * FAILURE_STRESS) / (a + b)
    return StressStrainCurve.from_points(
        [
            (0.0, 0.0),
            (OPERATING_STRAIN, OPERATING_STRESS),
            (KNEE_STRAIN, knee_stress),
            (FAILURE_STRAIN, FAILURE_STRESS),
        ],
        density,
    )


def curve_specific_energy(c: StressStrainCurve, strain_max: float) -> float:
    """Trapezoidal area under the curve up to ``strain_max``, in J/kg."""
    if not 0.0 <= strain_max <= c.strain[-1]:
        raise ValueError(f"strain_max must lie in [0, {c.strain[-1]}]")
    k = int(np.searchsorted(c.strain, strain_max, side="right"))
    e = np.append(c.strain[:k], strain_max)
    s = np.append(c.stress[:k], np.interp(strain_max, c.strain, c.stress))
    return float(np.sum(0.5 * (s[1:] + s[:-1]) * np.diff(e)) / c.density)


def system_energy(specific: float, band_mass_total: float, robot_mass: float) -> tuple[float, float]:
    """Stored energy (J) in the bands and that energy per kilogram of robot."""
    if band_mass_total < 0:
        raise ValueError("band_mass_total must be non-negative")
    if not robot_mass > 0:
        raise ValueError("robot_mass must be positive")
    stored = specific * band_mass_total
    return stored, stored / robot_mass


@dataclass(frozen=True)
class EnergyBudget:
    strain: float
    specific: float  # J/kg of band
    stored: float  # J
    system_specific: float  # J/kg of robot


def energy_budget(
    c: StressStrainCurve | None = None,
    strain: float = OPERATING_STRAIN,
    band_mass_total: float = BAND_MASS_TOTAL,
    robot_mass: float = ROBOT_MASS,
) -> EnergyBudget:
    c = c or reference_curve()
    spec = curve_specific_energy(c, strain)
    stored, sys_spec = system_energy(spec, band_mass_total, robot_mass)
    return EnergyBudget(strain, spec, stored, sys_spec)
