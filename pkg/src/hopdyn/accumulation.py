"""Energy accumulation under constant rebound thrust.

The rebound input ratio ``alpha_r`` is the rebound thrust over the robot's
weight. Below a critical value each hop is lower than the last; above it the
hop heights grow, toward a drag-limited limit cycle in air or without bound
in vacuum.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernel as K
from .core import RobotParams
from .dynamics import DT_AIR, DT_CONTACT, SimState, SimulationError, ThrustProgram, _run

ALPHA_TOL = 1e-4
# The stiffest mode (foot on ground) keeps its frequency under mass scaling,
# so surface sweeps can take a coarser contact step without changing alpha.
SWEEP_DT_CONTACT = 1e-5


@dataclass(frozen=True)
class HopSequence:
    alpha_r: float
    heights: list[float]
    ceased: bool = False
    diverged: bool = False

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cycle", "height"])
            for i, h in enumerate(self.heights):
                w.writerow([i, repr(float(h))])


def rebound_program(p: RobotParams, alpha_r: float) -> ThrustProgram:
    return ThrustProgram.rebound(alpha_r * p.m_T * p.g)


def hop_sequence(
    p: RobotParams,
    alpha_r: float,
    h_0: float,
    n: int,
    *,
    dt: float = DT_AIR,
    dt_contact: float = DT_CONTACT,
) -> HopSequence:
    """Apex heights (foot above ground) starting from rest at ``h_0``.

    ``heights[0]`` is ``h_0``; one entry per completed hop follows. Runs end
    early when hopping ceases (apex below 1 mm). At ``alpha_r >= 1`` the
    rebound never turns over, so the sequence is ``[h_0, inf]`` and flagged
    as diverged.
    """
    if not 0.0 <= alpha_r <= 1.0:
        raise ValueError("alpha_r must lie in [0, 1]")
    if not h_0 > 0:
        raise ValueError("h_0 must be positive")
    if alpha_r >= 1.0:
        return HopSequence(alpha_r, [h_0, math.inf], diverged=True)
    raw = _run(
        p,
        SimState.at_rest(h_0, p),
        rebound_program(p, alpha_r),
        stop_kind=K.EV_APEX,
        stop_count=n,
        dt=dt,
        dt_contact=dt_contact,
        record=False,
    )
    heights = [h_0] + [float(a[2]) for k, a in zip(raw.e_kind, raw.e_after) if k == K.EV_APEX]
    return HopSequence(alpha_r, heights, ceased=raw.status == K.ST_CEASED)


def rises_above(p: RobotParams, alpha_r: float, h_ref: float, dt: float = DT_AIR, dt_contact: float = DT_CONTACT) -> bool:
    """Whether one hop from rest at ``h_ref`` rebounds to at least ``h_ref``."""
    if alpha_r >= 1.0:
        return True
    raw = _run(
        p,
        SimState.at_rest(h_ref, p),
        rebound_program(p, alpha_r),
        stop_kind=K.EV_APEX,
        stop_count=1,
        ceiling=h_ref,
        dt=dt,
        dt_contact=dt_contact,
        record=False,
    )
    if raw.status == K.ST_CEILING:
        return True
    if raw.status == K.ST_CEASED:
        return False
    return float(raw.y_end[2]) >= h_ref


class CriticalStatus(str, enum.Enum):
    FOUND = "found"
    ALWAYS = "always accumulates"
    NEVER = "never accumulates"


@dataclass(frozen=True)
class CriticalAlpha:
    alpha: float
    status: CriticalStatus

    def __float__(self) -> float:
        return self.alpha


def solve_critical_alpha(
    p: RobotParams,
    h_ref: float = 1.0,
    *,
    tol: float = ALPHA_TOL,
    dt: float = DT_AIR,
    dt_contact: float = DT_CONTACT,
) -> CriticalAlpha:
    """Bisect for the rebound input ratio at which one hop returns to ``h_ref``."""
    if not h_ref > 0:
        raise ValueError("h_ref must be positive")
    if rises_above(p, 0.0, h_ref, dt, dt_contact):
        return CriticalAlpha(0.0, CriticalStatus.ALWAYS)
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rises_above(p, mid, h_ref, dt, dt_contact):
            hi = mid
        else:
            lo = mid
    if hi >= 1.0:
        return CriticalAlpha(1.0, CriticalStatus.NEVER)
    return CriticalAlpha(0.5 * (lo + hi), CriticalStatus.FOUND)


def critical_alpha(p: RobotParams, h_ref: float = 1.0, **kw) -> float:
    """Critical rebound input ratio at reference drop height ``h_ref``.

    Returns 0.0 when even unpowered hops rise ("always accumulates") and 1.0
    when no sub-weight thrust suffices; :func:`solve_critical_alpha` reports
    which case applies.
    """
    return solve_critical_alpha(p, h_ref, **kw).alpha


@dataclass
class SweepGrid:
    masses: np.ndarray
    fractions: np.ndarray
    alpha_crit: np.ndarray  # shape (len(masses), len(fractions))
    F_crit: np.ndarray
    status: np.ndarray = field(default_factory=lambda: np.empty((0, 0), dtype=object))
    g: float = 9.81

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m_T", "fraction", "alpha_crit", "F_crit"])
            for i, m in enumerate(self.masses):
                for j, f in enumerate(self.fractions):
                    w.writerow([repr(float(m)), repr(float(f)), repr(float(self.alpha_crit[i, j])), repr(float(self.F_crit[i, j]))])

    def slope_per_decade(self) -> np.ndarray:
        """Least-squares d(alpha_crit)/d(log10 m_T) for every fraction column."""
        x = np.log10(self.masses)
        return np.array([np.polyfit(x, self.alpha_crit[:, j], 1)[0] for j in range(len(self.fractions))])


def _cell(args):
    p, h_ref, tol, dt, dt_contact = args
    try:
        r = solve_critical_alpha(p, h_ref, tol=tol, dt=dt, dt_contact=dt_contact)
        return r.alpha, r.status.value
    except SimulationError as exc:
        return math.nan, f"failed: {exc}"


def default_masses(p: RobotParams, decades: float = 4.0, n: int = 40) -> np.ndarray:
    c = math.log10(p.m_T)
    return np.logspace(c - decades / 2, c + decades / 2, n)


def critical_surface(
    p: RobotParams,
    mass_range: tuple[float, float] | None = None,
    fraction_range: tuple[float, float] = (0.4, 0.95),
    resolution: int | tuple[int, int] = 40,
    h_ref: float = 1.0,
    *,
    jobs: int = 1,
    tol: float = ALPHA_TOL,
    dt: float = DT_AIR,
    dt_contact: float = SWEEP_DT_CONTACT,
) -> SweepGrid:
    """Critical input ratio and force over total mass and body fraction.

    Each cell rescales the robot with :meth:`RobotParams.scaled` (springs,
    dampers and drag area follow the mass). Cells that fail record NaN and a
    status string instead of aborting the sweep.
    """
    n_m, n_f = (resolution, resolution) if isinstance(resolution, int) else resolution
    if mass_range is None:
        masses = default_masses(p, 4.0, n_m)
    else:
        masses = np.logspace(math.log10(mass_range[0]), math.log10(mass_range[1]), n_m)
    fractions = np.linspace(fraction_range[0], fraction_range[1], n_f)
    cells = [(p.scaled(float(m), float(f)), h_ref, tol, dt, dt_contact) for m in masses for f in fractions]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        results = [_cell(c) for c in cells]
    alpha = np.array([r[0] for r in results]).reshape(n_m, n_f)
    status = np.array([r[1] for r in results], dtype=object).reshape(n_m, n_f)
    F = alpha * masses[:, None] * p.g
    return SweepGrid(masses, fractions, alpha, F, status, p.g)


class MassTarget(str, enum.Enum):
    BODY = "body"
    FOOT = "foot"


@dataclass(frozen=True)
class AddedMassResult:
    alpha_crit_before: float
    alpha_crit_after: float
    F_crit_before: float
    F_crit_after: float

    @property
    def force_ratio(self) -> float:
        return self.F_crit_after / self.F_crit_before


def add_mass(p: RobotParams, delta_m: float, target: MassTarget | str) -> RobotParams:
    """Same robot carrying extra mass on one side; springs are unchanged."""
    target = MassTarget(target)
    if target is MassTarget.BODY:
        return replace(p, m_B=p.m_B + delta_m)
    return replace(p, m_F=p.m_F + delta_m)


def added_mass_whatif(
    p: RobotParams,
    delta_m: float,
    target: MassTarget | str,
    h_ref: float = 1.0,
    **kw,
) -> AddedMassResult:
    """Critical ratio and force before and after adding ``delta_m`` kg."""
    if delta_m < 0:
        raise ValueError("delta_m must be non-negative")
    q = add_mass(p, delta_m, target)
    a0 = critical_alpha(p, h_ref, **kw)
    a1 = a0 if delta_m == 0 else critical_alpha(q, h_ref, **kw)
    return AddedMassResult(a0, a1, a0 * p.m_T * p.g, a1 * q.m_T * q.g)


def limit_height(seq: Sequence[float], rel_tol: float = 1e-3, window: int = 3) -> float | None:
    """Height the sequence settles to, or None if it is still changing."""
    hs = [h for h in seq if math.isfinite(h)]
    if len(hs) < window + 1:
        return None
    tail = np.array(hs[-(window + 1) :])
    if np.max(np.abs(np.diff(tail))) <= rel_tol * abs(tail[-1]):
        return float(tail[-1])
    return None
