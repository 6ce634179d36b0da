"""Per-cycle energy ledger: eight signed energy modifications of one hop.

A hopping cycle runs apex -> drop -> touchdown -> stance -> liftoff ->
rebound -> apex. Each phase changes the energy carried into the next one;
control inputs enter as ratios ``alpha`` and losses as efficiencies ``eta``,
each normalized by the energy available at the start of its phase:

* drop: ``alpha_d``, ``eta_FDd`` by ``m_T g h_d``
* touchdown: ``eta_TD`` by ``1/2 m_T v_TD^2``
* stance: ``alpha_s``, ``eta_mech`` by ``1/2 m_B v_TD^2``
* liftoff: ``eta_LO`` by ``1/2 m_B v_LO-^2``
* rebound: ``alpha_r``, ``eta_FDr`` by ``m_T g h_r``

Chaining the phases gives the closed-form rebound-to-drop height ratio
:func:`delta_rd`.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import RobotParams, drag_force
from .dynamics import EventKind, Trajectory


class FlightRegimeWarning(UserWarning):
    """Required rebound input exceeds the robot's weight (it would simply fly)."""


@dataclass(frozen=True)
class EnergyLedger:
    alpha_d: float = 0.0
    eta_FDd: float = 1.0
    eta_TD: float = 1.0
    alpha_s: float = 0.0
    eta_mech: float = 1.0
    eta_LO: float = 1.0
    alpha_r: float = 0.0
    eta_FDr: float = 1.0

    def with_alpha_r(self, alpha_r: float) -> "EnergyLedger":
        return replace(self, alpha_r=alpha_r)


LOSSLESS = EnergyLedger()


@dataclass(frozen=True)
class HopCycleRecord:
    h_d: float
    h_r: float
    v_TD_minus: float
    v_LO_minus: float
    v_LO_plus: float
    E_d: float
    E_FDd: float
    E_TD: float
    E_s: float
    E_mech: float
    E_LO: float
    E_r: float
    E_FDr: float
    ledger: EnergyLedger
    m_T: float
    m_B: float
    g: float

    @property
    def delta_measured(self) -> float:
        return self.h_r / self.h_d

    @property
    def energies(self) -> dict[str, float]:
        return {
            "E_d": self.E_d,
            "E_FDd": self.E_FDd,
            "E_TD": self.E_TD,
            "E_s": self.E_s,
            "E_mech": self.E_mech,
            "E_LO": self.E_LO,
            "E_r": self.E_r,
            "E_FDr": self.E_FDr,
        }


def ledger_from_energies(
    *,
    h_d: float,
    h_r: float,
    v_TD: float,
    v_LO_minus: float,
    E_d: float,
    E_FDd: float,
    E_TD: float,
    E_s: float,
    E_mech: float,
    E_LO: float,
    E_r: float,
    E_FDr: float,
    m_B: float,
    m_T: float,
    g: float,
) -> EnergyLedger:
    """Normalize raw phase energies (J) into ratios and efficiencies."""
    e_drop = m_T * g * h_d
    e_td = 0.5 * m_T * v_TD**2
    e_stance = 0.5 * m_B * v_TD**2
    e_lo = 0.5 * m_B * v_LO_minus**2
    e_reb = m_T * g * h_r
    if e_drop <= 0:
        raise ValueError("zero drop height")

    def ratio(e, norm):
        return e / norm if norm > 0 else 0.0

    return EnergyLedger(
        alpha_d=E_d / e_drop,
        eta_FDd=1.0 + E_FDd / e_drop,
        eta_TD=1.0 + ratio(E_TD, e_td),
        alpha_s=ratio(E_s, e_stance),
        eta_mech=1.0 + ratio(E_mech, e_stance),
        eta_LO=1.0 + ratio(E_LO, e_lo),
        alpha_r=ratio(E_r, e_reb),
        eta_FDr=1.0 + ratio(E_FDr, e_reb),
    )


def _drag_work(traj: Trajectory, i0: int, i1: int, p: RobotParams) -> float:
    """Trapezoidal integral of body drag force over body height between samples."""
    if i1 <= i0:
        return 0.0
    v = traj.v_B[i0 : i1 + 1]
    z = traj.z_B[i0 : i1 + 1]
    f = np.array([drag_force(float(x), p.m_T, p.rho, p.cda) for x in v])
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(z)))


def _sample_at(traj: Trajectory, t: float) -> int:
    i = int(np.searchsorted(traj.t, t))
    if i >= len(traj.t) or abs(traj.t[i] - t) > 1e-12:
        raise ValueError(f"no recorded sample at event time {t}")
    return i


def _cycle_starts(traj: Trajectory) -> list[float]:
    starts = []
    if len(traj) and traj.phase[0] == 0 and traj.v_B[0] == 0.0:
        starts.append(float(traj.t[0]))
    starts += [e.t for e in traj.events_of(EventKind.APEX)]
    return starts


def ledger_from_cycle(traj: Trajectory, p: RobotParams, cycle: int = 0) -> HopCycleRecord:
    """Energy record of the ``cycle``-th apex-to-apex hop in a recorded trajectory.

    Drag energies are trapezoidal integrals of the drag force over height;
    control energies are the body-force work; touchdown and liftoff losses
    come from the kinetic-energy jumps across the events; the stance term is
    the remaining change of body kinetic energy.
    """
    if len(traj) == 0:
        raise ValueError("trajectory has no recorded samples")
    starts = _cycle_starts(traj)
    if cycle >= len(starts):
        raise ValueError(f"cycle {cycle} has no starting apex")
    t_a0 = starts[cycle]
    after = [e for e in traj.events if e.t > t_a0 and e.kind != EventKind.CUTOFF]
    kinds = [e.kind for e in after[:3]]
    if kinds != [EventKind.TOUCHDOWN, EventKind.LIFTOFF, EventKind.APEX]:
        raise ValueError(f"cycle {cycle} is missing events (found {[k.name for k in kinds]})")
    td, lo, ap = after[:3]

    i_a0 = _sample_at(traj, t_a0)
    i_td = _sample_at(traj, td.t)
    i_lo = _sample_at(traj, lo.t)
    i_a1 = _sample_at(traj, ap.t)
    m_T, m_B, g = p.m_T, p.m_B, p.g

    h_d = float(traj.z_F[i_a0]) - td.state_before.z_F
    h_r = ap.state_after.z_F - lo.state_after.z_F
    if not h_d > 0:
        raise ValueError("zero drop height")
    v_td = -td.state_before.v_B
    v_lo_m = lo.state_before.v_B
    v_lo_p = lo.state_after.v_B
    w_thrust = traj.work[:, 3]

    E_d = float(w_thrust[i_td] - w_thrust[i_a0])
    E_FDd = _drag_work(traj, i_a0, i_td, p)
    E_TD = -0.5 * p.m_F * v_td**2
    E_s = float(w_thrust[i_lo] - w_thrust[i_td])
    E_mech = 0.5 * m_B * v_lo_m**2 - 0.5 * m_B * v_td**2 - E_s
    E_LO = 0.5 * m_T * v_lo_p**2 - 0.5 * m_B * v_lo_m**2
    E_r = float(w_thrust[i_a1] - w_thrust[i_lo])
    E_FDr = _drag_work(traj, i_lo, i_a1, p)

    ledger = ledger_from_energies(
        h_d=h_d,
        h_r=h_r,
        v_TD=v_td,
        v_LO_minus=v_lo_m,
        E_d=E_d,
        E_FDd=E_FDd,
        E_TD=E_TD,
        E_s=E_s,
        E_mech=E_mech,
        E_LO=E_LO,
        E_r=E_r,
        E_FDr=E_FDr,
        m_B=m_B,
        m_T=m_T,
        g=g,
    )
    return HopCycleRecord(
        h_d=h_d,
        h_r=h_r,
        v_TD_minus=v_td,
        v_LO_minus=v_lo_m,
        v_LO_plus=v_lo_p,
        E_d=E_d,
        E_FDd=E_FDd,
        E_TD=E_TD,
        E_s=E_s,
        E_mech=E_mech,
        E_LO=E_LO,
        E_r=E_r,
        E_FDr=E_FDr,
        ledger=ledger,
        m_T=m_T,
        m_B=m_B,
        g=g,
    )


def cycle_records(traj: Trajectory, p: RobotParams) -> list[HopCycleRecord]:
    """Records for every complete hop in the trajectory."""
    out = []
    for k in range(len(_cycle_starts(traj))):
        try:
            out.append(ledger_from_cycle(traj, p, k))
        except ValueError:
            break
    return out


def _numerator(l: EnergyLedger) -> float:
    return (l.alpha_d + l.eta_FDd) * l.eta_TD * (l.alpha_s + l.eta_mech) * l.eta_LO


def delta_rd(l: EnergyLedger) -> float:
    """Rebound-to-drop height ratio implied by a ledger."""
    den = 2.0 - l.alpha_r - l.eta_FDr
    if not den > 0:
        raise ValueError("input implies unbounded rise")
    return _numerator(l) / den


def required_alpha_r(l: EnergyLedger, delta_target: float = 1.0) -> float:
    """Rebound input ratio that makes :func:`delta_rd` equal ``delta_target``.

    ``l.alpha_r`` is ignored. A result above 1 means the thrust would exceed
    the robot's weight; a :class:`FlightRegimeWarning` is issued.
    """
    if delta_target == 0:
        raise ValueError("delta_target must be non-zero")
    if not delta_target > 0:
        raise ValueError("delta_target must be positive")
    a = 2.0 - l.eta_FDr - _numerator(l) / delta_target
    if a > 1.0:
        warnings.warn(f"alpha_r = {a:.4g} > 1: flight regime", FlightRegimeWarning, stacklevel=2)
    return a


def cycle_efficiency(record: HopCycleRecord) -> float:
    """One minus the summed losses (and energy-removing inputs) over the drop energy."""
    if not record.h_d > 0:
        raise ValueError("zero drop height")
    removed = sum(abs(e) for e in record.energies.values() if e < 0)
    return 1.0 - removed / (record.m_T * record.g * record.h_d)


LEDGER_COLUMNS = [
    "h_d",
    "h_r",
    "delta_rd",
    "alpha_d",
    "eta_FDd",
    "eta_TD",
    "alpha_s",
    "eta_mech",
    "eta_LO",
    "alpha_r",
    "eta_FDr",
    "eta_cyc",
]


def ledger_row(record: HopCycleRecord) -> list[float]:
    l = asdict(record.ledger)
    return [record.h_d, record.h_r, record.delta_measured] + [l[k] for k in LEDGER_COLUMNS[3:-1]] + [
        cycle_efficiency(record)
    ]


def write_ledger_csv(
    records: Iterable[HopCycleRecord],
    path: str | Path,
    extra: Sequence[tuple[str, Sequence]] = (),
) -> None:
    """Ledger CSV; ``extra`` appends named columns (one value per record)."""
    records = list(records)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS + [name for name, _ in extra])
        for i, r in enumerate(records):
            row = [repr(float(x)) for x in ledger_row(r)]
            row += [str(vals[i]) for _, vals in extra]
            w.writerow(row)


def is_valid(l: EnergyLedger) -> bool:
    etas = (l.eta_FDd, l.eta_TD, l.eta_mech, l.eta_LO, l.eta_FDr)
    return all(0.0 < e <= 1.0 for e in etas) and l.alpha_r <= 1.0 and all(
        math.isfinite(x) for x in asdict(l).values()
    )
