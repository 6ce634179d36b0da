"""Planar stance of a hopper that lands tilted.

During stance the foot pivots about its contact point and the body slides
along the leg: polar coordinates (r, theta) with theta measured from
vertical, positive tipping away from vertical. Stance starts once the foot impact has died out: the foot is
pinned and the body slides down the leg at the touchdown speed. Liftoff
merges the foot into the body's radial motion plastically, as in the
vertical model.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .core import M_B_PROTOTYPE, M_F_PROTOTYPE

# Calibrated in scripts/calibrate_stance.py against the 6 m/s, 10 degree example.
STANCE_K_DEFAULT = 480.182
STANCE_R0_DEFAULT = 0.235754
I_CM_B_DEFAULT = 4.37724e-5
I_CM_F_DEFAULT = 2.81719e-6
R_F_DEFAULT = 0.0331613
MU_LOAD_FRACTION = 0.1
# leg shorter than this fraction of r_0 means the spring bottomed out
COLLAPSE_FRACTION = 0.02


@dataclass(frozen=True)
class StanceParams:
    m_B: float = M_B_PROTOTYPE
    m_F: float = M_F_PROTOTYPE
    k: float = STANCE_K_DEFAULT
    r_0: float = STANCE_R0_DEFAULT
    I_cm_B: float = I_CM_B_DEFAULT
    I_cm_F: float = I_CM_F_DEFAULT
    r_F: float = R_F_DEFAULT
    g: float = 9.81

    def __post_init__(self):
        for name in ("m_B", "m_F", "k", "r_0", "I_cm_B", "I_cm_F", "r_F", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.r_0 > self.r_F:
            raise ValueError("r_0 must exceed r_F")

    @property
    def m_T(self) -> float:
        return self.m_B + self.m_F

    def inertia(self, r: float) -> float:
        """Moment of inertia of body and foot about the contact point."""
        return self.I_cm_B + self.m_B * r * r + self.I_cm_F + self.m_F * self.r_F**2

    def moment_arm(self, r: float) -> float:
        """m_B r + m_F r_F: mass-weighted distance of the centre of mass from the contact."""
        return self.m_B * r + self.m_F * self.r_F


@dataclass(frozen=True)
class Partition:
    vertical: float
    horizontal: float
    rotational: float
    foot_loss: float

    @property
    def total(self) -> float:
        return self.vertical + self.horizontal + self.rotational + self.foot_loss


@dataclass(frozen=True)
class StanceOutcome:
    liftoff_angle: float  # degrees from vertical
    mu_required: float
    partition: Partition
    fell_over: bool = False
    bottomed_out: bool = False
    contact_time: float = 0.0
    energy_drift: float = 0.0


def stance_derivatives(state: Sequence[float], sp: StanceParams) -> np.ndarray:
    """(r', r'', theta', theta'') for state (r, r', theta, theta')."""
    if not state[0] > 0:
        raise ValueError("leg length must be positive")
    return _derivatives(state, sp)


def _derivatives(state, sp: StanceParams) -> np.ndarray:
    r, rd, th, thd = state
    I = sp.inertia(r)
    rdd = r * thd * thd - (sp.k / sp.m_B) * (r - sp.r_0) - sp.g * math.cos(th)
    thdd = (sp.moment_arm(r) / I) * sp.g * math.sin(th) - 2.0 * (sp.m_B / I) * r * thd * rd
    return np.array([rd, rdd, thd, thdd])


def stance_energy(state: Sequence[float], sp: StanceParams) -> float:
    """Kinetic + leg spring + gravitational energy (constant during stance)."""
    r, rd, th, thd = state
    return (
        0.5 * sp.m_B * rd * rd
        + 0.5 * sp.inertia(r) * thd * thd
        + 0.5 * sp.k * (r - sp.r_0) ** 2
        + sp.g * sp.moment_arm(r) * math.cos(th)
    )


def touchdown_state(v_TD: float, theta_TD: float, sp: StanceParams) -> np.ndarray:
    """Stance initial state: body closing along the leg at ``v_TD``, leg ``theta_TD`` rad from vertical."""
    return np.array([sp.r_0, -v_TD, theta_TD, 0.0])


def ground_reaction(state: Sequence[float], sp: StanceParams) -> tuple[float, float]:
    """Horizontal and vertical contact force (world frame) from the motion."""
    r, rd, th, thd = state
    _, rdd, _, thdd = stance_derivatives(state, sp)
    # accelerations in the leg frame: radial e_r, tangential e_theta
    a_r = sp.m_B * (rdd - r * thd * thd) + sp.m_F * (-sp.r_F * thd * thd)
    a_t = sp.m_B * (r * thdd + 2.0 * rd * thd) + sp.m_F * sp.r_F * thdd
    s, c = math.sin(th), math.cos(th)
    # e_r = (sin, cos), e_theta = (cos, -sin)
    fx = a_r * s + a_t * c
    fy = a_r * c - a_t * s + sp.m_T * sp.g
    return fx, fy


def simulate_stance(
    v_TD: float,
    theta_TD: float,
    sp: StanceParams | None = None,
    *,
    mu_load_fraction: float = MU_LOAD_FRACTION,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> StanceOutcome:
    """Stance from a vertical touchdown at ``v_TD`` m/s with the leg tilted ``theta_TD`` degrees.

    The required friction coefficient is the largest |F_x / F_y| while the
    normal load exceeds ``mu_load_fraction`` of its stance peak. The energy
    partition after liftoff is normalized by the touchdown energy (body
    kinetic energy at stance onset plus the gravitational energy released
    while the robot tipped); the foot share is the loss when the foot is
    jerked into the body's radial motion at liftoff.
    """
    sp = sp or StanceParams()
    if not v_TD > 0:
        raise ValueError("v_TD must be positive")
    if not abs(theta_TD) < 45.0:
        raise ValueError("|theta_TD| must be below 45 degrees")
    th0 = math.radians(theta_TD)
    y0 = touchdown_state(v_TD, th0, sp)

    def rhs(_, y):
        return _derivatives(y, sp)

    def liftoff(_, y):
        return y[0] - sp.r_0

    liftoff.terminal = True
    liftoff.direction = 1.0

    def fall(_, y):
        return abs(y[2]) - math.pi / 2

    fall.terminal = True
    fall.direction = 1.0

    def bottom_out(_, y):
        return y[0] - COLLAPSE_FRACTION * sp.r_0

    bottom_out.terminal = True
    bottom_out.direction = -1.0

    t_end = 50.0 * math.pi * math.sqrt(sp.m_B / sp.k)
    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        y0,
        method="DOP853",
        events=(liftoff, fall, bottom_out),
        rtol=rtol,
        atol=atol,
        dense_output=True,
    )
    fell = len(sol.t_events[1]) > 0
    collapsed = len(sol.t_events[2]) > 0
    lifted = len(sol.t_events[0]) > 0
    y_lo = sol.y_events[0][0] if lifted else sol.y[:, -1]
    t_lo = sol.t_events[0][0] if lifted else sol.t[-1]

    ts = np.linspace(0.0, t_lo, 2001)
    forces = np.array([ground_reaction(sol.sol(t), sp) for t in ts])
    fy_max = forces[:, 1].max()
    loaded = forces[:, 1] > mu_load_fraction * fy_max
    mu = float(np.max(np.abs(forces[loaded, 0]) / forces[loaded, 1])) if loaded.any() else 0.0

    e_td = 0.5 * sp.m_B * v_TD**2
    e_after_td = stance_energy(y0, sp)
    e_lo = stance_energy(y_lo, sp)
    drift = abs(e_lo - e_after_td) / e_td

    r, rd, th, thd = y_lo
    released = sp.g * sp.moment_arm(sp.r_0) * (math.cos(th0) - math.cos(th))

    v_r = sp.m_B * rd / sp.m_T
    liftoff_loss = 0.5 * sp.m_B * rd * rd - 0.5 * sp.m_T * v_r * v_r
    d = sp.moment_arm(r) / sp.m_T
    s, c = math.sin(th), math.cos(th)
    vx = v_r * s + thd * d * c
    vy = v_r * c - thd * d * s
    e_rot = 0.5 * (sp.inertia(r) - sp.m_T * d * d) * thd * thd
    norm = e_td + released
    part = Partition(
        vertical=float(0.5 * sp.m_T * vy * vy / norm),
        horizontal=float(0.5 * sp.m_T * vx * vx / norm),
        rotational=float(e_rot / norm),
        foot_loss=float(liftoff_loss / norm),
    )
    return StanceOutcome(
        liftoff_angle=float(math.degrees(th)),
        mu_required=mu,
        partition=part,
        fell_over=fell,
        bottomed_out=collapsed,
        contact_time=float(t_lo),
        energy_drift=float(drift),
    )


@dataclass
class StanceMaps:
    v_values: np.ndarray
    theta_values: np.ndarray
    outcomes: list[list[StanceOutcome]]  # [i_v][j_theta]

    def field(self, name: str) -> np.ndarray:
        def get(o: StanceOutcome):
            if hasattr(o.partition, name):
                return getattr(o.partition, name)
            return getattr(o, name)

        return np.array([[get(o) for o in row] for row in self.outcomes])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(
                [
                    "v_TD",
                    "theta_TD",
                    "liftoff_angle",
                    "mu_required",
                    "e_vertical",
                    "e_horizontal",
                    "e_rotational",
                    "e_foot_loss",
                ]
            )
            for v, row in zip(self.v_values, self.outcomes):
                for th, o in zip(self.theta_values, row):
                    pt = o.partition
                    w.writerow(
                        [
                            repr(float(x))
                            for x in (
                                v,
                                th,
                                o.liftoff_angle,
                                o.mu_required,
                                pt.vertical,
                                pt.horizontal,
                                pt.rotational,
                                pt.foot_loss,
                            )
                        ]
                    )


def _stance_cell(args):
    v, th, sp = args
    return simulate_stance(v, th, sp)


def stance_maps(
    theta_range: Sequence[float],
    v_range: Sequence[float],
    sp: StanceParams | None = None,
    *,
    jobs: int = 1,
) -> StanceMaps:
    """Outcomes on the grid ``v_range`` x ``theta_range`` (degrees)."""
    sp = sp or StanceParams()
    vs = np.asarray(v_range, dtype=float)
    ths = np.asarray(theta_range, dtype=float)
    cells = [(float(v), float(th), sp) for v in vs for th in ths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            flat = list(ex.map(_stance_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        flat = [_stance_cell(c) for c in cells]
    rows = [flat[i * len(ths) : (i + 1) * len(ths)] for i in range(len(vs))]
    return StanceMaps(vs, ths, rows)
