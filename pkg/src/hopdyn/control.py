"""Vertical thrust scheduling for the hopping experiments.

Protocol per hop: hold the drop height in hover, release and fall with only
the stabilization controller active, switch every controller off at touchdown
for a blanking window, then apply constant thrust until the ascending robot
slows below the cutoff speed, and coast to the apex with zero net input.

Thrust is linear in motor duty, so a percentage of the hover duty is the same
percentage of the robot's weight.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernel as K
from .core import RobotParams
from .dynamics import Phase, SimState, ThrustProgram, Trajectory, simulate
from .energy import HopCycleRecord, cycle_records


@dataclass(frozen=True)
class ProtocolConfig:
    alpha_pct: float = 0.0
    blanking_ms: float = 60.0
    cutoff_speed: float = 1.0
    drop_height: float = 1.5
    n_hops: int = 10
    thrust_max: float | None = None  # None: twice the robot's weight
    stabilization_drain_N: float = 0.0

    def __post_init__(self):
        if self.alpha_pct < 0:
            raise ValueError("alpha_pct must be non-negative")
        if self.blanking_ms < 0:
            raise ValueError("blanking_ms must be non-negative")
        if self.cutoff_speed < 0:
            raise ValueError("cutoff_speed must be non-negative")
        if not self.drop_height > 0:
            raise ValueError("drop_height must be positive")
        if self.n_hops < 1:
            raise ValueError("n_hops must be positive")
        if self.stabilization_drain_N < 0:
            raise ValueError("stabilization_drain_N must be non-negative")

    def max_thrust(self, p: RobotParams) -> float:
        return self.thrust_max if self.thrust_max is not None else 2.0 * p.weight

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(asdict(self), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown protocol keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ProtocolConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


class Mode(enum.Enum):
    HOVER = "Hover"
    DROP_STABILIZE = "DropStabilize"
    BLANKING = "Blanking"
    REBOUND_INPUT = "ReboundInput"
    STABILIZE_TO_APEX = "StabilizeToApex"


MODE_ORDER = [Mode.DROP_STABILIZE, Mode.BLANKING, Mode.REBOUND_INPUT, Mode.STABILIZE_TO_APEX]
_KERNEL_MODE = {
    K.MODE_DROP: Mode.DROP_STABILIZE,
    K.MODE_BLANK: Mode.BLANKING,
    K.MODE_INPUT: Mode.REBOUND_INPUT,
    K.MODE_COAST: Mode.STABILIZE_TO_APEX,
}


@dataclass(frozen=True)
class PID:
    kp: float
    ki: float
    kd: float
    integral: float = 0.0
    prev_error: float | None = None
    integral_limit: float = 5.0

    def step(self, error: float, dt: float) -> tuple[float, "PID"]:
        integral = min(max(self.integral + error * dt, -self.integral_limit), self.integral_limit)
        deriv = 0.0 if self.prev_error is None or dt <= 0 else (error - self.prev_error) / dt
        out = self.kp * error + self.ki * integral + self.kd * deriv
        return out, replace(self, integral=integral, prev_error=error)


def hover_pid(p: RobotParams, bandwidth: float = 4.0) -> PID:
    """Critically damped height hold for the point mass m_T (natural freq in rad/s)."""
    return PID(kp=p.m_T * bandwidth**2, ki=0.0, kd=2.0 * p.m_T * bandwidth)


@dataclass(frozen=True)
class ControllerState:
    mode: Mode = Mode.HOVER
    t_mode_entry: float = 0.0
    pid: PID = field(default_factory=lambda: PID(0.0, 0.0, 0.0))
    t_last: float | None = None


def hover_duty(p: RobotParams, thrust_max: float) -> float:
    """Duty fraction at which thrust equals weight (thrust linear in duty)."""
    if not thrust_max > p.weight:
        raise ValueError("cannot hover: thrust_max does not exceed the weight")
    return p.weight / thrust_max


def input_thrust(cfg: ProtocolConfig, p: RobotParams) -> float:
    return min(cfg.alpha_pct / 100.0 * p.weight, cfg.max_thrust(p))


def thrust_command(
    cs: ControllerState,
    s: SimState,
    cfg: ProtocolConfig,
    p: RobotParams,
    *,
    release: bool = True,
) -> tuple[float, ControllerState]:
    """Body thrust for state ``s`` and the controller state for the next step."""
    t_max = cfg.max_thrust(p)
    mode, entry = cs.mode, cs.t_mode_entry

    if mode is Mode.HOVER:
        if release:
            mode, entry = Mode.DROP_STABILIZE, s.t
        else:
            dt = 0.0 if cs.t_last is None else s.t - cs.t_last
            corr, pid = cs.pid.step(cfg.drop_height - s.z_F, dt)
            u = min(max(p.weight + corr, 0.0), t_max)
            return u, replace(cs, pid=pid, t_last=s.t)
    if mode is Mode.DROP_STABILIZE and s.phase == Phase.STANCE:
        mode, entry = Mode.BLANKING, s.t
    if mode is Mode.BLANKING and s.t - entry >= cfg.blanking_ms / 1000.0 - 1e-12:
        mode, entry = Mode.REBOUND_INPUT, s.t
    if (
        mode is Mode.REBOUND_INPUT
        and s.phase == Phase.REBOUND
        and cfg.cutoff_speed > 0
        and s.v_B < cfg.cutoff_speed
    ):
        mode, entry = Mode.STABILIZE_TO_APEX, s.t
    if mode in (Mode.REBOUND_INPUT, Mode.STABILIZE_TO_APEX) and s.phase == Phase.DROP:
        mode, entry = Mode.DROP_STABILIZE, s.t

    if mode is Mode.DROP_STABILIZE:
        u = min(cfg.stabilization_drain_N, t_max)
    elif mode is Mode.REBOUND_INPUT:
        u = input_thrust(cfg, p)
    else:
        u = 0.0
    return u, replace(cs, mode=mode, t_mode_entry=entry, t_last=s.t)


def protocol_program(cfg: ProtocolConfig, p: RobotParams) -> ThrustProgram:
    """The per-hop schedule of :func:`thrust_command` in event-switched form."""
    return ThrustProgram(
        drop_force=min(cfg.stabilization_drain_N, cfg.max_thrust(p)),
        input_force=input_thrust(cfg, p),
        start="blanking",
        blank_time=cfg.blanking_ms / 1000.0,
        cutoff_speed=cfg.cutoff_speed,
    )


def hover_hold(
    p: RobotParams,
    cfg: ProtocolConfig,
    start: SimState | None = None,
    duration: float = 5.0,
    dt: float = 1e-3,
) -> tuple[SimState, ControllerState]:
    """Run the hover height-hold from ``start`` (default: foot at the drop height)."""
    s = start or SimState.at_rest(cfg.drop_height, p)
    cs = ControllerState(mode=Mode.HOVER, pid=hover_pid(p))
    y = np.array([s.z_F, s.v_F])
    t = s.t
    for _ in range(int(round(duration / dt))):
        u, cs = thrust_command(cs, SimState(t, y[0] + p.stop_length, y[1], y[0], y[1]), cfg, p, release=False)
        a = u / p.m_T - p.g
        y = y + dt * np.array([y[1] + 0.5 * dt * a, a])
        t += dt
    return SimState(t, y[0] + p.stop_length, y[1], y[0], y[1]), cs


@dataclass
class ProtocolResult:
    trajectory: Trajectory
    records: list[HopCycleRecord]
    config: ProtocolConfig

    @property
    def heights(self) -> list[float]:
        return self.trajectory.apex_heights()

    @property
    def deltas(self) -> list[float]:
        return [r.delta_measured for r in self.records]

    def mode_sequence(self) -> list[Mode]:
        """Controller modes in the order they were entered."""
        out = []
        for m in self.trajectory.mode:
            mode = _KERNEL_MODE[int(m)]
            if not out or out[-1] is not mode:
                out.append(mode)
        return out


def run_protocol(
    p: RobotParams,
    cfg: ProtocolConfig,
    *,
    sample_dt: float = 1e-4,
    t_max: float = 120.0,
) -> ProtocolResult:
    """Release from a stabilized hover at the drop height and hop ``n_hops`` times.

    The hover hold settles onto the drop height at rest (see
    :func:`hover_hold`), so the run starts from that state.
    """
    hover_duty(p, cfg.max_thrust(p))
    init = SimState.at_rest(cfg.drop_height, p)
    traj = simulate(
        p,
        init,
        protocol_program(cfg, p),
        n_hops=cfg.n_hops,
        t_max=t_max,
        sample_dt=sample_dt,
    )
    return ProtocolResult(traj, cycle_records(traj, p), cfg)
