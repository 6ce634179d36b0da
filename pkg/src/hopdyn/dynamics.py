"""Vertical two-mass hopping dynamics with phase switching and event detection.

In the aerial phases the leg sits on its hard stop and body and foot move as
one rigid mass. At touchdown the foot meets a spring-damper ground; in stance
the leg spring (and its damper, while compressing only) couples the masses.
When the leg re-extends to the hard stop the two velocities merge plastically,
which is where the liftoff loss comes from.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize

from . import _kernel as K
from .core import RobotParams, effective_drag_area, pack, validate

DT_AIR = 1e-4
DT_CONTACT = 1e-6
EVENT_TOL = 1e-7
MIN_APEX = 1e-3


class Phase(enum.IntEnum):
    DROP = K.DROP
    STANCE = K.STANCE
    REBOUND = K.REBOUND


class EventKind(enum.IntEnum):
    TOUCHDOWN = K.EV_TOUCHDOWN
    LIFTOFF = K.EV_LIFTOFF
    APEX = K.EV_APEX
    CUTOFF = K.EV_CUTOFF


class SimulationError(RuntimeError):
    pass


class EventNotConverged(SimulationError):
    pass


class StepBudgetExceeded(SimulationError):
    pass


@dataclass(frozen=True)
class SimState:
    t: float
    z_B: float
    v_B: float
    z_F: float
    v_F: float
    phase: Phase = Phase.DROP

    @classmethod
    def at_rest(cls, height: float, p: RobotParams, t: float = 0.0) -> "SimState":
        """Robot held still with its foot ``height`` metres above the ground."""
        return cls(t, height + p.stop_length, 0.0, height, 0.0, Phase.DROP)

    def as_array(self) -> np.ndarray:
        y = np.zeros(K.NY)
        y[:4] = self.z_B, self.v_B, self.z_F, self.v_F
        return y


@dataclass(frozen=True)
class TransitionEvent:
    kind: EventKind
    t: float
    state_before: SimState
    state_after: SimState


@dataclass(frozen=True)
class ContactMetrics:
    a_foot_max: float
    F_foot_max: float
    compression_max: float
    a_body_max: float
    F_body_max: float
    leg_compression_max: float = 0.0
    g: float = 9.81

    @property
    def a_foot_max_g(self) -> float:
        return self.a_foot_max / self.g

    @property
    def a_body_max_g(self) -> float:
        return self.a_body_max / self.g


@dataclass(frozen=True)
class ThrustProgram:
    """Piecewise-constant body force, switched by hop events.

    ``drop_force`` acts from apex to touchdown. ``input_force`` starts either
    at liftoff (``start="liftoff"``) or ``blank_time`` seconds after
    touchdown (``start="blanking"``) and stops once the ascending body slows
    below ``cutoff_speed`` (``cutoff_speed <= 0`` means at the apex).
    """

    drop_force: float = 0.0
    input_force: float = 0.0
    start: str = "liftoff"
    blank_time: float = 0.0
    cutoff_speed: float = 0.0

    @classmethod
    def rebound(cls, force: float) -> "ThrustProgram":
        return cls(input_force=force)

    def pack(self) -> np.ndarray:
        if self.start not in ("liftoff", "blanking"):
            raise ValueError(f"unknown thrust start {self.start!r}")
        return np.array(
            [
                self.drop_force,
                self.input_force,
                K.START_AFTER_BLANKING if self.start == "blanking" else K.START_AT_LIFTOFF,
                self.blank_time,
                self.cutoff_speed,
            ]
        )

    def __call__(self, mode: int) -> float:
        return float(K.thrust(mode, self.pack()))


NO_THRUST = ThrustProgram()


@dataclass
class Trajectory:
    t: np.ndarray
    z_B: np.ndarray
    v_B: np.ndarray
    z_F: np.ndarray
    v_F: np.ndarray
    phase: np.ndarray
    U_B: np.ndarray
    U_F: np.ndarray
    mode: np.ndarray
    grid: np.ndarray
    work: np.ndarray  # columns: ground, leg damper (dissipated), drag, thrust
    events: list[TransitionEvent]
    params: RobotParams
    status: str = "ok"
    metrics: np.ndarray = field(default_factory=lambda: np.zeros(K.N_METRICS))
    sample_dt: float = DT_AIR

    def __len__(self) -> int:
        return len(self.t)

    def state(self, i: int) -> SimState:
        return SimState(
            float(self.t[i]),
            float(self.z_B[i]),
            float(self.v_B[i]),
            float(self.z_F[i]),
            float(self.v_F[i]),
            Phase(int(self.phase[i])),
        )

    def __iter__(self):
        return (self.state(i) for i in range(len(self)))

    def events_of(self, kind: EventKind) -> list[TransitionEvent]:
        return [e for e in self.events if e.kind == kind]

    def apex_heights(self) -> list[float]:
        """Foot heights at the start and at every apex (the hop heights)."""
        hs = [float(self.z_F[0])] if len(self) and self.v_B[0] == 0.0 else []
        hs += [e.state_after.z_F for e in self.events_of(EventKind.APEX)]
        return hs

    def index_at(self, t: float) -> int:
        i = int(np.searchsorted(self.t, t))
        return min(i, len(self.t) - 1)

    def mechanical_energy(self) -> np.ndarray:
        """Kinetic + gravitational + elastic energy of every sample."""
        p = self.params
        comp = np.maximum(p.r_0 - (self.z_B - self.z_F), 0.0)
        ground = np.maximum(-self.z_F, 0.0)
        stance = self.phase == Phase.STANCE
        return (
            0.5 * p.m_B * self.v_B**2
            + 0.5 * p.m_F * self.v_F**2
            + p.g * (p.m_B * self.z_B + p.m_F * self.z_F)
            + np.where(stance, 0.5 * p.k_B * comp**2, 0.0)
            + 0.5 * p.k_F * ground**2
        )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "z_B", "v_B", "z_F", "v_F", "phase", "U_B", "U_F"])
            for i in range(len(self)):
                w.writerow(
                    [
                        _fmt(self.t[i]),
                        _fmt(self.z_B[i]),
                        _fmt(self.v_B[i]),
                        _fmt(self.z_F[i]),
                        _fmt(self.v_F[i]),
                        Phase(int(self.phase[i])).name.capitalize(),
                        _fmt(self.U_B[i]),
                        _fmt(self.U_F[i]),
                    ]
                )

    def events_to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "t", "z_B", "v_B", "z_F", "v_F"])
            for e in self.events:
                if e.kind == EventKind.CUTOFF:
                    continue
                s = e.state_after
                w.writerow(
                    [e.kind.name.capitalize(), _fmt(e.t), _fmt(s.z_B), _fmt(s.v_B), _fmt(s.z_F), _fmt(s.v_F)]
                )

    def mocap_samples(self, rate: float = 100.0) -> tuple[np.ndarray, np.ndarray]:
        """Times and body heights on a ``rate`` Hz grid.

        The trajectory must have been recorded with a ``sample_dt`` that
        divides the mocap period.
        """
        stride = 1.0 / rate / self.sample_dt
        k = int(round(stride))
        if abs(stride - k) > 1e-9 or k < 1:
            raise ValueError("mocap period must be a multiple of the recorded sample_dt")
        sel = np.flatnonzero((self.grid >= 0) & (self.grid % k == 0))
        t = self.t[0] + (self.grid[sel] // k) / rate
        return t, self.z_B[sel].copy()

    def to_mocap_csv(self, path: str | Path, rate: float = 100.0) -> None:
        """Body position at ``rate`` Hz, header t,x,y,z (x = y = 0)."""
        t, z = self.mocap_samples(rate)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "y", "z"])
            for ti, zi in zip(t, z):
                w.writerow([_fmt(ti), "0.0", "0.0", _fmt(zi)])


def _fmt(x: float) -> str:
    return repr(float(x))


def vertical_derivatives(s: SimState, p: RobotParams, U_B: float = 0.0, U_F: float = 0.0):
    """Time derivative (z_B', v_B', z_F', v_F') of a state.

    Aerial phases treat the locked leg as one rigid body; stance switches the
    leg spring/damper and the ground contact on and off by geometry.
    """
    y = s.as_array()
    if not np.all(np.isfinite(y[:4])):
        raise SimulationError("non-finite state")
    dy = np.empty(K.NY)
    K.rhs(y, int(s.phase), float(U_B), pack(p), dy)
    if s.phase == Phase.STANCE:
        dy[3] += U_F / p.m_F
    else:
        dy[1] += U_F / p.m_T
        dy[3] += U_F / p.m_T
    return float(dy[0]), float(dy[1]), float(dy[2]), float(dy[3])


@dataclass
class _Raw:
    status: int
    t_end: float
    y_end: np.ndarray
    phase: int
    mode: int
    metrics: np.ndarray
    e_kind: np.ndarray
    e_t: np.ndarray
    e_before: np.ndarray
    e_after: np.ndarray
    samples: tuple | None


def _run(
    p: RobotParams,
    init: SimState,
    program: ThrustProgram = NO_THRUST,
    *,
    t_max: float = math.inf,
    stop_kind: int = K.NO_STOP,
    stop_count: int = 0,
    dt: float = DT_AIR,
    dt_contact: float = DT_CONTACT,
    event_tol: float = EVENT_TOL,
    record: bool = True,
    sample_dt: float | None = None,
    max_steps: int = 500_000_000,
    min_apex: float = MIN_APEX,
    ceiling: float = math.inf,
    mode: int = K.MODE_DROP,
    t_blank_end: float = math.inf,
) -> _Raw:
    y0 = init.as_array()
    if not np.all(np.isfinite(y0[:4])):
        raise SimulationError("initial state is not finite")
    if init.phase != Phase.STANCE:
        if abs(init.v_B - init.v_F) > 1e-12 or abs(init.z_B - init.z_F - p.stop_length) > 1e-9:
            raise ValueError("aerial initial state must have the leg locked at stop_length")
    if not (math.isfinite(t_max) or stop_kind != K.NO_STOP or math.isfinite(ceiling)):
        raise ValueError("need a stop condition (t_max or an event count)")
    if sample_dt is None:
        sample_dt = dt
    pv = pack(p)
    pg = program.pack()

    cap_s = 1
    if record:
        horizon = t_max if math.isfinite(t_max) else 4.0 * max(stop_count, 1)
        cap_s = int(min(horizon / sample_dt, 5e6)) + 256
    cap_e = 8 * max(stop_count, 1) + 64
    while True:
        y = y0.copy()
        s_t = np.empty(cap_s)
        s_y = np.empty((cap_s, K.NY))
        s_phase = np.empty(cap_s, dtype=np.int64)
        s_mode = np.empty(cap_s, dtype=np.int64)
        s_u = np.empty(cap_s)
        s_grid = np.empty(cap_s, dtype=np.int64)
        e_kind = np.empty(cap_e, dtype=np.int64)
        e_t = np.empty(cap_e)
        e_before = np.empty((cap_e, K.NY))
        e_after = np.empty((cap_e, K.NY))
        metrics = np.zeros(K.N_METRICS)
        info = np.zeros(6)
        status = K.run(
            pv,
            pg,
            y,
            int(init.phase),
            int(mode),
            float(init.t),
            float(t_blank_end),
            float(dt),
            float(dt_contact),
            float(t_max),
            int(stop_kind),
            int(stop_count),
            int(max_steps),
            float(event_tol),
            float(min_apex),
            float(ceiling),
            bool(record),
            float(sample_dt),
            s_t,
            s_y,
            s_phase,
            s_mode,
            s_u,
            s_grid,
            e_kind,
            e_t,
            e_before,
            e_after,
            metrics,
            info,
        )
        if status == K.ST_SAMPLE_OVERFLOW:
            cap_s *= 2
            continue
        if status == K.ST_EVENT_OVERFLOW:
            cap_e *= 4
            continue
        break
    if status == K.ST_NONFINITE:
        raise SimulationError("state became non-finite; reduce the step size")
    if status == K.ST_STEP_BUDGET:
        raise StepBudgetExceeded(f"step budget of {max_steps} exceeded at t={info[0]:.6g}s")
    n_s, n_e = int(info[4]), int(info[5])
    samples = None
    if record:
        samples = (s_t[:n_s], s_y[:n_s], s_phase[:n_s], s_mode[:n_s], s_u[:n_s], s_grid[:n_s])
    return _Raw(
        status=int(status),
        t_end=float(info[0]),
        y_end=y,
        phase=int(info[1]),
        mode=int(info[2]),
        metrics=metrics,
        e_kind=e_kind[:n_e],
        e_t=e_t[:n_e],
        e_before=e_before[:n_e],
        e_after=e_after[:n_e],
        samples=samples,
    )


_STATUS = {
    K.ST_OK: "ok",
    K.ST_CEASED: "ceased",
    K.ST_CEILING: "ceiling",
}


def _to_state(t: float, y: np.ndarray, phase: int) -> SimState:
    return SimState(float(t), float(y[0]), float(y[1]), float(y[2]), float(y[3]), Phase(phase))


def _events(raw: _Raw) -> list[TransitionEvent]:
    out = []
    prev_phase = {K.EV_TOUCHDOWN: K.DROP, K.EV_LIFTOFF: K.STANCE, K.EV_APEX: K.REBOUND, K.EV_CUTOFF: K.REBOUND}
    next_phase = {K.EV_TOUCHDOWN: K.STANCE, K.EV_LIFTOFF: K.REBOUND, K.EV_APEX: K.DROP, K.EV_CUTOFF: K.REBOUND}
    for k, t, b, a in zip(raw.e_kind, raw.e_t, raw.e_before, raw.e_after):
        k = int(k)
        out.append(
            TransitionEvent(
                EventKind(k), float(t), _to_state(t, b, prev_phase[k]), _to_state(t, a, next_phase[k])
            )
        )
    return out


def simulate(
    p: RobotParams,
    init: SimState,
    schedule: ThrustProgram | None = None,
    *,
    t_max: float | None = None,
    n_hops: int | None = None,
    dt: float = DT_AIR,
    dt_contact: float = DT_CONTACT,
    event_tol: float = EVENT_TOL,
    record: bool = True,
    sample_dt: float | None = None,
    max_steps: int = 500_000_000,
) -> Trajectory:
    """Integrate the hybrid model from ``init``.

    Stops at ``t_max`` seconds or after ``n_hops`` apexes, whichever comes
    first, or when hopping ceases (apex below 1 mm or no upward liftoff
    velocity). Samples are stored on a ``sample_dt`` grid (default ``dt``)
    plus every event and thrust switch.
    """
    if t_max is None and n_hops is None:
        raise ValueError("give t_max or n_hops")
    if t_max is not None and not t_max > 0:
        raise ValueError("t_max must be positive")
    if n_hops is not None and n_hops < 1:
        raise ValueError("n_hops must be positive")
    report = validate(p)
    if not report.ok:
        raise ValueError(f"invalid parameters:\n{report}")
    program = schedule if schedule is not None else NO_THRUST
    raw = _run(
        p,
        init,
        program,
        t_max=t_max if t_max is not None else math.inf,
        stop_kind=K.EV_APEX if n_hops is not None else K.NO_STOP,
        stop_count=n_hops or 0,
        dt=dt,
        dt_contact=dt_contact,
        event_tol=event_tol,
        record=record,
        sample_dt=sample_dt,
        max_steps=max_steps,
    )
    return _trajectory(raw, p, sample_dt if sample_dt is not None else dt)


def _trajectory(raw: _Raw, p: RobotParams, sample_dt: float) -> Trajectory:
    if raw.samples is None:
        empty = np.empty(0)
        t = zb = vb = zf = vf = u = empty
        phase = mode = grid = np.empty(0, dtype=np.int64)
        work = np.empty((0, 4))
    else:
        t, y, phase, mode, u, grid = raw.samples
        zb, vb, zf, vf = y[:, 0], y[:, 1], y[:, 2], y[:, 3]
        work = y[:, 4:8]
    return Trajectory(
        t=t,
        z_B=zb,
        v_B=vb,
        z_F=zf,
        v_F=vf,
        phase=phase,
        U_B=u,
        U_F=np.zeros_like(u),
        mode=mode,
        grid=grid,
        work=work,
        events=_events(raw),
        params=p,
        status=_STATUS.get(raw.status, str(raw.status)),
        metrics=raw.metrics,
        sample_dt=sample_dt,
    )


def terminal_velocity(p: RobotParams, tol: float = 1e-6) -> float:
    """Speed where drag balances weight, by bisection on [0, 100] m/s."""

    def excess(v):
        return 0.5 * p.rho * effective_drag_area(v, p.m_T, p.cda) * v * v - p.weight

    lo, hi = 0.0, 100.0
    if p.rho <= 0 or excess(hi) < 0:
        raise ValueError("no terminal velocity in [0, 100] m/s")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def touchdown_state(v_TD: float, p: RobotParams) -> SimState:
    """Foot just reaching the ground at ``v_TD`` m/s (downward), leg fully extended."""
    return SimState(0.0, p.stop_length, -v_TD, 0.0, -v_TD, Phase.STANCE)


def peak_contact_metrics(v_TD: float, p: RobotParams, dt_contact: float = DT_CONTACT) -> ContactMetrics:
    """Force and compression extrema over one touchdown-to-liftoff pass.

    Accelerations follow the force-over-mass convention (ground force / m_F,
    leg force / m_B), so they include the 1 g carried at rest.
    """
    if not v_TD > 0:
        raise ValueError("v_TD must be positive")
    raw = _run(
        p,
        touchdown_state(v_TD, p),
        stop_kind=K.EV_LIFTOFF,
        stop_count=1,
        t_max=10.0,
        dt_contact=dt_contact,
        record=False,
    )
    m = raw.metrics
    return ContactMetrics(
        a_foot_max=m[K.MT_FG] / p.m_F,
        F_foot_max=m[K.MT_FG],
        compression_max=m[K.MT_XG],
        a_body_max=m[K.MT_FLEG] / p.m_B,
        F_body_max=m[K.MT_FLEG],
        leg_compression_max=m[K.MT_XLEG],
        g=p.g,
    )


def touchdown_retention(
    v_TD: float,
    p: RobotParams,
    *,
    settle_fraction: float = 0.01,
    dt_contact: float = DT_CONTACT,
) -> float:
    """Share of the touchdown kinetic energy still held by body, foot and leg spring
    once the foot impact is over.

    The impact counts as over at the first sample where the foot speed has
    fallen below ``settle_fraction`` of ``v_TD``. Ground-spring energy left at
    that instant is counted as lost, as is everything the ground damper took.
    """
    if not v_TD > 0:
        raise ValueError("v_TD must be positive")
    traj = simulate(
        p,
        touchdown_state(v_TD, p),
        t_max=min(1.0, 50.0 * math.sqrt(p.m_B / p.k_B)),
        dt_contact=dt_contact,
        sample_dt=dt_contact,
    )
    settled = np.flatnonzero(np.abs(traj.v_F) < settle_fraction * v_TD)
    if not len(settled):
        raise SimulationError("foot never came to rest during stance")
    i = int(settled[0])
    comp = max(p.r_0 - (traj.z_B[i] - traj.z_F[i]), 0.0)
    kept = 0.5 * p.m_B * traj.v_B[i] ** 2 + 0.5 * p.m_F * traj.v_F[i] ** 2 + 0.5 * p.k_B * comp**2
    # gravity keeps working on the robot during the impact; credit it back
    fallen = p.m_B * (traj.z_B[0] - traj.z_B[i]) + p.m_F * (traj.z_F[0] - traj.z_F[i])
    return float(kept / (0.5 * p.m_T * v_TD**2 + p.g * fallen))


@dataclass(frozen=True)
class ContactFit:
    k_F: float
    b_F: float
    residual: float
    predictions: tuple[tuple[float, float], ...]


def calibrate_ground_contact(
    targets: Sequence[tuple[float, float, float]],
    p: RobotParams | None = None,
    *,
    k_range: tuple[float, float] = (1e4, 1e9),
    b_range: tuple[float, float] = (1.0, 1e5),
    grid: int = 13,
    min_damping_ratio: float = 0.0,
    dt_contact: float = DT_CONTACT,
) -> ContactFit:
    """Fit ground stiffness and damping to (compression, peak accel, v_TD) targets.

    Minimizes the summed squared relative errors of predicted peak ground
    compression and peak foot acceleration. A log-spaced grid seeds a
    Nelder-Mead refinement in log space. ``min_damping_ratio`` restricts the
    search to foot-ground contacts at least that damped (1 = critical).
    """
    targets = [tuple(map(float, t)) for t in targets]
    if not targets:
        raise ValueError("need at least one calibration target")
    if p is None:
        from .core import default_params

        p = default_params()

    def constants(logk, logb):
        k = 10.0**logk
        return k, max(10.0**logb, 2.0 * min_damping_ratio * math.sqrt(k * p.m_F))

    def predict(logk, logb):
        k, b = constants(logk, logb)
        q = replace(p, k_F=k, b_F=b)
        return [peak_contact_metrics(v, q, dt_contact) for _, _, v in targets]

    def cost(x):
        try:
            ms = predict(*x)
        except SimulationError:
            return 1e6
        return sum(
            (m.compression_max / d - 1.0) ** 2 + (m.a_foot_max / a - 1.0) ** 2
            for m, (d, a, _) in zip(ms, targets)
        )

    lk = np.linspace(math.log10(k_range[0]), math.log10(k_range[1]), grid)
    lb = np.linspace(math.log10(b_range[0]), math.log10(b_range[1]), grid)
    best = None
    for a in lk:
        for b in lb:
            c = cost((a, b))
            if best is None or c < best[0]:
                best = (c, a, b)
    if best is None or not math.isfinite(best[0]):
        raise SimulationError("calibration grid produced no finite cost")
    res = optimize.minimize(
        cost,
        x0=[best[1], best[2]],
        method="Nelder-Mead",
        options={"xatol": 1e-4, "fatol": 1e-10, "maxiter": 400},
    )
    x = res.x if res.fun <= best[0] else np.array([best[1], best[2]])
    fun = min(res.fun, best[0])
    ms = predict(*x)
    k, b = constants(*x)
    return ContactFit(
        k_F=float(k),
        b_F=float(b),
        residual=float(fun),
        predictions=tuple((m.compression_max, m.a_foot_max) for m in ms),
    )
