"""Energy ledgers reconstructed from recorded body trajectories.

Input is motion-capture style CSV (``t,x,y,z`` in SI units; ``z`` is the
body height). The pipeline runs in a fixed order because every later step
needs the earlier ones:

1. parse and gap-check the samples,
2. estimate velocity (central differences + moving average),
3. mark apexes, touchdowns and liftoffs,
4. per hop: drag efficiencies first, then control inputs as the remaining
   phase energy change, the stance split by the contact-time rule, and the
   liftoff loss from the stance fit.

Touchdown loss cannot be seen from body motion alone, so ``eta_TD`` is set
to ``m_B / m_T``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import RobotParams, effective_drag_area
from .energy import HopCycleRecord, LEDGER_COLUMNS, ledger_from_energies, ledger_row

GAP_FACTOR = 3.0
TD_ACCEL_G = 3.0
LO_ACCEL_G = 1.5
CONTACT_TIME_TOL = 0.1
FIT_POINTS = 6
REST_SPEED = 0.5


class TrajectoryFormatError(ValueError):
    pass


class NoCyclesError(ValueError):
    pass


@dataclass
class RawTrajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    source_rate: float
    gaps: list[int] = field(default_factory=list)
    source: str = ""

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_arrays(cls, t, z, x=None, y=None, source: str = "") -> "RawTrajectory":
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=float)
        x = np.zeros_like(t) if x is None else np.asarray(x, dtype=float)
        y = np.zeros_like(t) if y is None else np.asarray(y, dtype=float)
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            i = int(np.argmax(np.diff(t) <= 0)) + 1
            raise TrajectoryFormatError(f"time not strictly increasing at sample {i}")
        dts = np.diff(t)
        period = float(np.median(dts)) if len(dts) else math.nan
        gaps = [int(i) + 1 for i in np.flatnonzero(dts > GAP_FACTOR * period)] if len(dts) else []
        return cls(t, x, y, z, 1.0 / period if period > 0 else math.nan, gaps, source)


@dataclass
class CycleMarks:
    apex: list[int]
    touchdown: list[int]
    liftoff: list[int]


def parse_trajectory(path: str | Path) -> RawTrajectory:
    """Read a ``t,x,y,z`` CSV; raise with the line number of the first bad row."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TrajectoryFormatError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ["t", "x", "y", "z"]:
            raise TrajectoryFormatError(f"{path}:1: expected header t,x,y,z, got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise TrajectoryFormatError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise TrajectoryFormatError(f"{path}:{lineno}: non-numeric value") from None
            if not all(math.isfinite(v) for v in vals):
                raise TrajectoryFormatError(f"{path}:{lineno}: non-finite value")
            if rows and vals[0] <= rows[-1][1][0]:
                raise TrajectoryFormatError(f"{path}:{lineno}: time not strictly increasing")
            rows.append((lineno, vals))
    if not rows:
        raise TrajectoryFormatError(f"{path}: no samples")
    a = np.array([r[1] for r in rows])
    return RawTrajectory.from_arrays(a[:, 0], a[:, 3], a[:, 1], a[:, 2], source=str(path))


def write_trajectory(rt: RawTrajectory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "z"])
        for row in zip(rt.t, rt.x, rt.y, rt.z):
            w.writerow([repr(float(v)) for v in row])


def _moving_average(v: np.ndarray, window: int) -> np.ndarray:
    """Centered average; the window shrinks symmetrically near the ends."""
    if window <= 1:
        return v.copy()
    half = window // 2
    out = np.empty_like(v)
    n = len(v)
    for i in range(n):
        r = min(half, i, n - 1 - i)
        out[i] = v[i - r : i + r + 1].mean()
    return out


def estimate_velocity(rt: RawTrajectory, window: int = 5, signal: np.ndarray | None = None) -> np.ndarray:
    """Vertical velocity: central differences smoothed by a centered moving average."""
    z = rt.z if signal is None else signal
    if len(z) < 3:
        raise ValueError("need at least 3 samples")
    v = np.gradient(z, rt.t, edge_order=2)
    return _moving_average(v, window)


def segment_cycles(
    rt: RawTrajectory,
    vel: np.ndarray,
    *,
    td_accel_g: float = TD_ACCEL_G,
    lo_accel_g: float = LO_ACCEL_G,
    g: float = 9.81,
) -> CycleMarks:
    """Mark apexes, touchdowns and liftoffs from the body's vertical motion.

    Touchdown: acceleration first exceeds ``td_accel_g`` while moving down.
    Liftoff: the following sample where acceleration falls back below
    ``lo_accel_g`` while moving up. Apex: downward zero crossing of velocity
    outside contact.
    """
    acc = np.gradient(vel, rt.t, edge_order=2)
    n = len(vel)
    td, lo, apex = [], [], []
    in_contact = False
    for i in range(n):
        if not in_contact:
            if acc[i] > td_accel_g * g and vel[i] < 0:
                td.append(i)
                in_contact = True
            elif i > 0 and vel[i - 1] >= 0 > vel[i]:
                apex.append(i - 1 if i > 0 and vel[i - 1] > -vel[i] else i)
        else:
            if acc[i] < lo_accel_g * g and vel[i] > 0:
                lo.append(i)
                in_contact = False
    if not td:
        raise NoCyclesError("no cycles: no touchdown found")
    # a record that starts (or ends) at rest in the air starts (or ends) at an apex
    if not any(a < td[0] for a in apex) and vel[0] <= 0 and abs(vel[0]) < REST_SPEED:
        apex.append(int(np.argmax(rt.z[: td[0]])))
    if lo and len(lo) == len(td) and not any(a > lo[-1] for a in apex):
        if vel[-1] >= 0 and abs(vel[-1]) < REST_SPEED:
            apex.append(lo[-1] + int(np.argmax(rt.z[lo[-1] :])))
    return CycleMarks(sorted(set(apex)), td, lo)


def _apex_height(rt: RawTrajectory, i: int) -> tuple[float, float]:
    """Vertex of a parabola through the samples around index ``i``."""
    lo = max(0, i - 2)
    hi = min(len(rt) - 1, i + 2)
    while hi - lo < 2:
        if lo > 0:
            lo -= 1
        elif hi < len(rt) - 1:
            hi += 1
        else:
            break
    seg = slice(lo, hi + 1)
    j = lo + int(np.argmax(rt.z[seg]))
    lo, hi = max(0, j - 2), min(len(rt) - 1, j + 2)
    if hi - lo < 2:
        return float(rt.t[j]), float(rt.z[j])
    tc = rt.t[j]
    c = np.polyfit(rt.t[lo : hi + 1] - tc, rt.z[lo : hi + 1], 2)
    if c[0] >= 0:
        return float(tc), float(rt.z[j])
    tv = -c[1] / (2 * c[0])
    if not rt.t[lo] - tc <= tv <= rt.t[hi] - tc:
        return float(tc), float(rt.z[j])
    return float(tc + tv), float(np.polyval(c, tv))


def _crossing(t: np.ndarray, z: np.ndarray, level: float, forward: bool) -> tuple[float, float]:
    """Time and velocity where a cubic through the samples reaches ``level``.

    ``forward`` extrapolates past the last sample (touchdown); otherwise back
    before the first one (liftoff).
    """
    tc = t[-1] if forward else t[0]
    deg = min(3, len(t) - 1)
    c = np.polyfit(t - tc, z, deg)
    dc = np.polyder(c)
    span = 3.0 * float(np.median(np.diff(t)))
    roots = np.roots(np.polysub(c, [level]))
    real = [r.real for r in roots if abs(r.imag) < 1e-9]
    if forward:
        cand = [r for r in real if -1e-12 <= r <= span]
        r = min(cand) if cand else 0.0
    else:
        cand = [r for r in real if -span <= r <= 1e-12]
        r = max(cand) if cand else 0.0
    return float(tc + r), float(np.polyval(dc, r))


def _drag_loss(z: np.ndarray, v: np.ndarray, p: RobotParams) -> float:
    """Drag work (negative) along a path: -∫ 1/2 rho CdA(|v|) v^2 |dz|."""
    f = np.array([0.5 * p.rho * effective_drag_area(abs(x), p.m_T, p.cda) * x * x for x in v])
    return -float(np.sum(0.5 * (f[1:] + f[:-1]) * np.abs(np.diff(z))))


def nominal_contact_time(v_td: float, p: RobotParams) -> float:
    """Stance time of the body bouncing on the undamped leg from speed ``v_td``."""
    w = math.sqrt(p.k_B / p.m_B)
    sag = p.m_B * p.g / p.k_B
    amp = math.hypot(sag, v_td / w)
    return (math.pi + 2.0 * math.asin(sag / amp)) / w


def _stance_exit_speed(ts, zs, t_lo, level, p: RobotParams) -> float:
    """Body speed when the leg reaches full length.

    The leg damper only acts while compressing, so the extension half of
    stance is an undamped oscillation at sqrt(k_B/m_B); a sinusoid is fitted
    from the lowest sample to the liftoff point.
    """
    w = math.sqrt(p.k_B / p.m_B)
    j = int(np.argmin(zs))
    ts, zs = ts[j:], zs[j:]
    tt = np.concatenate([ts, [t_lo]])
    zz = np.concatenate([zs, [level]])
    wt = np.concatenate([np.ones(len(ts)), [10.0]])
    A = np.column_stack([np.ones_like(tt), np.sin(w * (tt - t_lo)), np.cos(w * (tt - t_lo))])
    coef, *_ = np.linalg.lstsq(A * wt[:, None], zz * wt, rcond=None)
    return float(w * coef[1])


@dataclass(frozen=True)
class ExtractedHop:
    hop_index: int
    record: HopCycleRecord
    contact_time: float
    stance_attributed_to_input: bool


@dataclass
class Extraction:
    hops: list[ExtractedHop]
    skipped: list[tuple[int, str]]

    @property
    def records(self) -> list[HopCycleRecord]:
        return [h.record for h in self.hops]


def extract_ledgers(
    rt: RawTrajectory,
    marks: CycleMarks,
    p: RobotParams,
    vel: np.ndarray | None = None,
    *,
    contact_time_tol: float = CONTACT_TIME_TOL,
) -> Extraction:
    """Per-hop ledgers from body motion.

    The body's aerial phases are where it sits above ``p.stop_length`` (the
    body height at which the foot touches the ground).
    """
    if vel is None:
        vel = estimate_velocity(rt)
    level = p.stop_length
    m_T, m_B, g = p.m_T, p.m_B, p.g
    hops, skipped = [], []
    apexes = sorted(marks.apex)
    for k, td_mark in enumerate(marks.touchdown):
        before = [a for a in apexes if a < td_mark]
        after = [a for a in apexes if a > td_mark]
        if not before or not after:
            skipped.append((k, "missing apex before or after touchdown"))
            continue
        ia, ib = before[-1], after[0]
        idx = np.arange(ia, ib + 1)
        low = idx[rt.z[idx] < level]
        if len(low) == 0:
            skipped.append((k, "no stance samples"))
            continue
        s0, s1 = int(low[0]), int(low[-1])
        if np.any(rt.z[s0 : s1 + 1] >= level):
            skipped.append((k, "stance interrupted"))
            continue
        drop = np.arange(ia, s0)
        reb = np.arange(s1 + 1, ib + 1)
        if len(drop) < 3 or len(reb) < 3:
            skipped.append((k, "too few aerial samples"))
            continue

        t_a0, z_a0 = _apex_height(rt, ia)
        t_a1, z_a1 = _apex_height(rt, ib)
        h_d = z_a0 - level
        h_r = z_a1 - level
        if not h_d > 0:
            skipped.append((k, "zero drop height"))
            continue

        fd = drop[-FIT_POINTS:]
        t_td, v_td_signed = _crossing(rt.t[fd], rt.z[fd], level, forward=True)
        fr = reb[:FIT_POINTS]
        t_lo, v_lo_plus = _crossing(rt.t[fr], rt.z[fr], level, forward=False)
        v_td = -v_td_signed

        # drag first: paths apex -> touchdown and liftoff -> apex
        zd = np.concatenate([[z_a0], rt.z[drop[1:]], [level]])
        vd = np.concatenate([[0.0], vel[drop[1:]], [v_td_signed]])
        E_FDd = _drag_loss(zd, vd, p)
        zr = np.concatenate([[level], rt.z[reb[:-1]], [z_a1]])
        vr = np.concatenate([[v_lo_plus], vel[reb[:-1]], [0.0]])
        E_FDr = _drag_loss(zr, vr, p)

        # then control inputs as what the phase energy change leaves over
        E_d = 0.5 * m_T * v_td**2 - m_T * g * h_d - E_FDd
        E_r = m_T * g * h_r - 0.5 * m_T * v_lo_plus**2 - E_FDr
        E_TD = -(p.m_F / m_T) * 0.5 * m_T * v_td**2

        st = np.arange(s0, s1 + 1)
        v_lo_minus = _stance_exit_speed(rt.t[st], rt.z[st], t_lo, level, p)
        stance_change = 0.5 * m_B * v_lo_minus**2 - 0.5 * m_B * v_td**2
        contact = t_lo - t_td
        nominal = nominal_contact_time(v_td, p)
        to_input = abs(contact - nominal) > contact_time_tol * nominal
        E_s = stance_change if to_input else 0.0
        E_mech = stance_change - E_s
        E_LO = 0.5 * m_T * v_lo_plus**2 - 0.5 * m_B * v_lo_minus**2

        ledger = ledger_from_energies(
            h_d=h_d,
            h_r=h_r,
            v_TD=v_td,
            v_LO_minus=v_lo_minus,
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
        rec = HopCycleRecord(
            h_d=h_d,
            h_r=h_r,
            v_TD_minus=v_td,
            v_LO_minus=v_lo_minus,
            v_LO_plus=v_lo_plus,
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
        hops.append(ExtractedHop(k, rec, contact, to_input))
    return Extraction(hops, skipped)


def analyze_file(path: str | Path, p: RobotParams, window: int = 5) -> Extraction:
    rt = parse_trajectory(path)
    vel = estimate_velocity(rt, window)
    marks = segment_cycles(rt, vel, g=p.g)
    return extract_ledgers(rt, marks, p, vel)


def write_extraction_csv(results: Iterable[tuple[str, Extraction]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS + ["hop_index", "file"])
        for name, ex in results:
            for hop in ex.hops:
                w.writerow([repr(float(x)) for x in ledger_row(hop.record)] + [hop.hop_index, name])


@dataclass(frozen=True)
class CdAFit:
    slope: float
    intercept: float
    residual: float
    n_samples: int
    v_span: float


def _free_fall_samples(rt: RawTrajectory, v_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Speed and drag deceleration (a + g) of the descent before first contact."""
    t, z = rt.t, rt.z
    if len(t) < 5:
        return np.empty(0), np.empty(0)
    dt = np.diff(t)
    # second derivative from the three-point formula on a possibly uneven grid
    h0, h1 = dt[:-1], dt[1:]
    acc = 2.0 * (h0 * z[2:] - (h0 + h1) * z[1:-1] + h1 * z[:-2]) / (h0 * h1 * (h0 + h1))
    vel = (z[2:] - z[:-2]) / (h0 + h1)
    contact = np.flatnonzero(acc > 0)
    end = contact[0] - 1 if len(contact) else len(acc)
    sel = np.arange(0, max(end, 0))
    sel = sel[(vel[sel] < 0) & (-vel[sel] <= v_max)]
    return -vel[sel], acc[sel]


def fit_cda(
    runs: Sequence[tuple[RawTrajectory, float]],
    *,
    g: float = 9.81,
    rho: float = 1.225,
    v_max: float = 7.0,
    reference_mass: float | None = None,
    scaling_exponent: float = 2.0 / 3.0,
    min_span: float = 2.0,
) -> CdAFit:
    """Least-squares line C_D*A = intercept + slope*|v| from unpowered descents.

    Each descent sample gives m (a + g) = 1/2 rho (c0 + c1 |v|) v^2 s, with
    ``s = (m / reference_mass) ** scaling_exponent`` so runs at different
    masses share one reference-size line. Only speeds up to ``v_max`` are
    used.
    """
    if reference_mass is None:
        from .core import M_B_PROTOTYPE, M_F_PROTOTYPE

        reference_mass = M_B_PROTOTYPE + M_F_PROTOTYPE
    rows, rhs = [], []
    speeds = []
    for rt, mass in runs:
        v, a = _free_fall_samples(rt, v_max)
        s = (mass / reference_mass) ** scaling_exponent
        q = 0.5 * rho * v * v * s
        rows.append(np.column_stack([q, q * v]))
        rhs.append(mass * (a + g))
        speeds.append(v)
    A = np.vstack(rows) if rows else np.empty((0, 2))
    b = np.concatenate(rhs) if rhs else np.empty(0)
    v_all = np.concatenate(speeds) if speeds else np.empty(0)
    span = float(v_all.max() - v_all.min()) if len(v_all) else 0.0
    if len(v_all) < 3 or span < min_span:
        raise ValueError(f"insufficient speed range: {span:.2f} m/s < {min_span} m/s")
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - b) ** 2)))
    return CdAFit(slope=float(coef[1]), intercept=float(coef[0]), residual=resid, n_samples=len(b), v_span=span)
