"""Compiled fixed-step RK4 loop for the vertical two-mass hopper.

Everything here works on flat float arrays so numba can compile it; the
public wrappers live in :mod:`hopdyn.dynamics`. Layouts:

params (see core.pack)
    m_B m_F k_B b_B k_F b_F r_0 stop g rho cda_linear cda_a0 cda_a1 cda_vmax
    cda_mref cda_exp
program
    drop_force input_force start_mode blank_time cutoff_speed
state y
    z_B v_B z_F v_F W_ground W_damp W_drag W_thrust
"""

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - pure-python fallback, slow but correct

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


M_B, M_F, K_B, B_B, K_F, B_F, R0, STOP, G, RHO = range(10)
CDA_LINEAR, CDA_A0, CDA_A1, CDA_VMAX, CDA_MREF, CDA_EXP = range(10, 16)

PG_DROP, PG_INPUT, PG_START, PG_BLANK, PG_CUTOFF = range(5)
START_AT_LIFTOFF = 0.0
START_AFTER_BLANKING = 1.0

DROP, STANCE, REBOUND = 0, 1, 2
MODE_DROP, MODE_BLANK, MODE_INPUT, MODE_COAST = 0, 1, 2, 3

EV_TOUCHDOWN, EV_LIFTOFF, EV_APEX, EV_CUTOFF, EV_BLANK_END = 0, 1, 2, 3, 4
NO_STOP = -1

ST_OK, ST_SAMPLE_OVERFLOW, ST_EVENT_OVERFLOW, ST_STEP_BUDGET = 0, 1, 2, 3
ST_CEASED, ST_NONFINITE, ST_CEILING = 4, 5, 6

NY = 8
# metrics: max ground force, max ground compression, max leg force on body,
# max leg compression, accumulated hard-stop loss
N_METRICS = 5
MT_FG, MT_XG, MT_FLEG, MT_XLEG, MT_MERGE = range(5)

AREA_FLOOR = 1e-6
# a stance longer than this means the robot has settled on its leg
MAX_STANCE_TIME = 2.0


@njit(cache=True)
def drag_area(v_abs, mass, p):
    if p[CDA_LINEAR] > 0.5:
        v = v_abs if v_abs < p[CDA_VMAX] else p[CDA_VMAX]
        a = p[CDA_A0] + p[CDA_A1] * v
    else:
        a = p[CDA_A0]
    a *= (mass / p[CDA_MREF]) ** p[CDA_EXP]
    if a < AREA_FLOOR:
        a = AREA_FLOOR
    return a


@njit(cache=True)
def drag(v, mass, p):
    if p[RHO] == 0.0:
        return 0.0
    av = abs(v)
    return -0.5 * p[RHO] * drag_area(av, mass, p) * v * av


@njit(cache=True)
def ground_force(zf, vf, p):
    if zf >= 0.0:
        return 0.0
    f = -p[K_F] * zf - p[B_F] * vf
    if f < 0.0:
        return 0.0
    return f


@njit(cache=True)
def leg_force(y, p):
    """Force the leg pushes the body up with (and the foot down), and damper power."""
    comp = p[R0] - (y[0] - y[2])
    if comp <= 0.0:
        return 0.0, 0.0
    f = p[K_B] * comp
    rel = y[1] - y[3]
    pd = 0.0
    if rel < 0.0:
        f -= p[B_B] * rel
        pd = p[B_B] * rel * rel
    return f, pd


@njit(cache=True)
def rhs(y, phase, u_b, p, dy):
    mb = p[M_B]
    mf = p[M_F]
    mt = mb + mf
    g = p[G]
    # during the drop the foot has not touched down yet, even inside an RK4
    # stage that overshoots the ground; contact starts at the located event
    fg = 0.0 if phase == DROP else ground_force(y[2], y[3], p)
    fd = drag(y[1], mt, p)
    if phase == STANCE:
        fl, pd = leg_force(y, p)
        ab = (-mb * g + u_b + fl + fd) / mb
        af = (-mf * g - fl + fg) / mf
    else:
        # leg locked at the hard stop: one rigid body
        ab = (-mt * g + u_b + fd + fg) / mt
        af = ab
        pd = 0.0
    dy[0] = y[1]
    dy[1] = ab
    dy[2] = y[3]
    dy[3] = af
    dy[4] = fg * y[3]
    dy[5] = pd
    dy[6] = fd * y[1]
    dy[7] = u_b * y[1]


@njit(cache=True)
def rk4(y, phase, u_b, p, h, out, k1, k2, k3, k4, tmp):
    rhs(y, phase, u_b, p, k1)
    for i in range(NY):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    rhs(tmp, phase, u_b, p, k2)
    for i in range(NY):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    rhs(tmp, phase, u_b, p, k3)
    for i in range(NY):
        tmp[i] = y[i] + h * k3[i]
    rhs(tmp, phase, u_b, p, k4)
    for i in range(NY):
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def thrust(mode, prog):
    if mode == MODE_DROP:
        return prog[PG_DROP]
    if mode == MODE_INPUT:
        return prog[PG_INPUT]
    return 0.0


@njit(cache=True)
def crossing(y0, y1, phase, mode, prog, p):
    if phase == DROP:
        if y0[2] >= 0.0 and y1[2] < 0.0:
            return EV_TOUCHDOWN
    elif phase == STANCE:
        g0 = y0[0] - y0[2] - p[STOP]
        g1 = y1[0] - y1[2] - p[STOP]
        if g0 < 0.0 and g1 >= 0.0:
            return EV_LIFTOFF
    else:
        cut = prog[PG_CUTOFF]
        if mode == MODE_INPUT and cut > 0.0:
            if y0[1] >= cut and y1[1] < cut:
                return EV_CUTOFF
        if y0[1] > 0.0 and y1[1] <= 0.0:
            return EV_APEX
    return -1


@njit(cache=True)
def run(
    p,
    prog,
    y,
    phase,
    mode,
    t,
    t_blank_end,
    dt_air,
    dt_contact,
    t_max,
    stop_kind,
    stop_count,
    max_steps,
    ev_tol,
    min_apex,
    ceiling,
    record,
    sample_dt,
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
    out_info,
):
    """Integrate until a stop condition; ``y`` holds the final state on return.

    out_info receives [t_end, phase, mode, t_blank_end, n_samples, n_events].
    """
    mb = p[M_B]
    mf = p[M_F]
    mt = mb + mf
    ynew = np.empty(NY)
    ymid = np.empty(NY)
    k1 = np.empty(NY)
    k2 = np.empty(NY)
    k3 = np.empty(NY)
    k4 = np.empty(NY)
    tmp = np.empty(NY)
    counts = np.zeros(5, dtype=np.int64)

    cap_s = s_t.shape[0]
    cap_e = e_t.shape[0]
    n_s = 0
    n_e = 0
    status = ST_OK
    t0 = t
    k_grid = 0

    if record:
        s_t[0] = t
        for i in range(NY):
            s_y[0, i] = y[i]
        s_phase[0] = phase
        s_mode[0] = mode
        s_u[0] = thrust(mode, prog)
        s_grid[0] = 0
        n_s = 1
        k_grid = 1

    t_touchdown = t if phase == STANCE else -np.inf
    steps = 0
    while True:
        if t >= t_max - 1e-12:
            break
        if steps >= max_steps:
            status = ST_STEP_BUDGET
            break
        h = dt_contact if phase == STANCE else dt_air
        if t + h > t_max:
            h = t_max - t
        on_grid = False
        if record:
            t_next = t0 + k_grid * sample_dt
            if t + h >= t_next - 1e-13:
                h = t_next - t
                on_grid = True
        blank_switch = False
        if mode == MODE_BLANK and prog[PG_START] > 0.5:
            if t + h >= t_blank_end - 1e-13:
                h = t_blank_end - t
                blank_switch = True
                on_grid = on_grid and abs(t0 + k_grid * sample_dt - t_blank_end) < 1e-13
        if h < 1e-14:
            h = 0.0

        u = thrust(mode, prog)
        ev = -1
        if h > 0.0:
            rk4(y, phase, u, p, h, ynew, k1, k2, k3, k4, tmp)
            finite = True
            for i in range(4):
                if not math.isfinite(ynew[i]):
                    finite = False
            if not finite:
                status = ST_NONFINITE
                break
            ev = crossing(y, ynew, phase, mode, prog, p)
            if ev >= 0:
                lo = 0.0
                hi = h
                while hi - lo > ev_tol:
                    mid = 0.5 * (lo + hi)
                    rk4(y, phase, u, p, mid, ymid, k1, k2, k3, k4, tmp)
                    if crossing(y, ymid, phase, mode, prog, p) >= 0:
                        hi = mid
                    else:
                        lo = mid
                h = hi
                rk4(y, phase, u, p, h, ynew, k1, k2, k3, k4, tmp)
                ev = crossing(y, ynew, phase, mode, prog, p)
                on_grid = False
                blank_switch = False
        else:
            for i in range(NY):
                ynew[i] = y[i]

        if phase == STANCE:
            fg = ground_force(ynew[2], ynew[3], p)
            if fg > metrics[MT_FG]:
                metrics[MT_FG] = fg
            if -ynew[2] > metrics[MT_XG]:
                metrics[MT_XG] = -ynew[2]
            fl, pd = leg_force(ynew, p)
            if fl > metrics[MT_FLEG]:
                metrics[MT_FLEG] = fl
            xl = p[R0] - (ynew[0] - ynew[2])
            if xl > metrics[MT_XLEG]:
                metrics[MT_XLEG] = xl

        t += h
        for i in range(NY):
            y[i] = ynew[i]
        steps += 1

        mode_changed = False
        if blank_switch:
            mode = MODE_INPUT
            t_blank_end = np.inf
            mode_changed = True
            if phase == REBOUND and prog[PG_CUTOFF] > 0.0 and y[1] < prog[PG_CUTOFF]:
                mode = MODE_COAST

        stop_now = False
        if ev >= 0:
            if n_e >= cap_e:
                status = ST_EVENT_OVERFLOW
                break
            e_kind[n_e] = ev
            e_t[n_e] = t
            for i in range(NY):
                e_before[n_e, i] = y[i]
            if ev == EV_TOUCHDOWN:
                phase = STANCE
                t_touchdown = t
                if mode == MODE_DROP:
                    mode = MODE_BLANK
                    if prog[PG_START] > 0.5:
                        t_blank_end = t + prog[PG_BLANK]
                    else:
                        t_blank_end = np.inf
            elif ev == EV_LIFTOFF:
                v = (mb * y[1] + mf * y[3]) / mt
                ke0 = 0.5 * mb * y[1] * y[1] + 0.5 * mf * y[3] * y[3]
                metrics[MT_MERGE] += ke0 - 0.5 * mt * v * v
                y[1] = v
                y[3] = v
                y[0] = y[2] + p[STOP]
                phase = REBOUND
                if mode == MODE_BLANK and prog[PG_START] < 0.5:
                    mode = MODE_INPUT
                if mode == MODE_INPUT and prog[PG_CUTOFF] > 0.0 and v < prog[PG_CUTOFF]:
                    mode = MODE_COAST
                if v <= 0.0:
                    status = ST_CEASED
                    stop_now = True
            elif ev == EV_APEX:
                phase = DROP
                mode = MODE_DROP
                if y[2] < min_apex:
                    status = ST_CEASED
                    stop_now = True
            elif ev == EV_CUTOFF:
                mode = MODE_COAST
            for i in range(NY):
                e_after[n_e, i] = y[i]
            n_e += 1
            counts[ev] += 1
            if ev == stop_kind and counts[ev] >= stop_count:
                stop_now = True
            mode_changed = True

        if phase == STANCE and t - t_touchdown > MAX_STANCE_TIME:
            status = ST_CEASED
            stop_now = True
        if phase == REBOUND and y[2] >= ceiling:
            status = ST_CEILING
            stop_now = True

        if record and h == 0.0 and n_s > 0 and s_t[n_s - 1] == t:
            # zero-length step onto an existing sample: relabel it in place
            s_phase[n_s - 1] = phase
            s_mode[n_s - 1] = mode
            s_u[n_s - 1] = thrust(mode, prog)
            if on_grid:
                s_grid[n_s - 1] = k_grid
                k_grid += 1
        elif record and (on_grid or mode_changed or stop_now):
            if n_s >= cap_s:
                status = ST_SAMPLE_OVERFLOW
                break
            s_t[n_s] = t
            for i in range(NY):
                s_y[n_s, i] = y[i]
            s_phase[n_s] = phase
            s_mode[n_s] = mode
            s_u[n_s] = thrust(mode, prog)
            if on_grid:
                s_grid[n_s] = k_grid
                k_grid += 1
            else:
                s_grid[n_s] = -1
            n_s += 1

        if stop_now:
            break

    out_info[0] = t
    out_info[1] = phase
    out_info[2] = mode
    out_info[3] = t_blank_end
    out_info[4] = n_s
    out_info[5] = n_e
    return status
