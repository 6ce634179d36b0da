"""Shared test constructions."""

import math
from dataclasses import replace


def vanishing_foot(p, m_F=1e-5):
    """Same robot with a near-massless foot: touchdown and liftoff losses scale
    with m_F/m_T, so they drop below 2e-5. Ground stiffness is kept and the
    ground damper set to critical for the new foot mass."""
    return replace(p, m_F=m_F, b_F=2.0 * math.sqrt(p.k_F * m_F))


ACCEPTANCE_LINES: list[str] = []


def report(number, ok, summary):
    """Record one acceptance line; the terminal summary prints them in order."""
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {summary}")
    return ok
