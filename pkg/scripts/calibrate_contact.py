"""Fit foot-ground stiffness and damping to the published impact pairs.

Each (peak compression, peak foot acceleration) pair at 5.9 m/s touchdown is
fitted on its own, once restricted to at-least-critically damped contacts
(the shipped defaults) and once unrestricted. Prints constants, predictions
and residuals.

    python3 scripts/calibrate_contact.py
"""

from __future__ import annotations

from dataclasses import replace

from hopdyn.core import default_params
from hopdyn.dynamics import calibrate_ground_contact, peak_contact_metrics

G = 9.81
V_TD = 5.9
PAIRS = {"stiff": (0.3e-3, 1055 * G, V_TD), "soft": (0.9e-3, 319 * G, V_TD)}


def main() -> None:
    p = default_params()
    for name, target in PAIRS.items():
        for zeta in (1.0, 0.0):
            fit = calibrate_ground_contact([target], p, min_damping_ratio=zeta)
            m = peak_contact_metrics(V_TD, replace(p, k_F=fit.k_F, b_F=fit.b_F))
            label = "damping ratio >= 1" if zeta else "unrestricted"
            print(f"{name} pair ({target[0] * 1e3:.1f} mm, {target[1] / G:.0f} g), {label}:")
            print(f"  k_F = {fit.k_F:.6g} N/m, b_F = {fit.b_F:.6g} N s/m, residual = {fit.residual:.4g}")
            print(
                f"  predicted compression {m.compression_max * 1e3:.4f} mm, foot {m.a_foot_max_g:.1f} g, "
                f"body {m.a_body_max_g:.2f} g, foot/body force {m.F_foot_max / m.F_body_max:.2f}"
            )


if __name__ == "__main__":
    main()
