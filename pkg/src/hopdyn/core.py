"""Physical parameter records shared by every simulation and analysis module.

All quantities are SI. Records are frozen; derive variants with
:func:`dataclasses.replace` or the helpers on :class:`RobotParams`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

# Table 1 of the prototype, grams -> kg
BODY_MASS = 0.38282
FOOT_MASS = 0.10248
BATTERY_MASS = 0.19897
SPRING_MASS = 0.01227
# m_B = m_b + m_bat + m_s/2 and m_F = m_f + m_s/2, as tabulated (rounded to
# 0.01 g; the component sums differ in the last digit)
M_B_PROTOTYPE = 0.58793
M_F_PROTOTYPE = 0.10862

CDA_INTERCEPT = 0.072122
CDA_SLOPE = -0.001893
CDA_V_VALID_MAX = 7.0
AREA_FLOOR = 1e-6

# Leg spring: 5.9 m/s touchdown -> ~134 N peak body force (scripts/calibrate_contact.py).
K_B_DEFAULT = 880.0
B_B_DEFAULT = 0.0
# Leg damping that brings a thrustless 1.5 m hop to a cycle efficiency of
# 0.425, mid-range of the measured 0.35-0.5 (scripts/calibrate_losses.py).
B_B_EXPERIMENTAL = 5.47
# Foot-ground contact: critically damped fit to the (0.3 mm, 1055 g) touchdown
# pair at 5.9 m/s (scripts/calibrate_contact.py). The softer set is the same
# fit to the (0.9 mm, 319 g) pair.
K_F_DEFAULT = 6.928e5
B_F_DEFAULT = 548.6
K_F_SOFT = 6.989e4
B_F_SOFT = 174.3
# Leg geometry is unpublished; only stance timing depends on it.
R0_DEFAULT = 0.20
STOP_LENGTH_DEFAULT = 0.20


@dataclass(frozen=True)
class DragAreaModel:
    """Drag coefficient times frontal area, C_D*A, as a function of speed.

    ``mode`` is ``"constant"`` or ``"linear"``. The linear fit is held flat
    above ``v_valid_max`` and the area scales with
    ``(mass / reference_mass) ** scaling_exponent`` across robot sizes.
    """

    mode: str = "linear"
    intercept: float = CDA_INTERCEPT
    slope: float = CDA_SLOPE
    v_valid_max: float = CDA_V_VALID_MAX
    reference_mass: float = M_B_PROTOTYPE + M_F_PROTOTYPE
    scaling_exponent: float = 2.0 / 3.0

    def area(self, v: float, mass: float) -> float:
        return effective_drag_area(v, mass, self)

    @classmethod
    def constant(cls, intercept: float = CDA_INTERCEPT, **kw) -> "DragAreaModel":
        return cls(mode="constant", intercept=intercept, slope=0.0, **kw)


@dataclass(frozen=True)
class DerivedMasses:
    m_T: float
    body_fraction: float


@dataclass(frozen=True)
class RobotParams:
    """Two-mass hopper: body side (m_B) on a spring leg above the foot side (m_F)."""

    m_B: float = M_B_PROTOTYPE
    m_F: float = M_F_PROTOTYPE
    k_B: float = K_B_DEFAULT
    b_B: float = B_B_DEFAULT
    k_F: float = K_F_DEFAULT
    b_F: float = B_F_DEFAULT
    r_0: float = R0_DEFAULT
    stop_length: float = STOP_LENGTH_DEFAULT
    g: float = 9.81
    rho: float = 1.225
    cda: DragAreaModel = field(default_factory=DragAreaModel)

    @property
    def m_T(self) -> float:
        return self.m_B + self.m_F

    @property
    def body_fraction(self) -> float:
        return self.m_B / self.m_T

    @property
    def weight(self) -> float:
        return self.m_T * self.g

    def derived(self) -> DerivedMasses:
        return DerivedMasses(m_T=self.m_T, body_fraction=self.body_fraction)

    def without_drag(self) -> "RobotParams":
        return replace(self, rho=0.0)

    def with_masses(self, m_B: float, m_F: float) -> "RobotParams":
        """Same robot family at new masses.

        Spring and damper constants scale with the mass they carry so that
        natural frequencies and damping ratios are preserved; the drag area
        follows the mass scaling of :class:`DragAreaModel`.
        """
        sb = m_B / self.m_B
        sf = m_F / self.m_F
        return replace(
            self,
            m_B=m_B,
            m_F=m_F,
            k_B=self.k_B * sb,
            b_B=self.b_B * sb,
            k_F=self.k_F * sf,
            b_F=self.b_F * sf,
        )

    def scaled(self, m_T: float, body_fraction: float) -> "RobotParams":
        return self.with_masses(m_T * body_fraction, m_T * (1.0 - body_fraction))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RobotParams":
        d = dict(d)
        expected = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - expected
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        missing = expected - set(d)
        if missing:
            raise ValueError(f"missing parameter keys: {sorted(missing)}")
        cda = d.pop("cda")
        if not isinstance(cda, DragAreaModel):
            cda = DragAreaModel(**cda)
        return cls(cda=cda, **{k: float(v) for k, v in d.items()})

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=False)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, path: str | Path) -> "RobotParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(f"- {v}" for v in self.violations)


def default_params() -> RobotParams:
    """The prototype robot (Table 1 masses, measured drag fit)."""
    return RobotParams()


def experimental_params() -> RobotParams:
    """The prototype with stance losses calibrated to the hopping experiments.

    The default record is the idealized model (drag, touchdown and liftoff
    losses only); this one adds leg damping so a thrustless 1.5 m hop keeps
    the measured share of its energy.
    """
    return replace(RobotParams(), b_B=B_B_EXPERIMENTAL)


def effective_drag_area(v: float, mass: float, model: DragAreaModel) -> float:
    """C_D*A in m^2 at speed ``v`` (callers pass |v|) for a robot of ``mass`` kg."""
    if model.mode == "linear":
        a = model.intercept + model.slope * min(v, model.v_valid_max)
    else:
        a = model.intercept
    a *= (mass / model.reference_mass) ** model.scaling_exponent
    return max(a, AREA_FLOOR)


def drag_force(v: float, mass: float, rho: float, model: DragAreaModel) -> float:
    """Signed drag force opposing velocity ``v``."""
    return -0.5 * rho * effective_drag_area(abs(v), mass, model) * v * abs(v)


def validate(params: RobotParams) -> ValidationReport:
    r = ValidationReport()
    v = r.violations

    def finite(name, x):
        if not math.isfinite(x):
            v.append(f"{name} must be finite")
            return False
        return True

    for name, label in (("m_B", "body mass"), ("m_F", "foot mass")):
        x = getattr(params, name)
        if finite(name, x) and x <= 0:
            v.append(f"{label} must be positive")
    for name in ("k_B", "k_F", "r_0", "stop_length", "g"):
        x = getattr(params, name)
        if finite(name, x) and x <= 0:
            v.append(f"{name} must be positive")
    for name in ("b_B", "b_F"):
        x = getattr(params, name)
        if finite(name, x) and x < 0:
            v.append(f"{name}: damping non-negative")
    if finite("rho", params.rho) and params.rho < 0:
        v.append("rho must be non-negative")
    if params.m_B > 0 and params.m_F > 0:
        frac = params.body_fraction
        if not 0.0 < frac < 1.0:
            v.append("body fraction must lie in (0, 1)")

    c = params.cda
    if c.mode not in ("constant", "linear"):
        v.append(f"cda.mode must be 'constant' or 'linear', got {c.mode!r}")
    if not c.intercept > 0:
        v.append("cda.intercept must be positive")
    if not 0.0 <= c.scaling_exponent <= 1.0:
        v.append("cda.scaling_exponent must lie in [0, 1]")
    if not c.reference_mass > 0:
        v.append("cda.reference_mass must be positive")
    if not c.v_valid_max > 0:
        v.append("cda.v_valid_max must be positive")
    return r


def pack(params: RobotParams) -> np.ndarray:
    """Flat float vector consumed by the compiled integrator (see _kernel)."""
    c = params.cda
    return np.array(
        [
            params.m_B,
            params.m_F,
            params.k_B,
            params.b_B,
            params.k_F,
            params.b_F,
            params.r_0,
            params.stop_length,
            params.g,
            params.rho,
            1.0 if c.mode == "linear" else 0.0,
            c.intercept,
            c.slope,
            c.v_valid_max,
            c.reference_mass,
            c.scaling_exponent,
        ],
        dtype=np.float64,
    )
