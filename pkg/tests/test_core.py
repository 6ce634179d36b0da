import json
import math
from dataclasses import replace

import pytest

from hopdyn.core import (
    DragAreaModel,
    RobotParams,
    default_params,
    drag_force,
    effective_drag_area,
    experimental_params,
    validate,
)


def test_prototype_masses():
    p = default_params()
    assert p.m_B == pytest.approx(0.58793, abs=5e-6)
    assert p.m_T == pytest.approx(0.69655, abs=5e-6)
    assert p.body_fraction == pytest.approx(0.84406, abs=5e-6)
    assert p.derived().m_T == p.m_B + p.m_F


def test_prototype_drag_fit():
    c = default_params().cda
    assert (c.intercept, c.slope, c.v_valid_max) == (0.072122, -0.001893, 7.0)


def test_defaults_valid():
    assert validate(default_params()).ok
    assert validate(experimental_params()).ok


def test_zero_foot_mass_reported():
    report = validate(replace(default_params(), m_F=0.0))
    assert any("foot mass must be positive" in v for v in report.violations)


def test_negative_damping_reported():
    report = validate(replace(default_params(), b_B=-1.0))
    assert any("damping non-negative" in v for v in report.violations)


def test_validation_lists_every_violation():
    report = validate(replace(default_params(), m_F=0.0, b_B=-1.0, k_B=-3.0))
    assert len(report.violations) >= 3


def test_drag_area_examples():
    c = default_params().cda
    m = c.reference_mass
    assert effective_drag_area(0.0, m, c) == pytest.approx(0.072122, abs=1e-12)
    assert effective_drag_area(1.0, m, c) == pytest.approx(0.070229, abs=1e-12)
    assert effective_drag_area(5.0, 8 * m, c) == pytest.approx(4 * effective_drag_area(5.0, m, c), rel=1e-12)


def test_drag_area_held_beyond_fit_range():
    c = default_params().cda
    m = c.reference_mass
    assert effective_drag_area(20.0, m, c) == effective_drag_area(7.0, m, c)


def test_drag_area_clamped_positive():
    c = DragAreaModel(intercept=0.01, slope=-1.0, v_valid_max=100.0)
    assert effective_drag_area(50.0, c.reference_mass, c) == pytest.approx(1e-6)


def test_constant_mode_ignores_speed():
    c = DragAreaModel.constant()
    assert effective_drag_area(0.0, c.reference_mass, c) == effective_drag_area(6.0, c.reference_mass, c)


def test_drag_force_opposes_motion():
    p = default_params()
    f = drag_force(4.0, p.m_T, p.rho, p.cda)
    assert f == pytest.approx(-0.5 * p.rho * effective_drag_area(4.0, p.m_T, p.cda) * 16.0)
    assert drag_force(-4.0, p.m_T, p.rho, p.cda) == -f


def test_json_round_trip(tmp_path):
    p = experimental_params()
    path = tmp_path / "p.json"
    p.to_json(path)
    assert RobotParams.from_json(path) == p
    keys = set(json.loads(path.read_text()))
    assert keys == {"m_B", "m_F", "k_B", "b_B", "k_F", "b_F", "r_0", "stop_length", "g", "rho", "cda"}


def test_json_rejects_unknown_and_missing_keys():
    d = default_params().to_dict()
    with pytest.raises(ValueError, match="unknown"):
        RobotParams.from_dict({**d, "mass": 1.0})
    d.pop("k_B")
    with pytest.raises(ValueError, match="missing"):
        RobotParams.from_dict(d)


def test_scaling_preserves_frequencies():
    p = default_params()
    q = p.scaled(10 * p.m_T, 0.6)
    assert q.m_T == pytest.approx(10 * p.m_T)
    assert q.body_fraction == pytest.approx(0.6)
    assert math.sqrt(q.k_B / q.m_B) == pytest.approx(math.sqrt(p.k_B / p.m_B))
    assert math.sqrt(q.k_F / q.m_F) == pytest.approx(math.sqrt(p.k_F / p.m_F))


def test_experimental_set_only_adds_leg_damping():
    p, q = default_params(), experimental_params()
    assert q.b_B > 0
    assert replace(q, b_B=p.b_B) == p
