import pytest

from hopdyn.elastomer import (
    StressStrainCurve,
    curve_specific_energy,
    energy_budget,
    reference_curve,
    system_energy,
)


def test_linear_curve_closed_form():
    E, rho = 2.0e6, 1000.0
    c = StressStrainCurve.from_points([(0.0, 0.0), (3.0, 3.0 * E)], rho)
    assert curve_specific_energy(c, 1.5) == pytest.approx(0.5 * E * 1.5**2 / rho, rel=1e-12)


def test_reference_curve_anchors():
    c = reference_curve()
    assert curve_specific_energy(c, 6.2) == pytest.approx(15800.3, rel=1e-3)
    assert curve_specific_energy(c, 2.1) == pytest.approx(1307.9, rel=0.05)
    assert c.stress[-1] == pytest.approx(11.2e6)


def test_system_energy_quoted_values():
    stored, per_kg = system_energy(16.63, 1.0, 0.69655)
    assert per_kg == pytest.approx(23.876, abs=2e-3)
    assert system_energy(1307.9, 0.0, 0.69655) == (0.0, 0.0)


def test_band_mass_discrepancy():
    stored, _ = system_energy(1307.9, 0.01227, 0.69655)
    assert stored == pytest.approx(16.05, abs=0.01)
    assert (16.63 - stored) / 16.63 == pytest.approx(0.035, abs=0.005)


def test_budget_consistency():
    b = energy_budget()
    assert b.system_specific * 0.69655 == pytest.approx(b.stored, rel=1e-15)


def test_strain_out_of_range():
    with pytest.raises(ValueError):
        curve_specific_energy(reference_curve(), 7.0)
    with pytest.raises(ValueError):
        curve_specific_energy(reference_curve(), -0.1)


@pytest.mark.parametrize(
    "points",
    [[(0.1, 0.0), (1.0, 1.0)], [(0.0, 0.0), (1.0, 1.0), (1.0, 2.0)], [(0.0, 0.0), (1.0, -1.0)]],
)
def test_invalid_curves(points):
    with pytest.raises(ValueError):
        StressStrainCurve.from_points(points, 1000.0)


def test_curve_csv_round_trip(tmp_path):
    c = reference_curve()
    path = tmp_path / "c.csv"
    c.to_csv(path)
    assert path.read_text().splitlines()[0] == "strain,stress_Pa"
    d = StressStrainCurve.from_csv(path, c.density)
    assert curve_specific_energy(d, 6.2) == curve_specific_energy(c, 6.2)


def test_curve_csv_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("strain,stress\n0,0\n")
    with pytest.raises(ValueError, match="header"):
        StressStrainCurve.from_csv(path, 1000.0)
    path.write_text("strain,stress_Pa\n0,0\n1,abc\n")
    with pytest.raises(ValueError, match=":3:"):
        StressStrainCurve.from_csv(path, 1000.0)
