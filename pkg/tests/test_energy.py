import warnings

import pytest

from helpers import vanishing_foot
from hopdyn.core import default_params, experimental_params
from hopdyn.dynamics import SimState, simulate
from hopdyn.accumulation import rebound_program
from hopdyn.energy import (
    LEDGER_COLUMNS,
    LOSSLESS,
    EnergyLedger,
    FlightRegimeWarning,
    cycle_efficiency,
    cycle_records,
    delta_rd,
    ledger_from_cycle,
    required_alpha_r,
    write_ledger_csv,
)

EXAMPLE = EnergyLedger(eta_FDd=0.95, eta_TD=0.844, eta_mech=0.9, eta_LO=0.9, eta_FDr=0.95)


def test_lossless_identity():
    assert delta_rd(LOSSLESS) == 1.0
    assert required_alpha_r(LOSSLESS, 1.0) == 0.0


def test_hand_example():
    assert delta_rd(EXAMPLE) == pytest.approx(0.6185, abs=5e-5)
    assert required_alpha_r(EXAMPLE, 1.0) == pytest.approx(0.400542, abs=5e-7)
    assert delta_rd(EXAMPLE.with_alpha_r(0.400542)) == pytest.approx(1.0, abs=1e-5)


def test_round_trip_exact():
    a = required_alpha_r(EXAMPLE, 1.3)
    assert delta_rd(EXAMPLE.with_alpha_r(a)) == pytest.approx(1.3, abs=1e-12)


def test_unbounded_rise_rejected():
    with pytest.raises(ValueError, match="unbounded rise"):
        delta_rd(EnergyLedger(alpha_r=1.0))


def test_zero_target_rejected():
    with pytest.raises(ValueError):
        required_alpha_r(EXAMPLE, 0.0)


def test_flight_regime_flagged():
    with pytest.warns(FlightRegimeWarning):
        a = required_alpha_r(EnergyLedger(eta_TD=0.3, eta_mech=0.5, eta_FDr=0.5), 1.0)
    assert a > 1


def test_no_warning_in_hopping_regime():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        required_alpha_r(EXAMPLE, 1.0)


def _cycle(p, h, alpha=0.0):
    traj = simulate(p, SimState.at_rest(h, p), rebound_program(p, alpha), n_hops=1)
    return ledger_from_cycle(traj, p)


def test_lossless_cycle(lossless):
    r = _cycle(lossless, 1.0)
    l = r.ledger
    for eta in (l.eta_FDd, l.eta_TD, l.eta_mech, l.eta_LO, l.eta_FDr):
        assert eta == pytest.approx(1.0, abs=1e-4)
    for alpha in (l.alpha_d, l.alpha_s, l.alpha_r):
        assert alpha == pytest.approx(0.0, abs=1e-4)
    assert cycle_efficiency(r) == pytest.approx(1.0, abs=1e-4)


def test_drag_only_cycle_self_consistent():
    # drag is the only loss; the stance share of it is all that eta_mech sees
    p = vanishing_foot(default_params())
    traj = simulate(p, SimState.at_rest(1.5, p), n_hops=1)
    r = ledger_from_cycle(traj, p)
    l = r.ledger
    td, lo = traj.events[0], traj.events[1]
    w_drag = traj.work[:, 2]
    stance_drag = w_drag[traj.index_at(lo.t)] - w_drag[traj.index_at(td.t)]
    assert l.eta_TD == pytest.approx(1.0, abs=1e-4)
    assert l.eta_mech == pytest.approx(1.0 + stance_drag / (0.5 * p.m_B * r.v_TD_minus**2), abs=1e-4)
    assert l.eta_FDd < 1.0 and l.eta_FDr < 1.0
    assert delta_rd(l) == pytest.approx(r.delta_measured, rel=1e-3)


def test_touchdown_efficiency_is_mass_ratio(params):
    r = _cycle(params, 1.0)
    assert r.ledger.eta_TD == pytest.approx(params.m_B / params.m_T, rel=0.02)


@pytest.mark.parametrize("h", [0.5, 1.5])
def test_closed_form_matches_simulation(params, h):
    r = _cycle(params, h, alpha=0.3)
    assert delta_rd(r.ledger) == pytest.approx(r.delta_measured, rel=1e-3)


def test_thrustless_efficiency_is_height_ratio(params):
    r = _cycle(params, 1.0)
    assert cycle_efficiency(r) == pytest.approx(r.delta_measured, abs=1e-3)


def test_experimental_efficiency_in_measured_band():
    r = _cycle(experimental_params(), 1.5)
    assert 0.35 <= cycle_efficiency(r) <= 0.5


def test_losses_are_non_positive(params):
    r = _cycle(params, 1.0, alpha=0.4)
    for name in ("E_FDd", "E_TD", "E_mech", "E_LO", "E_FDr"):
        assert r.energies[name] <= 1e-12


def test_ratios_reproduce_raw_energies(params):
    r = _cycle(params, 1.0, alpha=0.4)
    l = r.ledger
    e_reb = r.m_T * r.g * r.h_r
    assert l.alpha_r * e_reb == pytest.approx(r.E_r, rel=1e-9)
    assert (1 - l.eta_TD) * 0.5 * r.m_T * r.v_TD_minus**2 == pytest.approx(-r.E_TD, rel=1e-9)
    assert (1 - l.eta_LO) * 0.5 * r.m_B * r.v_LO_minus**2 == pytest.approx(-r.E_LO, rel=1e-9)


def test_rebound_ratio_equals_thrust_ratio(params):
    r = _cycle(params, 1.0, alpha=0.4)
    assert r.ledger.alpha_r == pytest.approx(0.4, rel=1e-3)


def test_missing_events_rejected(params):
    traj = simulate(params, SimState.at_rest(1.0, params), t_max=0.1)
    with pytest.raises(ValueError, match="missing events"):
        ledger_from_cycle(traj, params)


def test_ledger_csv_header(tmp_path, params):
    traj = simulate(params, SimState.at_rest(1.0, params), n_hops=2)
    path = tmp_path / "ledger.csv"
    write_ledger_csv(cycle_records(traj, params), path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(LEDGER_COLUMNS)
    assert lines[0] == "h_d,h_r,delta_rd,alpha_d,eta_FDd,eta_TD,alpha_s,eta_mech,eta_LO,alpha_r,eta_FDr,eta_cyc"
    assert len(lines) == 3
