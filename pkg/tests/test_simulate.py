import numpy as np
import pytest

from gridshed.case import CaseValidationError
from gridshed.envelope import TvrcEnvelope
from gridshed.integrator import IntegratorConfig
from gridshed.simulate import (EventSchedule, FaultEvent, LoadAccounting,
                               ShedEvent, apply_load_shed, grid_time,
                               simulate_horizon)

STRESS_FAULT = FaultEvent(branch=9, bus=13, apply_time=0.7, clear_time=0.76)


def post_clear_margins(traj, case, t_fc, envelope=None):
    envelope = envelope or TvrcEnvelope()
    vm = traj.voltage_magnitudes(case.monitored_buses)
    out = []
    for i, t in enumerate(traj.t):
        if t > t_fc + 1e-9:
            out.append(vm[i].min() - envelope.threshold(t - t_fc))
    return np.array(out)


def test_empty_schedule_flat(two_area):
    traj = simulate_horizon(two_area, EventSchedule(),
                            IntegratorConfig(horizon=2.0))
    vm = traj.voltage_magnitudes()
    assert np.max(np.abs(vm - vm[0])) < 1e-8
    assert len(traj.t) == 201


def test_stressed_fault_violates_envelope(two_area):
    scaled = two_area.scaled(1.2)
    traj = simulate_horizon(scaled, EventSchedule(fault=STRESS_FAULT),
                            IntegratorConfig())
    margins = post_clear_margins(traj, scaled, 0.76)
    assert margins.min() < 0.0


def test_shedding_raises_minimum_voltage(two_area):
    scaled = two_area.scaled(1.2)
    no_shed = simulate_horizon(scaled, EventSchedule(fault=STRESS_FAULT),
                               IntegratorConfig())
    sheds = tuple(ShedEvent(0.76, b, 0.1) for b in scaled.controlled_buses)
    with_shed = simulate_horizon(
        scaled, EventSchedule(fault=STRESS_FAULT, shed_events=sheds),
        IntegratorConfig())
    vm0 = no_shed.voltage_magnitudes(scaled.monitored_buses)
    vm1 = with_shed.voltage_magnitudes(scaled.monitored_buses)
    post = no_shed.t > 0.76 + 0.05  # past the common clearing transient
    assert vm1[post].min() > vm0[post].min()


def test_apply_load_shed_arithmetic(two_area):
    acct = LoadAccounting.for_case(two_area)
    bus = two_area.controlled_buses[0]
    k = acct.buses.index(bus)
    p0 = acct.p_current[k]

    apply_load_shed(acct, bus, 0.0)
    assert acct.p_current[k] == pytest.approx(p0)

    acct2 = LoadAccounting.for_case(two_area)
    acct2.p_nominal[k] = 1.0
    apply_load_shed(acct2, bus, 0.1)
    assert acct2.p_current[k] == pytest.approx(0.9)
    apply_load_shed(acct2, bus, 0.1)
    assert acct2.p_current[k] == pytest.approx(0.81)


def test_shed_fraction_bounds(two_area):
    acct = LoadAccounting.for_case(two_area)
    with pytest.raises(ValueError):
        apply_load_shed(acct, two_area.controlled_buses[0], 1.5)


def test_remaining_load_monotone(two_area, rng):
    acct = LoadAccounting.for_case(two_area)
    prev_total = acct.p_current.sum()
    prev = acct.p_current.copy()
    for _ in range(60):
        bus = two_area.controlled_buses[rng.integers(4)]
        apply_load_shed(acct, bus, float(rng.uniform(0, 0.2)))
        cur = acct.p_current
        assert cur.sum() <= prev_total + 1e-12
        assert np.all(cur <= prev + 1e-12)
        prev_total = cur.sum()
        prev = cur.copy()


def test_schedule_validation(two_area):
    with pytest.raises(CaseValidationError):
        EventSchedule(fault=FaultEvent(branch=9, bus=13, apply_time=0.5,
                                       clear_time=0.4))
    with pytest.raises(CaseValidationError):
        EventSchedule(shed_events=(ShedEvent(2.0, 4, 0.1),
                                   ShedEvent(1.0, 4, 0.1)))
    with pytest.raises(CaseValidationError):
        EventSchedule(shed_events=(ShedEvent(1.0, 4, 1.5),))
    bad = EventSchedule(fault=FaultEvent(branch=9, bus=999, apply_time=0.1,
                                         clear_time=0.2))
    with pytest.raises(CaseValidationError):
        bad.validate_against(two_area)
    bad_shed = EventSchedule(shed_events=(ShedEvent(1.0, 3, 0.1),))
    with pytest.raises(CaseValidationError):
        bad_shed.validate_against(two_area)


def test_grid_time_snapping():
    assert grid_time(0.0, 0.01) == 0.0
    assert grid_time(0.755, 0.01) == pytest.approx(0.76)
    assert grid_time(0.76, 0.01) == pytest.approx(0.76)
    assert str(grid_time(0.0, 1.0)) == "0.0"  # no negative zero


def test_trajectory_csv_header(two_area, tmp_path):
    traj = simulate_horizon(two_area, EventSchedule(),
                            IntegratorConfig(horizon=0.05))
    path = tmp_path / "traj.csv"
    traj.to_csv(path, provenance="seed=1")
    lines = path.read_text().splitlines()
    assert lines[0] == "# seed=1"
    header = lines[1].split(",")
    assert header[0] == "t"
    assert header[1] == "bus_1_vm"
    assert len(header) == 1 + two_area.n_bus
    assert len(lines) == 2 + 6  # provenance + header + initial state + 5 steps
