"""Dev-only: construct the bundled two-area case and print its power flow.

Run from the repo root:  python3 devtools/build_case.py [--save]

Calibration targets (minimum monitored-bus voltage at equilibrium):
  load_scale 0.9 -> ~0.99   healthy
  load_scale 1.0 -> ~0.97   healthy
  load_scale 1.1 -> ~0.95   boundary
  load_scale 1.2 -> ~0.92   sustained recovery violation, fixable by shedding
"""
import argparse
import sys

sys.path.insert(0, "src")

import numpy as np

from gridshed.case import (Branch, Bus, Exciter, Governor, Load, MachineModel,
                           NetworkCase, Pss, save_case, PQ, PV, SLACK)
from gridshed.powerflow import solve_power_flow


def line(f, t, km):
    # 230 kV line constants on 100 MVA: r=1e-4, x=1e-3, b=1.75e-3 per km
    return Branch(f, t, complex(1e-4 * km, 1e-3 * km), charging=1.75e-3 * km)


def trafo(f, t, x=0.15 / 9.0):
    return Branch(f, t, complex(0.0, x), charging=0.0)


def machine(bus, h, sched, vset):
    # 900 MVA machine constants on the 100 MVA system base
    return MachineModel(
        bus=bus, inertia=h, damping=9.0,
        x_d=0.20, x_q=0.1889, x_d_prime=1.0 / 30.0, x_q_prime=0.55 / 9.0,
        t_d0_prime=8.0, t_q0_prime=0.4,
        exciter=Exciter(gain=200.0, time_constant=0.05,
                        efd_min=0.0, efd_max=3.0),
        governor=Governor(droop=0.05 / 9.0, time_constant=0.5,
                          pm_min=0.0, pm_max=9.9),
        pss=Pss(washout=10.0, lead_lag=((0.05, 0.02), (3.0, 5.4)),
                gain=20.0, output_limit=0.1),
        scheduled_power=sched, voltage_setpoint=vset,
    )


def build_two_area():
    corridor = 100.0
    buses = (
        Bus(1, SLACK), Bus(2, PV), Bus(11, PV), Bus(12, PV),
        Bus(3, PQ, shunt=complex(0.0, 2.0)), Bus(4, PQ), Bus(5, PQ),
        Bus(10, PQ), Bus(20, PQ),
        Bus(101, PQ), Bus(102, PQ),
        Bus(13, PQ, shunt=complex(0.0, 3.0)), Bus(14, PQ), Bus(15, PQ),
        Bus(110, PQ), Bus(120, PQ),
    )
    branches = (
        trafo(1, 10), trafo(2, 20), trafo(11, 110), trafo(12, 120),
        line(10, 20, 25.0), line(20, 3, 10.0),
        line(3, 4, 5.0), line(3, 5, 10.0),
        line(3, 101, corridor), line(13, 101, corridor),
        line(3, 102, corridor), line(13, 102, corridor),
        line(13, 120, 10.0), line(120, 110, 25.0),
        line(13, 14, 5.0), line(13, 15, 10.0),
    )
    machines = (
        machine(1, 58.5, 0.0, 1.03),
        machine(2, 58.5, 6.0, 1.01),
        machine(11, 55.575, 7.0, 1.03),
        machine(12, 55.575, 7.0, 1.01),
    )
    loads = (
        Load(3, 2.17, 0.39), Load(4, 2.00, 0.46), Load(5, 2.50, 0.52),
        Load(10, 1.00, 0.26),
        Load(13, 8.00, 1.69), Load(14, 3.00, 0.65), Load(15, 1.67, 0.39),
        Load(110, 3.00, 0.72),
    )
    return NetworkCase(
        base_power=100.0, frequency=60.0,
        buses=buses, branches=branches, machines=machines, loads=loads,
        controlled_buses=(4, 10, 13, 110),
        monitored_buses=(3, 4, 5, 10, 13, 14, 15, 20, 101, 102, 110, 120),
        name="two-area four-machine",
    )


def report(case, label):
    pf = solve_power_flow(case)
    print(f"--- {label}: converged in {pf.iterations} iters, "
          f"mismatch {pf.mismatch:.2e}")
    vm = np.abs(pf.voltages)
    vmon = [vm[case.bus_index(b)] for b in case.monitored_buses]
    print(f"  min monitored |V| = {min(vmon):.4f}")
    for m, p, q in zip(case.machines, pf.machine_p, pf.machine_q):
        print(f"  gen {m.bus:>4}: P = {p:7.3f}  Q = {q:7.3f}")
    return pf


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--save", action="store_true")
    args = ap.parse_args()
    case = build_two_area()
    for s in (0.9, 1.0, 1.1, 1.2):
        report(case.scaled(s), f"scale {s}")
    if args.save:
        save_case(case, "src/gridshed/data/two_area.json")
        print("saved to src/gridshed/data/two_area.json")
