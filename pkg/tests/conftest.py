import numpy as np
import pytest

from gridshed.case import (Branch, Bus, Exciter, Governor, Load, MachineModel,
                           NetworkCase, Pss, load_two_area_case, PQ, PV, SLACK)


def make_machine(bus, inertia=10.0, sched=0.0, vset=1.0, damping=2.0,
                 pm_max=10.0, efd_max=5.0, efd_min=0.0, kpss=5.0,
                 pss_limit=99.0, xq_prime=0.08):
    return MachineModel(
        bus=bus, inertia=inertia, damping=damping,
        x_d=0.2, x_q=0.19, x_d_prime=0.05, x_q_prime=xq_prime,
        t_d0_prime=8.0, t_q0_prime=0.4,
        exciter=Exciter(gain=100.0, time_constant=0.05,
                        efd_min=efd_min, efd_max=efd_max),
        governor=Governor(droop=0.01, time_constant=0.5,
                          pm_min=0.0, pm_max=pm_max),
        pss=Pss(washout=10.0, lead_lag=((0.05, 0.02), (3.0, 5.4)),
                gain=kpss, output_limit=pss_limit),
        scheduled_power=sched, voltage_setpoint=vset)


def two_bus_case(p_load=0.5, q_load=0.1, **mach_kw):
    """Slack machine feeding one PQ load over z = 0.01 + j0.1."""
    return NetworkCase(
        base_power=100.0, frequency=60.0,
        buses=(Bus(1, SLACK), Bus(2, PQ)),
        branches=(Branch(1, 2, complex(0.01, 0.1)),),
        machines=(make_machine(1, **mach_kw),),
        loads=(Load(2, p_load, q_load),),
        controlled_buses=(2,), monitored_buses=(2,))


def omib_case():
    """Test machine against a near-infinite bus; controllers kept smooth."""
    def mach(bus, h, sched, vset):
        return make_machine(bus, inertia=h, sched=sched, vset=vset,
                            damping=2.0, pm_max=99.0, efd_max=99.0,
                            efd_min=-99.0, xq_prime=0.061)
    return NetworkCase(
        base_power=100.0, frequency=60.0,
        buses=(Bus(1, SLACK), Bus(2, PV), Bus(3, PQ)),
        branches=(Branch(1, 3, complex(0.002, 0.05), charging=0.02),
                  Branch(2, 3, complex(0.002, 0.04), charging=0.02)),
        machines=(mach(1, 5e5, 0.0, 1.0), mach(2, 40.0, 3.0, 1.01)),
        loads=(Load(3, 3.5, 0.5),),
        controlled_buses=(3,), monitored_buses=(3,))


@pytest.fixture(scope="session")
def two_area():
    return load_two_area_case()


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
