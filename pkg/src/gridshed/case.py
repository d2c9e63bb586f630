"""Static network case: buses, branches, machines, loads and case-file I/O.

The case file is a JSON document with a ``format_version`` field. All
quantities are in per-unit on the case's ``base_power`` (MVA) except where
noted. Complex quantities are stored as ``[real, imag]`` pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources

from .errors import CaseValidationError

CASE_FORMAT_VERSION = 1

SLACK = "slack"
PV = "PV"
PQ = "PQ"


@dataclass(frozen=True)
class Bus:
    id: int
    type: str  # slack | PV | PQ
    shunt: complex = 0j  # admittance to ground, p.u.


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    series_impedance: complex
    charging: float = 0.0  # total line charging susceptance, p.u.
    status: bool = True

    @property
    def series_admittance(self) -> complex:
        return 1.0 / self.series_impedance


@dataclass(frozen=True)
class Exciter:
    gain: float  # K_A
    time_constant: float  # T_A, s
    efd_min: float
    efd_max: float


@dataclass(frozen=True)
class Governor:
    droop: float  # R, p.u. speed per p.u. power (system base)
    time_constant: float  # T_G, s
    pm_min: float
    pm_max: float


@dataclass(frozen=True)
class Pss:
    washout: float  # T_W, s
    lead_lag: tuple = ((0.05, 0.02), (3.0, 5.4))  # (T_1,T_2), (T_3,T_4)
    gain: float = 20.0  # K_PSS
    output_limit: float = 0.1  # symmetric clamp on the stabilizer signal


@dataclass(frozen=True)
class MachineModel:
    bus: int
    inertia: float  # H, s (system base)
    damping: float  # D, p.u.
    x_d: float
    x_q: float
    x_d_prime: float
    x_q_prime: float
    t_d0_prime: float  # s
    t_q0_prime: float  # s
    exciter: Exciter
    governor: Governor
    pss: Pss
    scheduled_power: float  # dispatch P, p.u. (ignored for the slack machine)
    voltage_setpoint: float  # |V| target at the machine bus


@dataclass(frozen=True)
class Load:
    bus: int
    active_power: float
    reactive_power: float


@dataclass(frozen=True)
class NetworkCase:
    base_power: float  # MVA
    frequency: float  # Hz
    buses: tuple
    branches: tuple
    machines: tuple
    loads: tuple
    controlled_buses: tuple
    monitored_buses: tuple
    name: str = ""

    def __post_init__(self):
        validate_case(self)

    # -- lookups ---------------------------------------------------------

    def bus_index(self, bus_id: int) -> int:
        try:
            return self._index_map()[bus_id]
        except KeyError:
            raise CaseValidationError(f"unknown bus id {bus_id}")

    def _index_map(self):
        # object.__setattr__ caching keeps the dataclass frozen
        cache = getattr(self, "_idx_cache", None)
        if cache is None:
            cache = {b.id: i for i, b in enumerate(self.buses)}
            object.__setattr__(self, "_idx_cache", cache)
        return cache

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def slack_bus(self) -> int:
        return next(b.id for b in self.buses if b.type == SLACK)

    def loads_at(self, bus_id: int):
        return [ld for ld in self.loads if ld.bus == bus_id]

    def machine_at(self, bus_id: int):
        for m in self.machines:
            if m.bus == bus_id:
                return m
        return None

    def scaled(self, load_scale: float) -> "NetworkCase":
        """Return a copy with loads and PV dispatch scaled by ``load_scale``.

        The slack machine keeps its (unused) schedule and absorbs the
        residual, so the pre-fault operating point tracks the loading level.
        """
        loads = tuple(
            replace(ld, active_power=ld.active_power * load_scale,
                    reactive_power=ld.reactive_power * load_scale)
            for ld in self.loads
        )
        slack = self.slack_bus
        machines = tuple(
            m if m.bus == slack
            else replace(m, scheduled_power=m.scheduled_power * load_scale)
            for m in self.machines
        )
        return replace(self, loads=loads, machines=machines)


def connected_bus_ids(case: NetworkCase) -> set:
    """Bus ids reachable from the slack over in-service branches."""
    adj = {b.id: set() for b in case.buses}
    for br in case.branches:
        if br.status:
            adj[br.from_bus].add(br.to_bus)
            adj[br.to_bus].add(br.from_bus)
    seen = {case.slack_bus}
    frontier = [case.slack_bus]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return seen


def validate_case(case: NetworkCase) -> None:
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        raise CaseValidationError("bus ids are not unique")
    known = set(ids)
    if sum(1 for b in case.buses if b.type == SLACK) != 1:
        raise CaseValidationError("exactly one slack bus is required")
    for b in case.buses:
        if b.type not in (SLACK, PV, PQ):
            raise CaseValidationError(f"bus {b.id}: unknown type {b.type!r}")
    for br in case.branches:
        if br.from_bus not in known or br.to_bus not in known:
            raise CaseValidationError(
                f"branch {br.from_bus}-{br.to_bus} references an unknown bus")
        if br.series_impedance == 0:
            raise CaseValidationError(
                f"branch {br.from_bus}-{br.to_bus} has zero impedance")
    mach_buses = [m.bus for m in case.machines]
    if len(set(mach_buses)) != len(mach_buses):
        raise CaseValidationError("at most one machine per bus")
    for m in case.machines:
        if m.bus not in known:
            raise CaseValidationError(f"machine at unknown bus {m.bus}")
        if m.inertia <= 0:
            raise CaseValidationError(f"machine {m.bus}: H must be > 0")
        for name, tc in (("t_d0_prime", m.t_d0_prime), ("t_q0_prime", m.t_q0_prime),
                         ("exciter T_A", m.exciter.time_constant),
                         ("governor T_G", m.governor.time_constant),
                         ("pss washout", m.pss.washout)):
            if tc <= 0:
                raise CaseValidationError(f"machine {m.bus}: {name} must be > 0")
        if not (m.x_d >= m.x_d_prime > 0):
            raise CaseValidationError(f"machine {m.bus}: need x_d >= x'_d > 0")
        if not (m.x_q >= m.x_q_prime > 0):
            raise CaseValidationError(f"machine {m.bus}: need x_q >= x'_q > 0")
        if not m.exciter.efd_min < m.exciter.efd_max:
            raise CaseValidationError(f"machine {m.bus}: exciter limits unordered")
        if not m.governor.pm_min < m.governor.pm_max:
            raise CaseValidationError(f"machine {m.bus}: governor limits unordered")
    slack_type = next(b.type for b in case.buses if b.id == case.slack_bus)
    assert slack_type == SLACK
    if case.machine_at(case.slack_bus) is None:
        raise CaseValidationError("slack bus has no machine")
    for b in case.buses:
        if b.type == PV and case.machine_at(b.id) is None:
            raise CaseValidationError(f"PV bus {b.id} has no machine")
    for ld in case.loads:
        if ld.bus not in known:
            raise CaseValidationError(f"load at unknown bus {ld.bus}")
        if ld.active_power < 0:
            raise CaseValidationError(f"load at bus {ld.bus}: P must be >= 0")
    if len(case.controlled_buses) < 1 or len(case.monitored_buses) < 1:
        raise CaseValidationError("controlled and monitored sets must be non-empty")
    load_buses = {ld.bus for ld in case.loads}
    for cb in case.controlled_buses:
        if cb not in known:
            raise CaseValidationError(f"controlled bus {cb} does not exist")
        if cb not in load_buses:
            raise CaseValidationError(f"controlled bus {cb} carries no load")
    for mb in case.monitored_buses:
        if mb not in known:
            raise CaseValidationError(f"monitored bus {mb} does not exist")
    missing = known - connected_bus_ids(case)
    if missing:
        raise CaseValidationError(f"islanded buses: {sorted(missing)}")


# -- JSON serialization ----------------------------------------------------

def _cplx(value) -> complex:
    return complex(value[0], value[1])


def _pair(z: complex):
    return [z.real, z.imag]


def case_to_dict(case: NetworkCase) -> dict:
    return {
        "format_version": CASE_FORMAT_VERSION,
        "name": case.name,
        "base_power": case.base_power,
        "frequency": case.frequency,
        "buses": [{"id": b.id, "type": b.type, "shunt": _pair(b.shunt)}
                  for b in case.buses],
        "branches": [{"from_bus": br.from_bus, "to_bus": br.to_bus,
                      "series_impedance": _pair(br.series_impedance),
                      "charging": br.charging, "status": br.status}
                     for br in case.branches],
        "machines": [{
            "bus": m.bus, "inertia": m.inertia, "damping": m.damping,
            "x_d": m.x_d, "x_q": m.x_q,
            "x_d_prime": m.x_d_prime, "x_q_prime": m.x_q_prime,
            "t_d0_prime": m.t_d0_prime, "t_q0_prime": m.t_q0_prime,
            "exciter": {"gain": m.exciter.gain,
                        "time_constant": m.exciter.time_constant,
                        "efd_min": m.exciter.efd_min,
                        "efd_max": m.exciter.efd_max},
            "governor": {"droop": m.governor.droop,
                         "time_constant": m.governor.time_constant,
                         "pm_min": m.governor.pm_min,
                         "pm_max": m.governor.pm_max},
            "pss": {"washout": m.pss.washout,
                    "lead_lag": [list(p) for p in m.pss.lead_lag],
                    "gain": m.pss.gain,
                    "output_limit": m.pss.output_limit},
            "scheduled_power": m.scheduled_power,
            "voltage_setpoint": m.voltage_setpoint,
        } for m in case.machines],
        "loads": [{"bus": ld.bus, "active_power": ld.active_power,
                   "reactive_power": ld.reactive_power} for ld in case.loads],
        "controlled_buses": list(case.controlled_buses),
        "monitored_buses": list(case.monitored_buses),
    }


def case_from_dict(doc: dict) -> NetworkCase:
    try:
        version = doc["format_version"]
        if version != CASE_FORMAT_VERSION:
            raise CaseValidationError(f"unsupported case format_version {version}")
        buses = tuple(Bus(id=b["id"], type=b["type"], shunt=_cplx(b["shunt"]))
                      for b in doc["buses"])
        branches = tuple(Branch(from_bus=b["from_bus"], to_bus=b["to_bus"],
                                series_impedance=_cplx(b["series_impedance"]),
                                charging=b.get("charging", 0.0),
                                status=b.get("status", True))
                         for b in doc["branches"])
        machines = tuple(MachineModel(
            bus=m["bus"], inertia=m["inertia"], damping=m["damping"],
            x_d=m["x_d"], x_q=m["x_q"],
            x_d_prime=m["x_d_prime"], x_q_prime=m["x_q_prime"],
            t_d0_prime=m["t_d0_prime"], t_q0_prime=m["t_q0_prime"],
            exciter=Exciter(**m["exciter"]),
            governor=Governor(**m["governor"]),
            pss=Pss(washout=m["pss"]["washout"],
                    lead_lag=tuple(tuple(p) for p in m["pss"]["lead_lag"]),
                    gain=m["pss"]["gain"],
                    output_limit=m["pss"]["output_limit"]),
            scheduled_power=m["scheduled_power"],
            voltage_setpoint=m["voltage_setpoint"],
        ) for m in doc["machines"])
        loads = tuple(Load(bus=ld["bus"], active_power=ld["active_power"],
                           reactive_power=ld["reactive_power"])
                      for ld in doc["loads"])
        return NetworkCase(
            base_power=doc["base_power"],
            frequency=doc["frequency"],
            buses=buses, branches=branches, machines=machines, loads=loads,
            controlled_buses=tuple(doc["controlled_buses"]),
            monitored_buses=tuple(doc["monitored_buses"]),
            name=doc.get("name", ""),
        )
    except (KeyError, TypeError) as exc:
        raise CaseValidationError(f"malformed case document: {exc}") from exc


def load_case(path) -> NetworkCase:
    with open(path) as fh:
        return case_from_dict(json.load(fh))


def save_case(case: NetworkCase, path) -> None:
    with open(path, "w") as fh:
        json.dump(case_to_dict(case), fh, indent=1)
        fh.write("\n")


def load_two_area_case() -> NetworkCase:
    """The bundled two-area four-machine case."""
    ref = resources.files("gridshed").joinpath("data/two_area.json")
    return case_from_dict(json.loads(ref.read_text()))
