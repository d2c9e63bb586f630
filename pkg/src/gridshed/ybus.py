"""Nodal admittance matrix assembly, with fault and load overlays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .case import NetworkCase
from .errors import SingularTopologyError

#: conductance used for the bolted three-phase fault shunt, p.u.
FAULT_CONDUCTANCE = 1.0e6


@dataclass(frozen=True)
class AdmittanceMatrix:
    order: int
    g: np.ndarray  # conductance part
    b: np.ndarray  # susceptance part

    @property
    def complex(self) -> np.ndarray:
        return self.g + 1j * self.b


def _check_connected(case: NetworkCase, skip_branch) -> None:
    n = case.n_bus
    adj = [[] for _ in range(n)]
    for k, br in enumerate(case.branches):
        if not br.status or k == skip_branch:
            continue
        i, j = case.bus_index(br.from_bus), case.bus_index(br.to_bus)
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    seen[0] = True
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    if not all(seen):
        bad = [case.buses[i].id for i, s in enumerate(seen) if not s]
        raise SingularTopologyError(f"network would island buses {bad}")


def build_ybus(
    case: NetworkCase,
    faulted_bus: int | None = None,
    fault_conductance: float = FAULT_CONDUCTANCE,
    tripped_branch: int | None = None,
    load_admittances: dict | None = None,
) -> AdmittanceMatrix:
    """Assemble the bus admittance matrix.

    ``faulted_bus`` adds a large shunt conductance there (bolted-fault
    approximation). ``tripped_branch`` (index into ``case.branches``)
    removes one branch, used for post-clearing variants. ``load_admittances``
    maps bus id -> complex admittance for constant-impedance load
    equivalents folded into the diagonal.

    Raises ``SingularTopologyError`` when the result would be singular
    because the in-service branches no longer connect every bus.
    """
    _check_connected(case, tripped_branch)

    n = case.n_bus
    y = np.zeros((n, n), dtype=complex)
    for k, br in enumerate(case.branches):
        if not br.status or k == tripped_branch:
            continue
        i, j = case.bus_index(br.from_bus), case.bus_index(br.to_bus)
        ys = br.series_admittance
        ysh = 0.5j * br.charging
        y[i, i] += ys + ysh
        y[j, j] += ys + ysh
        y[i, j] -= ys
        y[j, i] -= ys
    for i, bus in enumerate(case.buses):
        y[i, i] += bus.shunt
    if load_admittances:
        for bus_id, yl in load_admittances.items():
            y[case.bus_index(bus_id), case.bus_index(bus_id)] += yl
    if faulted_bus is not None:
        k = case.bus_index(faulted_bus)
        y[k, k] += fault_conductance
    return AdmittanceMatrix(order=n, g=y.real.copy(), b=y.imag.copy())
