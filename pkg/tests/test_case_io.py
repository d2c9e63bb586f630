import json
from dataclasses import replace

import pytest

from gridshed.case import (Branch, Bus, CaseValidationError, NetworkCase,
                           case_from_dict, case_to_dict, load_case,
                           load_two_area_case, save_case, PQ, SLACK)

from conftest import make_machine, two_bus_case


def test_bundled_case_shape():
    case = load_two_area_case()
    assert case.n_bus == 16
    assert len(case.machines) == 4
    assert case.controlled_buses == (4, 10, 13, 110)
    assert len(case.monitored_buses) == 12
    # the learner input dimension from the bundled case is 10 x 12 = 120
    gen_buses = {m.bus for m in case.machines}
    assert set(case.monitored_buses) == {b.id for b in case.buses} - gen_buses


def test_round_trip_preserves_case(tmp_path):
    case = load_two_area_case()
    path = tmp_path / "case.json"
    save_case(case, path)
    loaded = load_case(path)
    assert loaded == case


def test_format_version_checked():
    doc = case_to_dict(load_two_area_case())
    doc["format_version"] = 99
    with pytest.raises(CaseValidationError):
        case_from_dict(doc)


def test_malformed_document_rejected():
    with pytest.raises(CaseValidationError):
        case_from_dict({"format_version": 1, "buses": []})


def test_duplicate_bus_ids_rejected():
    case = two_bus_case()
    with pytest.raises(CaseValidationError):
        replace(case, buses=(Bus(1, SLACK), Bus(1, PQ)))


def test_unknown_branch_endpoint_rejected():
    case = two_bus_case()
    with pytest.raises(CaseValidationError):
        replace(case, branches=(Branch(1, 99, complex(0.0, 0.1)),))


def test_two_slacks_rejected():
    case = two_bus_case()
    with pytest.raises(CaseValidationError):
        replace(case, buses=(Bus(1, SLACK), Bus(2, SLACK)))


def test_islanded_bus_rejected_at_load_time():
    case = two_bus_case()
    bad = case_to_dict(case)
    bad["buses"].append({"id": 3, "type": "PQ", "shunt": [0.0, 0.0]})
    with pytest.raises(CaseValidationError, match="islanded"):
        case_from_dict(bad)


def test_negative_load_rejected():
    case = two_bus_case()
    doc = case_to_dict(case)
    doc["loads"][0]["active_power"] = -1.0
    with pytest.raises(CaseValidationError):
        case_from_dict(doc)


def test_machine_invariants_rejected():
    case = two_bus_case()
    m = case.machines[0]
    with pytest.raises(CaseValidationError):
        replace(case, machines=(replace(m, inertia=-1.0),))
    with pytest.raises(CaseValidationError):
        replace(case, machines=(replace(m, x_d=0.01),))  # x_d < x'_d
    with pytest.raises(CaseValidationError):
        replace(case, machines=(replace(
            m, exciter=replace(m.exciter, efd_min=9.0)),))


def test_controlled_bus_must_carry_load():
    case = two_bus_case()
    with pytest.raises(CaseValidationError, match="carries no load"):
        replace(case, loads=(), controlled_buses=(2,))


def test_bundled_case_file_has_version():
    from importlib import resources
    doc = json.loads(resources.files("gridshed")
                     .joinpath("data/two_area.json").read_text())
    assert doc["format_version"] == 1
