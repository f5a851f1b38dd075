import itertools
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from asmline.errors import AssemblyError
from asmline.model import (
    Joint, Part, PartGraph, dump_part_graph, load_part_graph, minmax, normalize_attributes,
    ordinal_codes, part_graph_to_dict, validate_graph,
)
from asmline.synthetic import random_part_graph, simple_graph, triangle, two_technology_fixture


def codes(g):
    return [d.code for d in validate_graph(g)]


def test_triangle_loads():
    g = load_part_graph(dump_part_graph(triangle()))
    assert len(g.parts) == 3
    assert len(g.joints) == 3


def test_fourteen_part_two_technology_fixture_loads():
    g = load_part_graph(dump_part_graph(two_technology_fixture()))
    assert len(g.parts) == 14 and len(g.joints) == 13
    assert {j.technology for j in g.joints} == {"MAG", "MAG2"}


def test_dangling_reference_rejected():
    doc = part_graph_to_dict(triangle())
    doc["joints"][0]["part_b"] = "X"
    with pytest.raises(AssemblyError) as exc:
        load_part_graph(json.dumps(doc))
    assert exc.value.code == "dangling-reference"


@pytest.mark.parametrize("mutate, code", [
    (lambda d: d.pop("joints"), "malformed"),
    (lambda d: d["parts"].append(dict(d["parts"][0])), "duplicate-id"),
    (lambda d: d["joints"].pop(), None),  # still connected: path A-B-C
    (lambda d: d["parts"].append({"id": "Z", "name": "z", "mass_kg": 1, "handling": 1}),
     "disconnected-graph"),
    (lambda d: d["parts"][0].update(handling="hard"), "malformed"),
])
def test_load_error_codes(mutate, code):
    doc = part_graph_to_dict(triangle())
    mutate(doc)
    if code is None:
        load_part_graph(json.dumps(doc))
        return
    with pytest.raises(AssemblyError) as exc:
        load_part_graph(json.dumps(doc))
    assert exc.value.code == code


def test_not_json():
    with pytest.raises(AssemblyError) as exc:
        load_part_graph("{parts: ")
    assert exc.value.code == "malformed"


def test_validate_clean_triangle():
    assert validate_graph(triangle()) == []


def test_validate_two_islands():
    g = simple_graph("ABCD", ["AB", "CD"])
    assert codes(g) == ["disconnected-graph"]


def test_validate_zero_time():
    g = simple_graph("AB", ["AB"], times=[0.0])
    assert codes(g) == ["nonpositive-time"]


def test_validate_collects_every_violation():
    parts = (Part("A", "a", -1.0, 1), Part("B", "b", 1.0, 7))
    joints = (Joint("J", "A", "B", 1.0, 0, "MAG"), Joint("K", "A", "A", 1.0, 1, "MAG"))
    assert sorted(codes(PartGraph(parts, joints))) == sorted(
        ["negative-mass", "handling-out-of-range", "tolerance-below-one", "self-joint"])


def test_tolerance_endpoints():
    g = simple_graph("ABC", ["AB", "BC"], tolerances=[1, 10])
    assert normalize_attributes(g).tolerance == {"AB": 0.0, "BC": 1.0}


def test_constant_tolerance_is_zero():
    g = simple_graph("ABCD", ["AB", "BC", "CD"], tolerances=[2, 2, 2])
    assert set(normalize_attributes(g).tolerance.values()) == {0.0}


def test_technology_codes_lexicographic():
    assert ordinal_codes(["MAG2", "MAG", "MAG"]) == {"MAG": 0.0, "MAG2": 1.0}
    assert ordinal_codes(["b", "a", "c"]) == {"a": 0.0, "b": 0.5, "c": 1.0}
    assert ordinal_codes(["only"]) == {"only": 0.0}


def test_ordinal_codes_group_technologies_on_star():
    # star with 2 MAG and 2 MAG2 joints; every order is single-piece
    g = simple_graph("HABCD", ["HA", "HB", "HC", "HD"], technologies=["MAG2", "MAG", "MAG2", "MAG"])
    code = normalize_attributes(g).tech
    best = min(itertools.permutations(j.id for j in g.joints),
               key=lambda seq: sum(code[j] / (k + 1) for k, j in enumerate(seq)))
    techs = [g.joint(j).technology for j in best]
    assert techs == ["MAG", "MAG", "MAG2", "MAG2"]


def test_first_joint_handling_is_max_and_loop_closure_free():
    g = simple_graph("ABC", ["AB", "BC", "AC"], handling={"A": 1, "B": 3, "C": 2})
    n = normalize_attributes(g)
    assert n.joint_handling("AB", set()) == 1.0
    assert n.joint_handling("BC", {"A", "B"}) == 0.5
    assert n.joint_handling("AC", {"A", "B", "C"}) == 0.0


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=20))
def test_minmax_idempotent(values):
    once = minmax(values)
    assert all(0.0 <= v <= 1.0 for v in once)
    twice = minmax(once)
    assert twice == pytest.approx(once, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.integers(0, 10_000))
def test_order_invariance(n_joints, seed):
    g = random_part_graph(n_joints, seed=seed)
    rng = random.Random(seed)
    doc = part_graph_to_dict(g)
    rng.shuffle(doc["parts"])
    rng.shuffle(doc["joints"])
    h = load_part_graph(json.dumps(doc))
    assert h.canonical() == g.canonical()
    a, b = normalize_attributes(g), normalize_attributes(h)
    assert a.tech == b.tech and a.tolerance == b.tolerance and a.handling == b.handling
    assert a.time == b.time and a.mass == b.mass


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_document_round_trip(n_joints, seed):
    g = random_part_graph(n_joints, seed=seed)
    again = load_part_graph(dump_part_graph(g))
    assert again == g
    assert dump_part_graph(again) == dump_part_graph(g)
