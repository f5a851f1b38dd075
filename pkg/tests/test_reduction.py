import math

import pytest
from hypothesis import given, settings, strategies as st

from asmline.balance import BalanceProblem, best_partition_alpha, brute_force_balance
from asmline.digraph import CutsetDigraph, WeightConfig, generate_digraph
from asmline.errors import PlanningInfeasible
from asmline.model import normalize_attributes
from asmline.reduction import ReductionConfig, k_shortest_paths, protected_layer, reduce_edges
from asmline.synthetic import looped_part_graph, random_part_graph, triangle, two_technology_fixture


def build(g, mu=WeightConfig()):
    return generate_digraph(g, normalize_attributes(g), mu)


def all_paths(d):
    out = []

    def rec(v, path):
        if v == d.end:
            out.append(list(path))
            return
        for e in d.out_edges[v]:
            rec(d.dst[e], path + [e])

    rec(d.start, [])
    return out


def edge_keys(d, path):
    return [(d.masks[d.src[e]], d.op[e]) for e in path]


def test_single_chain_has_one_path():
    d = CutsetDigraph(["a", "b"], [0, 1, 3], [0, 1], [1, 2], [0, 1], [0.5, 0.5])
    assert k_shortest_paths(d, 3) == [[0, 1]]


def test_diamond_orders_paths_by_weight():
    d = CutsetDigraph(["a", "b"], [0, 1, 2, 3], [0, 0, 1, 2], [1, 2, 3, 3], [1, 0, 0, 1],
                      [2.0, 1.0, 0.0, 0.0])
    paths = k_shortest_paths(d, 2)
    assert [d.path_weight(p) for p in paths] == [1.0, 2.0]


def test_triangle_uniform_weights_has_six_equal_paths():
    d = build(triangle())
    paths = k_shortest_paths(d, 6)
    assert len(paths) == 6
    assert len({tuple(d.path_ops(p)) for p in paths}) == 6
    assert len({d.path_weight(p) for p in paths}) == 1


def test_no_path_raises():
    d = CutsetDigraph(["a"], [0], [], [], [], [])
    with pytest.raises(PlanningInfeasible):
        k_shortest_paths(d, 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10_000), st.integers(1, 12))
def test_k_shortest_matches_enumeration(n_joints, seed, k):
    g = random_part_graph(n_joints, seed=seed)
    d = build(g, WeightConfig(0.2, 0.3, 0.5))
    got = k_shortest_paths(d, k)
    weights = sorted(d.path_weight(p) for p in all_paths(d))
    assert len(got) == min(k, len(weights))
    assert len({tuple(p) for p in got}) == len(got)
    got_w = [d.path_weight(p) for p in got]
    assert got_w == sorted(got_w)
    assert got_w == pytest.approx(weights[:len(got)], abs=1e-12)
    assert all(d.is_full_path(p) for p in got)


def test_fraction_zero_is_identity():
    d = build(two_technology_fixture())
    assert reduce_edges(d, ReductionConfig(0.0)) == d


def test_near_total_removal_on_triangle():
    # floor semantics: one of the five removable middle-layer edges always survives
    d = build(triangle(), WeightConfig(0.2, 0.3, 0.5))
    shortest = k_shortest_paths(d, 1)[0]
    r = reduce_edges(d, ReductionConfig(0.99, k_paths=1, protected_outer_layers=1, seed=3))
    kept = set(edge_keys(r, range(r.n_edges)))
    assert set(edge_keys(d, shortest)) <= kept
    middle = r.edges_by_layer()[2]
    assert len(middle) == 2


def test_same_seed_same_result():
    d = build(two_technology_fixture())
    cfg = ReductionConfig(0.5, seed=11)
    assert reduce_edges(d, cfg).dumps() == reduce_edges(d, cfg).dumps()
    assert reduce_edges(d, cfg).dumps() != reduce_edges(d, ReductionConfig(0.5, seed=12)).dumps()


@pytest.mark.parametrize("kw", [dict(fraction=1.0), dict(fraction=-0.1), dict(k_paths=0),
                                dict(protected_outer_layers=-1), dict(seed=-1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ReductionConfig(**kw)


def test_protected_layers():
    assert [protected_layer(k, 6, 1) for k in range(1, 7)] == [True, False, False, False, False, True]
    assert not any(protected_layer(k, 6, 0) for k in range(1, 7))


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 8), st.integers(0, 10_000), st.floats(0.05, 0.95), st.integers(1, 6),
       st.integers(0, 2), st.integers(0, 2**32))
def test_reduction_invariants(n_joints, gseed, fraction, k, outer, seed):
    g = looped_part_graph(n_joints, gseed)
    d = build(g, WeightConfig(0.2, 0.3, 0.5))
    cfg = ReductionConfig(fraction, k, outer, seed)
    r = reduce_edges(d, cfg)
    assert r.n_edges <= d.n_edges and r.n_nodes <= d.n_nodes
    kept = set(edge_keys(r, range(r.n_edges)))
    for p in k_shortest_paths(d, k):
        assert set(edge_keys(d, p)) <= kept
    assert r.start is not None and math.isfinite(r.dist_to_end()[r.start])
    # removal count per unprotected layer, before pruning
    protected = {key for p in k_shortest_paths(d, k) for key in edge_keys(d, p)}
    for layer, edges in enumerate(d.edges_by_layer()):
        if layer == 0:
            continue
        before = {(d.masks[d.src[e]], d.op[e]) for e in edges}
        after = before & kept
        if layer <= outer or layer > d.L - outer:
            # nothing is drawn here; an edge disappears only with a pruned endpoint
            live = set(r.masks)
            for src, op in before - after:
                assert src not in live or (src | 1 << op) not in live
            continue
        removable = before - protected
        assert len(before - after) >= math.floor(fraction * len(removable) + 1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 6), st.integers(0, 10_000), st.sampled_from([0.3, 0.6, 0.9]),
       st.sampled_from([1, 2, 3]), st.sampled_from([0.0, 0.5, 1.0]))
def test_reduced_optimum_is_bracketed(n_joints, seed, fraction, P, lam):
    g = looped_part_graph(n_joints, seed)
    d = build(g, WeightConfig(0.2, 0.3, 0.5))
    times = {j.id: j.time for j in g.joints}
    full = brute_force_balance(BalanceProblem.build(d, times, P, lam))
    c = BalanceProblem.build(d, times, P, lam).c
    k = 2
    r = reduce_edges(d, ReductionConfig(fraction, k, 1, seed))
    reduced = brute_force_balance(BalanceProblem(r, times, P, lam, c))
    best_protected = min(
        (1 - lam) * d.path_weight(p) + lam * c * best_partition_alpha([times[o] for o in d.path_ops(p)], P)
        for p in k_shortest_paths(d, k))
    assert full.objective <= reduced.objective + 1e-9
    assert reduced.objective <= best_protected + 1e-9
