"""Acceptance gate: one test per criterion, each reporting PASS or FAIL with its measurements."""
import functools
import itertools
import json
import statistics
import time
import timeit

import numpy as np
import pytest

from asmline.balance import (
    BalanceProblem, brute_force_balance, count_attribute_changes, equal_contribution_factor, solve_balance,
)
from asmline.config import RunConfig
from asmline.digraph import CutsetDigraph, WeightConfig, generate_digraph, is_single_piece, max_edge_bound
from asmline.geometry import (
    FREE, GeometryConstraints, JointFrame, box, build_constraints, build_relational_matrix,
    dump_stl_ascii, dump_stl_binary, export_geometry_constraints, extract_dof_matrix,
    import_geometry_constraints, merge, parse_stl,
)
from asmline.model import dump_part_graph, load_part_graph, normalize_attributes
from asmline.pipeline import run_pipeline
from asmline.reduction import ReductionConfig, reduce_edges
from asmline.report import inserted_handling, strip_timing
from asmline.synthetic import path4, random_part_graph, two_technology_fixture

from _fixtures import FOUR_BLOCK_DOF, FOUR_BLOCK_RM, four_block_frame, four_block_meshes
from conftest import ACCEPTANCE


def criterion(n):
    """Record the verdict of criterion ``n``; the test body returns a detail string."""
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*a, **kw):
            try:
                detail = fn(*a, **kw)
            except Exception as exc:
                ACCEPTANCE[n] = (False, f"{type(exc).__name__}: {exc}".splitlines()[0][:160])
                print(f"criterion {n}: FAIL")
                raise
            ACCEPTANCE[n] = (True, detail or "")
            print(f"criterion {n}: PASS {detail or ''}")
        return wrapper
    return deco


def build(g, mu=WeightConfig(), geo=None):
    return generate_digraph(g, normalize_attributes(g), mu, geo)


def oracle_instances(count=200, seed=2024):
    rng = np.random.default_rng(seed)
    for k in range(count):
        J = int(rng.integers(3, 7))
        n_parts = int(rng.integers(max(2, J - 2), J + 2))
        while n_parts * (n_parts - 1) // 2 < J:
            n_parts += 1
        g = random_part_graph(J, n_parts, seed=int(rng.integers(2**31)), time_range=(1.0, 10.0))
        yield g, int(rng.integers(1, 4)), float(rng.choice([0.0, 0.5, 1.0]))


# 1 -----------------------------------------------------------------------------------------


@criterion(1)
def test_edge_bound_formula():
    t0 = time.perf_counter()
    got = [max_edge_bound(J) for J in (1, 3, 13)]
    elapsed = time.perf_counter() - t0
    assert got == [1, 12, 53_248]
    assert all(max_edge_bound(J) == J * 2 ** (J - 1) for J in range(1, 30))
    # 61,427 is bound + node count - J for J = 13, a different quantity; keep them apart
    assert max_edge_bound(13) != 61_427
    assert max_edge_bound(13) + 2**13 - 13 == 61_427
    assert elapsed < 1e-3
    return f"bounds {got}, {elapsed * 1e6:.1f} us"


# 2 and 8 ----------------------------------------------------------------------------------------


@criterion(2)
def test_solver_matches_oracle():
    t0 = time.perf_counter()
    mismatches = 0
    for g, P, lam in oracle_instances():
        d = build(g, WeightConfig(0.2, 0.3, 0.5))
        times = {j.id: j.time for j in g.joints}
        p = BalanceProblem.build(d, times, P, lam)
        if round(solve_balance(p).objective, 9) != round(brute_force_balance(p).objective, 9):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    assert mismatches == 0
    assert elapsed < 120
    return f"200/200 equal, {elapsed:.1f} s"


@criterion(8)
def test_gap_contract():
    worst = 0.0
    for g, P, lam in oracle_instances():
        d = build(g, WeightConfig(0.2, 0.3, 0.5))
        times = {j.id: j.time for j in g.joints}
        p0 = BalanceProblem.build(d, times, P, lam)
        exact = solve_balance(p0).objective
        relaxed = solve_balance(BalanceProblem(d, times, P, lam, p0.c, gap=0.03)).objective
        assert relaxed <= 1.03 * exact
        if exact > 0:
            worst = max(worst, relaxed / exact - 1)
    return f"worst excess {100 * worst:.3f}% over 200 instances"


# 3 ---------------------------------------------------------------------------------------------


@criterion(3)
def test_single_piece_flow():
    t0 = time.perf_counter()
    rng = np.random.default_rng(33)
    nodes = 0
    for _ in range(100):
        J = int(rng.integers(1, 9))
        lo = 2
        while lo * (lo - 1) // 2 < J:
            lo += 1
        g = random_part_graph(J, int(rng.integers(lo, J + 2)), seed=int(rng.integers(2**31)))
        d = build(g)
        for v in range(d.n_nodes):
            assert is_single_piece(d.cutset(v), g)
        nodes += d.n_nodes
    edges = build(path4()).n_edges
    elapsed = time.perf_counter() - t0
    assert edges == 9
    assert elapsed < 30
    return f"{nodes} nodes checked, path fixture {edges} edges, {elapsed:.1f} s"


# 4 and 5 -----------------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def tech_fixture():
    g = two_technology_fixture()
    return g, normalize_attributes(g), {j.id: j.time for j in g.joints}


def fixture_solution(tech_fixture, mu, lam, P=3):
    g, norm, times = tech_fixture
    d = generate_digraph(g, norm, mu)
    return solve_balance(BalanceProblem.build(d, times, P, lam))


@criterion(4)
def test_technology_grouping(tech_fixture):
    t0 = time.perf_counter()
    g = tech_fixture[0]
    tech = {j.id: j.technology for j in g.joints}
    assert len(g.joints) == 13 and len(set(tech.values())) == 2
    grouped = count_attribute_changes(fixture_solution(tech_fixture, WeightConfig(1, 0, 0), 0.1), tech)
    free = count_attribute_changes(fixture_solution(tech_fixture, WeightConfig(0, 0.5, 0.5), 0.1), tech)
    elapsed = time.perf_counter() - t0
    assert grouped == 1
    assert free >= 1
    assert elapsed < 60
    return f"changes: mu_tech=1 -> {grouped}, mu_tech=0 -> {free}"


def area(values):
    return sum(itertools.accumulate(values))


@criterion(5)
def test_cumulative_attribute_behavior(tech_fixture):
    t0 = time.perf_counter()
    g = tech_fixture[0]
    tol = {j.id: j.tolerance for j in g.joints}
    assert len(set(tol.values())) > 1
    hand = {p.handling for p in g.parts}
    assert len(hand) > 1

    def tol_area(mu):
        return area(tol[o] for o in fixture_solution(tech_fixture, mu, 0.5).ops)

    def hand_area(mu):
        return area(inserted_handling(g, fixture_solution(tech_fixture, mu, 0.5).ops))

    t_focus = tol_area(WeightConfig(0, 0, 1))
    t_others = [tol_area(mu) for mu in (WeightConfig(1, 0, 0), WeightConfig(0, 1, 0), WeightConfig(0.5, 0.5, 0))]
    h_focus = hand_area(WeightConfig(0, 1, 0))
    h_others = [hand_area(mu) for mu in (WeightConfig(1, 0, 0), WeightConfig(0, 0, 1), WeightConfig(0.5, 0, 0.5))]
    elapsed = time.perf_counter() - t0
    assert all(t_focus < a for a in t_others)
    assert all(h_focus < a for a in h_others)
    assert elapsed < 60
    return f"tolerance area {t_focus} vs {t_others}; handling area {h_focus} vs {h_others}"


# 6 --------------------------------------------------------------------------------------------------


@criterion(6)
def test_lambda_monotonicity():
    t0 = time.perf_counter()
    g = random_part_graph(8, 6, seed=8, time_range=(1.0, 10.0))
    d = build(g, WeightConfig(0.2, 0.3, 0.5))
    times = {j.id: j.time for j in g.joints}
    P = 3
    c = equal_contribution_factor(d, times, P)
    alphas = [solve_balance(BalanceProblem(d, times, P, lam, c)).alpha for lam in (0, 0.25, 0.5, 0.75, 1)]
    elapsed = time.perf_counter() - t0
    assert all(b <= a for a, b in zip(alphas, alphas[1:]))
    assert alphas[-1] >= max(max(times.values()), sum(times.values()) / P)
    assert elapsed < 60
    return "alpha " + ", ".join(f"{a:.3f}" for a in alphas)


# 7 ---------------------------------------------------------------------------------------------------


def best_time(problem, repeats=5):
    """Fastest of ``repeats`` solves after a warm-up, timed like timeit (gc paused)."""
    sol = solve_balance(problem)
    return sol, min(timeit.repeat(lambda: solve_balance(problem), number=1, repeat=repeats))


@criterion(7)
def test_reduction_quality_and_speed():
    t0 = time.perf_counter()
    g = random_part_graph(10, 6, seed=0, time_range=(1.0, 10.0))
    d = build(g, WeightConfig(0.2, 0.3, 0.5))
    times = {j.id: j.time for j in g.joints}
    full = BalanceProblem.build(d, times, 3, 0.5)
    full_obj = solve_balance(full).objective
    medians, details = [], []
    for fraction in (0.3, 0.5, 0.7):
        close, feasible, solve_times = 0, 0, []
        for seed in range(5):
            r = reduce_edges(d, ReductionConfig(fraction, seed=seed))
            sol, t = best_time(BalanceProblem(r, times, 3, 0.5, full.c))
            feasible += sol.status == "optimal" and r.is_full_path(sol.path)
            close += sol.objective <= 1.05 * full_obj
            solve_times.append(t)
        assert feasible == 5
        assert close >= 4
        medians.append(statistics.median(solve_times))
        details.append(f"f={fraction}: {close}/5 within 5%, median {1e3 * medians[-1]:.2f} ms")
    elapsed = time.perf_counter() - t0
    assert medians[0] > medians[1] > medians[2]
    assert elapsed < 600
    return "; ".join(details)


# 9 -----------------------------------------------------------------------------------------------------


@criterion(9)
def test_geometry_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    for _ in range(50):
        n = int(rng.integers(2, 6))
        cubes = []
        for i in range(n):
            lo = rng.integers(0, 6, size=3).astype(float)
            cubes.append(box(lo, lo + rng.integers(1, 3), f"c{i}"))
        m = build_relational_matrix(cubes).matrix
        assert np.array_equal(m, m.T)
        assert not np.diag(m).any()
        assert set(np.unique(m[~np.eye(n, dtype=bool)])) <= {1, 2, 3}

    meshes = four_block_meshes()
    assert build_relational_matrix([meshes[p] for p in "1234"]).matrix.tolist() == FOUR_BLOCK_RM
    assert extract_dof_matrix(meshes["1"], meshes["3"], four_block_frame()).matrix == FOUR_BLOCK_DOF

    probes_small = ((0.05, 0.5), (5.0, 30.0))
    probes_big = ((0.01, 0.05, 0.5, 1.5, 4.0), (1.0, 5.0, 15.0, 30.0, 60.0))
    for k in range(20):
        axis = k % 3
        base = box((0, 0, 0), (4, 4, 1), "base")
        lo = np.array([1.0, 1.0, 1.0]) + rng.uniform(-0.5, 0.5, 3) * [1, 1, 0]
        top = box(lo, lo + rng.uniform(1, 2, 3), "top")
        walls = [box((-1, 0, 0), (0, 4, 3)), box((4, 0, 0), (5, 4, 3))][: k % 3]
        fixed = merge([base, *walls], "fixed") if walls else base
        frame = JointFrame.identity("j", tuple(lo))
        if axis:
            frame = JointFrame("j", lo, np.roll(np.eye(3), axis, axis=0))
        small = extract_dof_matrix(top, fixed, frame, *probes_small).array
        big = extract_dof_matrix(top, fixed, frame, *probes_big).array
        assert np.all(big <= small)
    elapsed = time.perf_counter() - t0
    assert elapsed < 120
    return f"50 arrangements, four-block codes and DoF reproduced, 20 monotone fixtures, {elapsed:.1f} s"


# 10 ----------------------------------------------------------------------------------------------------


@criterion(10)
def test_determinism_and_round_trips(tmp_path):
    g = two_technology_fixture()
    src = tmp_path / "asm.json"
    src.write_text(dump_part_graph(g))
    cfg = RunConfig(str(src), phases=3, reduction=ReductionConfig(0.5, seed=5), write_lp=True)
    outs = [run_pipeline(cfg.with_overrides(output_dir=str(tmp_path / name))).output_dir for name in "ab"]
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    for name in names:
        a, b = (o / name for o in outs)
        if name in ("manifest.json", "solution.json"):
            da, db = (strip_timing(json.loads(x.read_text())) for x in (a, b))
            for doc in (da, db):
                doc.get("config", {}).pop("output_dir", None)
                doc.pop("config_hash", None)
            assert da == db, name
        else:
            assert a.read_bytes() == b.read_bytes(), name

    mesh = four_block_meshes()["1"]
    for dump in (dump_stl_binary, dump_stl_ascii):
        back = parse_stl(dump(mesh), "1")
        assert np.array_equal(back.corners, mesh.corners)

    assert load_part_graph(dump_part_graph(g)) == g
    assert dump_part_graph(load_part_graph(dump_part_graph(g))) == dump_part_graph(g)

    meshes = four_block_meshes()

    class J:
        def __init__(self, jid):
            self.id, self.part_a, self.part_b = jid, jid[0], jid[1]

    cons = build_constraints(meshes, [J("13"), J("23"), J("34")], {"13": four_block_frame()})
    text = export_geometry_constraints(cons.relations, cons.dofs, cons.frames)
    assert import_geometry_constraints(text) == cons
    assert isinstance(cons, GeometryConstraints) and cons.relations.relation("1", "2") != FREE

    d = build(g)
    assert CutsetDigraph.from_document(d.dumps()) == d
    assert CutsetDigraph.from_document(d.dumps()).dumps() == d.dumps()
    return f"{len(names)} artifacts identical across runs; STL, assembly, constraint and digraph round-trips lossless"
