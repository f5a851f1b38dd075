import json
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from asmline.config import RunConfig, SweepSpec, load_run_config, load_sweep_spec, thread_count
from asmline.digraph import WeightConfig
from asmline.errors import ConfigError
from asmline.geometry import dump_stl_binary
from asmline.model import dump_part_graph
from asmline.pipeline import StageError, load_meshes, run_pipeline, sha256
from asmline.reduction import ReductionConfig
from asmline.report import strip_timing
from asmline.synthetic import triangle, two_technology_fixture

from _fixtures import four_block_meshes


@pytest.fixture
def triangle_doc(tmp_path):
    path = tmp_path / "triangle.json"
    path.write_text(dump_part_graph(triangle()))
    return path


def test_triangle_run(triangle_doc, tmp_path):
    cfg = RunConfig(str(triangle_doc), str(tmp_path / "out"), phases=2, lam=0.5)
    res = run_pipeline(cfg)
    sol = json.loads((tmp_path / "out" / "solution.json").read_text())
    assert len(sol["operations"]) == 3
    assert {o["phase"] for o in sol["operations"]} == {0, 1}
    assert sol["status"] == "optimal"
    assert res.manifest["graph_sizes"]["digraph_edges"] == 12
    assert res.manifest["solver_status"] == "optimal"


def test_missing_mesh_dir_fails_before_any_stage(triangle_doc, tmp_path):
    out = tmp_path / "out"
    cfg = RunConfig(str(triangle_doc), str(out), meshes=str(tmp_path / "nope"), use_dof=True)
    with pytest.raises(ConfigError):
        run_pipeline(cfg)
    assert not out.exists()


def test_use_dof_without_geometry_is_a_config_error(triangle_doc):
    with pytest.raises(ConfigError):
        RunConfig(str(triangle_doc), use_dof=True).validate(check_files=False)


def artifacts_without_timing(out: Path):
    docs = {}
    for f in sorted(out.iterdir()):
        text = f.read_text()
        docs[f.name] = strip_timing(json.loads(text)) if f.suffix == ".json" else text
    return docs


def test_repeated_runs_are_identical(tmp_path):
    src = tmp_path / "asm.json"
    src.write_text(dump_part_graph(two_technology_fixture()))
    base = RunConfig(str(src), phases=3, reduction=ReductionConfig(0.4, seed=9), write_lp=True)
    a = run_pipeline(base.with_overrides(output_dir=str(tmp_path / "a")))
    b = run_pipeline(base.with_overrides(output_dir=str(tmp_path / "b")))
    da, db = artifacts_without_timing(a.output_dir), artifacts_without_timing(b.output_dir)
    da["manifest.json"]["config"].pop("output_dir")
    db["manifest.json"]["config"].pop("output_dir")
    da["manifest.json"].pop("config_hash")
    db["manifest.json"].pop("config_hash")
    assert da == db
    for name in ("digraph.json", "reduced.json", "report.csv", "model.lp", "digraph.dot"):
        assert (a.output_dir / name).read_bytes() == (b.output_dir / name).read_bytes()


def test_manifest_completeness_and_hash_chain(tmp_path):
    src = tmp_path / "asm.json"
    src.write_text(dump_part_graph(two_technology_fixture()))
    res = run_pipeline(RunConfig(str(src), str(tmp_path / "o"), phases=2,
                                 reduction=ReductionConfig(0.3, seed=1)))
    m = json.loads((res.output_dir / "manifest.json").read_text())
    for name in m["artifacts"]:
        assert (res.output_dir / name).is_file()
    stages = m["stages"]
    assert [s["stage"] for s in stages] == ["load", "plan", "reduce", "balance", "report"]
    for prev, cur in zip(stages[1:], stages[2:]):
        assert cur["input"] == prev["output"]
    for s in stages:
        if s["artifact"] and s["artifact"] != "solution.json":
            assert sha256((res.output_dir / s["artifact"]).read_text()) == s["output"]
    sol = json.loads((res.output_dir / "solution.json").read_text())
    assert sha256(json.dumps(strip_timing(sol), sort_keys=True)) == stages[3]["output"]
    assert m["config_hash"] == res.manifest["config_hash"]
    assert m["seeds"] == {"reduction": 1}
    assert set(m["timings"]) == {"load", "plan", "reduce", "balance", "report"}


def test_run_with_meshes(tmp_path):
    meshes = four_block_meshes()
    mesh_dir = tmp_path / "meshes"
    mesh_dir.mkdir()
    for pid, m in meshes.items():
        (mesh_dir / f"{pid}.stl").write_bytes(dump_stl_binary(m))
    doc = {"parts": [{"id": p, "name": p, "mass_kg": 1.0, "handling": 1} for p in "1234"],
           "joints": [{"id": jid, "part_a": jid[0], "part_b": jid[1], "time": 1.0, "tolerance": 1,
                       "technology": "MAG"} for jid in ("13", "23", "34")]}
    src = tmp_path / "asm.json"
    src.write_text(json.dumps(doc))
    res = run_pipeline(RunConfig(str(src), str(tmp_path / "o"), meshes=str(mesh_dir), use_dof=True))
    assert (res.output_dir / "constraints.json").is_file()
    assert [s["stage"] for s in res.manifest["stages"]][:2] == ["load", "preprocess"]
    assert res.constraints is not None


def test_missing_mesh_file_is_a_stage_error(tmp_path):
    mesh_dir = tmp_path / "meshes"
    mesh_dir.mkdir()
    src = tmp_path / "asm.json"
    src.write_text(dump_part_graph(triangle()))
    with pytest.raises(StageError) as exc:
        run_pipeline(RunConfig(str(src), str(tmp_path / "o"), meshes=str(mesh_dir), use_dof=True))
    assert exc.value.stage == "preprocess"
    assert isinstance(exc.value.cause, FileNotFoundError)


def test_failure_keeps_earlier_artifacts(tmp_path):
    src = tmp_path / "asm.json"
    src.write_text(dump_part_graph(two_technology_fixture()))
    with pytest.raises(StageError) as exc:
        run_pipeline(RunConfig(str(src), str(tmp_path / "o"), phases=99))
    assert exc.value.stage == "balance"
    assert (tmp_path / "o" / "digraph.json").is_file()
    assert (tmp_path / "o" / "reduced.json").is_file()
    assert not (tmp_path / "o" / "manifest.json").exists()


def test_load_meshes_reports_missing_part(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_meshes(tmp_path, ["x"])


# -- configuration --------------------------------------------------------------------------


def test_config_file_resolves_relative_paths(tmp_path, triangle_doc):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({"assembly": "triangle.json", "phases": 2,
                                    "weights": {"tech": 0.5, "hand": 0.25, "tol": 0.25},
                                    "reduction": {"fraction": 0.2, "seed": 4}}))
    cfg = load_run_config(cfg_path)
    assert Path(cfg.assembly) == triangle_doc
    assert cfg.weights == WeightConfig(0.5, 0.25, 0.25)
    assert cfg.reduction.fraction == 0.2 and cfg.reduction.seed == 4
    cfg.validate()


@pytest.mark.parametrize("doc", [
    {"assembly": "a.json", "bogus": 1},
    {"phases": 2},
    {"assembly": "a.json", "weights": {"tech": 0.5, "hand": 0.5, "tol": 0.5}},
    {"assembly": "a.json", "reduction": {"fraction": 1.5}},
])
def test_bad_config_documents(tmp_path, doc):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ConfigError):
        load_run_config(p)


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "bad.json")


@pytest.mark.parametrize("kw", [dict(lam=2.0), dict(phases=0), dict(gap=1.0), dict(c=0.0),
                                dict(time_limit=0.0), dict(max_edges=0)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        RunConfig("x", **kw).validate(check_files=False)


def test_missing_assembly_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig(str(tmp_path / "none.json")).validate()


@given(st.floats(0, 1), st.integers(1, 9), st.floats(0, 0.5))
def test_digest_tracks_content(lam, phases, gap):
    a = RunConfig("a.json", lam=lam, phases=phases, gap=gap)
    assert a.digest() == RunConfig("a.json", lam=lam, phases=phases, gap=gap).digest()
    assert a.digest() != a.with_overrides(phases=phases + 1).digest()


def test_with_overrides_ignores_none():
    cfg = RunConfig("a.json", lam=0.3)
    assert cfg.with_overrides(lam=None, phases=None) == cfg


def test_sweep_spec_file(tmp_path):
    p = tmp_path / "s.json"
    spec = SweepSpec(lams=(0.0, 1.0), weights=(WeightConfig(1, 0, 0),), fractions=(0.0, 0.5),
                     gaps=(0.0,), seeds=(1, 2), replications=3)
    p.write_text(json.dumps(spec.to_dict()))
    assert load_sweep_spec(p) == spec


@pytest.mark.parametrize("kw", [dict(lams=()), dict(replications=0), dict(fractions=(1.0,)),
                                dict(gaps=(1.0,)), dict(lams=(1.5,))])
def test_sweep_spec_validation(kw):
    with pytest.raises(ConfigError):
        SweepSpec(**kw)


def test_thread_count_env(monkeypatch):
    monkeypatch.delenv("ASMLINE_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("ASMLINE_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("ASMLINE_THREADS", "zero")
    with pytest.raises(ConfigError):
        thread_count()
