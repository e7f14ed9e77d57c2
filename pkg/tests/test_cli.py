import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from posebridge.cli import main
from posebridge.geometry import CameraIntrinsics, project
from posebridge.io import file_digest, read_jsonl, read_records, write_jsonl
from posebridge.metrics import mpjpe

SCHEMA_DIR = Path(__file__).resolve().parents[1] / "schema"


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def dataset(workdir):
    assert main(["gen-data", "--output", "gt.jsonl", "--count", "100", "--seed", "7"]) == 0
    return workdir / "gt.jsonl"


def _schema(name):
    return json.loads((SCHEMA_DIR / name).read_text())


def test_gen_data_deterministic_and_consistent(dataset, workdir):
    assert main(["gen-data", "--output", "again.jsonl", "--count", "100", "--seed", "7"]) == 0
    assert dataset.read_bytes() == (workdir / "again.jsonl").read_bytes()
    schema = _schema("dataset_record.schema.json")
    for raw in read_jsonl(dataset):
        jsonschema.validate(raw, schema)
    for rec in read_records(dataset):
        assert np.max(np.abs(project(rec.joints3d, rec.camera) - rec.joints2d)) < 1e-9
    manifest = json.loads((workdir / "gt.jsonl.manifest.json").read_text())
    jsonschema.validate(manifest, _schema("manifest.schema.json"))
    assert manifest["seed"] == 7


def test_gen_data_count_zero_fails(workdir):
    assert main(["gen-data", "--output", "x.jsonl", "--count", "0"]) != 0


def test_gen_data_unwritable_path(workdir, caplog):
    assert main(["gen-data", "--output", "missing/dir/x.jsonl", "--count", "2"]) != 0
    assert "missing/dir/x.jsonl" in caplog.text


def test_gen_data_sequences(workdir):
    assert main(["gen-data", "--output", "seq.jsonl", "--count", "12", "--sequence-length", "4"]) == 0
    recs = read_records("seq.jsonl")
    assert len({r.sequence_id for r in recs}) == 3
    assert [r.frame_index for r in recs[:4]] == [0, 1, 2, 3]


def test_pseudo_label_noiseless(dataset, workdir):
    assert main(["pseudo-label", "--input", "gt.jsonl", "--output", "pl.jsonl",
                 "--report-csv", "pl.csv"]) == 0
    recs = read_records("pl.jsonl")
    errs = [mpjpe(np.asarray(r.extra["pseudo_joints3d"]), r.joints3d) for r in recs]
    assert np.mean(np.array(errs) < 1.0) >= 0.95
    schema = _schema("dataset_record.schema.json")
    for raw in read_jsonl("pl.jsonl"):
        jsonschema.validate(raw, schema)
    assert (workdir / "pl.csv").read_text().startswith("id,stage1_residual")


def test_pseudo_label_skips_incomplete(dataset, workdir):
    rows = read_jsonl(dataset)[:5]
    del rows[0]["joints2d"]
    write_jsonl("partial.jsonl", rows)
    assert main(["pseudo-label", "--input", "partial.jsonl", "--output", "pl.jsonl"]) == 0
    manifest = json.loads(Path("pl.jsonl.manifest.json").read_text())
    assert manifest["summary"]["succeeded"] == 4
    assert [s["id"] for s in manifest["summary"]["skipped"]] == [rows[0]["id"]]


def test_pseudo_label_all_fail_nonzero(dataset, workdir):
    rows = read_jsonl(dataset)[:3]
    for r in rows:
        del r["rel_pose3d"]
    write_jsonl("bad.jsonl", rows)
    assert main(["pseudo-label", "--input", "bad.jsonl", "--output", "pl.jsonl"]) != 0


def test_align_to_rigid_copy(dataset, workdir, rng):
    from posebridge.geometry import random_rotation

    rows = read_jsonl(dataset)
    cam = CameraIntrinsics(900, 900, 1000, 1000)
    for r in rows:
        pose = np.asarray(r["joints3d"])
        # spin about the root and push further away so the copy stays in view
        moved = (pose - pose[0]) @ random_rotation(rng).T + pose[0] + [0.2, -0.1, 3.0]
        r["joints3d"] = moved.tolist()
        r["camera"] = cam.to_dict()
        r.pop("joints2d")
    write_jsonl("tgt.jsonl", rows)
    assert main(["align", "--input", "gt.jsonl", "--target", "tgt.jsonl", "--output", "al.jsonl",
                 "--method", "human-centric", "--report-csv", "al.csv"]) == 0
    report = json.loads(Path("al.jsonl.report.json").read_text())
    assert report["average_mm"] < 1e-6
    targets = read_records("tgt.jsonl")
    for rec, tgt in zip(read_records("al.jsonl"), targets):
        root_px = project(tgt.joints3d[None, :1], cam)[0, 0]
        assert np.allclose(rec.joints2d[0], root_px, atol=1e-9)


def test_align_missing_target_camera(dataset, workdir):
    rows = read_jsonl(dataset)[:3]
    for r in rows:
        r.pop("camera")
    write_jsonl("nocam.jsonl", rows)
    assert main(["align", "--input", "gt.jsonl", "--target", "nocam.jsonl", "--output", "o.jsonl"]) != 0


def test_align_unknown_method_is_usage_error(dataset, workdir):
    with pytest.raises(SystemExit) as exc:
        main(["align", "--input", "gt.jsonl", "--target", "gt.jsonl", "--output", "o.jsonl",
              "--method", "icp"])
    assert exc.value.code == 2


def test_eval_perfect(dataset, workdir):
    assert main(["eval", "--input", "gt.jsonl", "--gt", "gt.jsonl", "--output", "ev.json",
                 "--report-csv", "ev.csv"]) == 0
    rep = json.loads(Path("ev.json").read_text())["report"]
    assert rep["mpjpe"] == 0 and rep["pck"] == 100 and rep["auc"] == 1
    last = Path("ev.csv").read_text().strip().splitlines()[-1].split(",")
    assert last[0] == "ALL" and float(last[1]) == 0.0 and float(last[3]) == 100.0


def test_augment_zero_is_identity(dataset, workdir):
    assert main(["augment", "--input", "gt.jsonl", "--output", "aug.jsonl",
                 "--angle-range", "0,0", "--ratio-range", "0,0"]) == 0
    for a, b in zip(read_records("gt.jsonl"), read_records("aug.jsonl")):
        assert np.array_equal(a.joints3d, b.joints3d)


def test_augment_changes_lengths(dataset, workdir):
    assert main(["augment", "--input", "gt.jsonl", "--output", "aug.jsonl", "--seed", "3"]) == 0
    params = json.loads(Path("aug.jsonl.params.json").read_text())
    assert len(params["sequences"]) == 100


def test_kcs_output(dataset, workdir):
    assert main(["kcs", "--input", "gt.jsonl", "--output", "k.jsonl"]) == 0
    row = read_jsonl("k.jsonl")[0]
    assert set(row["kcs"]) == {"torso", "left_arm", "right_arm", "left_leg", "right_leg"}
    assert np.asarray(row["kcs"]["torso"]).shape == (3, 3)


def test_sim_camera_defaults(dataset, workdir):
    assert main(["sim-camera", "--input", "gt.jsonl", "--output", "sim.jsonl"]) == 0
    rec = read_records("sim.jsonl")[0]
    assert rec.extra["virtual_camera"] == {"height_m": 2.0, "depression_deg": 45.0}


def test_compare_align_synthetic(workdir):
    assert main(["compare-align", "--output", "cmp.json", "--report-csv", "cmp.csv",
                 "--synthetic-count", "40", "--seed", "2"]) == 0
    reports = {r["method"]: r for r in json.loads(Path("cmp.json").read_text())["reports"]}
    assert reports["kabsch"]["average_mm"] <= reports["human_centric"]["average_mm"]


@pytest.mark.parametrize("argv", [
    ["gen-data", "--output", "o.jsonl", "--count", "20", "--seed", "5"],
    ["pseudo-label", "--input", "gt.jsonl", "--output", "o.jsonl"],
    ["augment", "--input", "gt.jsonl", "--output", "o.jsonl", "--seed", "9"],
    ["align", "--input", "gt.jsonl", "--target", "gt.jsonl", "--output", "o.jsonl",
     "--method", "kabsch", "--pairing", "random", "--seed", "4"],
    ["kcs", "--input", "gt.jsonl", "--output", "o.jsonl"],
    ["eval", "--input", "gt.jsonl", "--output", "o.jsonl"],
    ["sim-camera", "--input", "gt.jsonl", "--output", "o.jsonl"],
    ["compare-align", "--output", "o.jsonl", "--synthetic-count", "20"],
])
def test_rerun_reproduces_bytes(dataset, workdir, argv):
    assert main(argv) == 0
    manifest = json.loads(Path("o.jsonl.manifest.json").read_text())
    before = {p: file_digest(p) for p in manifest["outputs"]}
    for p in manifest["outputs"]:
        Path(p).unlink()
    assert main(["rerun", "o.jsonl.manifest.json"]) == 0
    assert {p: file_digest(p) for p in manifest["outputs"]} == before
    assert dataset.exists() and file_digest(dataset) == manifest["inputs"].get("gt.jsonl", file_digest(dataset))


def test_rerun_detects_changed_input(dataset, workdir):
    assert main(["kcs", "--input", "gt.jsonl", "--output", "k.jsonl"]) == 0
    with open(dataset, "a") as fh:
        fh.write("\n")
    assert main(["rerun", "k.jsonl.manifest.json"]) != 0
