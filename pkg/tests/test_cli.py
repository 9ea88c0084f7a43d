import hashlib
import json
import os

import numpy as np
import pytest

from microforge.cli import load_config, main, resolve_config, run_job
from microforge.errors import ConfigError
from microforge.grid import LabelMask
from microforge.volio import read_mask, read_volume, write_mask


def _write_config(tmp_path, name, cfg):
    path = os.path.join(tmp_path, name)
    with open(path, "w") as fh:
        json.dump(cfg, fh)
    return path


def _crack_cfg(**params):
    base = {"dims": [32, 32, 32], "germs": {"model": "poisson", "count": 40},
            "background": {"phantom": {"mean": 0.5, "sigma": 0.03}}}
    base.update(params)
    return {"task": "crack", "seed": 5, "replicates": 1, "params": base}


def test_resolve_config_merges_defaults():
    cfg = resolve_config({"task": "crack", "params": {"dims": [16, 16, 16]}})
    assert cfg["replicates"] == 1
    assert cfg["params"]["axis"] == "z"
    assert cfg["params"]["widths"]["mode"] == "walk"
    assert cfg["params"]["germs"]["count"] == 150


def test_resolve_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        resolve_config({"task": "crack",
                        "params": {"dims": [16, 16, 16], "wat": 1}})
    with pytest.raises(ConfigError):
        resolve_config({"task": "milling", "params": {}, "extra": True})


def test_load_config_bad_json(tmp_path):
    path = os.path.join(tmp_path, "bad.json")
    with open(path, "w") as fh:
        fh.write("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_crack_job_artifacts_and_hashes(tmp_path):
    cfg = _crack_cfg()
    out = os.path.join(tmp_path, "out")
    manifest = run_job(cfg, out)
    listed = {a["path"]: a["sha256"] for a in manifest["artifacts"]}
    assert "rep_000/mask.raw" in listed
    assert "rep_000/volume.raw" in listed
    assert "rep_000/provenance.json" in listed
    for rel, digest in listed.items():
        with open(os.path.join(out, rel), "rb") as fh:
            assert hashlib.sha256(fh.read()).hexdigest() == digest
    assert manifest["schema"] == "microforge.manifest.v1"
    assert manifest["seed"] == 5
    with open(os.path.join(out, "manifest.json")) as fh:
        on_disk = json.load(fh)
    assert on_disk == json.loads(json.dumps(manifest))


def test_replicates_use_distinct_streams(tmp_path):
    cfg = _crack_cfg()
    cfg["replicates"] = 2
    out = os.path.join(tmp_path, "out")
    run_job(cfg, out)
    a = read_mask(os.path.join(out, "rep_000", "mask.raw"))
    b = read_mask(os.path.join(out, "rep_001", "mask.raw"))
    assert not np.array_equal(a.data, b.data)
    prov = json.load(open(os.path.join(out, "rep_001", "provenance.json")))
    assert prov["stream_id"] == 1
    assert prov["seed"] == 5


def test_rerun_bit_identical(tmp_path):
    cfg = _crack_cfg()
    m1 = run_job(cfg, os.path.join(tmp_path, "a"))
    m2 = run_job(cfg, os.path.join(tmp_path, "b"))
    assert m1["artifacts"] == m2["artifacts"]


def test_no_timestamps_in_manifest(tmp_path):
    cfg = _crack_cfg()
    manifest = run_job(cfg, os.path.join(tmp_path, "out"))
    text = json.dumps(manifest)
    assert "time" not in text and "date" not in text


def test_seed_required(tmp_path):
    cfg = _crack_cfg()
    del cfg["seed"]
    with pytest.raises(ConfigError):
        run_job(cfg, os.path.join(tmp_path, "out"))


def test_cli_exit_codes(tmp_path, capsys):
    bad = _write_config(tmp_path, "bad.json",
                        {"task": "crack", "seed": 1,
                         "params": {"dims": [32, 32]}})
    assert main(["crack", "--config", bad,
                 "--out", os.path.join(tmp_path, "o1")]) == 2
    assert "error:" in capsys.readouterr().err

    missing = _write_config(tmp_path, "missing.json",
                            {"task": "segment", "seed": 1,
                             "params": {"input_volume": "nowhere.raw"}})
    assert main(["segment", "--config", missing,
                 "--out", os.path.join(tmp_path, "o2")]) == 4

    wrong_task = _write_config(tmp_path, "w.json", _crack_cfg())
    assert main(["boolean", "--config", wrong_task,
                 "--out", os.path.join(tmp_path, "o3")]) == 2


def test_voxel_budget_guard(tmp_path):
    cfg = {"task": "boolean", "seed": 1,
           "params": {"dims": [1100, 1100, 1100],
                      "size": {"kind": "constant", "value": 10.0}}}
    with pytest.raises(ConfigError):
        run_job(cfg, os.path.join(tmp_path, "out"))


def test_seed_flag_overrides(tmp_path):
    cfg_path = _write_config(tmp_path, "c.json", _crack_cfg())
    out1 = os.path.join(tmp_path, "s1")
    out2 = os.path.join(tmp_path, "s2")
    assert main(["crack", "--config", cfg_path, "--out", out1,
                 "--seed", "99"]) == 0
    assert main(["crack", "--config", cfg_path, "--out", out2]) == 0
    m1 = json.load(open(os.path.join(out1, "manifest.json")))
    m2 = json.load(open(os.path.join(out2, "manifest.json")))
    assert m1["seed"] == 99 and m2["seed"] == 5
    assert m1["artifacts"] != m2["artifacts"]


def test_schema_subcommand(capsys):
    assert main(["schema", "crack"]) == 0
    out = capsys.readouterr().out
    schema = json.loads(out)
    assert schema["properties"]["task"] == {"const": "crack"}
    assert "dims" in schema["properties"]["params"]["properties"]


def test_boolean_job(tmp_path):
    cfg = {"task": "boolean", "seed": 2,
           "params": {"dims": [32, 32, 32], "shape": "sphere",
                      "size": {"kind": "constant", "value": 5.0},
                      "target_fraction": 0.2}}
    out = os.path.join(tmp_path, "out")
    manifest = run_job(cfg, out)
    paths = [a["path"] for a in manifest["artifacts"]]
    assert "rep_000/grains.csv" in paths
    prov = json.load(open(os.path.join(out, "rep_000", "provenance.json")))
    assert abs(prov["expected_fraction"] - 0.2) < 1e-9
    assert abs(prov["measured_fraction"] - 0.2) < 0.08


def test_sem_job_with_match_histogram(tmp_path):
    from microforge.volio import gray_to_png
    arr = np.zeros((16, 16, 12), dtype=bool)
    arr[:, :, :5] = True
    mask_path = os.path.join(tmp_path, "solid.raw")
    write_mask(LabelMask(arr), mask_path, (1, 1, 1))
    ref = np.random.default_rng(0).random((20, 20)).astype(np.float32) * 0.3
    ref_path = os.path.join(tmp_path, "ref.png")
    gray_to_png(ref, ref_path, bit_depth=16)
    cfg_path = _write_config(tmp_path, "sem.json", {
        "task": "sem", "seed": 3,
        "params": {"input_mask": mask_path,
                   "config": {"slice_thickness_vox": 6}}})
    out = os.path.join(tmp_path, "out")
    assert main(["sem", "--config", cfg_path, "--out", out,
                 "--match-histogram", ref_path]) == 0
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["notes"]
    assert manifest["config"]["match_histogram"] == ref_path
    slices = [a["path"] for a in manifest["artifacts"]
              if a["path"].endswith(".png") and "slice" in a["path"]]
    assert len(slices) == 2
    from microforge.volio import load_png_gray
    img = load_png_gray(os.path.join(out, slices[0]))
    assert img.max() <= ref.max() + 2 / 255


def test_milling_job(tmp_path):
    cfg = {"task": "milling", "seed": 4,
           "params": {"surface_size_mm": [3.0, 3.0],
                      "grid_resolution_um": 60.0}}
    out = os.path.join(tmp_path, "out")
    manifest = run_job(cfg, out)
    paths = [a["path"] for a in manifest["artifacts"]]
    assert "rep_000/heightmap.raw" in paths
    assert "rep_000/heightmap.png" in paths
    assert "rep_000/preview.png" in paths
    assert any("not calibrated" in n for n in manifest["notes"])


def test_segment_and_eval_jobs(tmp_path):
    gen_out = os.path.join(tmp_path, "gen")
    run_job(_crack_cfg(), gen_out)
    seg_cfg = {"task": "segment", "seed": 1,
               "params": {"input_volume":
                          os.path.join(gen_out, "rep_000", "volume.raw")}}
    seg_out = os.path.join(tmp_path, "seg")
    run_job(seg_cfg, seg_out)
    pred = read_mask(os.path.join(seg_out, "rep_000", "mask.raw"))
    truth = read_mask(os.path.join(gen_out, "rep_000", "mask.raw"))
    assert pred.data.shape == truth.data.shape

    eval_cfg = {"task": "eval", "seed": 1,
                "params": {"pred_mask":
                           os.path.join(seg_out, "rep_000", "mask.raw"),
                           "truth_mask":
                           os.path.join(gen_out, "rep_000", "mask.raw"),
                           "separation_axis": "z"}}
    eval_out = os.path.join(tmp_path, "ev")
    run_job(eval_cfg, eval_out)
    scores = json.load(open(os.path.join(eval_out, "rep_000", "scores.json")))
    tp = np.sum(pred.data & truth.data)
    want = 2 * tp / (pred.count + truth.count)
    assert scores["dice"] == pytest.approx(want)
    assert 0.5 < scores["dice"] <= 1.0


def test_pipeline_oracle_dice_one(tmp_path):
    cfg = {"task": "pipeline", "seed": 6, "replicates": 2,
           "params": {"generate": _crack_cfg()["params"],
                      "segment": {"method": "oracle"}}}
    out = os.path.join(tmp_path, "out")
    manifest = run_job(cfg, out)
    assert manifest["reports"] == ["scores.csv"]
    rows = open(os.path.join(out, "scores.csv")).read().strip().splitlines()
    assert rows[0] == "replicate,seed,dice,precision,recall,runtime_s"
    assert len(rows) == 3
    for row in rows[1:]:
        fields = row.split(",")
        assert float(fields[2]) == 1.0
    # runtime column is a report, not a hashed artifact
    hashed = [a["path"] for a in manifest["artifacts"]]
    assert "scores.csv" not in hashed


def test_pipeline_requires_background(tmp_path):
    params = _crack_cfg()["params"]
    params["background"] = None
    cfg = {"task": "pipeline", "seed": 6,
           "params": {"generate": params, "segment": {"method": "oracle"}}}
    with pytest.raises(ConfigError):
        run_job(cfg, os.path.join(tmp_path, "out"))


def test_mask_only_crack_job(tmp_path):
    params = {"dims": [24, 24, 24], "germs": {"model": "poisson", "count": 20}}
    cfg = {"task": "crack", "seed": 8, "params": params}
    out = os.path.join(tmp_path, "out")
    manifest = run_job(cfg, out)
    paths = [a["path"] for a in manifest["artifacts"]]
    assert "rep_000/mask.raw" in paths
    assert "rep_000/volume.raw" not in paths
