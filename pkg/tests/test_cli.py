import json
import subprocess
import sys

import numpy as np
import pytest

from crowdsim.cli import main
from crowdsim.io import read_csv


def _write_raw(path, n_peds=3, n_frames=40):
    # centimetre coordinates, 16 fps walkers at 1 m/s along the corridor
    lines = ["# synthetic corridor walkers"]
    for p in range(n_peds):
        x0 = 20.0 + 30.0 * p
        y = 60.0 + 60.0 * p
        for f in range(n_frames):
            lines.append(f"{p + 1} {f} {x0 + f * 6.25:.2f} {y:.2f}")
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run ingest -> train -> simulate (both models) once, share the outputs."""
    root = tmp_path_factory.mktemp("pipeline")
    raw = root / "walkers.txt"
    _write_raw(raw)
    ing = root / "ingest"
    assert main(["ingest", "--scene", "corridor", "--data", str(raw),
                 "--fps", "16", "--out", str(ing)]) == 0
    tr = root / "train"
    assert main(["train", "--scene", "corridor", "--data", str(ing / "dataset.json"),
                 "--beta", "45", "--alpha", "90", "--iters", "4", "--batch", "16",
                 "--channels", "4,4", "--dropout", "0.0", "--val-every", "2",
                 "--seed", "3", "--out", str(tr)]) == 0
    sim = root / "sim_tcn"
    assert main(["simulate", "--scene", "corridor", "--data", str(ing / "dataset.json"),
                 "--checkpoint", str(tr / "checkpoint.json"), "--model", "tcn",
                 "--max-steps", "300", "--out", str(sim)]) == 0
    sf = root / "sim_sf"
    assert main(["simulate", "--scene", "corridor", "--data", str(ing / "dataset.json"),
                 "--model", "sf", "--max-steps", "300", "--seed", "1",
                 "--out", str(sf)]) == 0
    return {"root": root, "raw": raw, "ingest": ing, "train": tr,
            "sim_tcn": sim, "sim_sf": sf}


def test_ingest_outputs(pipeline):
    ing = pipeline["ingest"]
    doc = json.loads((ing / "dataset.json").read_text())
    manifest = json.loads((ing / "manifest.json").read_text())
    assert doc["format"] == "crowdsim-dataset-v1"
    assert doc["manifest_hash"] == manifest["manifest_hash"]
    assert [r["name"] for r in doc["runs"]] == ["walkers"]
    assert len(doc["runs"][0]["trajectories"]) == 3
    assert doc["dt"] == 0.0625
    assert manifest["warnings"] == []


def test_ingest_rerun_is_byte_identical(pipeline):
    ing = pipeline["ingest"]
    before = (ing / "dataset.json").read_bytes()
    assert main(["ingest", "--scene", "corridor", "--data", str(pipeline["raw"]),
                 "--fps", "16", "--out", str(ing)]) == 0
    assert (ing / "dataset.json").read_bytes() == before


def test_ingest_fps_warning_recorded(pipeline, tmp_path):
    out = tmp_path / "warned"
    assert main(["ingest", "--scene", "corridor", "--data", str(pipeline["raw"]),
                 "--fps", "25", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert any("fps" in w and "16" in w for w in manifest["warnings"])


def test_ingest_malformed_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 0 10 20\n1 one 30 40\n")
    code = main(["ingest", "--scene", "corridor", "--data", str(bad),
                 "--out", str(tmp_path / "out")])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and "line 2" in err


def test_train_outputs_and_rerun_identical(pipeline):
    tr = pipeline["train"]
    ckpt = json.loads((tr / "checkpoint.json").read_text())
    assert ckpt["format"] == "crowdsim-checkpoint-v1"
    assert ckpt["extraction"]["ray_deg"] == 45.0
    assert ckpt["network"]["input_dim"] == 2 + 4 * 4 + 2 * 8 + 4
    header, rows = read_csv(tr / "loss_history.csv")
    assert header == ["iteration", "train_loss", "val_loss"]
    assert [int(r[0]) for r in rows] == [0, 2, 4]
    assert all(np.isfinite(float(v)) for r in rows for v in r[1:])
    before = (tr / "checkpoint.json").read_bytes()
    assert main(["train", "--scene", "corridor",
                 "--data", str(pipeline["ingest"] / "dataset.json"),
                 "--beta", "45", "--alpha", "90", "--iters", "4", "--batch", "16",
                 "--channels", "4,4", "--dropout", "0.0", "--val-every", "2",
                 "--seed", "3", "--out", str(tr)]) == 0
    assert (tr / "checkpoint.json").read_bytes() == before


def test_train_seed_changes_checkpoint(pipeline, tmp_path):
    out = tmp_path / "other_seed"
    assert main(["train", "--scene", "corridor",
                 "--data", str(pipeline["ingest"] / "dataset.json"),
                 "--beta", "45", "--alpha", "90", "--iters", "4", "--batch", "16",
                 "--channels", "4,4", "--dropout", "0.0", "--val-every", "2",
                 "--seed", "4", "--out", str(out)]) == 0
    a = json.loads((pipeline["train"] / "checkpoint.json").read_text())
    b = json.loads((out / "checkpoint.json").read_text())
    assert a["tensors"] != b["tensors"]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_divergence_exits_nonzero(pipeline, tmp_path, capsys):
    code = main(["train", "--scene", "corridor",
                 "--data", str(pipeline["ingest"] / "dataset.json"),
                 "--beta", "45", "--alpha", "90", "--iters", "10", "--batch", "16",
                 "--channels", "4,4", "--dropout", "0.0", "--lr", "1e200",
                 "--out", str(tmp_path / "div")])
    assert code == 1
    assert "diverg" in capsys.readouterr().err


def test_simulate_output_format(pipeline):
    for key, model in (("sim_tcn", "tcn"), ("sim_sf", "sf")):
        path = pipeline[key] / "trajectories.csv"
        text = path.read_text()
        assert text.startswith("# manifest_hash=")
        header, rows = read_csv(path)
        assert header == ["run", "ped_id", "step", "time_s", "x_m", "y_m",
                          "module_id", "reset_flag"]
        assert rows and all(len(r) == 8 for r in rows)
        assert {r[0] for r in rows} == {"walkers"}
        manifest = json.loads((pipeline[key] / "manifest.json").read_text())
        assert manifest["model"] == model


def test_simulate_replays_seed_window(pipeline):
    # the first w steps of each pedestrian must reproduce the archive exactly
    doc = json.loads((pipeline["ingest"] / "dataset.json").read_text())
    exp = {t["ped_id"]: np.asarray(t["positions"])
           for t in doc["runs"][0]["trajectories"]}
    _, rows = read_csv(pipeline["sim_tcn"] / "trajectories.csv")
    for pid, positions in exp.items():
        got = np.array([[float(r[4]), float(r[5])] for r in rows
                        if r[1] == pid][:8])
        np.testing.assert_array_equal(got, positions[:8])


def test_simulate_without_checkpoint_errors(pipeline, tmp_path, capsys):
    code = main(["simulate", "--scene", "corridor",
                 "--data", str(pipeline["ingest"] / "dataset.json"),
                 "--model", "tcn", "--out", str(tmp_path / "x")])
    assert code == 1
    assert "checkpoint" in capsys.readouterr().err


def test_simulate_param_mismatch_errors(pipeline, tmp_path, capsys):
    for flag, value in (("--beta", "10"), ("--de", "100")):
        code = main(["simulate", "--scene", "corridor",
                     "--data", str(pipeline["ingest"] / "dataset.json"),
                     "--checkpoint", str(pipeline["train"] / "checkpoint.json"),
                     flag, value, "--out", str(tmp_path / "x")])
        assert code == 1
        assert "mismatch" in capsys.readouterr().err


def test_simulate_unknown_run_errors(pipeline, tmp_path, capsys):
    code = main(["simulate", "--scene", "corridor",
                 "--data", str(pipeline["ingest"] / "dataset.json"),
                 "--checkpoint", str(pipeline["train"] / "checkpoint.json"),
                 "--run", "nope", "--out", str(tmp_path / "x")])
    assert code == 1
    assert "nope" in capsys.readouterr().err


def test_evaluate_sim_against_archive(pipeline, tmp_path):
    out = tmp_path / "eval"
    assert main(["evaluate", "--scene", "corridor",
                 "--data", str(pipeline["ingest"] / "dataset.json"),
                 "--sim", str(pipeline["sim_tcn"] / "trajectories.csv"),
                 "--out", str(out)]) == 0
    header, rows = read_csv(out / "metrics.csv")
    assert header == ["run", "model", "ped_id", "ade_m", "fde_m", "tte_s"]
    assert len(rows) == 3
    assert all(np.isfinite(float(v)) for r in rows for v in r[3:])
    sheader, srows = read_csv(out / "metrics_summary.csv")
    assert srows[0][2] == "3"
    mean_ade = np.mean([float(r[3]) for r in rows])
    assert float(srows[0][3]) == pytest.approx(mean_ade, rel=1e-12)


def test_evaluate_identical_inputs_zero_metrics(pipeline, tmp_path):
    out = tmp_path / "self"
    sim_csv = str(pipeline["sim_tcn"] / "trajectories.csv")
    assert main(["evaluate", "--scene", "corridor", "--data", sim_csv,
                 "--sim", sim_csv, "--out", str(out)]) == 0
    _, rows = read_csv(out / "metrics.csv")
    assert rows
    for r in rows:
        assert float(r[3]) == 0.0 and float(r[4]) == 0.0 and float(r[5]) == 0.0


def test_fd_outputs_and_flow_identity(pipeline, tmp_path):
    out = tmp_path / "fd"
    assert main(["fd", "--scene", "corridor",
                 "--data", str(pipeline["sim_sf"] / "trajectories.csv"),
                 "--svg", "--out", str(out)]) == 0
    header, rows = read_csv(out / "fd_corridor.csv")
    assert header == ["time_s", "density", "speed", "flow"]
    assert rows
    for r in rows:
        assert float(r[3]) == float(r[1]) * float(r[2])
    svg = (out / "fd_corridor.svg").read_text()
    assert svg.startswith("<!-- manifest_hash=")
    assert "<svg" in svg and "circle" in svg


def test_fd_without_measurement_area_errors(pipeline, tmp_path, capsys):
    code = main(["fd", "--scene", "corridor",
                 "--data", str(pipeline["sim_sf"] / "trajectories.csv"),
                 "--module", "missing", "--out", str(tmp_path / "x")])
    assert code == 1
    assert "missing" in capsys.readouterr().err


def test_sensitivity_grid(pipeline, tmp_path):
    out = tmp_path / "sens"
    assert main(["sensitivity", "--scene", "corridor",
                 "--data", str(pipeline["ingest"] / "dataset.json"),
                 "--de", "20,100", "--beta", "45,90", "--alpha", "90",
                 "--iters", "2", "--batch", "8", "--channels", "4",
                 "--max-steps", "120", "--out", str(out)]) == 0
    header, rows = read_csv(out / "sensitivity.csv")
    assert header == ["vision_range_m", "ray_deg", "mean_ade_m", "mean_fde_m",
                      "mean_tte_s"]
    assert len(rows) == 4
    assert [(float(r[0]), float(r[1])) for r in rows] == \
        [(20.0, 45.0), (20.0, 90.0), (100.0, 45.0), (100.0, 90.0)]
    assert all(np.isfinite(float(v)) for r in rows for v in r[2:])
    text = (out / "sensitivity.csv").read_text()
    assert "# spread_ade_m=" in text


def test_sensitivity_single_combo_errors(pipeline, tmp_path, capsys):
    code = main(["sensitivity", "--scene", "corridor",
                 "--data", str(pipeline["ingest"] / "dataset.json"),
                 "--de", "20", "--beta", "45", "--alpha", "90",
                 "--out", str(tmp_path / "x")])
    assert code == 1
    assert "at least 2" in capsys.readouterr().err


def test_out_env_var_default(pipeline, tmp_path, monkeypatch):
    target = tmp_path / "env_out"
    monkeypatch.setenv("CROWDSIM_OUT", str(target))
    assert main(["ingest", "--scene", "corridor", "--data", str(pipeline["raw"]),
                 "--fps", "16"]) == 0
    assert (target / "dataset.json").exists()


def test_module_entry_point(pipeline, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "crowdsim.cli", "ingest", "--scene", "corridor",
         "--data", str(pipeline["raw"]), "--fps", "16",
         "--out", str(tmp_path / "subproc")],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "subproc" / "dataset.json").exists()


def test_unknown_scene_errors(pipeline, tmp_path, capsys):
    code = main(["fd", "--scene", str(tmp_path / "absent.json"),
                 "--data", str(pipeline["sim_sf"] / "trajectories.csv"),
                 "--out", str(tmp_path / "x")])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")
