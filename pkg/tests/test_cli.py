import json
import subprocess
import sys

import numpy as np
import pytest

import bcwave.checks
from bcwave import io
from bcwave.checks import CheckResult
from bcwave.cli import main

SMALL = {"grid": {"n_x": 101, "t_max": 1.0}}


def write_config(path, data):
    path.write_text(json.dumps(data))
    return path


def run(tmp_path, command, data, *extra, name="out"):
    cfg = write_config(tmp_path / f"{name}.json", data)
    out = tmp_path / name
    return main([command, "--config", str(cfg), "--out", str(out), *extra]), out


def test_forward_writes_artifacts_and_manifest(tmp_path):
    code, out = run(tmp_path, "forward", SMALL, "--seed", "11")
    assert code == 0
    u = io.read_grid(out / "field.bcw")
    assert u.shape[1] == 101
    header, rows = io.read_csv(out / "energy.csv")
    assert header == ["t", "value"] and len(rows) == u.shape[0]
    m = json.loads((out / "manifest.json").read_text())
    for key in ("manifest_version", "command", "argv", "config", "config_sha256", "seed",
                "versions", "wall_time_s", "exit_status", "summary"):
        assert key in m
    assert m["seed"] == 11 and m["exit_status"] == 0 and m["command"] == "forward"
    assert m["config"]["grid"]["n_x"] == 101


def test_zero_source_gives_zero_field(tmp_path):
    code, out = run(tmp_path, "forward", {**SMALL, "source": {"kind": "zero"}})
    assert code == 0
    assert not io.read_grid(out / "field.bcw").any()


def test_reruns_are_bit_identical(tmp_path):
    data = {**SMALL, "grid": {"n_x": 101, "t_max": 2.4}}
    _, a = run(tmp_path, "dtn", data, name="a")
    _, b = run(tmp_path, "dtn", data, name="b")
    assert (a / "dtn.bcw").read_bytes() == (b / "dtn.bcw").read_bytes()
    assert (a / "dtn.csv").read_bytes() == (b / "dtn.csv").read_bytes()


def test_rerun_from_manifest(tmp_path):
    _, a = run(tmp_path, "forward", SMALL, name="a")
    code = main(["forward", "--config", str(a / "manifest.json"), "--out", str(tmp_path / "b")])
    assert code == 0
    assert (a / "field.bcw").read_bytes() == (tmp_path / "b" / "field.bcw").read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["config"]["grid"] == mb["config"]["grid"]


@pytest.mark.parametrize("bad", [
    {"grid": {"n_x": 2}},
    {"grid": {"n_x": 101, "dt": 0.05}},  # CFL 5
    {"potential": {"family": "file", "path": "missing.bcw"}},
    {"source": {"kind": "bump", "t_lo": 0.5, "t_hi": 0.2}},
    {"no_such_key": 1},
])
def test_config_errors_exit_2(tmp_path, bad):
    code, _ = run(tmp_path, "forward", bad)
    assert code == 2


def test_negative_seed_rejected(tmp_path):
    code, _ = run(tmp_path, "forward", SMALL, "--seed", "-1")
    assert code == 2


def test_precondition_failure_exits_3(tmp_path):
    # the phantom reaches the box edge, violating the zero shell
    data = {"lightray": {"phantom": "bump", "radius": 3.0, "n_t": 9, "n_x": 9}}
    code, out = run(tmp_path, "lrt", data)
    assert code == 3
    assert json.loads((out / "manifest.json").read_text())["exit_status"] == 3


def test_failing_check_exits_4(tmp_path, monkeypatch):
    monkeypatch.setattr(bcwave.checks, "run_suite",
                        lambda cfg, progress=None: [CheckResult("rigged", False, 1.0, 0.0)])
    code, out = run(tmp_path, "check", SMALL)
    assert code == 4
    rep = json.loads((out / "check.json").read_text())
    assert rep["passed"] is False


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path / "c.json", SMALL)
    res = subprocess.run([sys.executable, "-m", "bcwave", "forward", "--config", str(cfg), "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0
    summary = json.loads(res.stdout.strip().splitlines()[-1])
    assert summary["n_x"] == 101 and np.isfinite(summary["max_abs_u"])
