import json

import pytest

from pairtunnel.cli import main
from pairtunnel.presets import PRESETS, get_preset
from pairtunnel.scenario import ConfigError, parse_config, run

SMALL_TRAJ = {"steps_per_period": 512, "t_end": 20.0, "sample_stride": 128}


def small_config(**overrides):
    cfg = {
        "name": "small",
        "channel": "interwell_spin_conserving",
        "params": {"f": 32.0, "u1": 28.0, "beta1": 0.01, "beta2": 0.01},
        "integrator": SMALL_TRAJ,
        "outputs": ["spectrum", "trajectory", "effective_trajectory", "curve", "map"],
        "curve": {"sweep": {"param": "2u1/omega", "lo": 1.2, "hi": 1.4, "count": 3}},
        "map": {
            "x": {"param": "2u1/omega", "lo": 0.2, "hi": 4.0, "count": 7},
            "y": {"param": "2f/omega", "lo": 0.0, "hi": 8.0, "count": 5},
        },
        "expect": [{"kind": "verdict", "equals": "StableAllReal"}],
    }
    cfg.update(overrides)
    return cfg


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_dir(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_rerun_is_byte_identical_across_worker_counts(tmp_path):
    path = write(tmp_path, small_config())
    assert main(["run", str(path), "--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main(["run", str(path), "--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    a, b = read_dir(tmp_path / "a"), read_dir(tmp_path / "b")
    assert set(a) == {"manifest.json", "trajectory.csv", "effective.csv", "spectrum.csv", "curve.csv", "map.csv"}
    assert a == b


def test_manifest_contents(tmp_path):
    manifest = run(small_config(seed=7), tmp_path)
    assert manifest["seed"] == 7
    assert manifest["passed"] is True
    assert set(manifest["outputs"]) == {"trajectory.csv", "effective.csv", "spectrum.csv", "curve.csv", "map.csv"}
    assert manifest["resolved"]["integrator"]["steps_per_period"] == 512
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == json.loads(json.dumps(manifest))


def test_seed_flag_is_recorded(tmp_path):
    path = write(tmp_path, small_config(outputs=["spectrum"]))
    assert main(["run", str(path), "--out", str(tmp_path / "o"), "--seed", "42"]) == 0
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["seed"] == 42


def test_resolved_config_reproduces_run(tmp_path):
    first = run(get_preset("fig2b") | {"integrator": SMALL_TRAJ}, tmp_path / "a")
    second = run(first["resolved"], tmp_path / "b")
    assert first["outputs"] == second["outputs"]


def read_error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_exit_code_config_error(tmp_path, capsys):
    bad = small_config()
    del bad["channel"]
    assert main(["run", str(write(tmp_path, bad))]) == 2
    assert read_error(capsys)["error"] == "ConfigError"
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    assert main(["run", "preset:nope"]) == 2
    # a product requested without its section
    assert main(["run", str(write(tmp_path, small_config(outputs=["solve"])))]) == 2
    assert "solve" in read_error(capsys)["message"]


def test_exit_code_precondition(tmp_path, capsys):
    cfg = small_config(outputs=["spectrum"])
    cfg["params"]["alpha"] = 0.5
    assert main(["run", str(write(tmp_path, cfg))]) == 3
    assert read_error(capsys) == {
        "error": "ChannelError",
        "message": "interwell_spin_conserving requires integer alpha and delta = 0 (alpha=0.5, delta=0.0)",
        "exit_code": 3,
    }
    cfg = small_config(outputs=["spectrum"])
    cfg["params"]["u1"] = 20.0
    assert main(["run", str(write(tmp_path, cfg))]) == 3
    assert read_error(capsys)["error"] == "ResonanceError"
    # intrawell spectrum without suppressed interwell pair tunneling
    iw = get_preset("fig5") | {"outputs": ["spectrum"]}
    assert main(["run", str(write(tmp_path, iw)), "--out", str(tmp_path / "x")]) == 3
    assert read_error(capsys)["error"] == "PreconditionError"


def test_exit_code_solver(tmp_path, capsys):
    cfg = get_preset("fig2a")
    cfg["solve"]["bracket"] = [60.0, 65.0]
    assert main(["run", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 4
    assert read_error(capsys)["error"] == "NoSignChange"
    assert not (tmp_path / "o").exists()


def test_exit_code_expectation(tmp_path, capsys):
    cfg = small_config(outputs=["spectrum"], expect=[{"kind": "verdict", "equals": "Unstable"}])
    assert main(["run", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 5
    assert "FAIL verdict" in capsys.readouterr().out
    assert (tmp_path / "o" / "manifest.json").exists()


def test_preset_emit_config_round_trip(tmp_path, capsys):
    assert main(["list-presets"]) == 0
    listed = capsys.readouterr().out.split()
    assert all(name in listed for name in PRESETS)
    for name in PRESETS:
        assert main(["preset", name, "--emit-config"]) == 0
        emitted = json.loads(capsys.readouterr().out)
        assert emitted == PRESETS[name]
        parse_config(emitted)
    out = tmp_path / "fig1c.json"
    assert main(["preset", "fig1c", "--emit-config", "--out", str(out)]) == 0
    assert json.loads(out.read_text()) == PRESETS["fig1c"]


def test_schema_and_validation(capsys):
    assert main(["schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert "channel" in schema["required"]
    with pytest.raises(ConfigError):
        parse_config(small_config(channel="sideways"))
    with pytest.raises(ConfigError):
        parse_config(small_config(integrator={"steps_per_period": 4}))


def test_compare_report(tmp_path, capsys):
    cfg = small_config(integrator={"steps_per_period": 4096, "t_end": 100.0, "sample_stride": 512})
    out = tmp_path / "report.json"
    assert main(["compare", str(write(tmp_path, cfg)), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["pbar_unpaired"]["state"] == 7
    assert report["near_resonance"] is False
    assert report["quasienergies"]["max_residual"] < 5e-3
    assert set(report["max_deviation"]) == {"5", "7", "2"}


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "pairtunnel", "list-presets"], capture_output=True, text=True)
    assert res.returncode == 0 and "fig5" in res.stdout
