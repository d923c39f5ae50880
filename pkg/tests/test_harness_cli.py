import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from wavop import harness
from wavop.__main__ import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_print_schema(capsys):
    assert main(["print-schema"]) == 0
    schema = yaml.safe_load(capsys.readouterr().out)
    assert schema["schema_version"] == harness.SCHEMA_VERSION
    assert schema["fields"]["seed"]["required"] is True
    assert main(["--print-schema"]) == 0


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path, capsys):
    code = main(["validate", "--config", str(path)])
    if path.stem == "kernel_inadmissible":
        assert code == 0  # admissibility is checked when the kernel is built
    else:
        assert code == 0, capsys.readouterr().err


@pytest.mark.parametrize("text,field", [
    ("kind: series\ndimension: 1\n", "seed"),
    ("kind: series\nseed: 1\ncolour: red\n", "colour"),
    ("kind: teleport\nseed: 1\n", "kind"),
    ("kind: series\nseed: 1\nwindow: {j_min: 3, j_max: 1}\n", "window"),
    ("kind: transform\nseed: 1\ngrid: {points: 1000}\n", "grid"),
    ("kind: transform\nseed: 1\nmeasure: {density: {type: plasma}}\n", "measure"),
    ("kind: series\nseed: x\n", "seed"),
])
def test_config_errors_name_the_field(tmp_path, capsys, text, field):
    assert main(["validate", "--config", write(tmp_path, text)]) == 2
    assert field in capsys.readouterr().err


def test_config_error_reports_line(tmp_path):
    text = "kind: series\nseed: 1\n\nseries:\n  epsilon: nope\n"
    with pytest.raises(harness.ConfigError) as info:
        harness.run(harness.load_config(write(tmp_path, text)), tmp_path / "out")
    assert info.value.line == 5 and info.value.path == "series.epsilon"


def test_invalid_yaml_and_missing_file(tmp_path, capsys):
    assert main(["validate", "--config", write(tmp_path, "kind: [series\n")]) == 2
    assert main(["validate", "--config", str(tmp_path / "absent.yaml")]) == 2


def test_seed_and_mode_overrides(tmp_path):
    cfg = harness.load_config(str(CONFIGS / "series_1d.yaml"), seed_override=99, mode_override="direct")
    assert cfg.seed == 99 and cfg.get("mode") == "direct"


def test_run_writes_summary_and_timing(tmp_path, capsys):
    out = tmp_path / "series"
    assert main(["run", "--config", str(CONFIGS / "series_1d.yaml"), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] is True
    assert {c["name"] for c in summary["criteria"]} >= {"limit_below_bound", "limit_matches_zeta"}
    assert "timestamp" in json.loads((out / "timing.json").read_text())
    assert "timestamp" not in (out / "summary.json").read_text()
    assert "PASS limit_matches_zeta" in capsys.readouterr().out


TRANSFORM = """kind: transform
seed: {seed}
grid: {{half_width: 32.0, points: 4096}}
window: {{j_min: {lo}, j_max: {hi}, k_max: 64}}
samples: 2
"""


def test_failed_criterion_gives_exit_one(tmp_path, capsys):
    path = write(tmp_path, TRANSFORM.format(seed=1, lo=0, hi=0))
    assert main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 1
    captured = capsys.readouterr()
    assert "FAIL identity_recovery" in captured.out
    assert "identity_recovery" in captured.err


def test_summaries_are_byte_identical_across_reruns(tmp_path):
    path = write(tmp_path, TRANSFORM.format(seed=3, lo=-3, hi=3))
    for name in ("a", "b"):
        assert main(["run", "--config", path, "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "summary.json").read_bytes()
    assert a == (tmp_path / "b" / "summary.json").read_bytes()
    assert (tmp_path / "a" / "operator.csv").read_bytes() == (tmp_path / "b" / "operator.csv").read_bytes()
    assert main(["run", "--config", path, "--seed", "4", "--out", str(tmp_path / "c")]) == 0
    assert a != (tmp_path / "c" / "summary.json").read_bytes()


def test_compare_paths(tmp_path, capsys):
    out = tmp_path / "cmp"
    assert main(["compare-paths", "--config", str(CONFIGS / "compare_gaussian.yaml"),
                 "--out", str(out)]) == 0
    timing = json.loads((out / "timing.json").read_text())
    assert timing["direct_seconds"] > 0
    big = write(tmp_path, "kind: transform\nseed: 1\ngrid: {points: 4096}\n")
    assert main(["compare-paths", "--config", big]) == 2


def test_inadmissible_measure_exit_status(tmp_path, capsys):
    assert main(["run", "--config", str(CONFIGS / "kernel_inadmissible.yaml"),
                 "--out", str(tmp_path / "x")]) == 2
    assert "inadmissible" in capsys.readouterr().err


def test_small_grid_is_a_config_error(tmp_path, capsys):
    text = ("kind: transform\nseed: 1\ngrid: {half_width: 4.0, points: 512}\n"
            "measure: {density: {type: gaussian, sigma: 2.0}}\nwindow: {j_min: 0, j_max: 2, k_max: 8}\n")
    assert main(["run", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 2
    assert "grid" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "wavop", "validate", "--config",
                           str(CONFIGS / "series_2d.yaml")], capture_output=True, text=True)
    assert proc.returncode == 0 and "series" in proc.stdout
