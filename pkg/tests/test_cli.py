"""CLI behavior: reports, exit codes, config validation."""

import csv
import json
import subprocess
import sys

import pytest

from cartanflat.cli import main
from cartanflat.presets import PRESET_NAMES


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    report = json.loads(out.out) if out.out.strip().startswith("{") else None
    return code, report, out.err


def _stable(text: str) -> str:
    return "\n".join(line for line in text.splitlines() if "wall_time_s" not in line)


def test_flatness_pass(capsys):
    code, report, _ = _run(
        capsys, "flatness", "--preset", "half_plane", "--variant", "h", "--grid", "10"
    )
    assert code == 0
    assert report["pass"] is True
    assert report["max_residual"] <= 1e-9
    assert report["points"] == 100
    assert report["version"] == "cartanflat 0.1.0"
    assert report["command"] == "flatness"


def test_flatness_fail(capsys):
    code, report, _ = _run(
        capsys, "flatness", "--preset", "half_plane", "--variant", "s", "--grid", "10"
    )
    assert code == 1
    assert report["pass"] is False
    assert 1.9 <= report["max_residual"] <= 2.1


def test_flatness_tol_override(capsys):
    code, report, _ = _run(
        capsys,
        "flatness", "--preset", "half_plane", "--variant", "s", "--grid", "6", "--tol", "3.0",
    )
    assert code == 0
    assert report["pass"] is True


def test_reports_are_deterministic(capsys):
    argv = ["flatness", "--preset", "sphere2", "--variant", "s", "--grid", "7"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    second = capsys.readouterr().out
    assert _stable(first) == _stable(second)
    assert first.startswith("{")


def test_config_file_plus_override(tmp_path, capsys):
    config = tmp_path / "job.json"
    config.write_text(
        json.dumps({"preset": "half_plane", "variant": "s", "grid": 6, "tol": 1e-6})
    )
    code, report, _ = _run(capsys, "flatness", "--config", str(config), "--variant", "h")
    assert code == 0
    assert report["variant"] == "h"
    assert report["resolution"] == 6


def test_inline_metric_config(tmp_path, capsys):
    config = tmp_path / "job.json"
    config.write_text(
        json.dumps(
            {
                "metric": {
                    "names": ["x", "y"],
                    "box": [[-2.0, 2.0], [0.5, 4.0]],
                    "entries": [["1 / (y * y)", "0"], ["0", "1 / (y * y)"]],
                },
                "variant": "h",
                "grid": 6,
            }
        )
    )
    code, report, _ = _run(capsys, "flatness", "--config", str(config))
    assert code == 0
    assert report["pass"] is True
    assert report["metric"]["names"] == ["x", "y"]


@pytest.mark.parametrize(
    "config, path_fragment",
    [
        ({"preset": "half_plane", "metric": {}, "variant": "h"}, "$.preset"),
        ({"variant": "h"}, "$.preset"),
        ({"preset": "nosuch", "variant": "h"}, "$.preset"),
        ({"preset": "half_plane", "variant": "h", "gird": 5}, "$.gird"),
        ({"preset": "half_plane"}, "$.variant"),
        ({"preset": "half_plane", "variant": "h", "grid": 1}, "$.grid"),
        ({"preset": "half_plane", "variant": "h", "tol": -1.0}, "$.tol"),
        (
            {
                "metric": {"names": ["x", "y"], "box": [[0, 1], [1, 0]], "entries": [["1", "0"], ["0", "1"]]},
                "variant": "h",
            },
            "$.metric.box[1]",
        ),
        (
            {
                "metric": {"names": ["x", "y"], "box": [[0, 1], [0, 1]], "entries": [["1", "0"]]},
                "variant": "h",
            },
            "$.metric.entries",
        ),
        (
            {
                "metric": {"names": ["x", "y"], "box": [[0, 1], [0, 1]], "entries": [["1", "x"], ["0", "1"]]},
                "variant": "h",
            },
            "$.metric.entries",
        ),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, config, path_fragment):
    config_file = tmp_path / "job.json"
    config_file.write_text(json.dumps(config))
    code, report, err = _run(capsys, "flatness", "--config", str(config_file))
    assert code == 2
    assert report is None
    assert path_fragment in err


def test_unreadable_and_malformed_config(tmp_path, capsys):
    code, _, err = _run(capsys, "flatness", "--config", str(tmp_path / "missing.json"))
    assert code == 2 and "cannot read config file" in err
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    code, _, err = _run(capsys, "flatness", "--config", str(broken))
    assert code == 2 and "not valid JSON" in err


def test_presets_listing(capsys):
    code, report, _ = _run(capsys, "presets")
    assert code == 0
    assert report["pass"] is None
    names = [entry["name"] for entry in report["presets"]]
    assert names == list(PRESET_NAMES)


def test_curvature_with_preset_expectation(capsys):
    code, report, _ = _run(capsys, "curvature", "--preset", "sphere2", "--grid", "6")
    assert code == 0
    assert report["expected"] == 1.0
    assert report["max_residual"] <= 1e-9
    assert report["pass"] is True


def test_curvature_without_expectation_just_reports(capsys):
    code, report, _ = _run(capsys, "curvature", "--preset", "conformal_bump", "--grid", "5")
    assert code == 0
    assert report["pass"] is None
    assert report["min_curvature"] < report["max_curvature"]


def test_identity_and_compat_jobs(capsys):
    code, report, _ = _run(
        capsys,
        "identity", "--preset", "half_plane", "--variant", "h",
        "--grid", "3", "--trials", "3",
    )
    assert code == 0 and report["pass"] is True
    code, report, _ = _run(
        capsys, "compat", "--preset", "sphere2", "--variant", "s", "--grid", "4"
    )
    assert code == 0 and report["pass"] is True
    assert report["max_residual"] <= 1e-9


def test_transport_flat_loop_passes(tmp_path, capsys):
    config = tmp_path / "job.json"
    config.write_text(
        json.dumps(
            {
                "preset": "half_plane",
                "connection": "h",
                "curve": {"kind": "circle", "center": [0.0, 2.0], "radius": 0.5},
            }
        )
    )
    out = tmp_path / "trace.csv"
    code, report, _ = _run(capsys, "transport", "--config", str(config), "--out", str(out))
    assert code == 0
    assert report["closed"] is True
    assert report["identity_gap"] <= 1e-6
    with out.open() as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["t"] + [f"m{a}{b}" for a in range(3) for b in range(3)]
    assert len(rows) == report["steps"] + 2
    assert [float(v) for v in rows[1][1:]] == [1, 0, 0, 0, 1, 0, 0, 0, 1]


def test_transport_levi_civita_loop_detects_curvature(tmp_path, capsys):
    config = tmp_path / "job.json"
    config.write_text(
        json.dumps(
            {
                "preset": "half_plane",
                "connection": "lc",
                "curve": {"kind": "circle", "center": [0.0, 2.0], "radius": 0.5},
            }
        )
    )
    code, report, _ = _run(capsys, "transport", "--config", str(config))
    assert code == 1
    assert report["identity_gap"] >= 0.01


def test_transport_open_curve_has_no_pass_criterion(tmp_path, capsys):
    config = tmp_path / "job.json"
    config.write_text(
        json.dumps(
            {
                "preset": "half_plane",
                "curve": {"kind": "line", "start": [0.0, 1.0], "end": [1.0, 2.0]},
            }
        )
    )
    code, report, _ = _run(capsys, "transport", "--config", str(config))
    assert code == 0
    assert report["pass"] is None
    assert report["closed"] is False
    assert report["identity_gap"] is None


def test_transport_curve_validation(tmp_path, capsys):
    bad = {"preset": "half_plane", "curve": {"kind": "circle", "center": [0.0, 2.0]}}
    config = tmp_path / "job.json"
    config.write_text(json.dumps(bad))
    code, _, err = _run(capsys, "transport", "--config", str(config))
    assert code == 2 and "$.curve.radius" in err
    config.write_text(json.dumps({"preset": "half_plane"}))
    code, _, err = _run(capsys, "transport", "--config", str(config))
    assert code == 2 and "$.curve" in err


def test_develop_writes_trace_and_endpoint(tmp_path, capsys):
    config = tmp_path / "job.json"
    config.write_text(
        json.dumps(
            {
                "preset": "half_plane",
                "variant": "h",
                "path": [
                    {"start": [0.0, 1.0], "end": [0.5, 1.5]},
                    {"start": [0.5, 1.5], "end": [1.0, 2.5]},
                ],
            }
        )
    )
    out = tmp_path / "dev.csv"
    code, report, _ = _run(capsys, "develop", "--config", str(config), "--out", str(out))
    assert code == 0
    assert report["quadric_residual"] <= 1e-6
    # the half-plane point (1, 2.5) on the hyperboloid, frame axes first
    assert abs(report["end"][0] - 0.4) <= 1e-6
    assert abs(report["end"][1] - 1.25) <= 1e-6
    assert abs(report["end"][2] - 1.65) <= 1e-6
    with out.open() as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["node", "phi0", "phi1", "phi2"]
    assert len(rows) == report["nodes"] + 1
    assert [float(v) for v in rows[1][1:]] == [0.0, 0.0, 1.0]


def test_develop_rejects_broken_paths(tmp_path, capsys):
    config = tmp_path / "job.json"
    config.write_text(
        json.dumps(
            {
                "preset": "half_plane",
                "variant": "h",
                "path": [
                    {"start": [0.0, 1.0], "end": [0.5, 1.5]},
                    {"start": [0.6, 1.5], "end": [1.0, 2.5]},
                ],
            }
        )
    )
    code, _, err = _run(capsys, "develop", "--config", str(config))
    assert code == 2 and "$.path" in err and "join" in err


def test_zcr_kink_passes_and_nonsolution_fails(capsys):
    code, report, _ = _run(capsys, "zcr", "--grid", "9")
    assert code == 0
    assert report["pass"] is True
    assert report["u"] == "4 * atan(exp(x1 + x2))"
    assert report["max_zcr"] <= 1e-10
    code, report, _ = _run(capsys, "zcr", "--u", "x1 * x2", "--grid", "7")
    assert code == 1
    assert report["max_zcr"] > 0.1
    assert report["correlation"] is not None


def test_zcr_expression_errors_exit_2(capsys):
    code, _, err = _run(capsys, "zcr", "--u", "q * x1")
    assert code == 2 and "unknown identifier" in err


def test_out_stores_the_json_report(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, report, _ = _run(
        capsys,
        "flatness", "--preset", "sphere2", "--variant", "s",
        "--grid", "5", "--out", str(out),
    )
    assert code == 0
    stored = json.loads(out.read_text())
    assert stored == report


def test_bad_flag_values_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["flatness", "--preset", "half_plane", "--variant", "x"])
    assert info.value.code == 2


def test_module_entry_point():
    proc = subprocess.run(
        [
            sys.executable, "-m", "cartanflat.cli",
            "flatness", "--preset", "poincare_disk", "--variant", "h", "--grid", "5",
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["pass"] is True
