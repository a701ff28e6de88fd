"""Command-line client: argument parsing, artifact files, exit codes."""
import argparse
import json

import pytest

from settlesim import builtin_spec
from settlesim.cli import build_parser, main, parse_duration


def read_lines(path):
    return path.read_text().splitlines()


def test_parse_duration_units():
    assert parse_duration("9h") == 9 * 3600.0
    assert parse_duration("30min") == 1800.0
    assert parse_duration("120s") == 120.0
    assert parse_duration("1.5 hours") == 5400.0
    assert parse_duration("2m") == 120.0
    assert parse_duration("2.5") == 9000.0  # bare numbers mean hours
    with pytest.raises(argparse.ArgumentTypeError):
        parse_duration("soon")
    with pytest.raises(argparse.ArgumentTypeError):
        parse_duration("h")


def test_parser_rejects_bad_duration(capsys):
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args(["simulate", "--horizon", "soon"])
    assert excinfo.value.code == 2
    assert "cannot parse duration" in capsys.readouterr().err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0


def test_simulate_writes_artifacts(tmp_path, capsys):
    code = main(["simulate", "--scenario", "example1", "--cells", "12",
                 "--horizon", "10min", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "example1:" in out and "0 invariant violation(s)" in out

    profiles = read_lines(tmp_path / "profiles.csv")
    assert profiles[0] == "t_s,z_m,X_OHO,X_U,S_NO3,S_S,S_N2,X,W"
    # one block of 14 cells (12 interior + 2 pipes) per snapshot
    assert (len(profiles) - 1) % 14 == 0

    outputs = read_lines(tmp_path / "outputs.csv")
    assert outputs[0] == ("t_s,X_OHO_e,X_U_e,X_OHO_u,X_U_u,"
                          "S_NO3_e,S_S_e,S_N2_e,S_NO3_u,S_S_u,S_N2_u,"
                          "Q_f,Q_e,Q_u")
    first = outputs[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[-3]) == pytest.approx(0.125, rel=1e-12)

    report = json.loads((tmp_path / "report.json").read_text())
    assert report["scenario"] == "example1"
    assert report["report"]["violations"] == 0
    assert report["config"]["cells"] == 12


def test_simulate_reaction_override_changes_headers(tmp_path):
    main(["simulate", "--scenario", "example1", "--cells", "8", "--horizon",
          "60s", "--no-reactions", "--out", str(tmp_path)])
    assert read_lines(tmp_path / "profiles.csv")[0] == \
        "t_s,z_m,C1,C2,S1,S2,S3,X,W"


def test_csv_artifacts_are_deterministic(tmp_path):
    args = ["simulate", "--scenario", "example1", "--cells", "10",
            "--horizon", "5min", "--cadence", "60s"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    for name in ("profiles.csv", "outputs.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_unknown_scenario_exits_with_detail(tmp_path, capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["simulate", "--scenario", "examplex", "--cells", "8",
              "--horizon", "60s", "--out", str(tmp_path)])
    assert excinfo.value.code == 2
    err = capsys.readouterr().err
    assert "error (400)" in err and "example1" in err


def test_scenario_spec_file_round_trip(tmp_path, capsys):
    spec = builtin_spec("example1").model_copy(update={"name": "custom"})
    spec_path = tmp_path / "my_scenario.json"
    spec_path.write_text(spec.model_dump_json())
    code = main(["simulate", "--scenario", str(spec_path), "--cells", "8",
                 "--horizon", "60s", "--out", str(tmp_path)])
    assert code == 0
    assert "custom:" in capsys.readouterr().out


def test_converge_command(tmp_path, capsys):
    code = main(["converge", "--scenario", "example1", "--cells", "8,16",
                 "--times", "10min", "--reference", "32",
                 "--out", str(tmp_path)])
    assert code == 0
    lines = read_lines(tmp_path / "convergence.csv")
    assert lines[0].startswith("N,e_rel_") and lines[0].endswith(",cpu_s")
    assert len(lines) == 4  # two study grids + reference row
    assert lines[1].startswith("8,") and lines[3].startswith("32,")
    assert "N_ref = 32" in capsys.readouterr().out


def test_cfl_curve_command(tmp_path):
    assert main(["cfl-curve", "--scenario", "example1", "--cells", "16,32",
                 "--out", str(tmp_path)]) == 0
    lines = read_lines(tmp_path / "cfl_curve.csv")
    assert lines[0] == "N,dz_m,dt_cs_s,dt_xp_s"
    n, dz, dt_cs, dt_xp = lines[1].split(",")
    assert (n, dz) == ("16", "0.25")
    assert float(dt_cs) == pytest.approx(0.20077503233498947, rel=1e-9)
    assert float(dt_xp) > 0.0


def test_cfl_curve_blanks_xp_when_unsupported(tmp_path):
    assert main(["cfl-curve", "--scenario", "example2", "--cells", "10",
                 "--horizon", "60s", "--out", str(tmp_path)]) == 0
    row = read_lines(tmp_path / "cfl_curve.csv")[1]
    assert row.endswith(",")  # percentage-scheme column left empty


def test_compare_command(tmp_path, capsys):
    code = main(["compare-xp", "--scenario", "example1", "--cells", "12",
                 "--horizon", "10min", "--cadence", "5min",
                 "--out", str(tmp_path)])
    assert code == 0
    profiles = read_lines(tmp_path / "compare_profiles.csv")
    assert profiles[0].startswith("t_s,z_m,X_OHO_cs,X_OHO_xp")
    distances = read_lines(tmp_path / "compare_distances.csv")
    assert distances[0] == ("t_s,dist_X_OHO,dist_X_U,dist_S_NO3,"
                            "dist_S_S,dist_S_N2,dist_total")
    assert len(distances) == 3  # probe at 5 min plus the horizon
    assert "scheme distance" in capsys.readouterr().out
