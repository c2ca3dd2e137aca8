import json
import math
from pathlib import Path

import pytest

from psqueue.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_PARAMETER, OUTPUT_DIR_ENV, main

GOLDEN = Path(__file__).parent / "golden"

# computed fields are pinned by name and position only, marked "*" in the golden files
PINNED_RUNS = {
    "delta": ["delta", "--rho", "0.5", "--jmax", "4"],
    "compare": ["compare", "--rho", "0.5", "--jmax", "4"],
    "simulate": ["simulate", "--rho", "0.5", "--reps", "2000", "--seed", "3"],
}


def test_btilde_to_stdout(capsys):
    assert main(["btilde", "--rho", "0.5", "--jmax", "5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("# schema=1\n")
    assert "j,p_b,p_btilde,btilde_asymptote\n" in out
    assert len(out.splitlines()) == 8 + 1 + 6


def test_output_is_byte_identical(capsys):
    argv = ["delta", "--rho", "0.2", "--jmax", "6", "--format", "json"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first
    assert json.loads(first)["meta"]["table"] == "delta"


def test_simulate_ignores_worker_count(capsys):
    main(["simulate", "--rho", "0.5", "--reps", "300", "--block-size", "100"])
    serial = capsys.readouterr().out
    main(["simulate", "--rho", "0.5", "--reps", "300", "--block-size", "100", "--workers", "2"])
    assert capsys.readouterr().out == serial


def test_output_directory(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    assert main(["compare", "--rho", "0.5", "--jmax", "4", "--output", "compare.csv"]) == EXIT_OK
    assert capsys.readouterr().out == ""
    written = (tmp_path / "compare.csv").read_text()
    main(["compare", "--rho", "0.5", "--jmax", "4"])
    assert capsys.readouterr().out == written


ARGV_ERRORS = [["delta", "--rho", "1.2"], ["btilde", "--rho", "0"], ["validate", "--checks", "nope"]]


@pytest.mark.parametrize("argv", ARGV_ERRORS)
def test_parameter_errors_exit_with_two(argv, caplog):
    assert main(argv) == EXIT_PARAMETER
    assert "ParameterError" in caplog.text


def test_numerical_failure_exits_with_three(caplog):
    assert main(["btilde", "--rho", "0.5", "--k-cap", "8"]) == EXIT_NUMERICAL
    assert "TruncationError" in caplog.text


def test_usage_errors_come_from_argparse():
    with pytest.raises(SystemExit) as info:
        main(["delta"])
    assert info.value.code == 2


def test_validate_subset(capsys):
    assert main(["validate", "--rho", "0.5", "--checks", "busy_period", "--quick"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS rho=0.5 ") for line in lines)


def test_validate_json(capsys):
    main(["validate", "--rho", "0.2", "--checks", "closed_forms", "--format", "json"])
    payload = json.loads(capsys.readouterr().out)
    names = {c["name"] for c in payload["checks"]}
    assert names == {"stationary_nu_geometric", "normalization_identity", "kappa_gen_at_one"}


def _matches(actual, expected) -> bool:
    if expected != "*":
        return actual == expected
    value = float(actual) if isinstance(actual, str) else actual
    return isinstance(value, (int, float)) and math.isfinite(value)


@pytest.mark.parametrize("command", PINNED_RUNS)
def test_csv_header_matches_golden(command, capsys):
    assert main(PINNED_RUNS[command]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    golden = (GOLDEN / f"{command}.csv").read_text().splitlines()
    header = lines[: len(golden)]
    assert [line.split("=")[0] for line in header] == [line.split("=")[0] for line in golden]
    for line, expected in zip(header, golden):
        if "=" in expected:
            assert _matches(line.split("=", 1)[1], expected.split("=", 1)[1]), line
        else:
            assert line == expected
    assert not lines[len(golden)].startswith("#")


@pytest.mark.parametrize("command", PINNED_RUNS)
def test_json_header_matches_golden(command, capsys):
    assert main([*PINNED_RUNS[command], "--format", "json"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    golden = json.loads((GOLDEN / f"{command}.json").read_text())
    assert list(payload["meta"]) == list(golden["meta"])
    for key, expected in golden["meta"].items():
        assert _matches(payload["meta"][key], expected), key
    assert payload["columns"] == golden["columns"]
    assert all(len(row) == len(golden["columns"]) for row in payload["rows"])
