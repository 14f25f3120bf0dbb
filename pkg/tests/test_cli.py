from __future__ import annotations

import json

import pytest

from thetacf.cli import build_parser, main
from thetacf.config import RunConfig
from thetacf.const import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE
from thetacf.report import read_meta


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _summary(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if line.startswith("# summary."):
            key, _, value = line[len("# summary."):].partition("=")
            out[key] = value
    return out


def _rows(text: str) -> list[list[str]]:
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return [line.split(",") for line in lines[1:]]


def test_expand_first_digit_and_remainder(capsys):
    code, out, _ = _run(capsys, ["expand", "--m", "4", "--x", "3/10", "--n", "5"])
    assert code == EXIT_OK
    summary = _summary(out)
    assert summary["remainder_1"] == "1/3"
    assert json.loads(summary["digits"])[0] == 6
    assert _rows(out)[0][1] == "6"


def test_expand_theta_terminates(capsys):
    code, out, _ = _run(capsys, ["expand", "--m", "4", "--x", "1/2", "--n", "5"])
    assert code == EXIT_OK
    summary = _summary(out)
    assert json.loads(summary["digits"]) == [4]
    assert summary["terminated"] == "True"
    assert summary["ends_in_m"] == "True"


def test_expand_zero(capsys):
    code, out, _ = _run(capsys, ["expand", "--m", "1", "--x", "0/1", "--n", "5"])
    assert code == EXIT_OK
    summary = _summary(out)
    assert json.loads(summary["digits"]) == []
    assert summary["terminated"] == "True"
    assert _rows(out) == []


def test_expand_json(capsys):
    code, out, _ = _run(capsys, ["expand", "--m", "2", "--x", "1/3", "--n", "4", "--format", "json"])
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["meta"]["command"] == "expand"
    assert len(payload["rows"]) == 4
    assert payload["summary"]["terminated"] is False


@pytest.mark.parametrize(
    "argv",
    [
        ["expand", "--m", "2", "--x", "1"],
        ["expand", "--m", "2", "--x", "1/2+sqrt(3)"],
        ["expand", "--m", "2", "--x", "one half"],
        ["gk", "--m", "0"],
        ["chain", "--m", "2", "--start", "9/10"],
    ],
)
def test_domain_errors_exit_3(capsys, argv):
    code, out, err = _run(capsys, argv)
    assert code == EXIT_DOMAIN
    assert out == ""
    assert err.startswith("thetacf ")


@pytest.mark.parametrize("argv", [["expand", "--x", "1/2"], ["plot", "--m", "1"], ["gk", "--m", "1", "--grid", "8"]])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == EXIT_USAGE


def test_invalid_output_leaves_no_file(tmp_path, capsys):
    target = tmp_path / "bad.csv"
    code, _, _ = _run(capsys, ["expand", "--m", "2", "--x", "5/4", "--out", str(target)])
    assert code == EXIT_DOMAIN
    assert not target.exists()


def test_gk_output_is_byte_identical(tmp_path, capsys):
    path = tmp_path / "gk.csv"
    outputs = []
    for _ in range(2):
        argv = ["gk", "--m", "1", "--n-max", "12", "--samples", "100000", "--seed", "7", "--x-grid", "11",
                "--out", str(path)]
        assert _run(capsys, argv)[0] == EXIT_OK
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]


def test_gk_threads_change_only_the_threads_line(capsys):
    outputs = []
    for threads in ("1", "3"):
        argv = ["gk", "--m", "2", "--n-max", "4", "--samples", "140000", "--seed", "7", "--x-grid", "5",
                "--threads", threads]
        code, out, _ = _run(capsys, argv)
        assert code == EXIT_OK
        outputs.append(out.splitlines())
    single, pooled = outputs
    assert len(single) == len(pooled)
    differing = [(a, b) for a, b in zip(single, pooled) if a != b]
    assert differing == [("# threads=1", "# threads=3")]


def test_metadata_round_trips_to_config(tmp_path, capsys):
    path = tmp_path / "digits.json"
    argv = ["digits", "--m", "3", "--samples", "10000", "--n", "4", "--seed", "12", "--format", "json", "--out",
            str(path)]
    assert _run(capsys, argv)[0] == EXIT_OK
    meta = read_meta(path.read_text(), "json")
    expected = RunConfig.build(
        "digits", {"m": 3, "samples": 10000, "n": 4, "seed": 12, "format": "json", "out": str(path)}
    )
    assert RunConfig.from_meta(meta) == expected


def test_chain_forced_digit_converges(capsys):
    code, out, _ = _run(capsys, ["chain", "--m", "1", "--start", "0", "--steps", "20", "--seed", "1",
                                 "--force-digit", "m"])
    assert code == EXIT_OK
    rows = _rows(out)
    assert len(rows) == 21
    assert all(row[1] in ("", "1") for row in rows)
    assert float(rows[-1][2]) == pytest.approx(0.6180339887, abs=1e-8)


def test_operator_fixed_point_check(capsys):
    argv = ["operator", "--m", "1", "--grid", "2048", "--n-max", "6", "--x-grid", "5", "--fixed-point-check"]
    code, out, err = _run(capsys, argv)
    assert code == EXIT_OK
    line = next(line for line in err.splitlines() if line.startswith("fixed_point_residual="))
    residual = float(line.split()[0].partition("=")[2])
    assert residual <= 1e-8
    assert float(_summary(out)["fixed_point_density"]) <= 1e-8


def test_extension_sweep(capsys):
    code, out, _ = _run(capsys, ["extension", "--m", "2", "--depth", "2", "--max-excess", "3"])
    assert code == EXIT_OK
    rows = _rows(out)
    assert [row[0] for row in rows] == ["1", "2"]
    assert all(float(row[2]) <= 1e-12 for row in rows)


def test_levy_reports_integrals(capsys):
    code, out, _ = _run(capsys, ["levy", "--m", "1", "--samples", "100", "--n", "200", "--seed", "3"])
    assert code == EXIT_OK
    row = _rows(out)[0]
    assert float(row[0]) > 0
    assert float(row[3]) < 0 < float(row[4])
    assert _summary(out)["integral_printed_sign"] == "negative"


def test_khinchin_checkpoints(capsys):
    code, out, _ = _run(capsys, ["khinchin", "--m", "2", "--samples", "20", "--checkpoints", "10,50"])
    assert code == EXIT_OK
    assert [row[0] for row in _rows(out)] == ["10", "50"]


def test_parser_lists_every_command():
    parser = build_parser()
    help_text = parser.format_help()
    for command in ("expand", "gk", "chain", "operator", "levy", "extension", "khinchin", "digits"):
        assert command in help_text
