import csv
import io
import json
import math

import pytest

from ioncorr import cli, constants
from ioncorr.config import (
    format_frequency,
    load_config,
    parse_angle,
    parse_config,
    parse_frequency,
    to_document,
)
from ioncorr.errors import ConfigError, ConfigParseError
from ioncorr.output import ResultTable, format_cell, read_csv, table_to_csv
from ioncorr.runner import linear_fit, q_over_s2_model, zero_crossing

SMALL = {"N": 3, "s": 0.6, "ensemble": {"realizations": 300, "block_size": 32}}


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def run_cli(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# ----------------------------------------------------------------- units

@pytest.mark.parametrize(
    "text, expected",
    [
        ("1.1 MHz", 2 * math.pi * 1.1e6),
        ("2pi*1.1 MHz", 2 * math.pi * 1.1e6),
        ("2π·1.1 MHz", 2 * math.pi * 1.1e6),
        ("6.9e6 rad/s", 6.9e6),
        ("6.9 Mrad/s", 6.9e6),
        ("-20 MHz", -2 * math.pi * 20e6),
        ("500 kHz", 2 * math.pi * 5e5),
    ],
)
def test_parse_frequency(text, expected):
    assert parse_frequency(text) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("text", [1.1e6, "1.1", "1.1 furlongs", "2pi*3 rad/s", True])
def test_frequency_requires_unit(text):
    with pytest.raises(ConfigError):
        parse_frequency(text, "trap.axial_frequency")


def test_frequency_echo_round_trips():
    for x in (6911503.837897545, 1e-3, 2 * math.pi * 21.2e6):
        assert parse_frequency(format_frequency(x)) == x


def test_parse_angle():
    assert parse_angle("45 deg") == pytest.approx(math.pi / 4)
    assert parse_angle(0.5) == 0.5
    assert parse_angle("1 rad") == 1.0
    with pytest.raises(ConfigError):
        parse_angle("north")


# ------------------------------------------------------------- configs

def test_minimal_config_echo(tmp_path, capsys):
    path = write(tmp_path, "N: 18\ns: 0.6\ntrap:\n  axial_frequency: 1.1 MHz\n")
    code, out, _ = run_cli(["validate", path], capsys)
    assert code == 0
    echo = json.loads(out)
    assert echo["derived"]["linewidth_MHz_cyclic"] == pytest.approx(21.2)
    assert echo["derived"]["saturation"] == pytest.approx(0.6, rel=1e-14)
    assert echo["config"]["ensemble"]["realizations"] == constants.N_REALIZATIONS
    assert parse_config(echo["config"]) == load_config(path)


def test_n18_chain_length_reported(tmp_path, capsys):
    path = write(tmp_path, "N: 18\ns: 0.6\ntrap:\n  axial_frequency: 1.1 MHz\n")
    _, out, _ = run_cli(["validate", path], capsys)
    assert json.loads(out)["derived"]["chain_length_um"] == pytest.approx(34.08, abs=0.01)


@pytest.mark.xfail(strict=True, reason="34 um at 2pi x 1.1 MHz; 94 um needs about 2pi x 0.24 MHz; see decisions ledger")
def test_n18_chain_length_ninety_four_microns(tmp_path, capsys):
    path = write(tmp_path, "N: 18\ns: 0.6\ntrap:\n  axial_frequency: 1.1 MHz\n")
    _, out, _ = run_cli(["validate", path], capsys)
    assert json.loads(out)["derived"]["chain_length_um"] == pytest.approx(94, rel=0.05)


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"N": 4, "s": 0.6, "drive": {"rabi_frequency": "10 MHz"}}, None),
        ({"N": 4, "s": 0.6, "trap": {"axial_freq": "1 MHz"}}, "trap.axial_freq"),
        ({"N": 4, "s": 0.6, "colour": "blue"}, "colour"),
        ({"N": 0, "s": 0.6}, "N"),
        ({"N": 4, "s": -0.1}, "s"),
        ({"N": 4, "s": 0.6, "trap": {"axial_frequency": 1e6}}, "trap.axial_frequency"),
        ({"N": 4, "s": 0.6, "sweep": {"parameter": "ion_number", "values": []}}, None),
        ({"N": 4, "s": 0.6, "ensemble": {"dark_probability": 1.5}}, None),
    ],
)
def test_invalid_configs(doc, field):
    with pytest.raises(ConfigError) as info:
        parse_config(doc)
    if field is not None:
        assert info.value.field == field


def test_overdetermined_drive_message():
    with pytest.raises(ConfigError, match="over-determined"):
        parse_config({"N": 4, "s": 0.6, "drive": {"rabi_frequency": "10 MHz"}})


def test_parse_error_position(tmp_path, capsys):
    path = write(tmp_path, "N: 4\ns: 0.6\ntrap: [1\n")
    with pytest.raises(ConfigParseError) as info:
        load_config(path)
    assert (info.value.line, info.value.column) == (4, 1)
    code, _, err = run_cli(["validate", path], capsys)
    payload = json.loads(err)
    assert code == 2 and payload["error"] == "parse" and payload["line"] == 4


def test_empty_sweep_fails_before_running(tmp_path, capsys):
    path = write(tmp_path, "N: 4\ns: 0.6\nsweep:\n  parameter: saturation\n  values: []\n")
    code, out, err = run_cli(["run", path, "--out-dir", tmp_path / "out"], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "validation"
    assert not (tmp_path / "out").exists() and out == ""


def test_missing_file_is_io_error(tmp_path, capsys):
    code, _, err = run_cli(["validate", tmp_path / "nope.yaml"], capsys)
    assert code == 4 and json.loads(err)["error"] == "io"


def test_document_round_trip_is_exact():
    cfg = parse_config({**SMALL, "drive": {"detuning": "-12 MHz"}, "tau": {"stop_ns": 50}})
    assert parse_config(json.loads(json.dumps(to_document(cfg)))) == cfg


# ----------------------------------------------------------------- runs

def test_run_writes_table_and_manifest(tmp_path, capsys):
    import yaml

    path = write(tmp_path, yaml.safe_dump({**SMALL, "tau": {"stop_linewidths": 10, "points": 11}}))
    out_dir = tmp_path / "out"
    code, out, _ = run_cli(["run", path, "--out-dir", out_dir, "--gnuplot"], capsys)
    assert code == 0
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == ["run.csv", "run.gp", "run.manifest.json", "run_tau.csv", "run_tau.gp"]
    header, rows = read_csv(out_dir / "run.csv")
    assert len(rows) == 1 and "g2_zero" in header and "mandel_q" in header
    tau_header, tau_rows = read_csv(out_dir / "run_tau.csv")
    assert tau_header == ["tau_s", "tau_linewidths", "g2"] and len(tau_rows) == 11
    assert "plot 'run.csv'" in (out_dir / "run.gp").read_text()


def test_manifest_rerun_is_bit_identical_across_threads(tmp_path, capsys):
    import yaml

    doc = {**SMALL, "sweep": {"parameter": "axial_frequency", "start": "0.9 MHz", "stop": "1.1 MHz", "num": 4}}
    path = write(tmp_path, yaml.safe_dump(doc))
    run_cli(["run", path, "--out-dir", tmp_path / "a"], capsys)
    first = (tmp_path / "a" / "run.csv").read_bytes()
    for threads in (4, 8):
        out = tmp_path / f"t{threads}"
        code, _, _ = run_cli(["run", tmp_path / "a" / "run.manifest.json", "--threads", threads, "--out-dir", out], capsys)
        assert code == 0
        assert (out / "run.csv").read_bytes() == first


def test_seed_override_changes_result(tmp_path, capsys):
    import yaml

    path = write(tmp_path, yaml.safe_dump(SMALL))
    run_cli(["run", path, "--out-dir", tmp_path / "a"], capsys)
    run_cli(["run", path, "--out-dir", tmp_path / "b", "--seed", "5"], capsys)
    assert (tmp_path / "a" / "run.csv").read_bytes() != (tmp_path / "b" / "run.csv").read_bytes()


def test_out_dir_from_environment(tmp_path, capsys, monkeypatch):
    import yaml

    path = write(tmp_path, yaml.safe_dump(SMALL))
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path / "env"))
    code, _, _ = run_cli(["run", path], capsys)
    assert code == 0 and (tmp_path / "env" / "run.csv").exists()


def test_bad_thread_count(tmp_path, capsys):
    code, _, err = run_cli(["run", "x.yaml", "--threads", "0"], capsys)
    assert code == 2 and json.loads(err)["error"] == "validation"


def test_preset_fig2c_columns(tmp_path, capsys):
    code, _, _ = run_cli(["preset", "fig2c", "--realizations", "20", "--out-dir", tmp_path], capsys)
    assert code == 0
    header, rows = read_csv(tmp_path / "fig2c.csv")
    assert header[0] == "swept_axial_frequency_rad_s"
    assert {"mean_intensity", "g2_zero", "stderr_g2", "noise_free_g2"} <= set(header)
    assert len(rows) == 121


def test_preset_fig3a_columns_and_manifest_rerun(tmp_path, capsys):
    code, _, _ = run_cli(["preset", "fig3a", "--realizations", "10", "--out-dir", tmp_path / "a"], capsys)
    assert code == 0
    header, rows = read_csv(tmp_path / "a" / "fig3a.csv")
    assert {"s_setting", "swept_ion_number", "g2_constructive_asymptotic", "noise_free_g2"} <= set(header)
    assert len(rows) == 34
    code, _, _ = run_cli(["run", tmp_path / "a" / "fig3a.manifest.json", "--out-dir", tmp_path / "b"], capsys)
    assert code == 0
    assert (tmp_path / "b" / "fig3a.csv").read_bytes() == (tmp_path / "a" / "fig3a.csv").read_bytes()


# ------------------------------------------------------------------ CSV

def test_csv_full_precision_and_rfc4180():
    t = ResultTable(["x", "label"], metadata={"seed": 3})
    t.add([0.1 + 0.2, 'a "quoted", value'])
    t.add([math.nan, None])
    text = table_to_csv(t)
    assert text.startswith("# seed: 3\r\n")
    body = [ln for ln in text.split("\r\n") if ln and not ln.startswith("#")]
    rows = list(csv.reader(io.StringIO("\r\n".join(body))))
    assert float(rows[1][0]) == 0.1 + 0.2
    assert rows[1][1] == 'a "quoted", value'
    assert rows[2] == ["nan", ""]


def test_format_cell_types():
    import numpy as np

    assert format_cell(np.float64(1 / 3)) == repr(1 / 3)
    assert format_cell(True) == "true"
    assert format_cell(-math.inf) == "-inf"
    assert format_cell(np.int64(7)) == "7"


def test_row_length_checked():
    with pytest.raises(ValueError):
        ResultTable(["a", "b"]).add([1])


# ---------------------------------------------------- analytic Q/s^2 model

def test_q_over_s2_model_is_linear_with_crossing():
    for s in (0.6, 1.2):
        n = list(range(2, 10))
        slope, intercept, r2 = linear_fit(n, q_over_s2_model(n, s))
        assert r2 > 0.99
        assert -intercept / slope == pytest.approx(zero_crossing(s), rel=1e-9)
    assert zero_crossing(0.6) > zero_crossing(1.2)
