import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from osclab import cli
from osclab.config import COMMANDS, ExperimentConfig, config_to_text, load_config, parse_config
from osclab.errors import ConfigError
from osclab.orders import FLAT

FRACS = st.fractions(1, 2, max_denominator=9)


@st.composite
def configs(draw):
    j_min = draw(st.integers(4, 12))
    return ExperimentConfig(
        command=draw(st.sampled_from(COMMANDS)),
        phase=draw(st.sampled_from(["fold_m3_n8", "power_n2", "file:/tmp/x.txt"])),
        output_dir=draw(st.sampled_from(["out", "runs/a b"])),
        emit_plots=draw(st.booleans()),
        workers=draw(st.integers(1, 8)),
        p_grid=tuple(draw(st.lists(FRACS, min_size=1, max_size=5))),
        j_min=j_min,
        j_max=draw(st.integers(j_min, 20)),
        z_box=draw(st.floats(1e-3, 1.0)),
        deltas=tuple(draw(st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=3))),
        q=draw(st.one_of(st.none(), st.floats(1.0, 10.0))),
        m=draw(st.sampled_from([None, 2, 3, FLAT])),
        n=draw(st.sampled_from([None, 4, 8, FLAT])),
        r_condition=draw(st.booleans()),
        case=draw(st.sampled_from(["case_i", "case_ii", "remark_nonadapted"])),
        p=draw(FRACS),
        k_offsets=tuple(draw(st.lists(st.fractions(-1, 1, max_denominator=8), min_size=1, max_size=3))),
        vdc_order=draw(st.integers(2, 8)),
    )


@settings(max_examples=60)
@given(configs())
def test_config_round_trip(cfg):
    assert parse_config(config_to_text(cfg)) == cfg


def test_config_echo_without_runtime_settings():
    cfg = ExperimentConfig("decay", "power_n3", output_dir="elsewhere", workers=4)
    text = config_to_text(cfg, runtime=False)
    assert "workers" not in text and "output_dir" not in text
    again = parse_config(text)
    assert again == ExperimentConfig("decay", "power_n3")


def test_minimal_config_uses_defaults():
    cfg = parse_config("[experiment]\ncommand = vdc\n")
    assert cfg.js == list(range(6, 15))
    assert cfg.p_grid == (1, F(8, 7), F(3, 2), 2)
    assert cfg.z_box == 0.125 and cfg.deltas == (0.05, 0.1, 0.2)


@pytest.mark.parametrize(
    "text",
    [
        "[experiment]\ncommand = fly\n",
        "[experiment]\nphase = x\n",
        "[experiment]\ncommand = decay\n",
        "[experiment]\ncommand = vdc\n[extra]\na = 1\n",
        "[experiment]\ncommand = vdc\ncolour = red\n",
        "[experiment]\ncommand = vdc\nworkers = two\n",
        "[experiment]\ncommand = vdc\nworkers = 0\n",
        "[experiment]\ncommand = vdc\n[grid]\nj_min = 9\nj_max = 8\n",
        "[experiment]\ncommand = vdc\n[grid]\np_grid = 1, 3\n",
        "[experiment]\ncommand = vdc\n[grid]\ndeltas = 0.1, -1\n",
        "[experiment]\ncommand = exponent\n[exponent]\nm = 3\n",
        "[experiment]\ncommand = exponent\n[exponent]\nm = x\nn = 3\n",
        "[experiment]\ncommand = vdc\n[vdc]\norder = 1\n",
        "[experiment]\ncommand = vdc\nemit_plots = maybe\n",
        "not an ini file",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.ini")


def _summary(path):
    return json.loads((path / "summary.json").read_text())


def test_cli_classify(tmp_path):
    assert cli.main(["classify", "fold_m3_n8", "--out", str(tmp_path)]) == cli.EXIT_OK
    s = _summary(tmp_path)
    assert s["schema"] == "osclab.summary v1"
    assert s["profile"]["m"] == "3" and s["profile"]["n"] == "8"
    assert (tmp_path / "profile.json").exists()


def test_cli_exponent_from_orders(tmp_path):
    rc = cli.main(["exponent", "--m", "3", "--n", "flat", "--out", str(tmp_path)])
    assert rc == cli.EXIT_OK
    rows = (tmp_path / "exponent.csv").read_text().splitlines()[2:]
    assert [r.split(",")[1] for r in rows] == ["5/2", "7/4", "7/9", "0"]
    assert _summary(tmp_path)["crossover"] == "8/7"


def test_cli_phase_file(tmp_path):
    src = tmp_path / "phase.txt"
    src.write_text("# name: mine\n0 2 1 1\n3 0 1 1\n")
    out = tmp_path / "o"
    assert cli.main(["classify", f"file:{src}", "--out", str(out)]) == cli.EXIT_OK
    assert _summary(out)["profile"]["n"] == "3"


def test_cli_run_config(tmp_path):
    ini = tmp_path / "exp.ini"
    ini.write_text("[experiment]\ncommand = vdc\n[grid]\nj_min = 6\nj_max = 10\n[vdc]\norder = 4\n")
    out = tmp_path / "o"
    assert cli.main(["run", str(ini), "--out", str(out)]) == cli.EXIT_OK
    assert _summary(out)["vdc"]["order"] == 4
    assert parse_config((out / "config.ini").read_text()).vdc_order == 4


def test_cli_failed_check(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "VDC_SPREAD", 0.5)
    assert cli.main(["vdc", "--out", str(tmp_path)]) == cli.EXIT_CHECKS
    assert _summary(tmp_path)["passed"] is False


@pytest.mark.parametrize(
    "argv, code",
    [
        (["decay"], cli.EXIT_CONFIG),
        (["frobnicate"], cli.EXIT_CONFIG),
        (["vdc", "--j-min", "3"], cli.EXIT_CONFIG),
        (["run", "/nonexistent.ini"], cli.EXIT_CONFIG),
        (["classify", "no_such_phase"], cli.EXIT_PHASE),
        (["sharpness", "power_n2", "--j-min", "6", "--j-max", "8"], cli.EXIT_NUMERIC),
    ],
)
def test_cli_exit_codes(argv, code, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == code


def test_cli_corpus_listing(capsys):
    assert cli.main(["corpus"]) == cli.EXIT_OK
    assert "fold_m3_n8" in capsys.readouterr().out


def test_cli_outputs_independent_of_workers_and_directory(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["sharpness", "power_n2", "--plots", "--out", str(a), "--workers", "1"])
    cli.main(["sharpness", "power_n2", "--plots", "--out", str(b), "--workers", "3"])
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert "sharpness_1.svg" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
