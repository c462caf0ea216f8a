import subprocess
import sys

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from fanetsim import cli, experiments
from fanetsim.cli import ConfigError, main, parse_int_list, parse_scenario, read_config
from fanetsim.metrics import read_table
from fanetsim.scenario import Scenario

FAST = ["--sim-time", "15", "--nodes", "6"]


def test_defaults_are_the_table_one_scenario():
    sc = parse_scenario(env={})
    assert sc == Scenario()
    assert (sc.node_count, sc.arena, sc.packet_size, sc.max_cbr_connections) == (20, (800.0, 800.0, 200.0), 256, 200)
    assert (sc.mobility, sc.sim_time) == ("random-waypoint", 210.0)


def test_invalid_values_are_all_reported():
    with pytest.raises(ConfigError) as info:
        parse_scenario(flags={"node_count": "0", "sim_time": "-1", "speed": "fast", "bogus": "1"}, env={})
    text = " ".join(info.value.errors)
    for name in ("node_count", "sim_time", "speed", "bogus"):
        assert name in text


def test_flag_beats_file(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("# scenario\nspeed = 15\nabc_params.colony_size = 8  # nested\n")
    sc = parse_scenario(str(cfg), {"speed": "25"}, env={})
    assert sc.speed == 25.0 and sc.abc_params.colony_size == 8
    assert parse_scenario(str(cfg), env={}).speed == 15.0


def test_config_syntax_error_names_the_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("speed = 5\nnot a setting\n")
    with pytest.raises(ConfigError, match="bad.cfg:2"):
        read_config(cfg)


def test_seed_environment_is_the_weakest_source(tmp_path):
    assert parse_scenario(env={"HIROL_SEED": "42"}).seed == 42
    cfg = tmp_path / "s.cfg"
    cfg.write_text("seed = 7\n")
    assert parse_scenario(str(cfg), env={"HIROL_SEED": "42"}).seed == 7
    assert parse_scenario(str(cfg), {"seed": "9"}, env={"HIROL_SEED": "42"}).seed == 9


KEYS = {"speed": ["5", "10", "30"], "node_count": ["4", "12", "30"], "sim_time": ["50", "100", "300"],
        "packet_size": ["64", "512", "1024"], "radio_range": ["100", "200", "300"]}


@settings(max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.dictionaries(st.sampled_from(sorted(KEYS)), st.integers(0, 2)),
       st.dictionaries(st.sampled_from(sorted(KEYS)), st.integers(0, 2)))
def test_precedence_over_random_key_subsets(tmp_path, in_file, in_flags):
    cfg = tmp_path / "p.cfg"
    cfg.write_text("".join(f"{k} = {KEYS[k][i]}\n" for k, i in in_file.items()))
    sc = parse_scenario(str(cfg), {k: KEYS[k][i] for k, i in in_flags.items()}, env={})
    default = Scenario()
    for k in KEYS:
        if k in in_flags:
            want = KEYS[k][in_flags[k]]
        elif k in in_file:
            want = KEYS[k][in_file[k]]
        else:
            want = None
        got = getattr(sc, k)
        assert got == (type(got)(float(want)) if want is not None else getattr(default, k))


def test_int_lists():
    assert parse_int_list("1,2,5-7") == [1, 2, 5, 6, 7]
    assert parse_int_list("3") == [3]


def test_exit_codes(capsys):
    assert main(["run", *FAST, "--protocol", "olsr"]) == 0
    assert main(["run", "--nodes", "0"]) == 1
    assert "node_count" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        main(["run", "--protocol", "aodv"])
    assert e.value.code == 1


def test_runtime_failure_names_the_cell(monkeypatch, capsys):
    def boom(*a, **k):
        raise RuntimeError("injected")
    monkeypatch.setattr(experiments, "run_cell", boom)
    code = main(["sweep", *FAST, "--protocols", "dsr", "--speeds", "10", "--seeds", "3", "--out", "/tmp/x"])
    assert code == 2
    err = capsys.readouterr().err
    assert "protocol=dsr" in err and "speed=10" in err and "seed=3" in err


def test_sweep_rows_and_byte_identical_repeat(tmp_path):
    args = ["sweep", *FAST, "--protocols", "olsr,dsr", "--speeds", "5,10", "--seeds", "1,2",
            "--set", "hirol_params.use_ann=false"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    for name in ("pdr.csv", "delay.csv", "throughput.csv", "runs.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header, rows = read_table(tmp_path / "a" / "pdr.csv")
    assert header == ["Speed", "OLSR", "DSR"] and len(rows) == 2 + 1
    _, runs = read_table(tmp_path / "a" / "runs.csv")
    assert len(runs) == 2 * 2 * 2


def test_minimal_sweep_has_one_data_row(tmp_path):
    assert main(["sweep", *FAST, "--protocols", "hirol", "--speeds", "20", "--seeds", "1",
                 "--set", "hirol_params.use_ann=false", "--out", str(tmp_path)]) == 0
    _, rows = read_table(tmp_path / "pdr.csv")
    assert len(rows) == 2 and rows[-1][0] == "Average PDR"


def test_train_ann_writes_loadable_weights(tmp_path, capsys):
    out = tmp_path / "w.txt"
    assert main(["train-ann", "--out", str(out)]) == 0
    assert "holdout" in capsys.readouterr().out
    assert main(["run", *FAST, "--ann-weights", str(out)]) == 0
    assert main(["run", *FAST, "--ann-weights", str(tmp_path / "missing.txt")]) == 1


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "fanetsim", "run", *FAST, "--protocol", "dsr"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and "dsr speed=20" in p.stdout
