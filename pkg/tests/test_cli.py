import csv
import json
import math

import pytest

from warpcone.cli.config import parse_config_text
from warpcone.cli.main import main
from warpcone.errors import ConfigError

TRIVIAL = """
[group]
kind = trivial
[action]
kind = trivial
[sweep]
t = 10
"""

SMALL_MEASURES = """
[sweep]
r = 2, 3
[experiment]
samples = 2000
tower_samples = 200, 800
[net]
eps_scale = 0.1
weight_samples = 50000
"""


def run(tmp_path, command, text=None, *extra):
    argv = [command, "--out", str(tmp_path / "out")]
    if text is not None:
        cfg = tmp_path / "cfg.ini"
        cfg.write_text(text)
        argv += ["--config", str(cfg)]
    return main(argv + list(extra))


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def header_lines(path):
    return {ln[2:].split(":", 1)[0] for ln in path.read_text().splitlines() if ln.startswith("# ")}


def test_trivial_action_level(tmp_path, capsys):
    assert run(tmp_path, "level", TRIVIAL) == 0
    doc = json.loads((tmp_path / "out" / "level.json").read_text())
    assert doc["max_abs_rho_minus_td"] <= 1e-6
    assert doc["connected"] in (True, False)
    assert {"config_hash", "config", "versions", "caps", "tolerances"} <= set(doc["header"])
    assert {"config_hash", "versions", "caps", "tolerances"} <= header_lines(tmp_path / "out" / "rho.csv")
    printed = json.loads(capsys.readouterr().out)
    assert "level.json" in printed["files"]


@pytest.mark.parametrize("text,key", [
    ("[net]\nepz = 0.1\n", "net.epz"),
    ("[sweep]\nt = ten\n", "sweep.t"),
    ("[experiment]\nseed = 1.5\n", "experiment.seed"),
    ("[bogus]\nx = 1\n", "bogus"),
])
def test_malformed_key_exit_2(tmp_path, capsys, text, key):
    assert run(tmp_path, "level", text) == 2
    rec = json.loads(capsys.readouterr().err.strip())
    assert rec["exit_code"] == 2
    assert rec["key"] == key


def test_missing_config_file(tmp_path, capsys):
    assert main(["level", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path)]) == 2


def test_bad_action_kind(tmp_path, capsys):
    assert run(tmp_path, "level", "[action]\nkind = shear\n") == 2
    assert json.loads(capsys.readouterr().err)["key"] == "action.kind"


def test_cap_exit_3(tmp_path, capsys):
    assert run(tmp_path, "level", "[caps]\nnet = 5\n") == 3
    assert json.loads(capsys.readouterr().err)["exit_code"] == 3


def test_rerun_byte_identical(tmp_path):
    text = "[sweep]\nt = 20\n[experiment]\nseed = 7\n"
    outs = []
    for k in range(2):
        sub = tmp_path / f"run{k}"
        sub.mkdir()
        assert run(sub, "level", text, "--plot-data") == 0
        outs.append({p.name: p.read_bytes() for p in sorted((sub / "out").iterdir())})
    assert outs[0] == outs[1]


def test_seed_flag_changes_hash(tmp_path):
    run(tmp_path, "level", TRIVIAL, "--seed", "3")
    h3 = json.loads((tmp_path / "out" / "level.json").read_text())["header"]["config_hash"]
    run(tmp_path, "level", TRIVIAL, "--seed", "4")
    h4 = json.loads((tmp_path / "out" / "level.json").read_text())["header"]["config_hash"]
    assert h3 != h4


def test_output_dir_precedence(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    cfg = tmp_path / "c.ini"
    cfg.write_text(TRIVIAL + "[output]\ndir = fromconfig\n")
    assert main(["level", "--config", str(cfg)]) == 0
    assert (tmp_path / "fromconfig" / "level.json").exists()
    monkeypatch.setenv("OUTPUT_DIR", str(tmp_path / "fromenv"))
    assert main(["level", "--config", str(cfg)]) == 0
    assert (tmp_path / "fromenv" / "level.json").exists()
    assert main(["level", "--config", str(cfg), "--out", str(tmp_path / "fromflag")]) == 0
    assert (tmp_path / "fromflag" / "level.json").exists()


def test_output_location_not_hashed():
    a = parse_config_text("[output]\ndir = a\n")
    b = parse_config_text("[output]\ndir = b\n")
    assert a.digest() == b.digest()
    assert a.digest() != parse_config_text("[experiment]\nseed = 9\n").digest()


def test_config_error_names_key():
    with pytest.raises(ConfigError) as info:
        parse_config_text("[caps]\nmaps = many\n")
    assert info.value.key == "caps.maps"


def test_trivsweep_trivial_group(tmp_path):
    text = "[group]\nkind = trivial\n[action]\nkind = trivial\n[sweep]\nt = 10, 20\nr = 1, 2\n"
    assert run(tmp_path, "trivsweep", text, "--plot-data") == 0
    rows = read_csv(tmp_path / "out" / "trivsweep.csv")
    assert len(rows) == 4
    for row in rows:
        d = float(row["defect"])
        assert math.isfinite(d)
        assert d <= 2 * float(row["t"]) * float(row["mesh"]) + 1e-12
    assert (tmp_path / "out" / "trivsweep_r1.dat").exists()


def test_trivsweep_rational_rotation(tmp_path):
    text = "[action]\nkind = rotation\nangles = 0.25\n[sweep]\nt = 10, 20\nr = 4, 5\n"
    assert run(tmp_path, "trivsweep", text) == 0
    rows = read_csv(tmp_path / "out" / "trivsweep.csv")
    assert all(row["defect"] == "inf" for row in rows)
    assert json.loads((tmp_path / "out" / "trivsweep.json").read_text())["all_infinite"]


def test_expander_trend_and_disconnected(tmp_path):
    assert run(tmp_path, "expander", None, "--plot-data") == 0
    doc = json.loads((tmp_path / "out" / "expander.json").read_text())
    assert doc["non_increasing"]
    dat = (tmp_path / "out" / "expander.dat").read_text().splitlines()
    assert dat[0].startswith("# config_hash") and len(dat) == 4
    assert run(tmp_path, "expander", "[sweep]\nt = 10\nthreshold = 0.01\n") == 0
    rows = read_csv(tmp_path / "out" / "expander.csv")
    assert rows[0]["disconnected"] == "1" and float(rows[0]["lambda2"]) == 0.0


def test_mapspace_and_ghdiag(tmp_path):
    assert run(tmp_path, "mapspace", "[sweep]\nt = 10, 20\n") == 0
    rows = read_csv(tmp_path / "out" / "mapspace.csv")
    assert all(float(r["diameter"]) <= 1 for r in rows)
    assert run(tmp_path, "ghdiag", "[sweep]\nt = 10, 20\n") == 0
    assert len(read_csv(tmp_path / "out" / "ghdiag.csv")) == 1


def test_measure_suite(tmp_path):
    assert run(tmp_path, "measures", SMALL_MEASURES) == 0
    doc = json.loads((tmp_path / "out" / "measures.json").read_text())
    assert doc["identity_row"]["defect"] == 0.0
    assert abs(doc["cylinder_full_line_unit_mass"] - 1.0) <= 1e-6
    assert len(doc["invariance_sweep"]) == 2
    assert set(doc["verdict"]) >= {"defect_last_le_first", "shell_non_increasing"}
    assert doc["weak_star"]["sample_counts"] == [200, 800]
