import csv
import io
import json
import subprocess
import sys

import pytest

from lyapbound import __version__
from lyapbound.cli import COLUMNS, SUBCOMMANDS, main, run

FAST = {
    "example": ["--n", "2000", "--trials", "4"],
    "polymer": ["--p", "4", "--n-blocks", "200", "--trials", "3"],
    "offspectrum": ["--n", "500"],
    "stability": ["--n", "500"],
    "jacobi": ["--n", "500"],
    "gt-check": ["--families", "20"],
    "ap-check": [],
    "estimate": ["--n", "500", "--trials", "3"],
    "almost-commuting": ["--n", "500", "--trials", "3"],
}


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0] == f"# lyapbound {__version__}"
    assert lines[1].startswith("# config ")
    assert lines[2].startswith("# status ")
    rows = list(csv.reader(io.StringIO("\n".join(lines[3:]))))
    assert tuple(rows[0]) == COLUMNS
    return json.loads(lines[1][len("# config ") :]), rows[1:]


def test_every_subcommand_has_fast_args():
    assert set(FAST) == set(SUBCOMMANDS)


@pytest.mark.parametrize("name", sorted(FAST))
def test_subcommand_runs_and_is_deterministic(name):
    code, text, _ = run([name, "--seed", "7"] + FAST[name])
    assert code == 0, text
    config, rows = parse_csv(text)
    assert config["subcommand"] == name and config["seed"] == 7
    assert rows and all(r[0] == name for r in rows)
    code2, text2, _ = run([name, "--seed", "7"] + FAST[name])
    assert (code2, text2) == (code, text)


def test_json_format():
    code, text, _ = run(["estimate", "--format", "json", "--n", "300", "--trials", "2"])
    doc = json.loads(text)
    assert code == 0 and doc["pass"] is True
    assert doc["columns"] == list(COLUMNS)
    assert doc["version"] == __version__


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"subcommand": "estimate", "seed": 3, "n": 400, "trials": 2}))
    _, text, _ = run(["estimate", "--config", str(cfg), "--n", "300"])
    config, _ = parse_csv(text)
    assert config["seed"] == 3
    assert config["params"]["n"] == 300 and config["params"]["trials"] == 2
    _, text, _ = run(["estimate", "--config", str(cfg), "--seed", "5"])
    assert parse_csv(text)[0]["seed"] == 5


@pytest.mark.parametrize(
    "argv",
    [
        ["estimate", "--bogus", "1"],
        ["estimate", "--n", "1.5"],
        ["estimate", "--seed", "-1"],
        ["nosuch"],
        ["estimate", "--config", "/nonexistent.json"],
    ],
)
def test_config_errors_exit_4(argv):
    code, text, out = run(argv)
    assert code == 4 and text.startswith("config error") and out is None


def test_config_unknown_key_and_wrong_subcommand(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nope": 1}))
    assert run(["estimate", "--config", str(cfg)])[0] == 4
    cfg.write_text(json.dumps({"subcommand": "example"}))
    assert run(["estimate", "--config", str(cfg)])[0] == 4


def test_hypothesis_failures_exit_2():
    code, text, _ = run(["ap-check", "--preset", '"AP_V2"', "--n", "35"])
    assert code == 2 and "# status hypothesis not met" in text
    code, text, _ = run(["jacobi", "--theta-lo", "0.5", "--n", "200"])
    assert code == 2 and "MixedRegime" in text
    code, _, _ = run(["offspectrum", "--v0", "-20", "--n", "100"])
    assert code == 2


def test_main_writes_out_file(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["offspectrum", "--n", "200", "--out", str(out)]) == 0
    assert out.read_text().startswith("# lyapbound")
    assert capsys.readouterr().out == ""
    assert main(["ap-check", "--preset", '"AP_V2"', "--n", "35"]) == 2
    assert "exit 2" in capsys.readouterr().err


def test_module_entry_point():
    r = subprocess.run(
        [sys.executable, "-m", "lyapbound", "offspectrum", "--n", "200"], capture_output=True, text=True
    )
    assert r.returncode == 0 and r.stdout.startswith("# lyapbound")
