import subprocess
import sys

import pytest

from rhskit import SCHEMA_VERSION, __version__
from rhskit.cli import main

RADAR = 'kind = "radar"\nseed = 2\n[radar]\ntrials = 5000\n[sweep]\ngamma_db = [0.0, 10.0]\n'


@pytest.fixture
def cfg(tmp_path):
    def make(text, name="exp.toml"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return make


def test_version(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.strip() == f"rhs {__version__} (schema {SCHEMA_VERSION})"


def test_success_writes_csv(cfg, tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["radar", "--config", cfg(RADAR), "--out", str(out)]) == 0
    csv = out / "radar.csv"
    assert capsys.readouterr().out.strip() == str(csv)
    assert csv.read_text().startswith("# rhskit")


def test_seed_override_changes_header(cfg, tmp_path):
    out = tmp_path / "res"
    assert main(["radar", "--config", cfg(RADAR), "--out", str(out), "--seed", "77"]) == 0
    assert "# seed: 77" in (out / "radar.csv").read_text()


def test_plots_flag(cfg, tmp_path):
    out = tmp_path / "res"
    assert main(["radar", "--config", cfg(RADAR), "--out", str(out), "--plots"]) == 0
    assert (out / "detection.svg").exists()


@pytest.mark.parametrize(
    "argv_tail, text",
    [
        ([], 'kind = "radar"\n[sweep]\ngamma_db = [1.0]\n'),
        ([], 'kind = "radar"\nseed = 1\n[sweep\n'),
        ([], 'kind = "sonar"\nseed = 1\n'),
        (["--seed", "-3"], RADAR),
    ],
)
def test_validation_errors_exit_one(cfg, tmp_path, capsys, argv_tail, text):
    assert main(["radar", "--config", cfg(text), "--out", str(tmp_path / "o"), *argv_tail]) == 1
    assert "invalid configuration" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_kind_mismatch_and_usage(cfg, tmp_path):
    assert main(["cost", "--config", cfg(RADAR), "--out", str(tmp_path)]) == 1
    assert main(["radar"]) == 1
    assert main(["warp", "--config", cfg(RADAR)]) == 1
    assert main(["radar", "--config", str(tmp_path / "missing.toml")]) == 1


def test_all_cells_failing_exit_two(cfg, tmp_path, capsys):
    text = 'kind = "cost"\nseed = 1\n[sweep]\ndelta = [-1.0]\nbeta_ratio = [9.0, 12.0]\n'
    assert main(["cost", "--config", cfg(text), "--out", str(tmp_path / "o")]) == 2
    assert "cell failed" in capsys.readouterr().err


def test_partial_failure_still_succeeds(cfg, tmp_path, capsys):
    text = 'kind = "codebook"\nseed = 1\n[codebook]\ntrials = 2\n[sweep]\nN = [16, 24]\n'
    assert main(["codebook", "--config", cfg(text), "--out", str(tmp_path / "o")]) == 0
    assert "N=24" in capsys.readouterr().err
    assert (tmp_path / "o" / "codebook.csv").read_text().splitlines()[5].endswith(",error")


def test_console_script(cfg, tmp_path):
    out = tmp_path / "res"
    r = subprocess.run([sys.executable, "-m", "rhskit.cli", "radar", "--config", cfg(RADAR), "--out", str(out)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (out / "radar.csv").exists()
