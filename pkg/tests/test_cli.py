import csv
import json
import subprocess
import sys

import pytest

from easpectral import __version__, experiments
from easpectral.barrier import ObliviousnessReport
from easpectral.cli import main

SMALL = {
    "ground-state": "n_cols = 3\nn_rows = 3\nreplicas = 20\n",
    "census": "max_edges = 2\nD = 5\nq = 8\n",
    "line-mass": "n_values = [2, 4]\nN_outer = 60\nM_inner = 10\n",
    "barrier-verify": "u = [1, 4]\nv = [7, 4]\ninstances = 12\n",
    "lower-bound": "n_values = [4]\nreplicas = 50\n",
    "decorrelate": "n_cols = 2\nn_rows = 1\nreplicas = 300\nt_grid = [0.0, 0.5]\n",
    "columns-check": "n_cols = 21\nn_rows = 11\neps = 0.1\nW = 5\nsamples = 40\n",
}


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


@pytest.mark.parametrize("name", sorted(SMALL))
def test_run_and_replay_across_threads(tmp_path, name, capsys):
    cfg = write(tmp_path, "c.toml", SMALL[name])
    out = tmp_path / "run"
    assert main([name, "--config", str(cfg), "--seed", "3", "--out", str(out), "--threads", "1"]) == 0
    meta_path = out / f"{name}.meta.json"
    meta = json.loads(meta_path.read_text())
    assert meta["version"] == __version__ and meta["wall_time_s"] >= 0
    assert meta["config"]["seed"] == 3
    for art in meta["artifacts"]:
        text = (out / art).read_text()
        assert f"{__version__}" in text.splitlines()[0] or '"version"' in text
    capsys.readouterr()
    assert main(["replay", str(meta_path), "--threads", "4"]) == 0
    assert json.loads(capsys.readouterr().out)["status"] == "identical"
    for art in meta["artifacts"]:
        assert (out / art).read_bytes() == (out / "replay" / art).read_bytes()


def test_line_mass_csv(tmp_path):
    cfg = write(tmp_path, "c.toml", SMALL["line-mass"])
    assert main(["line-mass", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "line-mass.csv")
    assert [r["n"] for r in rows] == ["2", "4"]
    assert all(float(r["stderr"]) > 0 for r in rows)


def test_replay_with_altered_seed_is_consistent(tmp_path, capsys):
    cfg = write(tmp_path, "c.toml", "n_values = [4]\nN_outer = 300\nM_inner = 40\n")
    assert main(["line-mass", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path)]) == 0
    a = read_csv(tmp_path / "line-mass.csv")[0]
    assert main(["replay", str(tmp_path / "line-mass.meta.json"), "--seed", "2"]) == 0
    b = read_csv(tmp_path / "replay" / "line-mass.csv")[0]
    assert a["estimate"] != b["estimate"]
    diff = abs(float(a["estimate"]) - float(b["estimate"]))
    assert diff <= 6 * (float(a["stderr"]) ** 2 + float(b["stderr"]) ** 2) ** 0.5


def test_strict_odd_canonical_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "c.toml", "n_values = [5]\nstrict = true\n")
    assert main(["line-mass", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == 2 and err["kind"] == "config"
    assert not (tmp_path / "line-mass.csv").exists()


@pytest.mark.parametrize(
    "text",
    [
        "bogus = 1\n",
        "replicas = 0\n",
        'solver = "simplex"\n',
        "n_cols = 30\nn_rows = 30\n",
        'experiment = "census"\n',
        "u = [1, 1]\n",
        "q = 7\n",
        "seed = = 3\n",
    ],
)
def test_config_errors(tmp_path, text, capsys):
    cfg = write(tmp_path, "c.toml", text)
    assert main(["ground-state", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_columns_check_needs_divisible_distance(tmp_path):
    assert main(["columns-check", "--out", str(tmp_path)]) == 2


def test_missing_files_are_io_errors(tmp_path, capsys):
    assert main(["replay", str(tmp_path / "nope.meta.json")]) == 3
    assert main(["census", "--config", str(tmp_path / "nope.toml")]) == 3
    assert json.loads(capsys.readouterr().err.splitlines()[-1])["kind"] == "io"


def test_version_mismatch_refused(tmp_path, capsys):
    cfg = write(tmp_path, "c.toml", SMALL["ground-state"])
    assert main(["ground-state", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "ground-state.meta.json").read_text())
    meta["version"] = "0.0.0-other"
    (tmp_path / "old.meta.json").write_text(json.dumps(meta))
    assert main(["replay", str(tmp_path / "old.meta.json")]) == 2
    assert "version" in json.loads(capsys.readouterr().err)["message"]


def test_counterexample_exit_code(tmp_path, monkeypatch):
    def broken(graph, pair, J, spec, method="auto"):
        return ObliviousnessReport(False, 1, -1, True, True, {"couplings": [], "spin_config_plus": [],
                                                             "spin_config_minus": [], "spec": {}})

    monkeypatch.setattr(experiments, "verify_barrier_obliviousness", broken)
    cfg = write(tmp_path, "c.toml", "instances = 3\n")
    assert main(["barrier-verify", "--config", str(cfg), "--out", str(tmp_path)]) == 4
    dump = json.loads((tmp_path / "barrier-verify.counterexamples.json").read_text())
    assert len(dump["counterexamples"]) == 3


def test_replay_detects_tampering(tmp_path):
    cfg = write(tmp_path, "c.toml", SMALL["ground-state"])
    assert main(["ground-state", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "ground-state.meta.json").read_text())
    meta["artifacts"]["ground-state.csv"] = "0" * 64
    (tmp_path / "ground-state.meta.json").write_text(json.dumps(meta))
    assert main(["replay", str(tmp_path / "ground-state.meta.json")]) == 4


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "easpectral.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
    r = subprocess.run([sys.executable, "-m", "easpectral.cli", "lower-bound", "--seed", "-1", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 2
