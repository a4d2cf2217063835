import json
import subprocess
import sys

import numpy as np
import pytest

from statphase.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from statphase.io import read_field, read_signal
from statphase.tfspa import RegionMask

SMALL = ["--spacing", "cochlear", "--prototype", "gammachirp", "--c", "2", "--fmin", "500",
         "--fmax", "3000", "--fs", "16000", "--density", "1"]


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["bank", *SMALL, "--out", str(d / "bank.json"), "--table", str(d / "bank.csv")]) == 0
    assert main(["gen", "--kind", "impulse", "--fs", "16000", "--duration", "0.1", "--onset", "0.01",
                 "--out", str(d / "imp.wav")]) == 0
    assert main(["analyze", str(d / "imp.wav"), "--bank", str(d / "bank.json"),
                 "--out", str(d / "imp.tf")]) == 0
    return d


def test_bank_json(work, capsys):
    d = json.loads((work / "bank.json").read_text())
    assert d["f_min_hz"] == 500.0 and d["c"] == 2.0 and d["C"] > 0
    rows = np.loadtxt(work / "bank.csv", delimiter=",", skiprows=1)
    assert rows.shape[0] == 34 and np.all(np.diff(rows[:, 1]) > 0)
    assert main(["bank", "--bank", str(work / "bank.json")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["num_channels"] == 34 and info["C"] == d["C"]


def test_prototype_override_resets_chirp(work, capsys):
    assert main(["bank", "--bank", str(work / "bank.json"), "--prototype", "gammatone"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["prototype"] == "gammatone" and info["c"] == 0.0


def test_full_pipeline(work, capsys):
    d = work
    assert main(["tfspa", str(d / "imp.tf"), "--bank", str(d / "bank.json"), "--out", str(d / "m.csv"),
                 "--pbm", str(d / "m.pbm"), "--report", str(d / "r.json")]) == 0
    rep = json.loads((d / "r.json").read_text())
    m = RegionMask.from_csv(d / "m.csv")
    assert rep["kept_cells"] == m.keep.sum() > 0
    assert (d / "m.pbm").read_text().startswith("P1")
    for extra, name in (([], "full.wav"), (["--mask", str(d / "m.csv")], "masked.wav")):
        assert main(["synth", str(d / "imp.tf"), "--bank", str(d / "bank.json"),
                     "--out", str(d / name), *extra]) == 0
    y, fs = read_signal(d / "full.wav")
    assert fs == 16000.0 and len(y) == 1600
    assert np.argmax(np.abs(y)) == 160


def test_analyze_outputs(work):
    d = work
    assert main(["analyze", str(d / "imp.wav"), "--bank", str(d / "bank.json"), "--out", str(d / "x.tf"),
                 "--no-derivatives", "--double", "--csv", str(d / "x.csv")]) == 0
    X = read_field(d / "x.tf")
    Y = read_field(d / "imp.tf")
    np.testing.assert_allclose(X.data, Y.X.data, atol=1e-6)
    assert sum(1 for _ in open(d / "x.csv")) == 1 + X.data.size
    assert main(["analyze", str(d / "imp.wav"), "--bank", str(d / "bank.json"), "--out", str(d / "y.tf"),
                 "--gradients", str(d / "g.csv")]) == 0
    head = open(d / "g.csv").readline().strip()
    assert head == "channel_hz,time_s,phi_tau,phi_mu,a_tau,a_mu,p"


def test_locus_overlay(work, capsys):
    d = work
    assert main(["tfspa", str(d / "imp.tf"), "--bank", str(d / "bank.json"), "--out", str(d / "m2.csv"),
                 "--locus-gamma=-1e5", "--locus-t-zero", "0.05", "--locus-out", str(d / "loc.csv")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["locus_valid_channels"] > 0
    assert np.loadtxt(d / "loc.csv", delimiter=",", skiprows=1).shape == (34, 4)


def test_deterministic(work):
    d = work
    for name in ("a", "b"):
        assert main(["tfspa", str(d / "imp.tf"), "--bank", str(d / "bank.json"),
                     "--out", str(d / f"{name}.csv")]) == 0
    assert (d / "a.csv").read_bytes() == (d / "b.csv").read_bytes()


def test_gen_kinds(tmp_path):
    cases = [["--kind", "tone", "--freq", "500"], ["--kind", "chirp", "--freq", "4000", "--gamma=-1e5"],
             ["--kind", "decay", "--decay", "-100"], ["--kind", "twotone", "--freq2", "1200", "--amp2", "0.5"],
             ["--kind", "twochirp", "--gamma", "5e4", "--freq2", "3000", "--gamma2=-5e4", "--amp2", "2"]]
    for i, c in enumerate(cases):
        assert main(["gen", *c, "--out", str(tmp_path / f"{i}.csv")]) == 0
        assert len(np.loadtxt(tmp_path / f"{i}.csv")) == 2000
    assert main(["gen", "--kind", "tone", "--format", "pcm16", "--out", str(tmp_path / "t.wav")]) == 0
    assert main(["gen", "--kind", "tone", "--freq", "15000", "--out", str(tmp_path / "n.wav")]) == EXIT_NUMERIC


def test_mask_threshold_stdout(capsys):
    assert main(["mask-threshold", "--prototype", "gammatone", "--masker-hz", "1000", "--masker-db", "60"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "channel_hz,threshold_db,masker_response_db"
    rows = np.array([[float(v) for v in ln.split(",")] for ln in out[1:]])
    assert len(rows) == 103 and rows[:, 1].min() >= -120.0
    k = np.argmax(rows[:, 2])
    assert abs(rows[k, 0] - 1000) < 20 and rows[k, 2] == pytest.approx(60.0, abs=0.5)


def test_exit_codes(work, tmp_path, capsys):
    d = work
    with pytest.raises(SystemExit) as e:
        main(["tfspa"])
    assert e.value.code == EXIT_USAGE
    assert main(["tfspa", str(d / "imp.tf"), "--bank", str(d / "bank.json"),
                 "--out", str(tmp_path / "m.csv"), "--c2", "0.5"]) == EXIT_USAGE
    assert main(["analyze", str(d / "imp.wav"), "--bank", str(d / "bank.json"), "--out", str(tmp_path / "z.tf"),
                 "--no-derivatives", "--gradients", str(tmp_path / "g.csv")]) == EXIT_USAGE
    # wrong sample rate, missing file, bad JSON, bank mismatch
    assert main(["analyze", str(d / "imp.wav"), "--fs", "20000", "--out", str(tmp_path / "z.tf")]) == EXIT_DATA
    assert main(["analyze", str(tmp_path / "nope.wav"), "--out", str(tmp_path / "z.tf")]) == EXIT_DATA
    (tmp_path / "bad.json").write_text("{\n  oops\n}")
    assert main(["bank", "--bank", str(tmp_path / "bad.json")]) == EXIT_DATA
    assert "bad.json:2" in capsys.readouterr().err
    assert main(["synth", str(d / "imp.tf"), *SMALL, "--density", "2",
                 "--out", str(tmp_path / "s.wav")]) == EXIT_DATA
    # numeric: masker outside the bank
    assert main(["mask-threshold", "--prototype", "gammatone", "--masker-hz", "50"]) == EXIT_NUMERIC


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "statphase", "--version"], capture_output=True, text=True)
    assert r.returncode == EXIT_OK and r.stdout.strip()
