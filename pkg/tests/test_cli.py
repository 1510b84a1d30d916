import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from rotators import cli
from rotators.spectral import assemble, eigensolve
from rotators.stationary import TWO_PI, c_constant, diffusion_coefficient, solve_sync_degree, tangent_norm


def _run(*args):
    return cli.main(list(args))


def _json(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestConfig:
    def test_precedence_three_layers(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("# comment\nK = 2.5\nN = 300   # inline comment\ndt = 0.002\n", encoding="utf-8")
        file_values = cli.read_config_file(cfg)
        resolved = cli.resolve_config("simulate", file_values, {"N": "400"})
        assert resolved["N"] == 400          # flag beats file
        assert resolved["K"] == 2.5          # file beats default
        assert resolved["dt"] == 0.002
        assert resolved["t_end"] == 10.0     # default
        assert resolved["seed"] == 0

    def test_unknown_key_rejected(self):
        with pytest.raises(cli.ConfigError) as err:
            cli.resolve_config("pde", {"K": "2", "Kk": "3"}, {})
        assert err.value.kind == "unknown-key" and "Kk" in err.value.detail

    def test_missing_key_named(self):
        with pytest.raises(cli.ConfigError) as err:
            cli.resolve_config("spectrum", {}, {})
        assert err.value.kind == "missing-key" and err.value.detail == "K"

    def test_bad_values(self):
        with pytest.raises(cli.ConfigError):
            cli.resolve_config("simulate", {"K": "two"}, {})
        with pytest.raises(cli.ConfigError):
            cli.resolve_config("simulate", {"K": "2", "seed": "-3"}, {})
        assert cli.resolve_config("scaling", {"K": "2", "N_list": "100, 200,400"}, {})["N_list"] == [100, 200, 400]

    def test_syntax_error(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("this line has no separator\n")
        with pytest.raises(cli.ConfigError) as err:
            cli.read_config_file(cfg)
        assert err.value.kind == "config-syntax"


class TestStationary:
    def test_supercritical_values(self, tmp_path, capsys):
        out = tmp_path / "s"
        assert _run("stationary", "--K", "2", "--out", str(out)) == 0
        data = _json(out / "stationary.json")
        assert data["r"] == solve_sync_degree(2.0)
        assert data["D_K"] == diffusion_coefficient(2.0)
        assert data["c"] == c_constant(2.0)
        assert data["tangent_norm"] == tangent_norm(2.0)
        assert "D_K = 1.01" in capsys.readouterr().out
        rows = np.loadtxt(out / "q.csv", delimiter=",", skiprows=1)
        assert abs(TWO_PI * rows[:, 1].mean() - 1.0) < 1e-8

    def test_subcritical(self, tmp_path, capsys):
        out = tmp_path / "s"
        assert _run("stationary", "--K", "0.5", "--out", str(out)) == 0
        printed = capsys.readouterr().out
        assert "r = 0.0" in printed and "D_K = undefined" in printed
        assert _json(out / "stationary.json")["D_K"] is None
        rows = np.loadtxt(out / "q.csv", delimiter=",", skiprows=1)
        assert abs(TWO_PI * rows[:, 1].mean() - 1.0) < 1e-8

    def test_manifest(self, tmp_path):
        out = tmp_path / "s"
        _run("stationary", "--K", "2", "--seed", "7", "--out", str(out))
        man = _json(out / "manifest.json")
        assert man["command"] == "stationary" and man["seed"] == 7
        assert man["config"]["K"] == 2.0
        assert {"started", "finished", "version", "outputs"} <= set(man)
        assert all((tmp_path / "s" / p.split("/")[-1]).exists() for p in man["outputs"])


class TestErrors:
    def test_missing_key_exit(self, tmp_path, capsys):
        code = _run("pde", "--out", str(tmp_path / "p"))
        err = capsys.readouterr().err.strip()
        assert code != 0
        assert err == "rotators: error: missing-key: K"
        assert len(err.splitlines()) == 1

    def test_runtime_error_is_one_line(self, tmp_path, capsys):
        code = _run("spectrum", "--K", "10", "--out", str(tmp_path / "sp"))
        err = capsys.readouterr().err.strip()
        assert code == cli.EXIT_RUNTIME
        assert err.startswith("rotators: error: AssemblyError:") and len(err.splitlines()) == 1

    def test_bad_choice(self, tmp_path, capsys):
        code = _run("pde", "--K", "2", "--initial", "weird", "--out", str(tmp_path / "p"))
        assert code == cli.EXIT_CONFIG
        assert "initial" in capsys.readouterr().err


class TestCommands:
    def test_simulate(self, tmp_path):
        out = tmp_path / "sim"
        assert _run("simulate", "--K", "2", "--N", "50", "--t_end", "0.5", "--out", str(out)) == 0
        rows = list(csv.reader(open(out / "track.csv")))
        assert rows[0] == ["t", "r", "psi_unwrapped"] and len(rows) == 1 + 6
        assert len((out / "final_phases.csv").read_text().splitlines()) == 51

    def test_pde(self, tmp_path):
        out = tmp_path / "p"
        assert _run("pde", "--K", "2", "--t_end", "0.5", "--M", "32", "--out", str(out)) == 0
        assert _json(out / "pde.json")["t_end"] == 0.5
        assert len((out / "final_coefficients.csv").read_text().splitlines()) == 34

    def test_spectrum(self, tmp_path):
        out = tmp_path / "sp"
        assert _run("spectrum", "--K", "2", "--M", "32", "--out", str(out)) == 0
        data = _json(out / "spectrum.json")
        assert data["lambda_1"] == pytest.approx(eigensolve(assemble(2.0, 32)).eigenvalues[1], abs=1e-12)
        assert data["l0"] == -2 and data["biorthogonality_error"] < 1e-6

    def test_diffusion(self, tmp_path):
        out = tmp_path / "d"
        assert _run("diffusion", "--K", "2", "--N", "100", "--tau_f", "0.2", "--n_paths", "4",
                    "--n_records", "10", "--n_bootstrap", "50", "--out", str(out)) == 0
        data = _json(out / "diffusion.json")
        assert {"D_hat", "stderr", "target"} <= set(data)
        assert (out / "variance.csv").exists()

    def test_scaling_and_emergence(self, tmp_path):
        assert _run("scaling", "--K", "2", "--N_list", "100,200", "--n_paths", "2",
                    "--t_fixed", "0.5", "--out", str(tmp_path / "sc")) == 0
        assert _json(tmp_path / "sc" / "scaling.json")["N_values"] == [100, 200]
        assert _run("emergence", "--K", "2", "--N", "100", "--n_paths", "4",
                    "--out", str(tmp_path / "em")) == 0
        assert len(_json(tmp_path / "em" / "emergence.json")["centers"]) == 4


def test_outputs_byte_identical_across_runs_and_threads(tmp_path):
    args = ["diffusion", "--K", "2", "--N", "100", "--tau_f", "0.2", "--n_paths", "4",
            "--n_records", "10", "--n_bootstrap", "50", "--seed", "99"]
    assert _run(*args, "--out", str(tmp_path / "a")) == 0
    assert _run(*args, "--out", str(tmp_path / "b")) == 0
    assert _run(*args, "--threads", "3", "--out", str(tmp_path / "c")) == 0
    for name in ("diffusion.json", "variance.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rotators", "stationary", "--K", "1.5",
                           "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "m" / "manifest.json").exists()
