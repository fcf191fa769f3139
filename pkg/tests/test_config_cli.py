"""TOML config parsing, digests, and the command-line front end."""

import json

import pytest

import gkdvlab.cli as cli
from gkdvlab.config import config_digest, parse_config
from gkdvlab.errors import ConfigurationError, ConvergenceError

GOOD = """
[family]
p = 6
speeds = [1.0]
shifts = [0.0]

[grid]
num_points = 1024
domain_length = 100.0
origin = -50.0

[horizons]
S = 0.05
t0 = 0.0
"""


class TestParseConfig:
    def test_defaults_applied(self):
        cfg = parse_config(GOOD)
        assert cfg.dt == 5e-4
        assert cfg.record_stride == 100
        assert cfg.dealias is True
        assert cfg.shoot_tol == 1e-8
        assert cfg.tol_class is None
        assert cfg.gamma_eff_divisor == 16.0
        assert cfg.output_dir == "out"
        assert cfg.family.n_solitons == 1
        assert cfg.grid.num_points == 1024

    def test_overrides(self):
        cfg = parse_config(GOOD + "\n[evolve]\ndt = 1e-3\nrecord_stride = 10\n")
        assert cfg.dt == 1e-3
        assert cfg.record_stride == 10

    def test_rejects_bad_toml(self):
        with pytest.raises(ConfigurationError, match="parse error"):
            parse_config("family = [")

    def test_rejects_unknown_section(self):
        with pytest.raises(ConfigurationError, match="unknown config section"):
            parse_config(GOOD + "\n[extra]\nfoo = 1\n")

    def test_rejects_unknown_key(self):
        with pytest.raises(ConfigurationError, match="unknown key evolve.step"):
            parse_config(GOOD + "\n[evolve]\nstep = 0.1\n")

    def test_rejects_missing_section(self):
        bad = GOOD.replace("[horizons]\nS = 0.05\nt0 = 0.0", "")
        with pytest.raises(ConfigurationError, match="missing required section"):
            parse_config(bad)

    def test_rejects_missing_key(self):
        bad = GOOD.replace("t0 = 0.0", "")
        with pytest.raises(ConfigurationError, match="horizons.t0"):
            parse_config(bad)

    def test_rejects_inverted_horizons(self):
        bad = GOOD.replace("S = 0.05", "S = -1.0")
        with pytest.raises(ConfigurationError, match="must exceed"):
            parse_config(bad)


class TestDigest:
    def test_stable_under_formatting(self):
        a = parse_config(GOOD)
        b = parse_config(GOOD + "\n# a comment\n")
        assert config_digest(a) == config_digest(b)

    def test_changes_with_effective_values(self):
        a = parse_config(GOOD)
        b = parse_config(GOOD + "\n[evolve]\ndt = 1e-3\n")
        assert config_digest(a) != config_digest(b)


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(GOOD + f'\n[run]\noutput_dir = "{tmp_path / "out"}"\n')
    return path


class TestCliEvolve:
    def test_writes_artifacts_and_manifest(self, cfg_file, tmp_path):
        code = cli.main(["evolve", "--config", str(cfg_file)])
        assert code == 0
        out = tmp_path / "out"
        assert (out / "trajectory" / "index.json").exists()
        series = (out / "series.csv").read_text().splitlines()
        assert series[0] == "t,mass,energy,h1_residual"
        assert len(series) == 3  # header + t0 + S
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "evolve"
        assert manifest["config_sha256"] == config_digest(parse_config(cfg_file.read_text()))

    def test_report_collects_artifacts(self, cfg_file, tmp_path):
        assert cli.main(["evolve", "--config", str(cfg_file)]) == 0
        assert cli.main(["report", "--config", str(cfg_file)]) == 0
        out = tmp_path / "out"
        assert (out / "report.json").exists()
        assert (out / "plots.py").exists()


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(GOOD + "\n[evolve]\nstep = 1\n")
        assert cli.main(["evolve", "--config", str(path)]) == 2

    def test_bad_amplitudes_is_2(self, cfg_file):
        assert cli.main(["construct", "--config", str(cfg_file), "--A", "x,y"]) == 2

    def test_numeric_error_is_3(self, tmp_path):
        # Grid too coarse to hold the soliton: the evolver's resolution
        # monitor trips immediately.
        path = tmp_path / "coarse.toml"
        path.write_text(
            GOOD.replace("num_points = 1024", "num_points = 256")
            + f'\n[run]\noutput_dir = "{tmp_path / "out"}"\n'
        )
        assert cli.main(["evolve", "--config", str(path)]) == 3

    def test_convergence_error_is_4(self, cfg_file, monkeypatch):
        def boom(cfg, args, outdir):
            raise ConvergenceError("no")

        monkeypatch.setitem(cli._COMMANDS, "evolve", boom)
        assert cli.main(["evolve", "--config", str(cfg_file)]) == 4

    def test_missing_config_is_5(self, tmp_path):
        assert cli.main(["evolve", "--config", str(tmp_path / "nope.toml")]) == 5

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--version"])
        assert exc.value.code == 0


class TestCliSpectrum:
    def test_spectrum_report(self, cfg_file, tmp_path):
        code = cli.main(["spectrum", "--config", str(cfg_file)])
        assert code == 0
        report = json.loads((tmp_path / "out" / "spectrum.json").read_text())
        member = report["members"][0]
        assert member["e_c"] == pytest.approx(0.63450764, abs=1e-6)
        assert all(member["checks"].values())
        assert report["constants"]["sigma0"] > 0
