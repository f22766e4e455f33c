"""End-to-end tests for the ccdlab command line."""
import json
import math

import numpy as np
import pytest

from src.ccdlab.cli import build_parser, main
from src.ccdlab.config import RunConfig


def _write_config(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text, encoding="utf-8")
    return path


class TestParser:

    def test_subcommands_share_common_options(self):
        args = build_parser().parse_args(["rates", "--seed", "3", "--threads", "2", "--format", "json"])
        assert (args.command, args.seed, args.threads, args.format) == ("rates", 3, 2, "json")

    def test_negative_seed_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["rates", "--seed", "-1"])

    def test_zero_threads_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["rates", "--threads", "0"])

    def test_command_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestMain:

    def test_rates_run_writes_summary(self, tmp_path):
        # Arrange
        out = tmp_path / "out"

        # Act
        code = main(["rates", "--out", str(out), "--seed", "5", "--threads", "1"])

        # Assert
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["command"] == "rates"
        assert summary["seed"] == 5
        assert summary["files"] == ["rates.json"]

    def test_schema_error_exits_with_2(self, tmp_path):
        config = _write_config(tmp_path, "[drive]\nrabi = 1\n")
        assert main(["rates", "--config", str(config), "--out", str(tmp_path / "out")]) == 2

    def test_missing_config_exits_with_2(self, tmp_path):
        assert main(["rates", "--config", str(tmp_path / "absent.toml")]) == 2

    def test_bad_thread_env_exits_with_2(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CCDLAB_THREADS", "lots")
        assert main(["rates", "--out", str(tmp_path / "out")]) == 2

    def test_out_of_validity_exits_with_3(self, tmp_path):
        config = _write_config(tmp_path, '[drive]\neps_m_mhz = 9.0\nmodulation = "phase"\n[rates]\nscenario = "ccd_phase"\n')
        assert main(["rates", "--config", str(config), "--out", str(tmp_path / "out")]) == 3

    def test_dump_config_round_trips(self, tmp_path):
        # Arrange
        config = _write_config(tmp_path, "[drive]\neps_m_mhz = 0.3\n")
        out = tmp_path / "out"

        # Act
        code = main(["rates", "--config", str(config), "--out", str(out), "--seed", "9", "--dump-config"])

        # Assert
        assert code == 0
        dumped = RunConfig.from_file(out / "config.toml")
        assert dumped.drive.eps_m_mhz == 0.3
        assert dumped.run.seed == 9

    def test_fit_input_flag(self, tmp_path):
        t_us = np.linspace(0, 20, 401)
        source = tmp_path / "decay.csv"
        np.savetxt(source, np.column_stack([t_us, 0.2 + 0.8 * np.exp(-t_us / 4)]), delimiter=",",
                   header="time_us,mean", comments="")
        config = _write_config(tmp_path, '[fit]\nmodel = "exponential"\n')
        out = tmp_path / "out"

        code = main(["fit", "--config", str(config), "--input", str(source), "--out", str(out)])

        assert code == 0
        assert json.loads((out / "fit.json").read_text())["rate"] == pytest.approx(2.5e5, rel=1e-5)

    @pytest.mark.parametrize("command,text", [
        ("evolve", '[grid]\nt_end_us = 0.5\nn_points = 11\n'),
        ("floquet", '[drive]\neps_m_mhz = 0.3\n[floquet]\neps_sweep_mhz = [0.1, 0.2]\n'),
        ("rates", '[drive]\neps_m_mhz = 0.3\n[noise.S_z]\nkind = "white"\nlevel = 1000.0\n'
                  '[rates]\neps_sweep_mhz = [0.1, 0.2, 0.3]\n'),
        ("montecarlo", '[grid]\nt_end_us = 1.0\nn_points = 21\n[montecarlo]\nn_traj = 8\nfit = false\n'
                       '[[montecarlo.noise]]\nkind = "ou"\nsigma_mhz = 0.2\n'),
        ("ensemble", '[grid]\nt_end_us = 5.0\nn_points = 1001\n[ensemble]\nrabi_sweep_mhz = [5.0, 7.5]\n'),
        ("map", '[drive]\nomega_m_mhz = 10.0\n'
                '[map]\nrabi_mhz = [9.0, 10.0, 2]\ndetuning_mhz = [-1.0, 1.0, 3]\nwindow_points = 101\nn_max = 4\n'),
        ("fit", '[fit]\nmodel = "exponential"\n'),
    ])
    def test_same_seed_gives_identical_bytes(self, tmp_path, command, text):
        # Arrange
        config = _write_config(tmp_path, text)
        extra = []
        if command == "fit":
            t_us = np.linspace(0, 20, 401)
            source = tmp_path / "decay.csv"
            np.savetxt(source, np.column_stack([t_us, 0.2 + 0.8 * np.exp(-t_us / 4)]), delimiter=",",
                       header="time_us,mean", comments="")
            extra = ["--input", str(source)]

        # Act
        for name, threads in (("a", "1"), ("b", "3")):
            assert main([command, "--config", str(config), "--out", str(tmp_path / name),
                         "--seed", "4", "--threads", threads, *extra]) == 0

        # Assert
        first = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert first == sorted(p.name for p in (tmp_path / "b").iterdir())
        for name in first:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_json_tables(self, tmp_path):
        config = _write_config(tmp_path, "[grid]\nt_end_us = 0.5\nn_points = 11\n")
        out = tmp_path / "out"

        assert main(["evolve", "--config", str(config), "--out", str(out), "--format", "json"]) == 0

        table = json.loads((out / "evolve.json").read_text())
        assert table["p0"][0] == pytest.approx(1.0)
        assert not math.isnan(table["time_us"][-1])
