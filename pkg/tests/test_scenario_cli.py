import json
import logging
import subprocess
import sys

import pytest

from conftest import building_spec
from thermoflex import cli
from thermoflex.errors import ConfigurationError, SimulationError
from thermoflex.scenario import load_scenario, parse_scenario


def base(**extra):
    data = {"buildings": [building_spec("a")], "signal": {"kind": "synthetic", "volatility": 10.0},
            "duration_min": 5.0, "seed": 2}
    data.update(extra)
    return data


def write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


class TestScenario:
    def test_defaults(self):
        sc = parse_scenario(base())
        assert sc.dt == pytest.approx(4.0 / 60.0)
        assert sc.n_ticks == 75
        assert sc.dispatch_mode == "optimized"

    @pytest.mark.parametrize("mutate", [
        lambda d: d.update(typo=1),
        lambda d: d["buildings"][0]["params"].update(n_bin=3),
        lambda d: d["signal"].update(amplitude=1.0),
        lambda d: d.update(dispatch_mode="greedy"),
        lambda d: d.update(buildings=[]),
        lambda d: d.update(buildings=[building_spec("a"), building_spec("a")]),
        lambda d: d.update(buildings=[building_spec("ISO")]),
    ], ids=["top", "params", "signal", "mode", "empty", "duplicate", "reserved"])
    def test_rejects(self, mutate):
        data = base()
        mutate(data)
        with pytest.raises(ConfigurationError):
            parse_scenario(data)

    def test_time_step_guard(self):
        # dt (alpha + beta) must stay below 1/2
        data = base(dt_s=60.0)
        data["buildings"][0]["params"].update(t_on=2.0, t_off=2.0)
        with pytest.raises(ConfigurationError, match="building 'a'"):
            parse_scenario(data)

    def test_relative_signal_path(self, tmp_path):
        (tmp_path / "sig.csv").write_text("t_s,reg_kw\n0,0\n")
        sc = load_scenario(write(tmp_path, base(signal={"kind": "file", "path": "sig.csv"})))
        assert sc.resolve("sig.csv") == tmp_path / "sig.csv"

    def test_not_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        with pytest.raises(ConfigurationError):
            load_scenario(path)


class TestCli:
    def test_simulate(self, tmp_path, capsys):
        path = write(tmp_path, base())
        out = tmp_path / "out"
        assert cli.main(["simulate", str(path), "--out", str(out), "--emit-plotdata"]) == cli.EXIT_OK
        printed = json.loads(capsys.readouterr().out)
        assert set(printed) == {"total", "mean", "std", "max", "min"}
        assert json.loads((out / "stats.json").read_text()) == printed
        assert (out / "plotdata" / "iso_long.csv").exists()
        assert cli.main(["stats", str(out / "trace.csv")]) == cli.EXIT_OK
        assert json.loads(capsys.readouterr().out)["total"] == pytest.approx(printed["total"], rel=1e-8)

    def test_dispatch_override(self, tmp_path, capsys):
        path = write(tmp_path, base(buildings=[building_spec("a"), building_spec("b", t_on=15.0)]))
        cli.main(["simulate", str(path), "--out", str(tmp_path / "o1"), "--dispatch", "proportional"])
        cli.main(["simulate", str(path), "--out", str(tmp_path / "o2")])
        assert (tmp_path / "o1" / "trace.csv").read_bytes() != (tmp_path / "o2" / "trace.csv").read_bytes()

    def test_qualify(self, tmp_path, capsys):
        data = base(buildings=[building_spec("a", t_on=10.0, t_off=10.0, band_width=0.5)])
        assert cli.main(["qualify", str(write(tmp_path, data)), "--k", "5"]) == cli.EXIT_OK
        row = json.loads(capsys.readouterr().out)[0]
        assert (row["long_term"], row["short_term"], row["r_qual"]) == pytest.approx((1000.0, 500.0, 500.0))
        assert row["binding"] == "short_term"

    def test_t50(self, tmp_path, capsys):
        assert cli.main(["t50", str(write(tmp_path, base())), "--rr", "0"]) == cli.EXIT_OK
        assert json.loads(capsys.readouterr().out)[0]["passed"] is True

    def test_sweep(self, tmp_path, capsys):
        path = write(tmp_path, base())
        assert cli.main(["sweep-rr", str(path), "--from", "0.5", "--to", "1.5", "--steps", "3"]) == cli.EXIT_OK
        row = json.loads(capsys.readouterr().out)[0]
        assert [r["multiplier"] for r in row["runs"]] == [0.5, 1.0, 1.5]

    def test_config_error_exit(self, tmp_path, capsys):
        assert cli.main(["simulate", str(write(tmp_path, base(extra=1)))]) == cli.EXIT_CONFIG
        assert "error" in capsys.readouterr().err

    def test_missing_file_exit(self, tmp_path):
        assert cli.main(["stats", str(tmp_path / "none.csv")]) == cli.EXIT_CONFIG

    def test_runtime_error_exit(self, tmp_path, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise SimulationError("diverged", tick=3, building="a")

        monkeypatch.setattr(cli, "run_simulation", boom)
        assert cli.main(["simulate", str(write(tmp_path, base())), "--out", str(tmp_path)]) == cli.EXIT_RUNTIME
        assert "tick 3, building 'a'" in capsys.readouterr().err

    @pytest.mark.parametrize("value, level", [("debug", logging.DEBUG), ("error", logging.ERROR)])
    def test_log_level(self, monkeypatch, value, level):
        monkeypatch.setenv("THERMOFLEX_LOG", value)
        root = logging.getLogger()
        saved = root.handlers[:], root.level
        root.handlers.clear()
        try:
            cli._configure_logging()
            assert root.level == level
        finally:
            root.handlers[:], _ = saved
            root.setLevel(saved[1])

    def test_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "thermoflex.cli", "qualify", str(write(tmp_path, base()))],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0 and json.loads(proc.stdout)[0]["building"] == "a"
