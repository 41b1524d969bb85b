"""CLI tests: flag parsing, artifacts, determinism, exit codes."""

import json

import pytest

from qtoksim.cli import main, parse_grid


def _write_config(tmp_path, **overrides):
    cfg = {"protocol": "qrpuf", "trials": 8, "seed": 5}
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestGridParsing:
    def test_inclusive_endpoints(self):
        grid = parse_grid("0:0.3:0.05")
        assert len(grid) == 7
        assert grid[0] == 0.0 and grid[-1] == pytest.approx(0.3)

    def test_single_point(self):
        assert parse_grid("0.5:0.5:1") == [0.5]

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            parse_grid("1:2")
        with pytest.raises(ValueError):
            parse_grid("1:0:0.5")


class TestScenarioCommand:
    def test_runs_and_writes_artifacts(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        rc = main(["scenario", "--config", str(cfg), "--out",
                   str(tmp_path / "out")])
        assert rc == 0
        assert "accept_rate=1.0000" in capsys.readouterr().out
        metrics = json.loads((tmp_path / "out/metrics.json").read_text())
        assert metrics["accept_rate"] == 1.0
        assert metrics["config"]["protocol"] == "qrpuf"
        lines = (tmp_path / "out/trials.csv").read_text().splitlines()
        assert lines[0] == "trial,protocol,adversary,accepted,error_metric,dwell_us,seed"
        assert len(lines) == 9

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg = _write_config(tmp_path, adversary="random_guess", trials=12,
                            seed=7)
        main(["scenario", "--config", str(cfg), "--out", str(tmp_path / "a")])
        main(["scenario", "--config", str(cfg), "--out", str(tmp_path / "b")])
        for name in ("metrics.json", "trials.csv"):
            assert ((tmp_path / "a" / name).read_bytes()
                    == (tmp_path / "b" / name).read_bytes())

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = _write_config(tmp_path, adversary="random_guess", trials=12)
        main(["scenario", "--config", str(cfg), "--seed", "9",
              "--out", str(tmp_path / "a")])
        doc = json.loads((tmp_path / "a/metrics.json").read_text())
        assert doc["config"]["seed"] == 9

    def test_parallel_matches_serial(self, tmp_path):
        cfg = _write_config(tmp_path, trials=10)
        main(["scenario", "--config", str(cfg), "--out", str(tmp_path / "s")])
        main(["scenario", "--config", str(cfg), "--out", str(tmp_path / "p"),
              "--parallel", "2"])
        assert ((tmp_path / "s/trials.csv").read_bytes()
                == (tmp_path / "p/trials.csv").read_bytes())

    def test_invalid_config_exits_2_without_writing(self, tmp_path):
        cfg = _write_config(tmp_path, adversary="token_clone")  # qrpuf mismatch
        out = tmp_path / "never"
        rc = main(["scenario", "--config", str(cfg), "--out", str(out)])
        assert rc == 2
        assert not out.exists()

    def test_missing_config_file_exits_2(self, tmp_path):
        rc = main(["scenario", "--config", str(tmp_path / "nope.json")])
        assert rc == 2

    def test_missing_required_flag_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["scenario"])
        assert exc.value.code == 2


class TestDephasingCurveCommand:
    def test_writes_curve(self, tmp_path):
        rc = main(["dephasing-curve", "--t2-us", "108.6", "--t-max-us", "50",
                   "--points", "11", "--shots", "20000", "--seed", "3",
                   "--out", str(tmp_path / "c")])
        assert rc == 0
        lines = (tmp_path / "c/dephasing_curve.csv").read_text().splitlines()
        assert lines[0] == "t_us,flip_rate,analytic_p"
        assert len(lines) == 12
        first = lines[1].split(",")
        assert float(first[0]) == 0.0 and float(first[1]) == 0.0

    def test_seed_reproducible(self, tmp_path):
        for sub in ("x", "y"):
            main(["dephasing-curve", "--points", "5", "--shots", "1000",
                  "--seed", "4", "--out", str(tmp_path / sub)])
        assert ((tmp_path / "x/dephasing_curve.csv").read_bytes()
                == (tmp_path / "y/dephasing_curve.csv").read_bytes())

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("QTOKSIM_SEED", "4")
        main(["dephasing-curve", "--points", "5", "--shots", "1000",
              "--out", str(tmp_path / "env")])
        main(["dephasing-curve", "--points", "5", "--shots", "1000",
              "--seed", "4", "--out", str(tmp_path / "flag")])
        assert ((tmp_path / "env/dephasing_curve.csv").read_bytes()
                == (tmp_path / "flag/dephasing_curve.csv").read_bytes())

    def test_bad_points_exits_2(self):
        assert main(["dephasing-curve", "--points", "1"]) == 2


class TestUupufEstimateCommand:
    def test_grid_rows(self, tmp_path):
        rc = main(["uupuf-estimate", "--lambda", "2", "--epsilon-grid",
                   "0:0.3:0.05", "--trials", "40", "--seed", "2",
                   "--out", str(tmp_path / "e")])
        assert rc == 0
        lines = (tmp_path / "e/uupuf_estimates.csv").read_text().splitlines()
        assert lines[0] == "lambda,epsilon,delta,trials,rate,seed"
        assert len(lines) == 8  # header + 7 grid points


class TestQrpufCommands:
    def test_enroll_verify_file_roundtrip(self, tmp_path):
        rc = main(["qrpuf-enroll", "--lambda", "2", "--crt-size", "2",
                   "--seed", "6", "--out", str(tmp_path / "enroll")])
        assert rc == 0
        crt = json.loads((tmp_path / "enroll/crt.json").read_text())
        assert crt["lambda"] == 2 and len(crt["entries"]) == 2
        rc = main(["qrpuf-verify", "--crt", str(tmp_path / "enroll/crt.json"),
                   "--puf", str(tmp_path / "enroll/puf.json"),
                   "--responder", "honest", "--seed", "1",
                   "--out", str(tmp_path / "verify")])
        assert rc == 0
        doc = json.loads((tmp_path / "verify/verify.json").read_text())
        assert doc["accept"] is True and doc["observed_o"] == "00"

    def test_verify_honest_without_puf_exits_2(self, tmp_path):
        main(["qrpuf-enroll", "--lambda", "1", "--crt-size", "1", "--seed",
              "1", "--out", str(tmp_path / "e")])
        rc = main(["qrpuf-verify", "--crt", str(tmp_path / "e/crt.json"),
                   "--responder", "honest"])
        assert rc == 2


class TestOutputDiscipline:
    def test_no_out_flag_writes_nothing(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["hmp4-run", "--trials", "2", "--seed", "1"]) == 0
        assert list(tmp_path.iterdir()) == []

    def test_out_dir_contains_only_declared_files(self, tmp_path):
        out = tmp_path / "o"
        main(["dephasing-curve", "--points", "3", "--shots", "100",
              "--seed", "1", "--out", str(out)])
        assert sorted(p.name for p in out.iterdir()) == ["dephasing_curve.csv"]


class TestHmp4Command:
    def test_honest_run(self, tmp_path, capsys):
        rc = main(["hmp4-run", "--trials", "10", "--seed", "2",
                   "--out", str(tmp_path / "h")])
        assert rc == 0
        assert "hmp4" in capsys.readouterr().out
        metrics = json.loads((tmp_path / "h/metrics.json").read_text())
        assert metrics["accept_rate"] == 1.0

    def test_clone_adversary(self, tmp_path):
        rc = main(["hmp4-run", "--trials", "50", "--adversary", "token_clone",
                   "--seed", "3", "--out", str(tmp_path / "h")])
        assert rc == 0
        metrics = json.loads((tmp_path / "h/metrics.json").read_text())
        assert metrics["adversary_accept_rate"] < 0.5
