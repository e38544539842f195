"""
Tests for the command-line entry point.

Each test works on a small scenario file and a temporary output directory;
exit codes are 0 on success, 1 on configuration errors, 2 on usage errors.
"""

import pandas as pd
import pytest
import yaml

from crnt_sim.cli import EXIT_CONFIG, EXIT_OK, main, parse_seeds
from crnt_sim.core.errors import ConfigError


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "mini.yaml"
    path.write_text(yaml.safe_dump({
        "name": "mini",
        "kind": "freeway",
        "segments": [{"id": "main", "start": [0.0, 0.0], "end": [400.0, 0.0], "lanes": 2}],
        "spawn": [{"segment": "main", "count": 10, "speed_kmh": [20.0, 40.0]}],
    }))
    return path


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"


def cli(*args) -> int:
    return main([str(arg) for arg in args])


class TestValidateConfig:
    """validate-config never runs the simulation"""

    def test_valid(self, scenario_file, capsys):
        assert cli("validate-config", "--scenario", scenario_file) == EXIT_OK
        assert "config OK: scenario=mini vehicles=10" in capsys.readouterr().out

    def test_shipped_config(self, capsys):
        assert cli("validate-config", "--config", "evaluation") == EXIT_OK
        assert "scenario=freeway vehicles=200" in capsys.readouterr().out

    def test_threshold_out_of_range(self, tmp_path, capsys):
        config = tmp_path / "bad.yaml"
        config.write_text(yaml.safe_dump({"cp_threshold_pct": 150}))
        assert cli("validate-config", "--config", config) == EXIT_CONFIG
        assert "cp_threshold_pct" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        config = tmp_path / "typo.yaml"
        config.write_text(yaml.safe_dump({"beacon_period": 100}))
        assert cli("validate-config", "--config", config) == EXIT_CONFIG
        assert "beacon_period" in capsys.readouterr().err

    def test_missing_config(self, tmp_path, capsys):
        assert cli("validate-config", "--config", tmp_path / "absent.yaml") == EXIT_CONFIG
        assert "not found" in capsys.readouterr().err

    def test_unknown_scenario(self, capsys):
        assert cli("validate-config", "--scenario", "atlantis") == EXIT_CONFIG
        assert "presets" in capsys.readouterr().err

    def test_observer_must_exist(self, scenario_file, capsys):
        assert cli("validate-config", "--scenario", scenario_file, "--observer", 99) == EXIT_CONFIG
        assert "observer_id" in capsys.readouterr().err


class TestRun:
    """Single-mode runs"""

    def test_run_writes_report(self, scenario_file, out_dir):
        assert cli("run", "--scenario", scenario_file, "--duration-s", 2, "--seed", 5, "--out-dir", out_dir) == EXIT_OK
        assert (out_dir / "mini_crnt_5.csv").exists()

    def test_run_is_reproducible(self, scenario_file, tmp_path):
        for name in ("a", "b"):
            assert cli("run", "--scenario", scenario_file, "--duration-s", 2, "--mode", "baseline",
                       "--out-dir", tmp_path / name) == EXIT_OK
        first = (tmp_path / "a" / "mini_baseline_1.csv").read_bytes()
        assert first == (tmp_path / "b" / "mini_baseline_1.csv").read_bytes()

    def test_optional_outputs(self, scenario_file, out_dir):
        assert cli("run", "--scenario", scenario_file, "--duration-s", 2, "--event-log", "--radio-log",
                   "--dump-crnt", "--out-dir", out_dir) == EXIT_OK
        assert (out_dir / "mini_crnt_1_events.jsonl").stat().st_size > 0
        assert (out_dir / "mini_crnt_1_radio.csv").exists()
        assert (out_dir / "mini_crnt_1_crnt.csv").exists()

    def test_unknown_flag(self, scenario_file):
        with pytest.raises(SystemExit) as info:
            cli("run", "--scenario", scenario_file, "--warp-speed")
        assert info.value.code == 2


class TestCompareAndSweep:
    """Paired baseline/CRNT runs"""

    def test_compare_writes_three_files(self, scenario_file, out_dir):
        assert cli("compare", "--scenario", scenario_file, "--duration-s", 2, "--seed", 3,
                   "--out-dir", out_dir) == EXIT_OK
        names = sorted(path.name for path in out_dir.iterdir())
        assert names == ["mini_baseline_3.csv", "mini_cmp_3.csv", "mini_crnt_3.csv"]

    def test_compare_is_byte_identical(self, scenario_file, tmp_path):
        for name in ("a", "b"):
            cli("compare", "--scenario", scenario_file, "--duration-s", 2, "--out-dir", tmp_path / name)
        for file_name in ("mini_baseline_1.csv", "mini_crnt_1.csv", "mini_cmp_1.csv"):
            assert (tmp_path / "a" / file_name).read_bytes() == (tmp_path / "b" / file_name).read_bytes()

    def test_sweep(self, scenario_file, out_dir):
        assert cli("sweep", "--scenario", scenario_file, "--duration-s", 1, "--seeds", "2,1",
                   "--workers", 1, "--out-dir", out_dir) == EXIT_OK
        assert (out_dir / "mini_sweep.csv").exists()
        assert (out_dir / "mini_cmp_1.csv").exists()
        assert (out_dir / "mini_cmp_2.csv").exists()

    def test_sweep_in_worker_pool(self, scenario_file, tmp_path):
        """Two workers may finish in any order; the summary stays in seed order and matches a serial sweep"""
        pooled, serial = tmp_path / "pooled", tmp_path / "serial"
        for workers, target in ((2, pooled), (1, serial)):
            assert cli("sweep", "--scenario", scenario_file, "--duration-s", 1, "--seeds", "2,1",
                       "--workers", workers, "--out-dir", target) == EXIT_OK
        summary = pd.read_csv(pooled / "mini_sweep.csv", comment="#")
        assert list(summary["seed"]) == [1, 2]
        assert (pooled / "mini_sweep.csv").read_bytes() == (serial / "mini_sweep.csv").read_bytes()

    def test_bad_seed_list(self, scenario_file, out_dir, capsys):
        assert cli("sweep", "--scenario", scenario_file, "--seeds", "1,x", "--out-dir", out_dir) == EXIT_CONFIG
        assert "--seeds" in capsys.readouterr().err


class TestParseSeeds:
    """Seed list parsing"""

    def test_order_kept(self):
        assert parse_seeds("3, 1,2") == [3, 1, 2]

    @pytest.mark.parametrize("raw", ["", "1,1", "a"])
    def test_rejected(self, raw):
        with pytest.raises(ConfigError):
            parse_seeds(raw)
