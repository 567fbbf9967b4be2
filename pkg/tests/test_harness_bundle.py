"""
Tests for harness/bundle.py - Report Bundle
"""

import json
from dataclasses import replace

import pytest

import harness.bundle as bundle_module
from engine.exceptions import SchedulerError
from harness.bundle import PAIRMAP_COLUMNS, bench_rows, environment_versions, pairmap_rows, report_all
from harness.config import ProjectConfig
from harness.csvio import read_csv
from kernels.types import BenchRecord


@pytest.fixture
def small_config(temp_dir):
    """Config with a one-cell benchmark grid."""
    cfg = ProjectConfig()
    scheduler = replace(cfg.scheduler, grid=["batch=1", "channels=4", "spatial=2"], repeats=5, warmups=0, workers=2)
    return replace(cfg, scheduler=scheduler, run=replace(cfg.run, out_dir=str(temp_dir)))


class TestRows:
    """Tests for row builders."""

    @pytest.mark.unit
    def test_pairmap_rows(self):
        """Test one row per pair per size."""
        rows = pairmap_rows([3, 4])
        assert len(rows) == 3 + 6
        assert rows[0] == [3, 0, 0, 1]
        assert rows[-1] == [4, 5, 2, 3]

    @pytest.mark.unit
    def test_bench_rows(self):
        """Test skipped cells have an empty median."""
        rows = bench_rows([BenchRecord(1, 4, 2, "naive", 0.5, "abc"),
                           BenchRecord(1, 4, 2, "parity", float("nan"), skipped=True)])
        assert rows[0] == [1, 4, 2, "naive", "0.500000000", "abc", 0]
        assert rows[1][4] == ""
        assert rows[1][6] == 1

    @pytest.mark.unit
    def test_versions(self):
        """Test the recorded package versions."""
        assert {"hadaptive", "python", "numpy", "scipy", "pyyaml"} <= set(environment_versions())


class TestReportAll:
    """Tests for the bundle command."""

    @pytest.mark.integration
    def test_all_parts(self, small_config, temp_dir):
        """Test that every file is written and listed in the manifest."""
        bundle = report_all(small_config)
        assert bundle.ok
        assert set(bundle.files) == {"curves", "pairmap", "bench", "manifest"}

        _, header, rows = read_csv(bundle.files["pairmap"])
        assert header == PAIRMAP_COLUMNS
        assert len(rows) == 16 * 15 // 2 + 32 * 31 // 2

        _, _, rows = read_csv(bundle.files["bench"])
        assert len(rows) == 3
        assert len({row[5] for row in rows}) == 1

        manifest = json.loads((temp_dir / "manifest.json").read_text())
        assert manifest["workers"] == 2
        assert manifest["seed"] == 0
        assert manifest["failures"] == {}
        assert manifest["files"]["curves"] == "curves.csv"

    @pytest.mark.integration
    def test_failed_part_is_recorded(self, small_config, temp_dir, monkeypatch):
        """Test that one failing part does not stop the others."""
        def broken(*args, **kwargs):
            raise SchedulerError("parity output differs")

        monkeypatch.setattr(bundle_module, "benchmark_grid", broken)
        bundle = report_all(small_config)
        assert not bundle.ok
        assert bundle.failures == {"bench": "parity output differs"}
        assert (temp_dir / "curves.csv").exists()
        manifest = json.loads((temp_dir / "manifest.json").read_text())
        assert manifest["failures"] == {"bench": "parity output differs"}
        assert "bench" not in manifest["files"]
