"""
Tests for costs/arch_spec.py and costs/report.py - Architecture Accounting
"""

import pytest

from engine.exceptions import ConfigurationError, InvalidArgumentError, SpecParseError
from ach.types import BlockSpec
from costs.arch_spec import ab_layers, layer_kind, load_arch_spec, parse_arch_spec
from costs.report import REPORT_COLUMNS, ab_costs, model_report, report_rows
from costs.types import CnaLayer, FnLayer

PARAM_TARGET = 2.10e6
MAC_TARGET = 131e6


class TestParseArchSpec:
    """Tests for the layer grammar."""

    @pytest.mark.unit
    def test_shipped_spec(self, arch_spec_path):
        """Test the shipped architecture file."""
        spec = load_arch_spec(arch_spec_path)
        assert spec.name == "hadaptive_s"
        assert [layer_kind(layer) for layer in spec.layers].count("AB") == 11
        assert isinstance(spec.layers[0], CnaLayer)
        assert isinstance(spec.layers[-1], FnLayer)
        assert sum(b.kind == "Hada" for b in ab_layers(spec)) == 6

    @pytest.mark.unit
    def test_comments_and_commas(self):
        """Test blank lines, comments and comma separators."""
        spec = parse_arch_spec("# header\n\nCNA 3, 8, 3, 1, BN, HS  # stem\nAB 8 8 Hada 4 3 1\n")
        assert spec.lines == [3, 4]
        assert spec.layers[1] == BlockSpec(8, 8, "Hada", 4, 3, 1)

    @pytest.mark.unit
    @pytest.mark.parametrize("text,line,fragment", [
        ("XYZ 1 2", 1, "Unknown layer type"),
        ("CNA 3 32 2 2 BN", 1, "takes 6 values"),
        ("# c\n\nCNA 3 32 z 2 BN None", 3, "kernel must be an integer"),
        ("CNA 3 32 2 2 BN None\nAB 48 64 Ghost 4.0 3 1", 2, "does not match previous output"),
        ("FN 8 10 16 0.2\nCNA 10 10 1 1 BN None", 2, "FN must be the last"),
        ("CNA 3 8 1 1 BN None\nAB 8 8 Hada 9 3 1", 2, "Hada selects 9 of 8"),
        ("CNA 3 8 1 1 LN None", 1, "norm must be BN or None"),
    ])
    def test_errors_carry_line_numbers(self, text, line, fragment):
        """Test that parse errors name the offending line."""
        with pytest.raises(SpecParseError, match=fragment) as excinfo:
            parse_arch_spec(text)
        assert excinfo.value.line_number == line
        assert str(excinfo.value).startswith(f"line {line}:")

    @pytest.mark.unit
    def test_empty_spec(self):
        """Test that a spec needs at least one layer."""
        with pytest.raises(SpecParseError, match="no layers"):
            parse_arch_spec("# nothing\n")

    @pytest.mark.unit
    def test_missing_file(self, temp_dir):
        """Test a path that does not exist."""
        with pytest.raises(ConfigurationError, match="not found"):
            load_arch_spec(temp_dir / "missing.spec")


class TestLayerCosts:
    """Tests for per-item accounting."""

    @pytest.mark.unit
    def test_single_cna(self):
        """Test params 448 and MACs over the 112 x 112 output."""
        report = model_report(parse_arch_spec("CNA 3 32 2 2 BN None"), input_size=224)
        (item,) = report.layers
        assert item.name == "0.CNA"
        assert item.params == 448
        assert item.macs == 3 * 32 * 4 * 112 * 112
        assert item.flops == 2 * item.macs
        assert item.out_shape == (32, 112, 112)

    @pytest.mark.unit
    def test_hada_block_items(self):
        """Test the ACH core, ECA, DyNorm, depthwise and projection items."""
        items, h = ab_costs(BlockSpec(96, 96, "Hada", 16, 5, 1), "6", 14)
        costs = {c.name: (c.params, c.macs) for c in items}
        assert h == 14
        assert costs["6.AB.ach"] == (96 * 96 + 192, (96 * 96 + 120) * 196)
        assert costs["6.AB.eca"] == (4, 96 * 196 + 96 * 3)
        assert costs["6.AB.dynorm"] == (360, 2 * 120 * 196)
        assert costs["6.AB.dw"] == (216 * 25 + 432, 216 * 25 * 196)
        assert costs["6.AB.proj"] == (216 * 96 + 192, 216 * 96 * 196)

    @pytest.mark.unit
    def test_ghost_block_stride(self):
        """Test a strided Ghost block halves the map."""
        items, h = ab_costs(BlockSpec(32, 64, "Ghost", 4.0, 2, 2), "3", 56)
        assert h == 28
        assert items[0].name == "3.AB.ghost"
        assert items[0].params == 32 * 64 + 128 + 64 * 9 + 128
        assert items[-1].out_shape == (64, 28, 28)

    @pytest.mark.unit
    def test_head(self):
        """Test the pooled head and classifier."""
        report = model_report(parse_arch_spec("FN 960 100 1280 0.3"), input_size=7)
        pool, hidden, classifier = report.layers
        assert pool.macs == 960 * 49
        assert hidden.params == 960 * 1280 + 1280
        assert classifier.params == 1280 * 100 + 100
        assert classifier.out_shape == (100, 1, 1)

    @pytest.mark.unit
    def test_invalid_resolution(self):
        """Test that the input size must be positive."""
        with pytest.raises(InvalidArgumentError):
            model_report(parse_arch_spec("CNA 3 8 1 1 BN None"), input_size=0)


class TestModelReport:
    """Tests for whole-model totals."""

    @pytest.mark.unit
    def test_budget(self, arch_spec_path):
        """Test params within 20% of 2.10M and MACs within 25% of 131M at 224."""
        report = model_report(arch_spec_path)
        assert abs(report.total_params - PARAM_TARGET) <= 0.20 * PARAM_TARGET
        assert abs(report.total_macs - MAC_TARGET) <= 0.25 * MAC_TARGET
        assert report.total_flops == 2 * report.total_macs

    @pytest.mark.unit
    def test_totals_are_sums(self, arch_spec_path):
        """Test integer totals over the items and the final 1 x 1 map."""
        report = model_report(arch_spec_path)
        assert report.total_params == sum(c.params for c in report.layers)
        assert all(isinstance(c.macs, int) for c in report.layers)
        assert report.layers[-1].out_shape == (100, 1, 1)

    @pytest.mark.unit
    def test_rows_and_dict(self, arch_spec_path):
        """Test CSV rows and the JSON form."""
        report = model_report(arch_spec_path)
        rows = report_rows(report)
        assert len(rows) == len(report.layers) + 1
        assert all(len(row) == len(REPORT_COLUMNS) for row in rows)
        assert rows[-1][:3] == ["total", "", report.total_params]
        data = report.to_dict()
        assert data["total_macs"] == report.total_macs
        assert data["layers"][0]["out_shape"] == [32, 112, 112]
