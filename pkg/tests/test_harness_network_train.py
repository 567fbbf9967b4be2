"""
Tests for harness/network.py and harness/train.py - Demo Network and Training
"""

import json
from dataclasses import replace

import numpy as np
import pytest

import harness.train as train
from engine.exceptions import ConfigurationError, DivergenceError
from engine.layers import BatchNorm
from engine.tensor import Tape, Tensor
from ach.types import BlockSpec
from harness.config import ProjectConfig
from harness.csvio import read_csv
from harness.dataset import IMAGE_CHANNELS
from harness.network import DemoNet, build_demo_net, demo_blocks
from harness.train import (
    TARGET_ACCURACY,
    EpochMetrics,
    RunResult,
    converges_no_slower,
    seed_sweep,
    train_demo,
    train_run,
)


def _result(accuracies, variant="learnable"):
    epochs = [EpochMetrics(i + 1, 1.0, acc, acc, [1.0]) for i, acc in enumerate(accuracies)]
    return RunResult(variant=variant, seed=0, layer_names=["ab0.ach"], epochs=epochs)


class TestDemoNet:
    """Tests for the demo network."""

    @pytest.mark.unit
    def test_default_blocks(self):
        """Test a single ACH block reading the image channels."""
        blocks = demo_blocks()
        assert [(b.kind, b.c_in, int(b.arg)) for b in blocks] == [("Hada", IMAGE_CHANNELS, 2)]
        net = build_demo_net(seed=0, dtype="f64")
        assert [layer.name for layer in net.ach_layers] == ["ab0.ach"]

    @pytest.mark.unit
    def test_selection_sees_image_channels(self):
        """Test that the demo ACH layer has no pointwise conv and a per-channel stem."""
        net = build_demo_net(seed=0, dtype="f64")
        layer = net.ach_layers[0]
        assert not layer.cfg.pointwise
        assert layer.weight is None
        assert not any(name.endswith(".pw") for name, _ in net.named_parameters())
        assert net.stem.shape == (IMAGE_CHANNELS, 3, 3)
        assert build_demo_net(seed=0, ach_pointwise=True).ach_layers[0].weight is not None

    @pytest.mark.unit
    def test_forward_shapes(self, rng):
        """Test logits [N, 4] in training and eval mode."""
        net = build_demo_net(seed=0, dtype="f64")
        x = Tensor(rng.standard_normal((2, IMAGE_CHANNELS, 8, 8)), np.float64)
        assert net.forward(x, Tape()).shape == (2, 4)
        out = net.forward(x, Tape(), training=False)
        assert out.shape == (2, 4)
        assert not out.requires_grad

    @pytest.mark.unit
    def test_configure_batch_norm(self):
        """Test that every batch norm gets the engine settings."""
        net = build_demo_net(seed=0)
        net.configure_batch_norm(1e-3, 0.5)
        norms = [m for m in net.modules() if isinstance(m, BatchNorm)]
        assert norms
        assert all(m.state.eps == 1e-3 and m.state.momentum == 0.5 for m in norms)

    @pytest.mark.unit
    def test_same_seed_same_weights(self):
        """Test deterministic initialization."""
        a, b = build_demo_net(seed=3), build_demo_net(seed=3)
        for pa, pb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(pa.value.data, pb.value.data)

    @pytest.mark.unit
    def test_arch_file(self, temp_dir):
        """Test loading blocks from a file and rejecting other rows."""
        path = temp_dir / "tiny.spec"
        path.write_text("AB 3 3 Hada 3 3 1\n")
        assert len(build_demo_net(arch=path).ach_layers) == 1
        path.write_text("CNA 3 3 1 1 BN None\nAB 3 3 Hada 3 3 1\n")
        with pytest.raises(ConfigurationError, match="only contain AB"):
            demo_blocks(path)

    @pytest.mark.unit
    def test_invalid_blocks(self):
        """Test empty stacks and a wrong input width."""
        with pytest.raises(ConfigurationError):
            DemoNet([])
        with pytest.raises(ConfigurationError, match="6 channels"):
            DemoNet([BlockSpec(4, 4, "Hada", 2)])


class TestRunResult:
    """Tests for run summaries."""

    @pytest.mark.unit
    def test_epochs_to_target(self):
        """Test the first epoch at or above the target."""
        assert _result([0.5, TARGET_ACCURACY, 0.99]).epochs_to_target == 2
        assert _result([0.5, 0.6]).epochs_to_target is None
        assert _result([0.5, 0.97]).final_accuracy == 0.97

    @pytest.mark.unit
    def test_target_uses_eval_accuracy(self):
        """Test that noisy training-mode accuracy does not count towards the target."""
        epochs = [EpochMetrics(1, 1.0, 0.99, 0.6, [1.0]), EpochMetrics(2, 1.0, 0.7, 0.97, [1.0])]
        result = RunResult(variant="learnable", seed=0, layer_names=["ab0.ach"], epochs=epochs)
        assert result.epochs_to_target == 2
        assert result.final_accuracy == 0.97

    @pytest.mark.unit
    def test_dominant_channels(self):
        """Test the most selected channels with ties to the lower id."""
        result = _result([0.5])
        result.histograms = [np.array([5, 9, 9, 1, 0, 2])]
        assert result.dominant_channels() == [1, 2]
        assert not result.found_informative()
        result.histograms = [np.array([9, 9, 1, 1, 9, 0])]
        assert result.found_informative()

    @pytest.mark.unit
    def test_converges_no_slower(self):
        """Test the paired convergence comparison."""
        fast, slow, never = _result([0.96]), _result([0.5, 0.96]), _result([0.5, 0.5])
        assert converges_no_slower(fast, slow)
        assert not converges_no_slower(slow, fast)
        assert converges_no_slower(slow, never)
        assert converges_no_slower(never, never)


class TestTrainRun:
    """Tests for training one variant."""

    @pytest.mark.integration
    def test_tiny_run(self, tiny_config):
        """Test metrics, temperature bounds and histogram totals."""
        result = train_run(tiny_config)
        assert [m.epoch for m in result.epochs] == [1, 2]
        assert all(np.isfinite(m.loss) for m in result.epochs)
        assert all(0.0 <= m.accuracy <= 1.0 for m in result.epochs)
        assert all(0.01 <= t <= 4.0 for t in result.all_taus())
        assert len(result.histograms) == 1
        assert result.histograms[0].shape == (IMAGE_CHANNELS,)
        assert result.histograms[0].sum() == tiny_config.run.samples * 2

    @pytest.mark.integration
    def test_deterministic(self, tiny_config):
        """Test that one seed gives identical runs."""
        a, b = train_run(tiny_config), train_run(tiny_config)
        assert [m.loss for m in a.epochs] == [m.loss for m in b.epochs]
        assert a.all_taus() == b.all_taus()

    @pytest.mark.integration
    def test_fixed_selection_keeps_tau(self, tiny_config):
        """Test that a fixed subset sees no score gradients."""
        result = train_run(tiny_config, variant="fixed")
        assert set(result.all_taus()) == {tiny_config.sampling.tau_init}

    @pytest.mark.integration
    def test_linear_schedule(self, tiny_config):
        """Test scheduled temperatures from tau_init towards tau_min."""
        cfg = replace(tiny_config, run=replace(tiny_config.run, tau_schedule="linear"))
        result = train_run(cfg)
        assert result.epochs[0].taus == [1.0]
        assert result.epochs[1].taus[0] == pytest.approx(1.0 - 0.99 * 0.5)

    @pytest.mark.unit
    def test_unknown_variant(self, tiny_config):
        """Test variant validation."""
        with pytest.raises(ConfigurationError, match="Unknown variant"):
            train_run(tiny_config, variant="dropout")

    @pytest.mark.unit
    def test_divergence_dump(self, tiny_config, temp_dir, monkeypatch):
        """Test that a non-finite loss writes the state and raises."""
        monkeypatch.setattr(train, "cross_entropy", lambda logits, labels: Tensor(np.array(np.nan)))
        with pytest.raises(DivergenceError, match="epoch 1, step 0"):
            train_run(tiny_config, out_dir=temp_dir)
        dump = json.loads((temp_dir / "divergence_learnable.json").read_text())
        assert dump["epoch"] == 1
        assert set(dump["taus"]) == {"ab0.ach"}
        assert "head.weight" in dump["parameter_norms"]

    @pytest.mark.slow
    def test_learns_informative_channels_over_seeds(self):
        """Test selection, target accuracy and paired convergence on seeds 0..9."""
        sweep = seed_sweep(ProjectConfig(), seeds=range(10))
        learnable, fixed = sweep["learnable"], sweep["fixed"]
        assert sum(r.found_informative() for r in learnable) >= 8
        assert sum(r.epochs_to_target is not None and r.epochs_to_target <= 50 for r in learnable) >= 8
        assert sum(converges_no_slower(a, b) for a, b in zip(learnable, fixed)) >= 8
        assert all(0.01 <= t <= 4.0 for r in learnable for t in r.all_taus())


class TestTrainDemo:
    """Tests for the demo command outputs."""

    @pytest.mark.integration
    def test_outputs(self, tiny_config, temp_dir):
        """Test metrics.csv, histogram.csv and run.json for every variant."""
        report = train_demo(tiny_config, out_dir=temp_dir)
        assert [r.variant for r in report.runs] == ["learnable", "fixed", "free", "batchnorm"]

        comments, header, rows = read_csv(report.files["metrics"])
        assert comments[0].endswith("seed=3")
        assert header == ["variant", "seed", "epoch", "loss", "accuracy", "eval_accuracy", "tau_0"]
        assert len(rows) == 8

        _, header, rows = read_csv(report.files["histogram"])
        assert header == ["variant", "seed", "layer", "channel", "count"]
        assert len(rows) == 4 * IMAGE_CHANNELS

        summary = json.loads(report.files["run"].read_text())
        assert set(summary["runs"]) == {"learnable", "fixed", "free", "batchnorm"}
        assert summary["config"]["run"]["seed"] == 3

    @pytest.mark.integration
    def test_without_ablations(self, tiny_config, temp_dir):
        """Test that only the learnable variant runs when ablations are off."""
        cfg = replace(tiny_config, run=replace(tiny_config.run, ablations=False))
        report = train_demo(cfg, out_dir=temp_dir)
        assert [r.variant for r in report.runs] == ["learnable"]
        with pytest.raises(KeyError):
            report.run("fixed")

    @pytest.mark.integration
    def test_seed_sweep(self, tiny_config):
        """Test paired runs per seed."""
        sweep = seed_sweep(tiny_config, seeds=[0, 1])
        assert set(sweep) == {"learnable", "fixed"}
        assert [r.seed for r in sweep["learnable"]] == [0, 1]
