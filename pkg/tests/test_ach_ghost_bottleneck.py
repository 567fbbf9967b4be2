"""
Tests for ach/ghost.py and ach/bottleneck.py - Expansion Blocks
"""

import numpy as np
import pytest

from engine.exceptions import ConfigurationError, InvalidArgumentError
from engine.ops import sum_all
from engine.tensor import Tape, Tensor
from ach.bottleneck import AdaptiveBottleneck
from ach.ghost import GhostModule, ghost_forward
from ach.types import BlockSpec, GhostConfig


class TestGhostConfig:
    """Tests for ghost expansion settings."""

    @pytest.mark.unit
    def test_from_ratio(self):
        """Test half primaries, rounded up."""
        cfg = GhostConfig.from_ratio(5, 2.0)
        assert (cfg.c_out, cfg.primary, cfg.ghosts) == (10, 5, 5)
        assert GhostConfig.from_ratio(3, 3.0).primary == 5

    @pytest.mark.unit
    def test_too_many_ghosts(self):
        """Test the replication limit."""
        with pytest.raises(ConfigurationError, match="exceed"):
            GhostConfig(c_in=4, c_out=8, primary=2)
        assert GhostConfig(c_in=4, c_out=8, primary=2, replication=3).ghosts == 6

    @pytest.mark.unit
    def test_invalid(self):
        """Test kernel and width validation."""
        for kwargs in [dict(c_in=0, c_out=4, primary=2), dict(c_in=4, c_out=4, primary=5),
                       dict(c_in=4, c_out=4, primary=2, kernel=2)]:
            with pytest.raises(ConfigurationError):
                GhostConfig(**kwargs)


class TestGhostModule:
    """Tests for the ghost expansion."""

    @pytest.mark.unit
    def test_primaries_then_ghosts(self, features_f64):
        """Test that ghost g is the cheap transform of primary g mod s."""
        ghost = GhostModule(GhostConfig(c_in=3, c_out=5, primary=3), np.random.default_rng(0), dtype="f64")
        kernels = np.zeros((2, 3, 3))
        kernels[:, 1, 1] = [2.0, -1.0]
        ghost.cheap.assign(kernels)
        out = ghost.forward(features_f64).data
        primary = np.einsum("oc,nchw->nohw", ghost.primary.value.data, features_f64.data)
        assert out.shape == (2, 5, 4, 4)
        np.testing.assert_allclose(out[:, :3], primary)
        np.testing.assert_allclose(out[:, 3], 2.0 * primary[:, 0])
        np.testing.assert_allclose(out[:, 4], -primary[:, 1])

    @pytest.mark.unit
    def test_no_ghosts(self, features_f64):
        """Test that s == n is a plain pointwise conv."""
        ghost = GhostModule(GhostConfig(c_in=3, c_out=2, primary=2), np.random.default_rng(0), dtype="f64")
        assert ghost.cheap is None
        assert ghost.forward(features_f64).shape == (2, 2, 4, 4)

    @pytest.mark.unit
    def test_gradients_reach_both_weights(self, features_f64):
        """Test backward through primaries and ghosts."""
        ghost = GhostModule(GhostConfig(c_in=3, c_out=6, primary=3), np.random.default_rng(1), dtype="f64")
        tape = Tape()
        tape.backward(sum_all(ghost.forward(features_f64, tape)))
        assert np.any(ghost.primary.grad != 0)
        assert np.any(ghost.cheap.grad != 0)

    @pytest.mark.unit
    def test_validation(self, features_f64):
        """Test input width and missing cheap weights."""
        cfg = GhostConfig(c_in=3, c_out=4, primary=2)
        w = Tensor(np.ones((2, 3)), np.float64)
        with pytest.raises(InvalidArgumentError, match="missing"):
            ghost_forward(features_f64, cfg, w, None)
        with pytest.raises(InvalidArgumentError, match="expected"):
            ghost_forward(Tensor(np.ones((1, 2, 2, 2))), cfg, w, None)


class TestBlockSpec:
    """Tests for bottleneck rows."""

    @pytest.mark.unit
    def test_kind_normalized(self):
        """Test quoted and lower-case kinds."""
        assert BlockSpec(16, 16, "'hada'", 4).kind == "Hada"
        assert BlockSpec(16, 24, "GHOST", 2.0).kind == "Ghost"

    @pytest.mark.unit
    def test_hidden_and_residual(self):
        """Test hidden widths and the residual rule."""
        hada = BlockSpec(96, 96, "Hada", 16)
        assert hada.hidden_channels == 216
        assert hada.residual
        ghost = BlockSpec(16, 24, "Ghost", 3.0, stride=2)
        assert ghost.hidden_channels == 48
        assert not ghost.residual

    @pytest.mark.unit
    def test_invalid(self):
        """Test kind, stride and argument validation."""
        for args, kwargs in [((8, 8, "Conv", 2), {}), ((8, 8, "Hada", 2), {"stride": 3}),
                             ((8, 8, "Hada", 2.5), {}), ((8, 8, "Hada", 9), {}), ((8, 8, "Ghost", 0), {})]:
            with pytest.raises(ConfigurationError):
                BlockSpec(*args, **kwargs)


class TestAdaptiveBottleneck:
    """Tests for the bottleneck block."""

    @pytest.mark.unit
    def test_hada_block(self, rng):
        """Test output shape, hidden width and the residual path."""
        block = AdaptiveBottleneck(BlockSpec(8, 8, "Hada", 4), rng, dtype="f64")
        x = Tensor(rng.standard_normal((2, 8, 4, 4)), np.float64)
        tape = Tape()
        out = block.forward(x, tape)
        assert block.hidden_channels == 14
        assert out.shape == (2, 8, 4, 4)
        tape.backward(sum_all(out))
        assert np.any(block.proj.grad != 0)

    @pytest.mark.unit
    def test_hada_block_without_pointwise(self, rng):
        """Test that the ACH expansion can run without its 1x1 conv."""
        block = AdaptiveBottleneck(BlockSpec(6, 6, "Hada", 2), rng, dtype="f64", ach_pointwise=False)
        assert block.ach.weight is None
        assert block.hidden_channels == 7
        out = block.forward(Tensor(rng.standard_normal((2, 6, 4, 4)), np.float64), Tape())
        assert out.shape == (2, 6, 4, 4)

    @pytest.mark.unit
    def test_ghost_block_stride2(self, rng):
        """Test spatial halving and no residual."""
        block = AdaptiveBottleneck(BlockSpec(4, 6, "Ghost", 2.0, stride=2), rng, dtype="f64", act="hardswish")
        out = block.forward(Tensor(rng.standard_normal((1, 4, 5, 5)), np.float64), Tape())
        assert out.shape == (1, 6, 3, 3)
        assert block.ghost.out_channels == 8

    @pytest.mark.unit
    def test_eval_mode(self, rng):
        """Test that eval forward is off the tape."""
        block = AdaptiveBottleneck(BlockSpec(8, 8, "Hada", 3), rng, dtype="f64")
        x = Tensor(rng.standard_normal((2, 8, 4, 4)), np.float64)
        assert not block.forward(x, Tape(), training=False).requires_grad

    @pytest.mark.unit
    def test_configuration_errors(self, rng):
        """Test unknown activations and even kernels."""
        with pytest.raises(ConfigurationError, match="activation"):
            AdaptiveBottleneck(BlockSpec(8, 8, "Hada", 3), rng, act="gelu")
        with pytest.raises(ConfigurationError, match="odd"):
            AdaptiveBottleneck(BlockSpec(8, 8, "Hada", 3, kernel=4), rng)
