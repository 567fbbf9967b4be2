"""
Tests for ach/sampling.py - Differentiable Channel Sampling
"""

import math

import numpy as np
import pytest
from scipy import stats

from engine.exceptions import InvalidArgumentError
from engine.ops import sum_all, mul
from engine.tensor import Tape, Tensor
from ach.sampling import (
    SteAnchor,
    adjust_tau,
    adjust_tau_for_epoch,
    anneal_tau,
    gumbel_noise,
    hard_topk_ste,
    inference_select,
    module_stream,
    sample_gumbel,
    soft_probs,
    topk_indices,
)
from ach.types import AnnealSchedule, SelectionState
from tests.conftest import assert_mask_valid


class TestGumbel:
    """Tests for Gumbel noise."""

    @pytest.mark.unit
    def test_transform_values(self):
        """Test -log(-log(u)) at known points."""
        assert gumbel_noise(math.exp(-1.0)) == pytest.approx(0.0)
        np.testing.assert_allclose(gumbel_noise(np.array([0.5])), [-math.log(math.log(2.0))])

    @pytest.mark.unit
    def test_open_interval(self):
        """Test that u = 0 and u = 1 are rejected."""
        for u in (0.0, 1.0, -0.5):
            with pytest.raises(InvalidArgumentError, match="strictly inside"):
                gumbel_noise(u)

    @pytest.mark.unit
    def test_streams_are_independent_and_reproducible(self):
        """Test per-module streams."""
        a = sample_gumbel(module_stream(0, "ab1.ach"), (4,))
        b = sample_gumbel(module_stream(0, "ab1.ach"), (4,))
        c = sample_gumbel(module_stream(0, "ab2.ach"), (4,))
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)

    @pytest.mark.slow
    def test_moments(self):
        """Test mean and variance against the Gumbel(0, 1) distribution."""
        draws = sample_gumbel(np.random.default_rng(7), (200_000,))
        mean, var = stats.gumbel_r.stats(moments="mv")
        assert draws.mean() == pytest.approx(float(mean), abs=0.02)
        assert draws.var() == pytest.approx(float(var), abs=0.05)
        assert stats.kstest(draws[:20_000], "gumbel_r").pvalue > 1e-3

    @pytest.mark.unit
    def test_dtype(self):
        """Test the requested precision."""
        assert sample_gumbel(np.random.default_rng(0), (2, 3), dtype=np.float32).dtype == np.float32

    @pytest.mark.slow
    def test_gumbel_max_frequency(self):
        """Test P(channel 0 wins at k=1) = e / (e + 1) for scores (1, 0) at tau=1."""
        draws = 100_000
        xi = Tensor(np.tile([1.0, 0.0], (draws, 1)), np.float64)
        noise = sample_gumbel(np.random.default_rng(17), (draws, 2))
        _, idx = hard_topk_ste(soft_probs(xi, noise, 1.0), 1)
        freq = float(np.mean(idx[:, 0] == 0))
        assert freq == pytest.approx(math.e / (math.e + 1.0), abs=0.01)


class TestSoftProbs:
    """Tests for the tempered softmax."""

    @pytest.mark.unit
    def test_rows_sum_to_one(self, rng):
        """Test a distribution per row."""
        xi = Tensor(rng.standard_normal((3, 6)), np.float64)
        probs = soft_probs(xi, rng.standard_normal((3, 6)), 0.5)
        np.testing.assert_allclose(probs.data.sum(axis=-1), 1.0)
        assert np.all(probs.data > 0)

    @pytest.mark.unit
    def test_low_temperature_sharpens(self):
        """Test that smaller tau concentrates the mass."""
        xi = Tensor(np.array([[1.0, 2.0, 3.0]]), np.float64)
        assert soft_probs(xi, None, 0.1).data[0, 2] > soft_probs(xi, None, 4.0).data[0, 2]

    @pytest.mark.unit
    def test_invalid_tau(self):
        """Test that tau must be positive."""
        with pytest.raises(InvalidArgumentError):
            soft_probs(Tensor(np.zeros((1, 2))), None, 0.0)

    @pytest.mark.unit
    def test_near_one_hot_at_small_tau(self):
        """Test that tau=1e-3 puts more than 0.999 of the mass on the argmax."""
        rng = np.random.default_rng(4)
        xi = np.stack([rng.permutation(np.linspace(-1.0, 1.0, 8)) for _ in range(5)])
        probs = soft_probs(Tensor(xi, np.float64), None, 1e-3).data
        assert np.all(probs.max(axis=1) > 0.999)
        np.testing.assert_array_equal(probs.argmax(axis=1), xi.argmax(axis=1))


class TestHardTopk:
    """Tests for top-k selection and the straight-through estimator."""

    @pytest.mark.unit
    def test_indices_ascending(self):
        """Test the k largest positions in ascending order."""
        np.testing.assert_array_equal(topk_indices(np.array([0.1, 0.9, 0.3, 0.7]), 2), [1, 3])

    @pytest.mark.unit
    def test_ties_go_to_lower_index(self):
        """Test deterministic tie breaking."""
        np.testing.assert_array_equal(topk_indices(np.array([0.5, 0.5, 0.5]), 2), [0, 1])

    @pytest.mark.unit
    def test_k_range(self):
        """Test k outside [1, C]."""
        for k in (0, 5):
            with pytest.raises(InvalidArgumentError):
                topk_indices(np.zeros(4), k)

    @pytest.mark.unit
    def test_mask_exact(self, rng):
        """Test exactly k ones per row and matching indices."""
        probs = Tensor(rng.dirichlet(np.ones(8), size=5), np.float64)
        hard, idx = hard_topk_ste(probs, 3)
        assert_mask_valid(hard.data, 3)
        assert idx.shape == (5, 3)
        for row, sel in zip(hard.data, idx):
            assert set(np.flatnonzero(row)) == set(sel)

    @pytest.mark.unit
    def test_identity_gradient(self, rng):
        """Test that the gradient passes straight through to probs."""
        tape = Tape()
        probs = tape.leaf(rng.dirichlet(np.ones(6), size=2), "probs")
        hard, _ = hard_topk_ste(probs, 2)
        weights = rng.standard_normal((2, 6))
        tape.backward(sum_all(mul(hard, Tensor(weights, np.float64))))
        np.testing.assert_allclose(tape.grad(probs), weights)

    @pytest.mark.unit
    def test_anchor_reproduces_mask(self, rng):
        """Test that the anchored forward equals the hard mask at the anchor."""
        p = rng.dirichlet(np.ones(6), size=3)
        anchor = SteAnchor.capture(p, 2)
        hard, idx = hard_topk_ste(Tensor(p, np.float64), 2, anchor=anchor)
        np.testing.assert_array_equal(hard.data, anchor.hard)
        np.testing.assert_array_equal(idx, anchor.indices)

    @pytest.mark.unit
    def test_anchor_shape_mismatch(self, rng):
        """Test that an anchor for another shape is rejected."""
        anchor = SteAnchor.capture(np.ones((2, 4)) / 4, 2)
        with pytest.raises(InvalidArgumentError, match="Anchor shape"):
            hard_topk_ste(Tensor(np.ones((3, 4)) / 4), 2, anchor=anchor)

    @pytest.mark.unit
    def test_inference_select(self):
        """Test deterministic top-k of raw scores."""
        xi = np.array([[3.0, -1.0, 2.0, 0.0]])
        np.testing.assert_array_equal(inference_select(xi, 2), [[0, 2]])

    @pytest.mark.unit
    @pytest.mark.parametrize("shift", [-5.0, 0.5, 37.0])
    def test_mask_invariant_to_score_shift(self, rng, shift):
        """Test that adding a constant to every score leaves the mask unchanged."""
        xi = rng.standard_normal((50, 8))
        noise = sample_gumbel(rng, (50, 8))
        hard, idx = hard_topk_ste(soft_probs(Tensor(xi, np.float64), noise, 0.8), 3)
        shifted, shifted_idx = hard_topk_ste(soft_probs(Tensor(xi + shift, np.float64), noise, 0.8), 3)
        np.testing.assert_array_equal(hard.data, shifted.data)
        np.testing.assert_array_equal(idx, shifted_idx)

    @pytest.mark.unit
    def test_score_gradient_matches_softmax_jacobian(self, rng):
        """Test dL/dxi = J^T dL/dhard with J the tempered softmax Jacobian, 8 channels."""
        tau = 0.7
        xv = rng.standard_normal((4, 8))
        noise = sample_gumbel(rng, (4, 8))
        weights = rng.standard_normal((4, 8))
        tape = Tape()
        xi = tape.leaf(xv, "xi")
        probs = soft_probs(xi, noise, tau)
        hard, _ = hard_topk_ste(probs, 3)
        tape.backward(sum_all(mul(hard, Tensor(weights, np.float64))))
        p = probs.data
        expected = p * (weights - (p * weights).sum(axis=1, keepdims=True)) / tau
        np.testing.assert_allclose(tape.grad(xi), expected, rtol=1e-10, atol=1e-12)

    @pytest.mark.unit
    def test_noiseless_training_selection_matches_inference(self):
        """Test noise-free top-k of the softmax against top-k of raw scores over 1000 seeds."""
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            c = int(rng.integers(2, 17))
            k = int(rng.integers(1, c + 1))
            tau = float(np.exp(rng.uniform(np.log(0.01), np.log(4.0))))
            xi = rng.uniform(-2.0, 2.0, (3, c))
            _, idx = hard_topk_ste(soft_probs(Tensor(xi, np.float64), None, tau), k)
            np.testing.assert_array_equal(idx, inference_select(xi, k), err_msg=f"seed {seed}")


class TestAdjustTau:
    """Tests for adaptive temperature control."""

    @pytest.mark.unit
    def test_first_call_records_only(self):
        """Test that the first norm sets tau_hist without changing tau."""
        state = adjust_tau(SelectionState(k=2), 2.0)
        assert state.tau == 1.0
        assert state.tau_hist == 2.0

    @pytest.mark.unit
    def test_increase_and_decrease(self):
        """Test the (1 +/- alpha) update."""
        state = SelectionState(k=2, tau=1.0, tau_hist=1.0, alpha=0.1)
        adjust_tau(state, 2.0)
        assert state.tau == pytest.approx(1.1)
        adjust_tau(state, 1.0)
        assert state.tau == pytest.approx(1.1 * 0.9)

    @pytest.mark.unit
    def test_equal_norm_increases(self):
        """Test that an unchanged norm counts as an increase."""
        state = SelectionState(k=2, tau=1.0, tau_hist=3.0, alpha=0.5)
        assert adjust_tau(state, 3.0).tau == pytest.approx(1.5)

    @pytest.mark.unit
    def test_clamped(self):
        """Test the [tau_min, tau_max] bounds."""
        high = SelectionState(k=2, tau=3.99, tau_hist=1.0, alpha=0.5)
        assert adjust_tau(high, 5.0).tau == 4.0
        low = SelectionState(k=2, tau=0.011, tau_hist=1.0, alpha=0.5)
        assert adjust_tau(low, 0.5).tau == 0.01

    @pytest.mark.unit
    def test_random_walk_stays_in_bounds(self, rng):
        """Test many updates with arbitrary norms."""
        state = SelectionState(k=2, alpha=0.3)
        for norm in rng.exponential(size=500):
            adjust_tau(state, norm)
            assert state.tau_min <= state.tau <= state.tau_max

    @pytest.mark.unit
    def test_negative_norm(self):
        """Test that norms must be non-negative."""
        with pytest.raises(InvalidArgumentError):
            adjust_tau(SelectionState(k=2), -1.0)

    @pytest.mark.unit
    def test_documented_example(self):
        """Test tau=1, tau_hist=1, norm 2, alpha=0.01 gives tau=1.01 and tau_hist=2."""
        state = adjust_tau(SelectionState(k=2, tau=1.0, tau_hist=1.0, alpha=0.01), 2.0)
        assert state.tau == pytest.approx(1.01)
        assert state.tau_hist == 2.0

    @pytest.mark.unit
    def test_random_sequences_stay_in_bounds(self):
        """Test 10^4 random update sequences never leave [0.01, 4.0]."""
        rng = np.random.default_rng(99)
        for _ in range(10_000):
            state = SelectionState(k=2, tau=float(rng.uniform(0.01, 4.0)), alpha=float(rng.uniform(0.0, 0.9)))
            norms = rng.exponential(size=20) * rng.integers(0, 2, size=20)
            for norm in norms:
                adjust_tau(state, float(norm))
                assert 0.01 <= state.tau <= 4.0

    @pytest.mark.unit
    def test_epoch_mean_and_reset(self):
        """Test the per-epoch update uses the mean observed norm."""
        state = SelectionState(k=2, tau_hist=1.0, alpha=0.1)
        state.observe(1.0)
        state.observe(3.0)
        adjust_tau_for_epoch(state)
        assert state.tau_hist == 2.0
        assert state.tau == pytest.approx(1.1)
        assert state.grad_norms == []

    @pytest.mark.unit
    def test_epoch_without_observations(self):
        """Test that an empty epoch leaves the state alone."""
        state = adjust_tau_for_epoch(SelectionState(k=2, tau=0.5))
        assert state.tau == 0.5
        assert state.tau_hist == 0.0


class TestAnneal:
    """Tests for scheduled temperature decay."""

    @pytest.mark.unit
    @pytest.mark.parametrize("kind", ["linear", "exponential", "cosine"])
    def test_endpoints_and_monotone(self, kind):
        """Test tau_max at 0, tau_min at E and a non-increasing curve."""
        sched = AnnealSchedule(kind, tau_max=4.0, tau_min=0.01, epochs=20)
        taus = [anneal_tau(e, sched) for e in range(21)]
        assert taus[0] == 4.0
        assert taus[-1] == 0.01
        assert all(a >= b for a, b in zip(taus, taus[1:]))

    @pytest.mark.unit
    def test_midpoints(self):
        """Test the closed forms at e = E/2."""
        lin = AnnealSchedule("linear", tau_max=2.0, tau_min=1.0, epochs=10)
        exp = AnnealSchedule("exponential", tau_max=4.0, tau_min=1.0, epochs=10)
        cos = AnnealSchedule("cosine", tau_max=3.0, tau_min=1.0, epochs=10)
        assert anneal_tau(5, lin) == pytest.approx(1.5)
        assert anneal_tau(5, exp) == pytest.approx(2.0)
        assert anneal_tau(5, cos) == pytest.approx(2.0)

    @pytest.mark.unit
    def test_epoch_range(self):
        """Test that e outside [0, E] is rejected."""
        sched = AnnealSchedule("linear", epochs=5)
        with pytest.raises(InvalidArgumentError):
            anneal_tau(6, sched)

    @pytest.mark.unit
    def test_unknown_kind(self):
        """Test schedule name validation."""
        with pytest.raises(InvalidArgumentError, match="Unknown anneal"):
            AnnealSchedule("step")
