"""
Hadaptive - Test Configuration and Fixtures
Shared fixtures for all test modules.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

ROOT_DIR = Path(__file__).resolve().parent.parent
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from engine.tensor import Tensor  # noqa: E402
from harness.config import ProjectConfig, RunConfig  # noqa: E402


# ============================================================================
# Path Fixtures
# ============================================================================

@pytest.fixture
def temp_dir():
    """Create a temporary directory for test outputs."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def arch_spec_path():
    """Path to the shipped Hadaptive-Net-S architecture spec."""
    return ROOT_DIR / "configs" / "hadaptive_s.spec"


# ============================================================================
# Numeric Fixtures
# ============================================================================

@pytest.fixture
def rng():
    """Seeded generator so every test draws the same values."""
    return np.random.default_rng(1234)


@pytest.fixture
def features_f64(rng):
    """Small 64-bit feature map [2, 3, 4, 4]."""
    return Tensor(rng.standard_normal((2, 3, 4, 4)), np.float64)


@pytest.fixture
def ach_input_f64(rng):
    """ACH-sized 64-bit input [2, 8, 4, 4]."""
    return Tensor(rng.standard_normal((2, 8, 4, 4)), np.float64)


# ============================================================================
# Config Fixtures
# ============================================================================

@pytest.fixture
def tiny_config(temp_dir):
    """Project config with a few-epoch, few-sample demo run."""
    run = RunConfig(seed=3, epochs=2, batch=16, samples=32, ablations=True, out_dir=str(temp_dir / "runs"))
    return ProjectConfig(run=run)


# ============================================================================
# Markers
# ============================================================================

def pytest_configure(config):
    """Configure custom markers."""
    config.addinivalue_line("markers", "unit: Unit tests")
    config.addinivalue_line("markers", "integration: Integration tests")
    config.addinivalue_line("markers", "slow: Slow tests")


# ============================================================================
# Helper Functions
# ============================================================================

def numeric_grad(fn, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function of x (64-bit)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        plus = fn(x)
        flat[i] = orig - step
        minus = fn(x)
        flat[i] = orig
        gflat[i] = (plus - minus) / (2 * step)
    return grad


def assert_mask_valid(mask: np.ndarray, k: int):
    """Every row is 0/1 with exactly k ones."""
    assert set(np.unique(mask)).issubset({0.0, 1.0})
    assert np.all(mask.sum(axis=-1) == k)
