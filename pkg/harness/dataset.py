"""
Harness - Synthetic Dataset
Four classes separable by the product of two latent channels, hidden
among distractor channels.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Tuple, Union

import numpy as np

from engine.exceptions import ConfigurationError, InvalidArgumentError

logger = logging.getLogger(__name__)

NUM_CLASSES = 4
IMAGE_CHANNELS = 6
IMAGE_SIZE = 16
INFORMATIVE_CHANNELS = (0, 1)

# class id -> (sign, scale) linking channel 1 to channel 0
CLASS_LINKS = {0: (1.0, 0.5), 1: (1.0, 2.0), 2: (-1.0, 0.5), 3: (-1.0, 2.0)}


@dataclass
class DemoDataset:
    """
    Images [N, C, 16, 16] with labels in {0..3}.

    Channel 0 is a random field u, channel 1 is sign * scale * u plus noise,
    every other channel is independent noise. The class is only visible in
    how channels 0 and 1 co-vary, i.e. in their product.
    """
    images: np.ndarray
    labels: np.ndarray
    seed: int

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.shape[1] < len(INFORMATIVE_CHANNELS):
            raise InvalidArgumentError(
                f"Images must be [N, C, H, W] with C >= {len(INFORMATIVE_CHANNELS)}, got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise InvalidArgumentError(f"{self.labels.shape[0]} labels for {self.images.shape[0]} images")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES):
            raise InvalidArgumentError(f"Labels must be in [0, {NUM_CLASSES})")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def channels(self) -> int:
        return int(self.images.shape[1])


def make_demo_dataset(samples: int = 512, seed: int = 0, size: int = IMAGE_SIZE,
                      noise: float = 0.1, dtype=np.float32, channels: int = IMAGE_CHANNELS) -> DemoDataset:
    """Balanced synthetic dataset (labels cycle through the classes before shuffling)."""
    if samples < NUM_CLASSES:
        raise InvalidArgumentError(f"Need at least {NUM_CLASSES} samples, got {samples}")
    if channels <= len(INFORMATIVE_CHANNELS):
        raise InvalidArgumentError(f"Need at least one distractor channel, got {channels} channels")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(samples) % NUM_CLASSES)
    links = np.array([CLASS_LINKS[int(c)] for c in labels])
    sign, gain = links[:, 0], links[:, 1]

    u = rng.standard_normal((samples, size, size))
    images = np.empty((samples, channels, size, size))
    images[:, 0] = u
    images[:, 1] = (sign * gain)[:, None, None] * u + noise * rng.standard_normal((samples, size, size))
    images[:, 2:] = rng.standard_normal((samples, channels - 2, size, size))
    return DemoDataset(images=images.astype(dtype), labels=labels.astype(np.intp), seed=seed)


def load_npz_dataset(path: Union[str, Path], dtype=np.float32) -> DemoDataset:
    """External dataset hook: an .npz with 'images' [N, C, H, W] and 'labels' [N]."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Dataset not found: {path}")
    with np.load(path) as data:
        if "images" not in data or "labels" not in data:
            raise ConfigurationError(f"{path} must contain 'images' and 'labels'")
        return DemoDataset(images=data["images"].astype(dtype),
                           labels=data["labels"].astype(np.intp), seed=-1)


def iter_batches(ds: DemoDataset, batch: int, rng: np.random.Generator,
                 shuffle: bool = True) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Mini-batches; a trailing batch of one sample is merged into the previous one."""
    n = len(ds)
    order = rng.permutation(n) if shuffle else np.arange(n)
    starts = list(range(0, n, batch))
    if len(starts) > 1 and n - starts[-1] < 2:
        starts.pop()
    for i, start in enumerate(starts):
        stop = starts[i + 1] if i + 1 < len(starts) else n
        idx = order[start:stop]
        yield ds.images[idx], ds.labels[idx]
