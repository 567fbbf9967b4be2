"""
Harness - Configuration
Project defaults loaded from config.yaml into validated dataclasses.
"""

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from engine.exceptions import ConfigurationError
from engine.tensor import resolve_dtype

from ach.types import AnnealKind, NormVariant

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config.yaml"
TAU_SCHEDULES = ("adaptive",) + tuple(k.value for k in AnnealKind)


@dataclass
class EngineSettings:
    """
    Tensor engine defaults.

    Attributes:
        dtype: Forward precision, f32 or f64
        debug: Check every recorded op for NaN/Inf
        bn_eps: Batch-norm epsilon
        bn_momentum: Running-statistics momentum
    """
    dtype: str = "f32"
    debug: bool = False
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        try:
            resolve_dtype(self.dtype)
        except ValueError as e:
            raise ConfigurationError(str(e)) from e
        if self.bn_eps <= 0:
            raise ConfigurationError(f"bn_eps must be positive, got {self.bn_eps}")
        if not 0.0 <= self.bn_momentum <= 1.0:
            raise ConfigurationError(f"bn_momentum must be 0-1, got {self.bn_momentum}")


@dataclass
class SamplingSettings:
    """
    Selection and temperature defaults.

    Attributes:
        tau_init: Initial temperature
        tau_min: Lower clamp
        tau_max: Upper clamp
        alpha: Adaptation rate of the gradient-norm rule
        uniform_eps: Uniform draws come from (eps, 1 - eps)
        eca_kernel: ECA channel-conv width
        norm_variant: softsign, sigmoid, algebraic or batchnorm
    """
    tau_init: float = 1.0
    tau_min: float = 0.01
    tau_max: float = 4.0
    alpha: float = 0.01
    uniform_eps: float = 1e-12
    eca_kernel: int = 3
    norm_variant: str = "softsign"

    def __post_init__(self):
        if not 0 < self.tau_min <= self.tau_init <= self.tau_max:
            raise ConfigurationError(
                f"Need 0 < tau_min <= tau_init <= tau_max, got {self.tau_min}, {self.tau_init}, {self.tau_max}"
            )
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be non-negative, got {self.alpha}")
        if not 0 < self.uniform_eps < 0.5:
            raise ConfigurationError(f"uniform_eps must be in (0, 0.5), got {self.uniform_eps}")
        if self.eca_kernel < 1 or self.eca_kernel % 2 == 0:
            raise ConfigurationError(f"eca_kernel must be odd, got {self.eca_kernel}")
        NormVariant.parse(self.norm_variant)


@dataclass
class SchedulerSettings:
    """
    Kernel benchmark defaults.

    Attributes:
        warmups: Untimed runs per cell
        repeats: Timed runs per cell (median reported)
        memory_cap_mb: Cells above this footprint are skipped
        workers: Worker count (None = hardware parallelism)
        strategies: Strategies to time
        grid: Grid entries in name=values form
    """
    warmups: int = 2
    repeats: int = 7
    memory_cap_mb: int = 512
    workers: Optional[int] = None
    strategies: List[str] = field(default_factory=lambda: ["naive", "direct", "parity"])
    grid: List[str] = field(default_factory=lambda: ["batch=1,8", "channels=16..64", "spatial=8..32"])

    def __post_init__(self):
        if self.warmups < 0:
            raise ConfigurationError(f"warmups must be non-negative, got {self.warmups}")
        if self.repeats < 5:
            raise ConfigurationError(f"repeats must be at least 5, got {self.repeats}")
        if self.memory_cap_mb < 1:
            raise ConfigurationError(f"memory_cap_mb must be positive, got {self.memory_cap_mb}")
        if self.workers is not None and self.workers < 1:
            raise ConfigurationError(f"workers must be positive, got {self.workers}")


@dataclass
class GradCheckSettings:
    """
    Finite-difference suite defaults.

    Attributes:
        step: Central-difference step
        tol: Relative-error tolerance in 64-bit
        tol_f32: Relaxed tolerance in 32-bit
        seeds: Random instances per check
    """
    step: float = 1e-5
    tol: float = 1e-4
    tol_f32: float = 1e-2
    seeds: int = 20

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigurationError(f"step must be positive, got {self.step}")
        if not 0 < self.tol <= self.tol_f32:
            raise ConfigurationError(f"Need 0 < tol <= tol_f32, got {self.tol}, {self.tol_f32}")
        if self.seeds < 1:
            raise ConfigurationError(f"seeds must be positive, got {self.seeds}")


@dataclass
class RunConfig:
    """
    Training demo run.

    Attributes:
        seed: Seed for data, init and noise
        epochs: Training epochs
        batch: Mini-batch size
        lr: SGD learning rate
        momentum: SGD momentum
        samples: Synthetic dataset size
        tau_schedule: adaptive, linear, exponential or cosine
        ablations: Also train the ablation variants
        out_dir: Output directory
    """
    seed: int = 0
    epochs: int = 50
    batch: int = 32
    lr: float = 0.05
    momentum: float = 0.9
    samples: int = 512
    tau_schedule: str = "adaptive"
    ablations: bool = True
    out_dir: str = "runs"

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be positive, got {self.epochs}")
        if self.batch < 2:
            raise ConfigurationError(f"batch must be at least 2, got {self.batch}")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.samples < self.batch:
            raise ConfigurationError(f"samples ({self.samples}) must be >= batch ({self.batch})")
        if self.tau_schedule not in TAU_SCHEDULES:
            raise ConfigurationError(f"tau_schedule must be one of {', '.join(TAU_SCHEDULES)}, got {self.tau_schedule}")


@dataclass
class ProjectConfig:
    """All settings, grouped by concern."""
    engine: EngineSettings = field(default_factory=EngineSettings)
    sampling: SamplingSettings = field(default_factory=SamplingSettings)
    scheduler: SchedulerSettings = field(default_factory=SchedulerSettings)
    gradcheck: GradCheckSettings = field(default_factory=GradCheckSettings)
    run: RunConfig = field(default_factory=RunConfig)
    version: str = "1.0.0"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_overrides(self, seed: Optional[int] = None, dtype: Optional[str] = None,
                       workers: Optional[int] = None, out: Optional[str] = None) -> "ProjectConfig":
        """Copy with CLI global flags applied (None keeps the file value)."""
        cfg = self
        if seed is not None:
            cfg = replace(cfg, run=replace(cfg.run, seed=seed))
        if dtype is not None:
            cfg = replace(cfg, engine=replace(cfg.engine, dtype=dtype))
        if workers is not None:
            cfg = replace(cfg, scheduler=replace(cfg.scheduler, workers=workers))
        if out is not None:
            cfg = replace(cfg, run=replace(cfg.run, out_dir=out))
        return cfg


_SECTIONS = {
    "engine": EngineSettings,
    "sampling": SamplingSettings,
    "scheduler": SchedulerSettings,
    "gradcheck": GradCheckSettings,
    "run": RunConfig,
}


def _build(cls, values: Dict[str, Any], section: str):
    if values is None:
        return cls()
    if not isinstance(values, dict):
        raise ConfigurationError(f"Section '{section}' must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigurationError(f"Unknown keys in '{section}': {', '.join(unknown)}")
    return cls(**values)


def config_from_dict(data: Dict[str, Any]) -> ProjectConfig:
    data = dict(data or {})
    version = str(data.pop("version", ProjectConfig.version))
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigurationError(f"Unknown config sections: {', '.join(unknown)}")
    sections = {name: _build(cls, data.get(name), name) for name, cls in _SECTIONS.items()}
    return ProjectConfig(version=version, **sections)


def load_config(path: Optional[Union[str, Path]] = None) -> ProjectConfig:
    """
    Load config.yaml (or another file); defaults when it does not exist.

    Raises:
        ConfigurationError: Invalid YAML or invalid values
    """
    path = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    if not path.exists():
        logger.info("No config at %s, using defaults", path)
        return ProjectConfig()
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Invalid YAML in {path}: {e}") from e
    return config_from_dict(data or {})
