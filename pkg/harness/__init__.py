"""
Hadaptive - Harness Module
Configuration, artifacts, the training demo, gradient-check suite and report bundle
"""

from .config import (
    DEFAULT_CONFIG_PATH,
    TAU_SCHEDULES,
    EngineSettings,
    SamplingSettings,
    SchedulerSettings,
    GradCheckSettings,
    RunConfig,
    ProjectConfig,
    config_from_dict,
    load_config,
)
from .csvio import TOOL_NAME, TOOL_VERSION, comment_lines, write_csv, read_csv, write_json
from .dataset import (
    NUM_CLASSES,
    INFORMATIVE_CHANNELS,
    DemoDataset,
    make_demo_dataset,
    load_npz_dataset,
    iter_batches,
)
from .network import DemoNet, build_demo_net, demo_blocks
from .train import (
    VARIANTS,
    TARGET_ACCURACY,
    EpochMetrics,
    RunResult,
    DemoReport,
    train_run,
    train_demo,
    seed_sweep,
    converges_no_slower,
)
from .gradcheck_suite import CHECKS, SCOPES, CheckSpec, SuiteReport, register, run_suite, select_checks
from .bundle import Bundle, report_all, pairmap_rows, bench_rows, environment_versions

__all__ = [
    # Configuration
    'DEFAULT_CONFIG_PATH',
    'TAU_SCHEDULES',
    'EngineSettings',
    'SamplingSettings',
    'SchedulerSettings',
    'GradCheckSettings',
    'RunConfig',
    'ProjectConfig',
    'config_from_dict',
    'load_config',
    # Artifacts
    'TOOL_NAME',
    'TOOL_VERSION',
    'comment_lines',
    'write_csv',
    'read_csv',
    'write_json',
    # Demo data and network
    'NUM_CLASSES',
    'INFORMATIVE_CHANNELS',
    'DemoDataset',
    'make_demo_dataset',
    'load_npz_dataset',
    'iter_batches',
    'DemoNet',
    'build_demo_net',
    'demo_blocks',
    # Training
    'VARIANTS',
    'TARGET_ACCURACY',
    'EpochMetrics',
    'RunResult',
    'DemoReport',
    'train_run',
    'train_demo',
    'seed_sweep',
    'converges_no_slower',
    # Gradient checks
    'CHECKS',
    'SCOPES',
    'CheckSpec',
    'SuiteReport',
    'register',
    'run_suite',
    'select_checks',
    # Bundle
    'Bundle',
    'report_all',
    'pairmap_rows',
    'bench_rows',
    'environment_versions',
]
