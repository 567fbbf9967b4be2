"""
Harness - Training Demo
Trains the demo network on the synthetic dataset with adaptive (or
annealed) temperatures, and reruns the selection/normalization ablations
under the same seed.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from engine.exceptions import ConfigurationError, DivergenceError, InvalidStateError
from engine.layers import SGD
from engine.ops import cross_entropy
from engine.tensor import Tape, Tensor, resolve_dtype

from ach.sampling import adjust_tau_for_epoch, anneal_tau
from ach.types import AnnealKind, AnnealSchedule, NormVariant, SelectionMode

from .config import ProjectConfig
from .csvio import write_csv, write_json
from .dataset import DemoDataset, INFORMATIVE_CHANNELS, iter_batches, make_demo_dataset
from .network import DemoNet, build_demo_net

logger = logging.getLogger(__name__)

TARGET_ACCURACY = 0.95

# ablation name -> network overrides
VARIANTS: Dict[str, Dict[str, object]] = {
    "learnable": {},
    "fixed": {"selection": SelectionMode.FIXED},
    "free": {"selection": SelectionMode.FREE},
    "batchnorm": {"norm_variant": NormVariant.BATCHNORM},
}


@dataclass
class EpochMetrics:
    """
    One epoch of one run.

    Attributes:
        epoch: 1-based epoch number
        loss: Mean training loss
        accuracy: Accuracy of the training-mode (noisy selection) predictions
        eval_accuracy: Accuracy of the eval-mode network on the training data;
            the convergence target is measured on this one
        taus: Temperature of every ACH layer after the epoch's update
    """
    epoch: int
    loss: float
    accuracy: float
    eval_accuracy: float
    taus: List[float]


@dataclass
class RunResult:
    """Outcome of training one variant."""
    variant: str
    seed: int
    layer_names: List[str]
    epochs: List[EpochMetrics] = field(default_factory=list)
    histograms: List[np.ndarray] = field(default_factory=list)

    @property
    def final_accuracy(self) -> float:
        return self.epochs[-1].eval_accuracy if self.epochs else 0.0

    @property
    def epochs_to_target(self) -> Optional[int]:
        """First epoch whose eval-mode accuracy reaches TARGET_ACCURACY, None if never."""
        for m in self.epochs:
            if m.eval_accuracy >= TARGET_ACCURACY:
                return m.epoch
        return None

    def dominant_channels(self, layer: int = 0, k: int = 2) -> List[int]:
        """The k most selected channels of an ACH layer over the last epoch (ties to the lower id)."""
        counts = self.histograms[layer]
        order = np.argsort(-counts, kind="stable")
        return sorted(int(i) for i in order[:k])

    def found_informative(self) -> bool:
        return bool(self.histograms) and self.dominant_channels(0, len(INFORMATIVE_CHANNELS)) == list(INFORMATIVE_CHANNELS)

    def all_taus(self) -> List[float]:
        return [t for m in self.epochs for t in m.taus]


def _parameter_norms(net: DemoNet) -> Dict[str, float]:
    return {name: float(np.linalg.norm(p.value.data)) for name, p in net.named_parameters()}


def _dump_divergence(net: DemoNet, variant: str, epoch: int, step: int, out_dir: Optional[Path]) -> Optional[Path]:
    if out_dir is None:
        return None
    payload = {
        "variant": variant,
        "epoch": epoch,
        "step": step,
        "taus": {layer.name: layer.state.tau for layer in net.ach_layers},
        "parameter_norms": _parameter_norms(net),
    }
    return write_json(Path(out_dir) / f"divergence_{variant}.json", payload)


def _accuracy(logits: np.ndarray, labels: np.ndarray) -> int:
    return int(np.sum(np.argmax(logits, axis=1) == labels))


def evaluate(net: DemoNet, ds: DemoDataset, batch: int, dtype) -> float:
    """Eval-mode accuracy over the whole dataset."""
    correct = 0
    for start in range(0, len(ds), batch):
        xb, yb = ds.images[start:start + batch], ds.labels[start:start + batch]
        correct += _accuracy(net.forward(Tensor(xb, dtype), training=False).data, yb)
    return correct / len(ds)


def train_run(
    cfg: ProjectConfig,
    dataset: Optional[DemoDataset] = None,
    variant: str = "learnable",
    out_dir: Optional[Union[str, Path]] = None,
) -> RunResult:
    """
    Train one variant of the demo network.

    Per step the gradient norm reaching every ACH layer's scores is recorded;
    per epoch the mean norm drives adjust_tau (or the anneal schedule sets tau).

    Raises:
        ConfigurationError: Unknown variant
        DivergenceError: Non-finite loss (a JSON dump is written to out_dir first)
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"Unknown variant '{variant}'. Use one of: {', '.join(VARIANTS)}")
    run, sampling, engine = cfg.run, cfg.sampling, cfg.engine
    dt = resolve_dtype(engine.dtype)
    ds = dataset if dataset is not None else make_demo_dataset(run.samples, seed=run.seed)

    options = {"norm_variant": NormVariant.parse(sampling.norm_variant), "selection": SelectionMode.ECA}
    options.update(VARIANTS[variant])
    net = build_demo_net(seed=run.seed, dtype=dt, eca_kernel=sampling.eca_kernel,
                         tau=sampling.tau_init, **options)
    net.configure_batch_norm(engine.bn_eps, engine.bn_momentum)
    for layer in net.ach_layers:
        layer.state.alpha = sampling.alpha
        layer.state.tau_min = sampling.tau_min
        layer.state.tau_max = sampling.tau_max
        layer.uniform_eps = sampling.uniform_eps

    schedule = None
    if run.tau_schedule != "adaptive":
        schedule = AnnealSchedule(AnnealKind(run.tau_schedule), tau_max=sampling.tau_init,
                                  tau_min=sampling.tau_min, epochs=run.epochs)

    opt = SGD(net.parameters(), lr=run.lr, momentum=run.momentum)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(run.seed, spawn_key=(1,)))
    result = RunResult(variant=variant, seed=run.seed, layer_names=[l.name for l in net.ach_layers])
    out = Path(out_dir) if out_dir is not None else None

    for epoch in range(1, run.epochs + 1):
        if schedule is not None:
            for layer in net.ach_layers:
                layer.state.tau = anneal_tau(epoch - 1, schedule)
        hist = [np.zeros(layer.cfg.c_in, dtype=np.int64) for layer in net.ach_layers]
        total_loss, correct, seen = 0.0, 0, 0

        for step, (xb, yb) in enumerate(iter_batches(ds, run.batch, shuffle_rng)):
            tape = Tape(debug=engine.debug)
            logits = net.forward(Tensor(xb, dt), tape, training=True)
            loss = cross_entropy(logits, yb)
            value = loss.item()
            if not np.isfinite(value):
                dump = _dump_divergence(net, variant, epoch, step, out)
                raise DivergenceError(f"{variant}: loss is {value} at epoch {epoch}, step {step}"
                                      + (f" (state dumped to {dump})" if dump else ""))
            opt.zero_grad()
            tape.backward(loss)
            for layer, counts in zip(net.ach_layers, hist):
                g = layer.score_grad_norm(tape)
                if g is not None:
                    layer.state.observe(g)
                counts += np.bincount(np.ravel(layer.state.indices), minlength=layer.cfg.c_in)
            opt.step()

            total_loss += value * len(yb)
            correct += _accuracy(logits.data, yb)
            seen += len(yb)

        if schedule is None:
            for layer in net.ach_layers:
                adjust_tau_for_epoch(layer.state)
        taus = [layer.state.tau for layer in net.ach_layers]
        if any(not sampling.tau_min <= t <= sampling.tau_max for t in taus):
            raise InvalidStateError(f"{variant}: temperature left [{sampling.tau_min}, {sampling.tau_max}]: {taus}")

        metrics = EpochMetrics(epoch=epoch, loss=total_loss / seen, accuracy=correct / seen,
                               eval_accuracy=evaluate(net, ds, run.batch, dt), taus=taus)
        result.epochs.append(metrics)
        result.histograms = hist
        logger.debug("%s epoch %d loss=%.4f acc=%.3f eval=%.3f tau=%s", variant, epoch,
                     metrics.loss, metrics.accuracy, metrics.eval_accuracy,
                     ",".join(f"{t:.4f}" for t in taus))

    logger.info("%s seed=%d: final accuracy %.3f, dominant channels %s", variant, run.seed,
                result.final_accuracy, result.dominant_channels() if result.histograms else [])
    return result


# ============================================================================
# Demo command
# ============================================================================

@dataclass
class DemoReport:
    runs: List[RunResult]
    files: Dict[str, Path] = field(default_factory=dict)

    def run(self, variant: str) -> RunResult:
        for r in self.runs:
            if r.variant == variant:
                return r
        raise KeyError(variant)


def metrics_rows(runs: Sequence[RunResult]) -> List[list]:
    width = max((len(r.layer_names) for r in runs), default=0)
    rows = []
    for r in runs:
        for m in r.epochs:
            taus = [f"{t:.6f}" for t in m.taus] + [""] * (width - len(m.taus))
            rows.append([r.variant, r.seed, m.epoch, f"{m.loss:.6f}", f"{m.accuracy:.4f}",
                         f"{m.eval_accuracy:.4f}"] + taus)
    return rows


def histogram_rows(runs: Sequence[RunResult]) -> List[list]:
    return [
        [r.variant, r.seed, name, channel, int(count)]
        for r in runs
        for name, counts in zip(r.layer_names, r.histograms)
        for channel, count in enumerate(counts)
    ]


def train_demo(cfg: ProjectConfig, variants: Optional[Sequence[str]] = None,
               out_dir: Optional[Union[str, Path]] = None) -> DemoReport:
    """
    Train the learnable variant (plus the ablations when enabled) and write
    metrics.csv, histogram.csv and run.json to out_dir.
    """
    if variants is None:
        variants = list(VARIANTS) if cfg.run.ablations else ["learnable"]
    out = Path(out_dir if out_dir is not None else cfg.run.out_dir)
    ds = make_demo_dataset(cfg.run.samples, seed=cfg.run.seed)
    runs = [train_run(cfg, ds, variant, out) for variant in variants]

    width = max((len(r.layer_names) for r in runs), default=0)
    header = ["variant", "seed", "epoch", "loss", "accuracy", "eval_accuracy"] + [f"tau_{i}" for i in range(width)]
    report = DemoReport(runs=runs)
    report.files["metrics"] = write_csv(out / "metrics.csv", header, metrics_rows(runs), seed=cfg.run.seed,
                                        notes=[f"tau_schedule={cfg.run.tau_schedule}"])
    report.files["histogram"] = write_csv(out / "histogram.csv", ["variant", "seed", "layer", "channel", "count"],
                                          histogram_rows(runs), seed=cfg.run.seed,
                                          notes=["selection counts over the final epoch"])
    report.files["run"] = write_json(out / "run.json", {
        "config": cfg.to_dict(),
        "runs": {
            r.variant: {
                "final_accuracy": r.final_accuracy,
                "epochs_to_target": r.epochs_to_target,
                "dominant_channels": r.dominant_channels() if r.histograms else [],
            }
            for r in runs
        },
    })
    return report


def seed_sweep(cfg: ProjectConfig, seeds: Sequence[int],
               variants: Sequence[str] = ("learnable", "fixed")) -> Dict[str, List[RunResult]]:
    """Train each variant once per seed (paired comparisons share data and init seed)."""
    sweep: Dict[str, List[RunResult]] = {v: [] for v in variants}
    for seed in seeds:
        seeded = cfg.with_overrides(seed=seed)
        ds = make_demo_dataset(seeded.run.samples, seed=seed)
        for v in variants:
            sweep[v].append(train_run(seeded, ds, v))
    return sweep


def converges_no_slower(a: RunResult, b: RunResult) -> bool:
    """True when run a reaches the target no later than run b (never = infinitely late)."""
    inf = float("inf")
    ea = a.epochs_to_target if a.epochs_to_target is not None else inf
    eb = b.epochs_to_target if b.epochs_to_target is not None else inf
    return ea <= eb
