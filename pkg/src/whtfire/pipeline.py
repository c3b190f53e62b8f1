"""Training, fine-tuning, evaluation, full-image detection, and benchmarks.

Every run is deterministic given its seed: the train/validation split, the
per-epoch shuffles, and the batch order all come from one seeded generator,
so identical invocations produce byte-identical checkpoints and records.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arch import Network, build_toy_net, forward_classify, network_backward, network_forward
from .dataio import (
    Manifest,
    SynthConfig,
    checkpoint_load,
    checkpoint_save,
    load_manifest,
    ppm_read,
    ppm_write,
    synth_dataset,
)
from .errors import (
    ArchMismatchError,
    DegenerateGridError,
    EmptyDatasetError,
    LengthNotPowerOfTwoError,
    SingleClassDatasetError,
    SizeTooLargeError,
)
from .fwht import fwht, hadamard_matrix
from .nn import SgdOptimizer, TrainConfig, softmax_cross_entropy
from .tiling import GridSpec, render_overlay, score_grid, score_grid_json, whole_image_score

FINETUNE_LEARNING_RATE = 0.001
VALIDATION_FRACTION = 0.2
DECISION_THRESHOLD = 0.5
MAX_BENCH_SIZE = 1 << 22
NAIVE_BENCH_LIMIT = 1 << 12

# Reference evaluation rows (percent) bundled for metric cross-checks:
# (model, transfer, accuracy, precision, recall, f1, parameter count).
REPORTED_RESULTS = (
    ("EfficientNet-B5", False, 71.2, 69.8, 70.4, 70.4, 28_361_274),
    ("SwinTransformer", False, 72.2, 71.9, 71.4, 71.9, 27_520_892),
    ("ResNet50", False, 71.4, 70.9, 69.2, 70.1, 23_512_146),
    ("HTMA-ResNet50", False, 69.6, 69.0, 66.4, 67.6, 11_797_826),
    ("WHT-ResNet50", False, 77.2, 78.2, 76.0, 77.1, 20_580_290),
    ("EfficientNet-B5", True, 88.6, 89.4, 87.0, 88.2, 28_361_274),
    ("SwinTransformer", True, 91.1, 91.9, 89.7, 90.8, 27_520_892),
    ("ResNet50", True, 88.9, 90.0, 86.5, 88.2, 23_512_146),
    ("HTMA-ResNet50", True, 87.9, 88.1, 87.5, 87.8, 11_797_826),
    ("WHT-ResNet50", True, 91.6, 92.9, 90.17, 91.5, 20_580_290),
)


# -- metrics -------------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    zero_division: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "zero_division": list(self.zero_division),
        }


def compute_metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy, precision, recall, and their harmonic-mean F1.

    Zero-denominator cases yield 0.0 and are named in ``zero_division``.
    """
    total = cm.total
    if total == 0:
        raise EmptyDatasetError("confusion matrix is empty")
    flags = []
    accuracy = (cm.tp + cm.tn) / total
    if cm.tp + cm.fp > 0:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision, flags = 0.0, flags + ["precision"]
    if cm.tp + cm.fn > 0:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall, flags = 0.0, flags + ["recall"]
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1, flags = 0.0, flags + ["f1"]
    return Metrics(accuracy, precision, recall, f1, tuple(flags))


def f1_from_precision_recall(precision: float, recall: float) -> float:
    """Harmonic mean, the same arithmetic ``compute_metrics`` applies."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def format_metrics_table(metrics: Metrics, cm: ConfusionMatrix) -> str:
    rows = [
        ("accuracy", metrics.accuracy),
        ("precision", metrics.precision),
        ("recall", metrics.recall),
        ("f1", metrics.f1),
    ]
    lines = [f"{name:<10} {value:8.4f}" for name, value in rows]
    lines.append(
        f"tp={cm.tp} fp={cm.fp} fn={cm.fn} tn={cm.tn} total={cm.total}"
    )
    if metrics.zero_division:
        lines.append("zero-denominator: " + ", ".join(metrics.zero_division))
    return "\n".join(lines)


# -- dataset handling ------------------------------------------------------------

def load_dataset(manifest: Manifest):
    """All images (float64 [0,1]) and their labels; validates non-emptiness."""
    if len(manifest) == 0:
        raise EmptyDatasetError("manifest has no entries")
    images = [ppm_read(p) for p in manifest.paths()]
    labels = manifest.labels()
    return images, labels


def _as_manifest(manifest) -> Manifest:
    if isinstance(manifest, Manifest):
        return manifest
    return load_manifest(manifest)


def fire_probability(net: Network, image: np.ndarray) -> float:
    return float(forward_classify(net, image)[1])


def confusion_from_scores(labels: np.ndarray, scores: np.ndarray,
                          threshold: float = DECISION_THRESHOLD) -> ConfusionMatrix:
    preds = scores >= threshold
    pos = labels == 1
    return ConfusionMatrix(
        tp=int(np.sum(preds & pos)),
        fp=int(np.sum(preds & ~pos)),
        fn=int(np.sum(~preds & pos)),
        tn=int(np.sum(~preds & ~pos)),
    )


def _evaluate_arrays(net: Network, images, labels: np.ndarray):
    scores = np.array([fire_probability(net, img) for img in images])
    cm = confusion_from_scores(labels, scores)
    return compute_metrics(cm), cm


def evaluate(net_or_checkpoint, manifest):
    """Patch-level metrics at the 0.5 decision threshold."""
    net = (
        net_or_checkpoint
        if isinstance(net_or_checkpoint, Network)
        else checkpoint_load(net_or_checkpoint)
    )
    manifest = _as_manifest(manifest)
    images, labels = load_dataset(manifest)
    images = [img.astype(net.dtype) for img in images]
    return _evaluate_arrays(net, images, labels)


# -- training ---------------------------------------------------------------------

@dataclass
class RunRecord:
    config: TrainConfig
    variant: str
    epochs: list[dict] = field(default_factory=list)
    final_checkpoint: str = ""
    transfer_source: str | None = None
    early_stop_reason: str | None = None

    def as_dict(self) -> dict:
        return {
            "config": {
                "epochs": self.config.epochs,
                "learning_rate": self.config.learning_rate,
                "momentum": self.config.momentum,
                "batch_size": self.config.batch_size,
                "seed": self.config.seed,
            },
            "variant": self.variant,
            "epochs": self.epochs,
            "final_checkpoint": self.final_checkpoint,
            "transfer_source": self.transfer_source,
            "early_stop_reason": self.early_stop_reason,
        }


def _clamp_thresholds(params: dict[str, np.ndarray]) -> None:
    for name, value in params.items():
        if name.endswith(".lambda"):
            np.maximum(value, 0.0, out=value)


def _run_training(net: Network, images, labels: np.ndarray, config: TrainConfig,
                  variant: str, out_dir: Path, frozen: frozenset[str] = frozenset(),
                  transfer_source: str | None = None):
    both = set(np.unique(labels))
    if both != {0, 1}:
        raise SingleClassDatasetError(
            f"training needs both classes, manifest has labels {sorted(both)}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images = [img.astype(net.dtype) for img in images]
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(images))
    n_val = max(1, int(round(VALIDATION_FRACTION * len(images))))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    opt = SgdOptimizer(config.learning_rate, config.momentum, frozen)
    record = RunRecord(config, variant, transfer_source=transfer_source)
    for epoch in range(1, config.epochs + 1):
        order = train_idx[rng.permutation(len(train_idx))]
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            grads = {name: np.zeros_like(p) for name, p in net.parameters.items()}
            for idx in batch:
                logits, outputs, caches = network_forward(net, images[idx])
                loss, dlogits = softmax_cross_entropy(logits, int(labels[idx]))
                sample_grads = network_backward(net, caches, outputs, dlogits)
                for name in grads:
                    grads[name] += sample_grads[name]
                losses.append(loss)
            inv = net.dtype.type(1.0 / len(batch))
            for name in grads:
                grads[name] *= inv
            opt.step(net.parameters, grads)
            _clamp_thresholds(net.parameters)
        val_metrics, _ = _evaluate_arrays(
            net, [images[i] for i in val_idx], labels[val_idx]
        )
        record.epochs.append({
            "epoch": epoch,
            "train_loss": float(np.mean(losses)) if losses else None,
            "val": val_metrics.as_dict(),
        })
    ckpt_path = out_dir / "checkpoint.whtc"
    metadata = {
        "epoch": str(config.epochs),
        "learning_rate": repr(config.learning_rate),
        "momentum": repr(config.momentum),
        "batch_size": str(config.batch_size),
        "variant": variant,
    }
    if transfer_source:
        metadata["transfer_source"] = transfer_source
    checkpoint_save(net, metadata, ckpt_path)
    record.final_checkpoint = str(ckpt_path)
    (out_dir / "run.json").write_text(
        json.dumps(record.as_dict(), indent=2) + "\n"
    )
    return record, net, ckpt_path


def train(manifest, variant: str, config: TrainConfig, out_dir, *,
          width: int = 8, input_size: int = 32, dtype=np.float32,
          threshold_trainable: bool = False):
    """Train a toy variant from scratch; returns (RunRecord, Network, path)."""
    manifest = _as_manifest(manifest)
    images, labels = load_dataset(manifest)
    net = build_toy_net(variant, width, input_size, seed=config.seed,
                        dtype=dtype, threshold_trainable=threshold_trainable)
    return _run_training(net, images, labels, config, variant, Path(out_dir))


def finetune(source_checkpoint, manifest, config: TrainConfig, out_dir, *,
             freeze_stem: bool = False, variant: str | None = None):
    """Continue training from a source checkpoint on a new manifest."""
    net = checkpoint_load(source_checkpoint)
    source_variant = {"toy-conv": "conv-baseline", "toy-wht": "wht"}[
        net.descriptor.name
    ]
    if variant is not None and variant != source_variant:
        raise ArchMismatchError(
            f"checkpoint holds variant {source_variant!r}, requested {variant!r}"
        )
    manifest = _as_manifest(manifest)
    images, labels = load_dataset(manifest)
    frozen = frozenset({"stem.weight"}) if freeze_stem else frozenset()
    return _run_training(
        net, images, labels, config, source_variant, Path(out_dir),
        frozen=frozen, transfer_source=str(source_checkpoint),
    )


# -- detection -----------------------------------------------------------------

def detect(net_or_checkpoint, image_path, threshold: float = DECISION_THRESHOLD,
           out_overlay=None, out_json=None, draw_scores: bool = False):
    """Score a full frame block-by-block; returns (ScoreGrid, detected)."""
    net = (
        net_or_checkpoint
        if isinstance(net_or_checkpoint, Network)
        else checkpoint_load(net_or_checkpoint)
    )
    image = ppm_read(image_path)
    block = net.descriptor.input_size
    spec = GridSpec(image.shape[0], image.shape[1], block, block)
    try:
        grid = score_grid(net, image, spec, threshold)
    except DegenerateGridError:
        grid = whole_image_score(net, image, spec, threshold)
    if out_overlay is not None:
        Path(out_overlay).parent.mkdir(parents=True, exist_ok=True)
        ppm_write(render_overlay(image, grid, draw_scores), out_overlay)
    if out_json is not None:
        out_json = Path(out_json)
        out_json.parent.mkdir(parents=True, exist_ok=True)
        payload = score_grid_json(grid, str(image_path))
        out_json.write_text(json.dumps(payload, indent=2) + "\n")
    return grid, grid.any_detection


# -- transfer experiment -----------------------------------------------------------

def transfer_experiment(seed: int, workdir, *, variant: str = "wht",
                        width: int = 8, input_size: int = 32, epochs: int = 25,
                        source_count: int = 48, target_count: int = 12,
                        eval_count: int = 40, source_contrast: float = 0.9,
                        target_contrast: float = 0.25) -> dict:
    """One seed of the source->target protocol.

    A source model is trained on plentiful high-contrast synthetic data;
    the target domain has few, low-contrast samples.  The scratch arm and
    the fine-tuned arm get the same epoch budget on the target data and are
    compared on a held-out target-domain evaluation set.
    """
    workdir = Path(workdir)
    source_man = synth_dataset(
        SynthConfig(seed=1000 + seed, count_per_class=source_count,
                    resolution=input_size, smoke_contrast=source_contrast),
        workdir / "source_data",
    )
    target_man = synth_dataset(
        SynthConfig(seed=2000 + seed, count_per_class=target_count,
                    resolution=input_size, smoke_contrast=target_contrast),
        workdir / "target_data",
    )
    eval_man = synth_dataset(
        SynthConfig(seed=3000 + seed, count_per_class=eval_count,
                    resolution=input_size, smoke_contrast=target_contrast),
        workdir / "eval_data",
    )
    _, _, source_ckpt = train(
        source_man, variant,
        TrainConfig(epochs=epochs, learning_rate=0.01, seed=seed),
        workdir / "source_run", width=width, input_size=input_size,
    )
    _, scratch_net, _ = train(
        target_man, variant,
        TrainConfig(epochs=epochs, learning_rate=0.01, seed=seed),
        workdir / "scratch_run", width=width, input_size=input_size,
    )
    _, tuned_net, _ = finetune(
        source_ckpt, target_man,
        TrainConfig(epochs=epochs, learning_rate=FINETUNE_LEARNING_RATE, seed=seed),
        workdir / "finetune_run",
    )
    scratch_metrics, _ = evaluate(scratch_net, eval_man)
    tuned_metrics, _ = evaluate(tuned_net, eval_man)
    return {
        "seed": seed,
        "scratch": scratch_metrics.as_dict(),
        "finetuned": tuned_metrics.as_dict(),
        "scratch_f1": scratch_metrics.f1,
        "finetuned_f1": tuned_metrics.f1,
    }


# -- benchmarking ------------------------------------------------------------------

def _median_seconds(fun, runs: int, target: float = 0.02) -> float:
    fun()  # warm up caches and JIT before measuring
    t0 = time.perf_counter()
    fun()
    est = max(time.perf_counter() - t0, 1e-7)
    reps = max(1, int(target / est))
    samples = []
    for _ in range(runs):
        t0 = time.perf_counter()
        for _ in range(reps):
            fun()
        samples.append((time.perf_counter() - t0) / reps)
    samples.sort()
    return samples[len(samples) // 2]


def bench(sizes=None, runs: int = 5, seed: int = 0) -> dict:
    """Median fast-transform time per size; naive matrix product for small N."""
    if sizes is None:
        sizes = [1 << k for k in (10, 12, 14, 15, 16, 17, 18, 19, 20)]
    rng = np.random.default_rng(seed)
    entries = []
    for n in sizes:
        if n > MAX_BENCH_SIZE:
            raise SizeTooLargeError(f"size {n} exceeds {MAX_BENCH_SIZE}")
        if n < 1 or n & (n - 1):
            raise LengthNotPowerOfTwoError(f"bench size {n} not a power of two")
        x = rng.standard_normal(n)
        t_fast = _median_seconds(lambda: fwht(x), runs)
        entry = {"n": n, "fwht_seconds": t_fast}
        if n <= NAIVE_BENCH_LIMIT:
            h = hadamard_matrix(n.bit_length() - 1).astype(np.float64)
            t_naive = _median_seconds(lambda: x @ h, runs)
            entry["naive_seconds"] = t_naive
            entry["speedup"] = t_naive / t_fast
        entries.append(entry)
    ratios = []
    for prev, cur in zip(entries, entries[1:]):
        if cur["n"] == 2 * prev["n"]:
            ratios.append({
                "from": prev["n"],
                "to": cur["n"],
                "time_ratio": cur["fwht_seconds"] / prev["fwht_seconds"],
            })
    return {"entries": entries, "doubling_ratios": ratios}
