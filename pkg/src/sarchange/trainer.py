"""Minibatch training on pseudo-labeled patches and whole-image inference."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, mul, no_grad, softmax_cross_entropy
from .evalmap import ChangeMap
from .imagery import Raster, extract_patch
from .network import Mode, ModelParams, forward, init_params
from .optim import Adam
from .preclassify import CHANGED, INTERMEDIATE, SampleSet, TriMap
from .rng import Rng


@dataclass
class TrainConfig:
    r: int = 7
    mode: Mode = Mode.BOTH
    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    mask_width: int = 2


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    accuracy: float


@dataclass
class TrainReport:
    """Per-epoch mean loss and running training accuracy, plus wall time.

    Wall time never enters any artifact that reproducibility checks compare.
    """

    epochs: list = field(default_factory=list)
    wall_time_s: float = 0.0

    def lines(self) -> list[str]:
        rows = ["epoch mean_loss accuracy"]
        rows += [f"{e.epoch} {e.mean_loss:.6f} {e.accuracy:.6f}" for e in self.epochs]
        rows.append(f"# wall_time_s {self.wall_time_s:.3f}")
        return rows

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"


class TrainingError(RuntimeError):
    """Loss went non-finite; carries where it happened."""

    def __init__(self, lr: float, epoch: int, batch: int):
        super().__init__(
            f"non-finite training loss (lr={lr}, epoch={epoch}, batch={batch}); "
            f"lower the learning rate"
        )
        self.lr = lr
        self.epoch = epoch
        self.batch = batch


def train(samples: SampleSet, cfg: TrainConfig) -> tuple[ModelParams, TrainReport]:
    """Adam on softmax cross-entropy over shuffled minibatches.

    Initialization and shuffling draw from independent streams derived from
    cfg.seed, so results are a pure function of (samples, cfg). epochs=0
    returns the untouched initialization and an empty report.
    """
    n = len(samples.patches)
    if n == 0:
        raise ValueError("no training samples")
    if cfg.batch_size < 1:
        raise ValueError(f"batch size must be positive, got {cfg.batch_size}")
    if cfg.epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {cfg.epochs}")
    root = Rng(cfg.seed)
    params = init_params(cfg.r, cfg.mode, root.derive("init"), cfg.mask_width)
    report = TrainReport()
    if cfg.epochs == 0:
        return params, report
    shuffler = root.derive("shuffle")
    opt = Adam(params.parameters(), lr=cfg.lr)
    labels = samples.labels
    started = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        order = shuffler.permutation(n)
        loss_sum = 0.0
        hits = 0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            scale = Tensor(np.array([1.0 / len(batch)]))
            opt.zero_grad()
            batch_loss = 0.0
            for idx in batch:
                logits = forward(samples.patches[idx], params)
                loss = softmax_cross_entropy(logits, int(labels[idx]))
                mul(loss, scale).backward()
                batch_loss += loss.item()
                predicted = 1 if logits.data[1] > logits.data[0] else 0
                hits += int(predicted == labels[idx])
            if not np.isfinite(batch_loss):
                raise TrainingError(cfg.lr, epoch, start // cfg.batch_size)
            loss_sum += batch_loss
            opt.step()
        report.epochs.append(EpochStats(epoch, loss_sum / n, hits / n))
    report.wall_time_s = time.perf_counter() - started
    return params, report


def infer_map(i1: Raster, i2: Raster, trimap: TriMap,
              params: ModelParams) -> ChangeMap:
    """Confident pixels keep their trimap verdict; the classifier decides
    the undecided band. A logit tie reads as unchanged."""
    if trimap.labels.shape != i1.pixels.shape:
        raise ValueError(
            f"trimap {trimap.labels.shape} does not cover image {i1.pixels.shape}"
        )
    bits = np.zeros(trimap.labels.shape, dtype=np.uint8)
    bits[trimap.labels == CHANGED] = 1
    undecided = np.argwhere(trimap.labels == INTERMEDIATE)
    with no_grad():
        for row, col in undecided:
            patch = extract_patch(i1, i2, (int(row), int(col)), params.r)
            logits = forward(patch, params).data
            bits[row, col] = 1 if logits[1] > logits[0] else 0
    return ChangeMap(bits)
