"""Unsupervised change detection for co-registered speckled radar image pairs.

The pipeline builds a log-ratio difference image, preclassifies pixels into
changed / unchanged / intermediate sets by hierarchical fuzzy clustering,
trains a small dual-branch classifier (multi-region spatial convolutions
plus a gated frequency vector) on the confident pixels, and classifies the
intermediate ones to produce a binary change map. Everything runs on plain
numpy float64 with deterministic, seed-derived randomness.
"""

from .autodiff import Tensor, no_grad
from .evalmap import ChangeMap, MetricsReport, diff_overlay, score
from .frequency import bilinear_resize, dct2, patch_to_frequency_vector
from .imagery import (
    DifferenceImage,
    Patch,
    PgmError,
    Raster,
    extract_patch,
    load_pgm,
    log_ratio,
    save_pgm,
)
from .network import (
    Mode,
    ModelParams,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .optim import Adam
from .preclassify import (
    PreclassifyError,
    SampleSet,
    TriMap,
    draw_samples,
    fcm,
    hierarchical_trimap,
)
from .rng import Rng
from .synthgen import SceneSpec, default_scene, generate
from .trainer import TrainConfig, TrainingError, TrainReport, infer_map, train

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "ChangeMap",
    "DifferenceImage",
    "MetricsReport",
    "Mode",
    "ModelParams",
    "Patch",
    "PgmError",
    "PreclassifyError",
    "Raster",
    "Rng",
    "SampleSet",
    "SceneSpec",
    "Tensor",
    "TrainConfig",
    "TrainReport",
    "TrainingError",
    "TriMap",
    "bilinear_resize",
    "dct2",
    "default_scene",
    "diff_overlay",
    "draw_samples",
    "extract_patch",
    "fcm",
    "forward",
    "generate",
    "hierarchical_trimap",
    "infer_map",
    "init_params",
    "load_checkpoint",
    "load_pgm",
    "log_ratio",
    "no_grad",
    "patch_to_frequency_vector",
    "save_checkpoint",
    "save_pgm",
    "score",
    "train",
    "__version__",
]
