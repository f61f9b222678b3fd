"""Synthetic speckled scene pairs with known ground truth.

A clean reflectance map (background plus rectangles and disks) is imaged
twice under independent multiplicative speckle: each field is the mean of
`looks` unit-mean exponential draws, so it has unit mean and variance
1/looks. Change shapes repaint regions between the two acquisitions and
define the truth map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .evalmap import ChangeMap
from .imagery import Raster
from .rng import Rng


@dataclass(frozen=True)
class Rect:
    row: int
    col: int
    height: int
    width: int
    level: float | None = None  # None -> scene object level


@dataclass(frozen=True)
class Disk:
    row: int
    col: int
    radius: int
    level: float | None = None


@dataclass
class SceneSpec:
    width: int = 128
    height: int = 128
    background_level: float = 30.0
    object_level: float = 960.0
    change_shapes: tuple = ()
    static_shapes: tuple = ()
    looks: int = 4
    seed: int = 42


def default_scene(seed: int = 42) -> SceneSpec:
    """The stock acceptance scene: ~8% changed pixels, strong-scatterer
    contrast, four-look speckle."""
    return SceneSpec(
        change_shapes=(
            Rect(20, 20, 24, 26),
            Rect(80, 70, 20, 22),
            Disk(96, 30, 9),
        ),
        static_shapes=(
            Rect(48, 90, 16, 12),
            Disk(30, 100, 8),
        ),
        seed=seed,
    )


def _paint(canvas: np.ndarray, shape, level: float) -> None:
    h, w = canvas.shape
    if isinstance(shape, Rect):
        if shape.height < 1 or shape.width < 1:
            raise ValueError(f"degenerate rectangle {shape}")
        if shape.row < 0 or shape.col < 0 or shape.row + shape.height > h \
                or shape.col + shape.width > w:
            raise ValueError(f"rectangle {shape} leaves the {h}x{w} scene")
        canvas[shape.row:shape.row + shape.height,
               shape.col:shape.col + shape.width] = level
    elif isinstance(shape, Disk):
        if shape.radius < 1:
            raise ValueError(f"degenerate disk {shape}")
        if shape.row - shape.radius < 0 or shape.col - shape.radius < 0 \
                or shape.row + shape.radius >= h or shape.col + shape.radius >= w:
            raise ValueError(f"disk {shape} leaves the {h}x{w} scene")
        yy, xx = np.ogrid[:h, :w]
        inside = (yy - shape.row) ** 2 + (xx - shape.col) ** 2 <= shape.radius ** 2
        canvas[inside] = level
    else:
        raise TypeError(f"unknown shape {type(shape).__name__}")


def _speckle(rng: Rng, looks: int, shape: tuple[int, int]) -> np.ndarray:
    draws = rng.exponential(looks * shape[0] * shape[1])
    return draws.reshape(looks, *shape).mean(axis=0)


def generate(spec: SceneSpec) -> tuple[Raster, Raster, ChangeMap]:
    """Two speckled acquisitions of the scene plus the truth change map."""
    if spec.width < 1 or spec.height < 1:
        raise ValueError(f"scene size must be positive, got {spec.height}x{spec.width}")
    if spec.background_level < 0 or spec.object_level < 0:
        raise ValueError("reflectance levels must be non-negative")
    if spec.looks < 1:
        raise ValueError(f"looks must be a positive integer, got {spec.looks}")
    shape = (spec.height, spec.width)
    before = np.full(shape, float(spec.background_level))
    for s in spec.static_shapes:
        _paint(before, s, spec.object_level if s.level is None else s.level)
    after = before.copy()
    for s in spec.change_shapes:
        _paint(after, s, spec.object_level if s.level is None else s.level)
    truth = ChangeMap((before != after).astype(np.uint8))
    rng = Rng(spec.seed)
    s1 = _speckle(rng.derive("speckle-1"), spec.looks, shape)
    s2 = _speckle(rng.derive("speckle-2"), spec.looks, shape)
    return Raster(before * s1), Raster(after * s2), truth
