"""Three-way preclassification of the difference image.

Fuzzy c-means with three clusters splits pixels into unchanged / undecided /
changed by center order; a second pass re-clusters the undecided band and
moves a subcluster out of it only when its center crosses one of the outer
stage-one centers. Confident pixels feed balanced training samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagery import Patch, Raster, extract_patch
from .rng import Rng

UNCHANGED, INTERMEDIATE, CHANGED = 0, 1, 2

_GRAY = {UNCHANGED: 0, INTERMEDIATE: 128, CHANGED: 255}


class PreclassifyError(ValueError):
    """Preclassification cannot produce usable training classes."""


@dataclass
class FcmResult:
    centers: np.ndarray          # (c,) ascending
    memberships: np.ndarray      # (n, c), rows sum to 1
    objective_trace: np.ndarray  # one entry per iteration plus final refresh
    degenerate: bool = False


@dataclass
class TriMap:
    """Per-pixel label raster: 0 unchanged, 1 undecided, 2 changed."""

    labels: np.ndarray  # (H, W) uint8

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def count(self, label: int) -> int:
        return int((self.labels == label).sum())


@dataclass
class SampleSet:
    """Balanced pseudo-labeled patches: changed first, then unchanged."""

    patches: list[Patch]
    labels: np.ndarray     # (2k,) int64, 1 changed / 0 unchanged
    positions: np.ndarray  # (2k, 2) row, col


def _memberships(d2: np.ndarray, m: float) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        w = d2 ** (-1.0 / (m - 1.0))
        u = w / w.sum(axis=1, keepdims=True)
    # A point sitting on a center (or close enough to overflow the inverse
    # power) is hard-assigned to its nearest center.
    bad = (d2 == 0.0).any(axis=1) | ~np.isfinite(u).all(axis=1)
    if bad.any():
        u[bad] = 0.0
        u[bad, d2[bad].argmin(axis=1)] = 1.0
    return u


def fcm(values, c: int = 3, m: float = 2.0, max_iter: int = 100,
        tol: float = 1e-6) -> FcmResult:
    """Fuzzy c-means on scalar values, centers initialized at the
    (k + 0.5)/c quantiles, stopped when the largest center shift < tol."""
    x = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
    if c < 2:
        raise ValueError(f"need at least 2 clusters, got {c}")
    if m <= 1.0:
        raise ValueError(f"fuzzifier must exceed 1, got {m}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be positive, got {max_iter}")
    if tol < 0.0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    n = x.size
    if n < c:
        raise ValueError(f"{n} values cannot support {c} clusters")
    if x.min() == x.max():
        memberships = np.zeros((n, c))
        memberships[:, 0] = 1.0
        return FcmResult(
            centers=np.full(c, x[0] if n else 0.0),
            memberships=memberships,
            objective_trace=np.zeros(1),
            degenerate=True,
        )
    centers = np.quantile(x, (np.arange(c) + 0.5) / c)
    trace = []
    for _ in range(max_iter):
        d2 = (x[:, None] - centers[None, :]) ** 2
        u = _memberships(d2, m)
        um = u ** m
        den = um.sum(axis=0)
        num = um.T @ x
        moved = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), centers)
        shift = np.abs(moved - centers).max()
        centers = moved
        d2 = (x[:, None] - centers[None, :]) ** 2
        trace.append(float((um * d2).sum()))
        if shift < tol:
            break
    # Refresh memberships against the final centers so the returned pair
    # satisfies the membership update equation exactly.
    d2 = (x[:, None] - centers[None, :]) ** 2
    u = _memberships(d2, m)
    trace.append(float((u ** m * d2).sum()))
    order = np.argsort(centers, kind="stable")
    return FcmResult(
        centers=centers[order],
        memberships=np.ascontiguousarray(u[:, order]),
        objective_trace=np.asarray(trace),
    )


def hierarchical_trimap(di) -> TriMap:
    """Two-stage three-way split of the difference image.

    Stage one hard-assigns by largest membership: top cluster changed,
    bottom unchanged, middle undecided. Stage two re-clusters the undecided
    values and promotes (demotes) a subcluster only if its center reaches
    the stage-one top (bottom) center.
    """
    x = di.values.reshape(-1)
    first = fcm(x, c=3)
    if first.degenerate:
        return TriMap(np.zeros(di.values.shape, dtype=np.uint8))
    hard = first.memberships.argmax(axis=1)
    labels = np.empty(x.size, dtype=np.uint8)
    labels[hard == 0] = UNCHANGED
    labels[hard == 1] = INTERMEDIATE
    labels[hard == 2] = CHANGED
    low, high = first.centers[0], first.centers[2]
    mid = np.flatnonzero(labels == INTERMEDIATE)
    if mid.size >= 3:
        second = fcm(x[mid], c=3)
        if not second.degenerate:
            sub_hard = second.memberships.argmax(axis=1)
            for k in range(3):
                if second.centers[k] >= high:
                    labels[mid[sub_hard == k]] = CHANGED
                elif second.centers[k] <= low:
                    labels[mid[sub_hard == k]] = UNCHANGED
    return TriMap(labels.reshape(di.values.shape))


def trimap_to_raster(trimap: TriMap) -> Raster:
    """Gray-coded raster: unchanged 0, undecided 128, changed 255."""
    out = np.zeros(trimap.labels.shape, dtype=np.float64)
    out[trimap.labels == INTERMEDIATE] = _GRAY[INTERMEDIATE]
    out[trimap.labels == CHANGED] = _GRAY[CHANGED]
    return Raster(out)


def trimap_from_raster(raster: Raster) -> TriMap:
    labels = np.empty(raster.pixels.shape, dtype=np.uint8)
    known = np.zeros(raster.pixels.shape, dtype=bool)
    for label, gray in _GRAY.items():
        hit = raster.pixels == gray
        labels[hit] = label
        known |= hit
    if not known.all():
        bad = raster.pixels[~known].flat[0]
        raise ValueError(f"trimap raster holds value {bad}, expected 0/128/255")
    return TriMap(labels)


def draw_samples(trimap: TriMap, i1: Raster, i2: Raster, r: int, rng: Rng,
                 fraction: float = 0.10) -> SampleSet:
    """floor(fraction * smaller class size) patches per class, without
    replacement, changed block first."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    changed = np.argwhere(trimap.labels == CHANGED)
    unchanged = np.argwhere(trimap.labels == UNCHANGED)
    if len(changed) == 0 or len(unchanged) == 0:
        empty = "changed" if len(changed) == 0 else "unchanged"
        raise PreclassifyError(f"trimap has no confident {empty} pixels to sample")
    k = int(fraction * min(len(changed), len(unchanged)))
    if k == 0:
        raise PreclassifyError(
            f"training draw is empty: floor({fraction} * "
            f"min({len(changed)}, {len(unchanged)})) = 0"
        )
    picks_c = changed[rng.sample(len(changed), k)]
    picks_u = unchanged[rng.sample(len(unchanged), k)]
    positions = np.vstack([picks_c, picks_u])
    labels = np.concatenate([np.ones(k, dtype=np.int64), np.zeros(k, dtype=np.int64)])
    patches = [extract_patch(i1, i2, (int(row), int(col)), r) for row, col in positions]
    return SampleSet(patches=patches, labels=labels, positions=positions)
