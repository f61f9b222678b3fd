"""Binary change maps, confusion metrics, and the error overlay raster."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagery import Raster

OVERLAY_TP, OVERLAY_TN, OVERLAY_FP, OVERLAY_FN = 255, 0, 170, 85


@dataclass
class ChangeMap:
    """Per-pixel change bits, 1 changed / 0 unchanged."""

    bits: np.ndarray  # (H, W) uint8

    def __post_init__(self):
        arr = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError(f"change map must be 2-D, got {arr.ndim} axes")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("change map bits must be 0 or 1")
        self.bits = arr

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass
class MetricsReport:
    tp: int
    tn: int
    fp: int
    fn: int
    oe: int
    pcc: float
    pre: float
    kc: float

    def lines(self) -> list[str]:
        return [
            f"tp {self.tp}",
            f"tn {self.tn}",
            f"fp {self.fp}",
            f"fn {self.fn}",
            f"oe {self.oe}",
            f"pcc {self.pcc:.10f}",
            f"pre {self.pre:.10f}",
            f"kc {self.kc:.10f}",
        ]

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def summary(self) -> str:
        return (
            f"FP={self.fp} FN={self.fn} OE={self.oe} "
            f"PCC={self.pcc:.4f} KC={self.kc:.4f}"
        )


def score(predicted: ChangeMap, truth: ChangeMap) -> MetricsReport:
    """Confusion counts plus percent correct and the kappa coefficient.

    PCC = 100 (TP+TN)/N; chance agreement
    PRE = ((TP+FP)(TP+FN) + (FN+TN)(FP+TN)) / N^2;
    KC = 100 (PCC/100 - PRE) / (1 - PRE), defined as 0 when PRE = 1.
    """
    if predicted.bits.shape != truth.bits.shape:
        raise ValueError(
            f"map sizes differ: {predicted.bits.shape} vs {truth.bits.shape}"
        )
    p = predicted.bits.astype(bool)
    t = truth.bits.astype(bool)
    tp = int((p & t).sum())
    tn = int((~p & ~t).sum())
    fp = int((p & ~t).sum())
    fn = int((~p & t).sum())
    n = p.size
    oe = fp + fn
    pcc = 100.0 * (tp + tn) / n
    pre = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n)
    kc = 0.0 if pre == 1.0 else 100.0 * (pcc / 100.0 - pre) / (1.0 - pre)
    return MetricsReport(tp=tp, tn=tn, fp=fp, fn=fn, oe=oe, pcc=pcc, pre=pre, kc=kc)


def diff_overlay(predicted: ChangeMap, truth: ChangeMap) -> Raster:
    """Error overlay: hits 255, correct rejections 0, false alarms 170,
    misses 85."""
    if predicted.bits.shape != truth.bits.shape:
        raise ValueError(
            f"map sizes differ: {predicted.bits.shape} vs {truth.bits.shape}"
        )
    p = predicted.bits.astype(bool)
    t = truth.bits.astype(bool)
    out = np.empty(p.shape, dtype=np.float64)
    out[p & t] = OVERLAY_TP
    out[~p & ~t] = OVERLAY_TN
    out[p & ~t] = OVERLAY_FP
    out[~p & t] = OVERLAY_FN
    return Raster(out)


def map_to_raster(cm: ChangeMap) -> Raster:
    return Raster(cm.bits.astype(np.float64) * 255.0)


def map_from_raster(raster: Raster, threshold: float = 128.0) -> ChangeMap:
    """Values at or above the threshold read as changed."""
    return ChangeMap((raster.pixels >= threshold).astype(np.uint8))
