"""Frequency-domain features for the classifier's gated branch.

A patch channel is resized to 8x8 with half-pixel-center bilinear sampling,
then transformed by the orthonormal type-II 2-D discrete cosine transform;
the two 64-coefficient blocks concatenate into one 128-vector.
"""

from __future__ import annotations

import numpy as np

BLOCK = 8


def _dct_matrix(n: int = BLOCK) -> np.ndarray:
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    mat = np.cos(np.pi * (2 * i + 1) * k / (2 * n))
    mat[0, :] *= np.sqrt(1.0 / n)
    mat[1:, :] *= np.sqrt(2.0 / n)
    return mat


_C = _dct_matrix()


def dct2(block: np.ndarray) -> np.ndarray:
    """Orthonormal type-II 2-D DCT of an 8x8 block."""
    block = np.asarray(block, dtype=np.float64)
    if block.shape != (BLOCK, BLOCK):
        raise ValueError(f"dct2 expects an {BLOCK}x{BLOCK} block, got {block.shape}")
    return _C @ block @ _C.T


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample with half-pixel centers: src = (dst + 0.5) * (in / out) - 0.5,
    clamped to the valid range, four-neighbor weighted."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"bilinear_resize expects a 2-D image, got {img.ndim} axes")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    h, w = img.shape
    sy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    sx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (sy - y0)[:, None]
    wx = (sx - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1.0 - wx) + img[np.ix_(y0, x1)] * wx
    bottom = img[np.ix_(y1, x0)] * (1.0 - wx) + img[np.ix_(y1, x1)] * wx
    return top * (1.0 - wy) + bottom * wy


def patch_to_frequency_vector(channels: np.ndarray) -> np.ndarray:
    """(2, r, r) patch data -> 128 DCT coefficients (channel-major)."""
    arr = np.asarray(channels, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 2:
        raise ValueError(f"expected (2, r, r) patch data, got {arr.shape}")
    parts = [dct2(bilinear_resize(arr[c], BLOCK, BLOCK)).reshape(-1) for c in range(2)]
    return np.concatenate(parts)
