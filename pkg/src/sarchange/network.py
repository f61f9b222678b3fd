"""The dual-branch patch classifier.

Spatial branch: four multi-region convolution blocks. Each block lifts its
input to 15 channels with a 1x1 convolution, splits them into three groups
of five, keeps one group whole, band-masks the other two down to a
horizontal / vertical stripe, convolves each group 3x3, and fuses the three
results by addition. Frequency branch: the patch's 128 DCT coefficients
pass through a multiplicative sigmoid gate. One dense layer maps the
concatenated features to two logits. Ablation modes drop a branch or swap
the blocks for plain convolutions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path

import numpy as np

from .autodiff import (
    Tensor,
    add,
    concat,
    conv2d,
    flatten,
    linear,
    mul,
    relu,
    sigmoid,
    slice_channels,
)
from .frequency import patch_to_frequency_vector
from .imagery import Patch
from .rng import Rng

LIFT = 15    # channels after the 1x1 lift
GROUP = 5    # channels per region group
DEPTH = 4    # conv blocks in the spatial branch
FREQ_DIM = 128

_BLOCK_INPUTS = (2, GROUP, GROUP, GROUP)

CHECKPOINT_MAGIC = b"SARCHG01"
CHECKPOINT_VERSION = 1


class Mode(Enum):
    """Which branches run; values double as the CLI names."""

    BOTH = "both"
    SPATIAL_ONLY = "no-dct"
    FREQ_ONLY = "no-mrc"
    PLAIN_CNN = "plain-cnn"


_MODE_CODES = {Mode.BOTH: 0, Mode.SPATIAL_ONLY: 1, Mode.FREQ_ONLY: 2, Mode.PLAIN_CNN: 3}
_CODE_MODES = {code: mode for mode, code in _MODE_CODES.items()}


def mode_from_name(name: str) -> Mode:
    for mode in Mode:
        if mode.value == name:
            return mode
    valid = ", ".join(m.value for m in Mode)
    raise ValueError(f"unknown mode {name!r}; expected one of: {valid}")


@dataclass
class MrcParams:
    """One multi-region block: the 1x1 lift plus three group convolutions."""

    w1: Tensor
    b1: Tensor
    wg: Tensor
    bg: Tensor
    wh: Tensor
    bh: Tensor
    wv: Tensor
    bv: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.w1, self.b1, self.wg, self.bg,
                self.wh, self.bh, self.wv, self.bv]


@dataclass
class PlainConvParams:
    """One plain 3x3 convolution (ablation stand-in for a block)."""

    w: Tensor
    b: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.w, self.b]


@dataclass
class GateParams:
    """Two parallel affine maps; the sigmoided one scales the other."""

    wi: Tensor
    bi: Tensor
    wg: Tensor
    bg: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.wi, self.bi, self.wg, self.bg]


@dataclass
class ModelParams:
    r: int
    mode: Mode
    mask_width: int
    blocks: list
    gate: GateParams | None
    fc_w: Tensor
    fc_b: Tensor

    def parameters(self) -> list[Tensor]:
        """All tensors in the fixed order used by init and checkpoints."""
        out: list[Tensor] = []
        for block in self.blocks:
            out.extend(block.tensors())
        if self.gate is not None:
            out.extend(self.gate.tensors())
        out.extend([self.fc_w, self.fc_b])
        return out

    def count(self) -> int:
        return sum(t.data.size for t in self.parameters())


def feature_dim(r: int, mode: Mode) -> int:
    spatial = GROUP * r * r
    if mode == Mode.BOTH:
        return spatial + FREQ_DIM
    if mode == Mode.FREQ_ONLY:
        return FREQ_DIM
    return spatial


def _weight(rng: Rng | None, shape: tuple[int, ...], fan_in: int) -> Tensor:
    if rng is None:
        return Tensor(np.zeros(shape), requires_grad=True)
    bound = np.sqrt(6.0 / fan_in)
    size = int(np.prod(shape))
    data = rng.uniform(size, low=-bound, high=bound).reshape(shape)
    return Tensor(data, requires_grad=True)


def _bias(length: int) -> Tensor:
    return Tensor(np.zeros(length), requires_grad=True)


def _build(r: int, mode: Mode, mask_width: int, rng: Rng | None) -> ModelParams:
    if r < 1 or r % 2 == 0:
        raise ValueError(f"patch size must be odd and positive, got {r}")
    if mask_width < 0:
        raise ValueError(f"mask width must be >= 0, got {mask_width}")
    blocks: list = []
    if mode in (Mode.BOTH, Mode.SPATIAL_ONLY):
        for c_in in _BLOCK_INPUTS:
            blocks.append(MrcParams(
                w1=_weight(rng, (LIFT, c_in, 1, 1), c_in),
                b1=_bias(LIFT),
                wg=_weight(rng, (GROUP, GROUP, 3, 3), GROUP * 9),
                bg=_bias(GROUP),
                wh=_weight(rng, (GROUP, GROUP, 3, 3), GROUP * 9),
                bh=_bias(GROUP),
                wv=_weight(rng, (GROUP, GROUP, 3, 3), GROUP * 9),
                bv=_bias(GROUP),
            ))
    elif mode == Mode.PLAIN_CNN:
        for c_in in _BLOCK_INPUTS:
            blocks.append(PlainConvParams(
                w=_weight(rng, (GROUP, c_in, 3, 3), c_in * 9),
                b=_bias(GROUP),
            ))
    gate = None
    if mode in (Mode.BOTH, Mode.FREQ_ONLY):
        gate = GateParams(
            wi=_weight(rng, (FREQ_DIM, FREQ_DIM), FREQ_DIM),
            bi=_bias(FREQ_DIM),
            wg=_weight(rng, (FREQ_DIM, FREQ_DIM), FREQ_DIM),
            bg=_bias(FREQ_DIM),
        )
    dim = feature_dim(r, mode)
    return ModelParams(
        r=r,
        mode=mode,
        mask_width=int(mask_width),
        blocks=blocks,
        gate=gate,
        fc_w=_weight(rng, (2, dim), dim),
        fc_b=_bias(2),
    )


def init_params(r: int, mode: Mode, rng: Rng, mask_width: int = 2) -> ModelParams:
    """Fresh parameters: weights uniform within +-sqrt(6 / fan_in), biases
    zero, drawn in the fixed parameter order."""
    return _build(r, mode, mask_width, rng)


@lru_cache(maxsize=None)
def _stripe_mask(r: int, width: int, axis: int) -> Tensor:
    mask = np.ones((GROUP, r, r))
    if width > 0:
        w = min(width, r)
        if axis == 0:
            mask[:, :w, :] = 0.0
            mask[:, r - w:, :] = 0.0
        else:
            mask[:, :, :w] = 0.0
            mask[:, :, r - w:] = 0.0
    return Tensor(mask)


def mrc_forward(x: Tensor, block: MrcParams, mask_width: int) -> Tensor:
    """One multi-region block on a (C, r, r) tensor."""
    r = x.data.shape[-1]
    lifted = relu(conv2d(x, block.w1, block.b1, padding=0))
    f_g = slice_channels(lifted, 0, GROUP)
    f_h = mul(slice_channels(lifted, GROUP, 2 * GROUP), _stripe_mask(r, mask_width, 0))
    f_v = mul(slice_channels(lifted, 2 * GROUP, 3 * GROUP), _stripe_mask(r, mask_width, 1))
    fused = add(
        add(conv2d(f_g, block.wg, block.bg, padding=1),
            conv2d(f_h, block.wh, block.bh, padding=1)),
        conv2d(f_v, block.wv, block.bv, padding=1),
    )
    return relu(fused)


def spatial_branch(x: Tensor, params: ModelParams) -> Tensor:
    """Four stacked multi-region blocks, flattened to 5 r^2 features."""
    for block in params.blocks:
        x = mrc_forward(x, block, params.mask_width)
    return flatten(x)


def plain_branch(x: Tensor, params: ModelParams) -> Tensor:
    for block in params.blocks:
        x = relu(conv2d(x, block.w, block.b, padding=1))
    return flatten(x)


def frequency_branch(v: Tensor, gate: GateParams) -> Tensor:
    """Elementwise product of a linear path and a sigmoid gate path."""
    payload = linear(v, gate.wi, gate.bi)
    opening = sigmoid(linear(v, gate.wg, gate.bg))
    return mul(opening, payload)


def forward(patch, params: ModelParams, mode: Mode | None = None) -> Tensor:
    """Two class logits for one patch under the parameters' mode."""
    if isinstance(patch, Patch):
        x = patch.data
    elif isinstance(patch, Tensor):
        x = patch
    else:
        x = Tensor(patch)
    if mode is not None and mode != params.mode:
        raise ValueError(
            f"mode {mode.value} does not match parameters built for {params.mode.value}"
        )
    mode = params.mode
    want = (2, params.r, params.r)
    if x.data.shape != want:
        raise ValueError(f"patch shape {x.data.shape} does not match {want}")
    parts: list[Tensor] = []
    if mode in (Mode.BOTH, Mode.SPATIAL_ONLY):
        parts.append(spatial_branch(x, params))
    elif mode == Mode.PLAIN_CNN:
        parts.append(plain_branch(x, params))
    if mode in (Mode.BOTH, Mode.FREQ_ONLY):
        v = Tensor(patch_to_frequency_vector(x.data))
        parts.append(frequency_branch(v, params.gate))
    features = parts[0] if len(parts) == 1 else concat(parts)
    return linear(features, params.fc_w, params.fc_b)


def save_checkpoint(params: ModelParams, path) -> None:
    """Magic, version, r, mode, mask width, then every parameter tensor in
    the fixed order as little-endian float64."""
    header = CHECKPOINT_MAGIC + struct.pack(
        "<IIII",
        CHECKPOINT_VERSION,
        params.r,
        _MODE_CODES[params.mode],
        params.mask_width,
    )
    body = b"".join(t.data.astype("<f8").tobytes() for t in params.parameters())
    Path(path).write_bytes(header + body)


def load_checkpoint(path) -> ModelParams:
    data = Path(path).read_bytes()
    head = len(CHECKPOINT_MAGIC) + 16
    if len(data) < head:
        raise ValueError(f"checkpoint too short: {len(data)} bytes")
    if data[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError("not a classifier checkpoint (bad magic)")
    version, r, mode_code, mask_width = struct.unpack(
        "<IIII", data[len(CHECKPOINT_MAGIC):head]
    )
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    if mode_code not in _CODE_MODES:
        raise ValueError(f"unknown mode code {mode_code}")
    params = _build(r, _CODE_MODES[mode_code], mask_width, rng=None)
    tensors = params.parameters()
    expected = head + 8 * sum(t.data.size for t in tensors)
    if len(data) != expected:
        raise ValueError(
            f"checkpoint length {len(data)} does not match expected {expected}"
        )
    offset = head
    for t in tensors:
        size = t.data.size
        flat = np.frombuffer(data, dtype="<f8", count=size, offset=offset)
        t.data = np.ascontiguousarray(flat.reshape(t.data.shape))
        offset += 8 * size
    return params
