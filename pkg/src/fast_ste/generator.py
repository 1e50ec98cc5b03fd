"""Encoder-decoder generator shared by both pipeline stages.

The stage-I instance turns (source image, [source mask, fixed-font mask])
into a target-style mask; the stage-II instance turns
(source image, [source mask, estimated target mask]) into the edited
image.  The two differ only in input channel widths and the per-level
attention schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ShapeMismatch

SELF = "SELF"
SIGMOID = "SIGMOID"

STAGE1_SCHEDULE = (SELF, SELF, SIGMOID, SIGMOID)
STAGE2_SCHEDULE = (SIGMOID, SIGMOID, SIGMOID, SIGMOID)

IMAGE = "IMAGE"
MASK = "MASK"

N_SCALES = 4


@dataclass
class GeneratorConfig:
    base_channels: int = 64
    attention_schedule: tuple[str, ...] = STAGE1_SCHEDULE  # lowest -> highest resolution
    condition_kind: str = IMAGE
    concat_source_mask: bool = True

    def __post_init__(self):
        self.attention_schedule = tuple(self.attention_schedule)
        if len(self.attention_schedule) != N_SCALES:
            raise ValueError("attention_schedule must have exactly 4 entries")
        for a in self.attention_schedule:
            if a not in (SELF, SIGMOID):
                raise ValueError(f"unknown attention kind: {a}")
        if self.condition_kind not in (IMAGE, MASK):
            raise ValueError(f"unknown condition kind: {self.condition_kind}")

    @property
    def mask_in_channels(self) -> int:
        # masks are 3-channel replicated grayscale; optionally two of them
        return 6 if self.concat_source_mask else 3

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        return cls(base_channels=d.get("base_channels", 64),
                   attention_schedule=tuple(d["attention_schedule"]),
                   condition_kind=d.get("condition_kind", IMAGE),
                   concat_source_mask=d.get("concat_source_mask", True))


def stage1_config(base_channels: int = 64, condition_kind: str = IMAGE,
                  concat_source_mask: bool = True,
                  attention_schedule=STAGE1_SCHEDULE) -> GeneratorConfig:
    return GeneratorConfig(base_channels=base_channels,
                           attention_schedule=attention_schedule,
                           condition_kind=condition_kind,
                           concat_source_mask=concat_source_mask)


def stage2_config(base_channels: int = 64) -> GeneratorConfig:
    return GeneratorConfig(base_channels=base_channels,
                           attention_schedule=STAGE2_SCHEDULE,
                           condition_kind=IMAGE,
                           concat_source_mask=True)


class ResidualBlock(nn.Module):
    """conv3x3-BN-ReLU-conv3x3-BN + identity skip, ReLU after the sum."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(channels)

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + x)


class SelfAttention(nn.Module):
    """Spatial self-attention with a zero-initialized residual scale.

    Query/key project to C/8 channels, value to C; softmax runs over all
    spatial positions.  With gamma at its initial value 0 the layer is an
    exact identity.
    """

    def __init__(self, channels: int):
        super().__init__()
        if channels < 8:
            raise ValueError("self-attention requires at least 8 channels")
        self.query = nn.Conv2d(channels, channels // 8, 1)
        self.key = nn.Conv2d(channels, channels // 8, 1)
        self.value = nn.Conv2d(channels, channels, 1)
        self.gamma = nn.Parameter(torch.zeros(1))

    def forward(self, x):
        b, c, h, w = x.shape
        n = h * w
        q = self.query(x).view(b, -1, n).permute(0, 2, 1)  # b, n, c/8
        k = self.key(x).view(b, -1, n)                      # b, c/8, n
        attn = torch.softmax(torch.bmm(q, k), dim=-1)       # rows sum to 1
        v = self.value(x).view(b, c, n)                     # b, c, n
        out = torch.bmm(v, attn.permute(0, 2, 1)).view(b, c, h, w)
        return x + self.gamma * out

    def attention_matrix(self, x):
        """The (b, n, n) softmax matrix, exposed for verification."""
        b, c, h, w = x.shape
        n = h * w
        q = self.query(x).view(b, -1, n).permute(0, 2, 1)
        k = self.key(x).view(b, -1, n)
        return torch.softmax(torch.bmm(q, k), dim=-1)


def sigmoid_gate(decoder_feat: torch.Tensor, mask_feat: torch.Tensor) -> torch.Tensor:
    """Element-wise product of decoder features with sigmoid of mask features."""
    if decoder_feat.shape != mask_feat.shape:
        raise ShapeMismatch(
            f"gate shapes differ: {tuple(decoder_feat.shape)} vs {tuple(mask_feat.shape)}")
    return decoder_feat * torch.sigmoid(mask_feat)


class EncoderBranch(nn.Module):
    """Stem conv to base channels, then four halving/doubling blocks."""

    def __init__(self, in_channels: int, base_channels: int = 64):
        super().__init__()
        c = base_channels
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, c, 3, stride=1, padding=1, bias=False),
            nn.BatchNorm2d(c), nn.ReLU(inplace=True))
        blocks = []
        for _ in range(N_SCALES):
            blocks.append(nn.Sequential(
                nn.Conv2d(c, c * 2, 4, stride=2, padding=1, bias=False),
                nn.BatchNorm2d(c * 2), nn.ReLU(inplace=True),
                ResidualBlock(c * 2)))
            c *= 2
        self.blocks = nn.ModuleList(blocks)
        self.in_channels = in_channels

    def forward(self, x) -> list[torch.Tensor]:
        """Returns [stem, level1, level2, level3, level4]."""
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise ShapeMismatch(
                f"encoder expects {self.in_channels}-channel NCHW input, got {tuple(x.shape)}")
        feats = [self.stem(x)]
        for block in self.blocks:
            feats.append(block(feats[-1]))
        return feats


class Decoder(nn.Module):
    """Four attention-gated upscaling blocks, post residual stack, tanh head."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.schedule = config.attention_schedule
        c = config.base_channels * 16
        ups, attns = [], []
        for kind in self.schedule:
            # mask features gating this block's input have `c` channels
            attns.append(SelfAttention(c) if kind == SELF else nn.Identity())
            ups.append(nn.Sequential(
                nn.ConvTranspose2d(c, c // 2, 4, stride=2, padding=1, bias=False),
                nn.BatchNorm2d(c // 2), nn.ReLU(inplace=True),
                ResidualBlock(c // 2)))
            c //= 2
        self.attn = nn.ModuleList(attns)
        self.up = nn.ModuleList(ups)
        self.post = nn.Sequential(*[ResidualBlock(c) for _ in range(4)])
        self.head = nn.Conv2d(c, 3, 1, bias=False)

    def forward(self, cond_pyramid, mask_pyramid):
        x = cond_pyramid[N_SCALES]  # deepest condition features
        for k in range(N_SCALES):
            mask_feat = mask_pyramid[N_SCALES - k]  # level 4, 3, 2, 1
            if self.schedule[k] == SELF:
                gate = self.attn[k](mask_feat)
            else:
                gate = torch.sigmoid(mask_feat)
            if x.shape != gate.shape:
                raise ShapeMismatch(
                    f"decoder block {k}: {tuple(x.shape)} vs gate {tuple(gate.shape)}")
            x = self.up[k](x * gate)
        return torch.tanh(self.head(self.post(x)))


class Generator(nn.Module):
    """Two encoding branches plus the attention-gated decoder."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        self.cond_encoder = EncoderBranch(3, config.base_channels)
        self.mask_encoder = EncoderBranch(config.mask_in_channels, config.base_channels)
        self.decoder = Decoder(config)

    def forward(self, condition: torch.Tensor, masks: torch.Tensor) -> torch.Tensor:
        cond_pyr = self.cond_encoder(condition)
        mask_pyr = self.mask_encoder(masks)
        return self.decoder(cond_pyr, mask_pyr)
