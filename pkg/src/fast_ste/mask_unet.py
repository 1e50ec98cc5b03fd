"""U-Net that estimates the source text mask from a real scene-text crop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import EmptyDataset, ShapeMismatch


@dataclass
class MaskEstimate:
    soft: np.ndarray  # (1, 64, 256) probabilities in [0, 1]
    hard: np.ndarray  # (1, 64, 256) values in {0, 1}, soft > 0.5


class _DoubleConv(nn.Module):
    def __init__(self, cin, cout):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(cin, cout, 3, padding=1, bias=False),
            nn.BatchNorm2d(cout), nn.ReLU(inplace=True),
            nn.Conv2d(cout, cout, 3, padding=1, bias=False),
            nn.BatchNorm2d(cout), nn.ReLU(inplace=True))

    def forward(self, x):
        return self.net(x)


class MaskUNet(nn.Module):
    """4-down/4-up U-Net, 64-512 channels, bilinear upsampling, sigmoid head."""

    def __init__(self, base_channels: int = 64):
        super().__init__()
        c = base_channels
        self.inc = _DoubleConv(3, c)
        self.down = nn.ModuleList([
            _DoubleConv(c, c * 2),
            _DoubleConv(c * 2, c * 4),
            _DoubleConv(c * 4, c * 8),
            _DoubleConv(c * 8, c * 8),
        ])
        self.up_conv = nn.ModuleList([
            _DoubleConv(c * 16, c * 4),
            _DoubleConv(c * 8, c * 2),
            _DoubleConv(c * 4, c),
            _DoubleConv(c * 2, c),
        ])
        self.head = nn.Conv2d(c, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != 3:
            raise ShapeMismatch(f"expected NCHW RGB input, got {tuple(x.shape)}")
        skips = [self.inc(x)]
        for block in self.down:
            skips.append(block(F.max_pool2d(skips[-1], 2)))
        y = skips[-1]
        for block, skip in zip(self.up_conv, reversed(skips[:-1])):
            y = F.interpolate(y, scale_factor=2, mode="bilinear", align_corners=False)
            y = block(torch.cat([y, skip], dim=1))
        return torch.sigmoid(self.head(y))


def estimate_mask(model: MaskUNet, image: np.ndarray) -> MaskEstimate:
    """Soft probability field plus its 0.5-thresholded binarization."""
    if image.shape != (3, 64, 256):
        raise ShapeMismatch(f"expected (3, 64, 256) image, got {image.shape}")
    model.eval()
    with torch.no_grad():
        soft = model(torch.from_numpy(image[None]).float())[0].numpy()
    return MaskEstimate(soft=soft, hard=(soft > 0.5).astype(np.float32))


def train_mask_unet(model: MaskUNet, pairs, steps: int | None = None,
                    epochs: int = 20, lr: float = 1e-3, batch_size: int = 1,
                    seed: int = 0, log=None) -> list[float]:
    """Per-pixel BCE training on (image, binary mask) pairs.

    `pairs` is a sequence of dicts with "i_a" in [-1, 1] and "m_a" in
    {-1, +1}; targets are remapped to {0, 1}.  Defaults match the
    reference recipe (batch 1, 20 epochs, Adam, lr 1e-3).  `steps`
    optionally caps the total number of optimizer steps.
    """
    if len(pairs) == 0:
        raise EmptyDataset("no (image, mask) pairs to train on")
    torch.manual_seed(seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    losses = []
    model.train()
    done = 0
    for _ in range(epochs):
        for start in range(0, len(pairs), batch_size):
            batch = [pairs[i] for i in range(start, min(start + batch_size, len(pairs)))]
            imgs = torch.from_numpy(np.stack([b["i_a"] for b in batch])).float()
            tgts = torch.from_numpy(
                np.stack([(b["m_a"][:1] > 0).astype(np.float32) for b in batch]))
            pred = model(imgs)
            loss = F.binary_cross_entropy(pred.clamp(1e-7, 1 - 1e-7), tgts)
            opt.zero_grad()
            loss.backward()
            opt.step()
            val = float(loss.detach())
            losses.append(val)
            if log is not None:
                log({"step": done, "bce": val})
            done += 1
            if steps is not None and done >= steps:
                return losses
    return losses
