"""PatchGAN discriminators for mask pairs and image pairs.

Both stages use the same architecture: the pair is channel-concatenated
to 6x64x256 and reduced by four stride-2 blocks to a 4x16 grid of
per-patch real/fake probabilities.
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import ShapeMismatch


class PatchDiscriminator(nn.Module):
    """70x70-receptive-field PatchGAN with an explicit sigmoid head."""

    def __init__(self, in_channels: int = 6, base_channels: int = 64):
        super().__init__()
        c = base_channels
        layers = [nn.Conv2d(in_channels, c, 4, stride=2, padding=1),
                  nn.LeakyReLU(0.2, inplace=True)]
        for _ in range(3):
            layers += [nn.Conv2d(c, c * 2, 4, stride=2, padding=1, bias=False),
                       nn.BatchNorm2d(c * 2),
                       nn.LeakyReLU(0.2, inplace=True)]
            c *= 2
        layers += [nn.Conv2d(c, 1, 1), nn.Sigmoid()]
        self.net = nn.Sequential(*layers)
        self.in_channels = in_channels

    def forward(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        """Probability map over patches; shape (N, 1, 4, 16) for 64x256 inputs."""
        if a.shape != b.shape:
            raise ShapeMismatch(f"pair shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
        x = torch.cat([a, b], dim=1)
        if x.shape[1] != self.in_channels:
            raise ShapeMismatch(
                f"expected {self.in_channels} concatenated channels, got {x.shape[1]}")
        return self.net(x)
