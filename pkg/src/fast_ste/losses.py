"""Training objectives for both stages.

Stage-I generator: weighted sum of pixel L2, adversarial BCE, two-tap
perceptual distance, and an MS-SSIM complement, with default weights
(1, 5, 1, 100).  Stage-II generator: pixel L1, adversarial BCE, and the
same perceptual taps with default weights (5, 1, 5).  Discriminators use
the symmetric real/fake BCE.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
import torch.nn.functional as F
from torch import nn

from . import ssim as ssim_mod
from .errors import ShapeMismatch

BCE_EPS = 1e-7

# Tap points in torchvision's VGG-19 feature stack: activations right
# after the ReLU of convolution #4 (layer index 8) and #9 (index 20).
# Kept as a single constant so the interpretation can change in one place.
VGG_TAP_INDICES = {4: 9, 9: 21}

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 5.0
    lambda3: float = 1.0
    lambda4: float = 100.0
    beta1: float = 5.0
    beta2: float = 1.0
    beta3: float = 5.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**{k: float(v) for k, v in d.items()})


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def pixel_l2(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean squared error over all elements."""
    _check_same_shape(a, b)
    return ((a - b) ** 2).mean()


def pixel_l1(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean absolute error over all elements."""
    _check_same_shape(a, b)
    return (a - b).abs().mean()


def _bce(pred: torch.Tensor, target_value: float) -> torch.Tensor:
    # written out explicitly so non-finite predictions propagate into the
    # loss value rather than tripping torch's input-range assertion
    p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS)
    return -(target_value * p.log() + (1.0 - target_value) * (1 - p).log()).mean()


def gan_loss_generator(patch_map: torch.Tensor) -> torch.Tensor:
    """BCE of the fake-pair patch map against an all-ones target."""
    return _bce(patch_map, 1.0)


def gan_loss_discriminator(real_map: torch.Tensor, fake_map: torch.Tensor) -> torch.Tensor:
    """Half the sum of real-vs-1 and fake-vs-0 BCE terms."""
    return 0.5 * (_bce(real_map, 1.0) + _bce(fake_map, 0.0))


class FeatureExtractor(nn.Module):
    """Frozen VGG-19 feature stack with taps after conv layers 4 and 9.

    Loads ImageNet weights when they are reachable; otherwise keeps a
    deterministically seeded random initialization (recorded in
    ``self.pretrained``) so the loss stays well-defined offline.
    """

    def __init__(self, taps=(4, 9)):
        super().__init__()
        from torchvision.models import vgg19

        try:
            backbone = vgg19(weights="IMAGENET1K_V1")
            self.pretrained = True
        except Exception:
            with torch.random.fork_rng():
                torch.manual_seed(0)
                backbone = vgg19(weights=None)
            self.pretrained = False
        self.taps = tuple(taps)
        cutoff = max(VGG_TAP_INDICES[t] for t in self.taps)
        self.features = backbone.features[:cutoff]
        for p in self.features.parameters():
            p.requires_grad_(False)
        self.eval()
        mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
        std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
        self.register_buffer("mean", mean)
        self.register_buffer("std", std)

    def train(self, mode: bool = True):  # stays frozen regardless of trainer calls
        return super().train(False)

    def forward(self, x: torch.Tensor) -> dict[int, torch.Tensor]:
        """Tap activations for an input in [-1, 1]."""
        x = (x + 1.0) / 2.0
        x = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        out = {}
        want = {VGG_TAP_INDICES[t]: t for t in self.taps}
        for i, layer in enumerate(self.features):
            x = layer(x)
            if i + 1 in want:
                out[want[i + 1]] = x
        return out


def perceptual_loss(a: torch.Tensor, b: torch.Tensor,
                    extractor: FeatureExtractor) -> dict[int, torch.Tensor]:
    """Per-tap mean absolute feature distance; caller sums the taps."""
    _check_same_shape(a, b)
    fa = extractor(a)
    fb = extractor(b)
    return {t: (fa[t] - fb[t]).abs().mean() for t in extractor.taps}


def msssim_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """1 - MS-SSIM, computed on a [0, 1] remap of [-1, 1] inputs."""
    _check_same_shape(a, b)
    return 1.0 - ssim_mod.ms_ssim((a + 1.0) / 2.0, (b + 1.0) / 2.0)


def stage1_generator_objective(terms: dict, weights: LossWeights):
    """l2*lambda1 + gan*lambda2 + (p4+p9)*lambda3 + ssim*lambda4."""
    return (weights.lambda1 * terms["l2"]
            + weights.lambda2 * terms["gan"]
            + weights.lambda3 * (terms["p4"] + terms["p9"])
            + weights.lambda4 * terms["ssim"])


def stage2_generator_objective(terms: dict, weights: LossWeights):
    """l1*beta1 + gan*beta2 + (p4+p9)*beta3."""
    return (weights.beta1 * terms["l1"]
            + weights.beta2 * terms["gan"]
            + weights.beta3 * (terms["p4"] + terms["p9"]))
