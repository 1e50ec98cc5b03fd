"""Differentiable SSIM / MS-SSIM kernels (torch), shared by losses and metrics.

Single-scale SSIM follows Wang et al. 2004: 11x11 Gaussian window with
sigma 1.5, K1=0.01, K2=0.03, dynamic range 1.0, averaged over window
positions and channels.  The multi-scale variant follows Wang 2003, but
at 64x256 only 3 scales are usable; the scale weights are the package
constants below and are echoed in metric reports.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .errors import ShapeMismatch

K1 = 0.01
K2 = 0.03
WINDOW_SIZE = 11
SIGMA = 1.5
DYNAMIC_RANGE = 1.0

# 3-scale weights for 64x256 inputs (canonical 5-scale weights need >= 11
# pixels at the coarsest scale, and 64 / 2^4 = 4)
MSSSIM_WEIGHTS = (0.2096, 0.4659, 0.3245)


def gaussian_window(size: int = WINDOW_SIZE, sigma: float = SIGMA,
                    dtype=torch.float32) -> torch.Tensor:
    coords = torch.arange(size, dtype=dtype) - (size - 1) / 2.0
    g = torch.exp(-(coords ** 2) / (2 * sigma ** 2))
    g = g / g.sum()
    return g[:, None] @ g[None, :]


def _ssim_maps(a: torch.Tensor, b: torch.Tensor):
    """Per-position luminance*contrast map and contrast-structure map."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"ssim inputs differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    c = a.shape[1]
    win = gaussian_window(dtype=a.dtype).to(a.device).expand(c, 1, WINDOW_SIZE, WINDOW_SIZE)
    mu_a = F.conv2d(a, win, groups=c)
    mu_b = F.conv2d(b, win, groups=c)
    mu_aa, mu_bb, mu_ab = mu_a * mu_a, mu_b * mu_b, mu_a * mu_b
    var_a = F.conv2d(a * a, win, groups=c) - mu_aa
    var_b = F.conv2d(b * b, win, groups=c) - mu_bb
    cov = F.conv2d(a * b, win, groups=c) - mu_ab
    c1 = (K1 * DYNAMIC_RANGE) ** 2
    c2 = (K2 * DYNAMIC_RANGE) ** 2
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    ssim = ((2 * mu_ab + c1) / (mu_aa + mu_bb + c1)) * cs
    return ssim, cs


def ssim(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean single-scale SSIM of NCHW tensors in [0, 1]."""
    ssim_map, _ = _ssim_maps(a, b)
    return ssim_map.mean()


def ms_ssim(a: torch.Tensor, b: torch.Tensor,
            weights=MSSSIM_WEIGHTS) -> torch.Tensor:
    """Multi-scale SSIM of NCHW tensors in [0, 1]."""
    levels = len(weights)
    vals = []
    for i in range(levels):
        ssim_map, cs_map = _ssim_maps(a, b)
        # clamp to keep fractional powers defined on noisy inputs
        vals.append((ssim_map if i == levels - 1 else cs_map).mean().clamp(min=1e-6))
        if i < levels - 1:
            a = F.avg_pool2d(a, 2)
            b = F.avg_pool2d(b, 2)
    out = torch.ones((), dtype=vals[0].dtype, device=vals[0].device)
    for v, w in zip(vals, weights):
        out = out * v ** w
    return out
