"""Evaluation metrics: MSE, PSNR, SSIM, MS-SSIM, LPIPS.

All metrics operate on [0, 1] RGB arrays of shape (3, H, W), i.e. after
inverting the [-1, 1] training remap.  LPIPS requires pretrained
SqueezeNet-backbone weights; when those are unreachable the metric is
reported as absent rather than fabricated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch

from . import imutil
from . import ssim as ssim_mod
from .data_synth import PairedDataset
from .errors import BackboneUnavailable, ShapeMismatch

PSNR_CAP_DB = 100.0


@dataclass
class MetricReport:
    mse: float
    psnr_db: float
    ssim: float
    ms_ssim: float
    lpips: float | None
    n_samples: int
    msssim_scales: int = len(ssim_mod.MSSSIM_WEIGHTS)
    lpips_backbone: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _check(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    _check(a, b)
    return float(np.mean((np.asarray(a, np.float64) - np.asarray(b, np.float64)) ** 2))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10*log10(1/MSE) in dB for unit dynamic range, capped at 100 dB."""
    err = mse(a, b)
    if err < 1e-10:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(1.0 / err))


def _pair_to_torch(a, b):
    ta = torch.from_numpy(np.asarray(a, np.float64))[None]
    tb = torch.from_numpy(np.asarray(b, np.float64))[None]
    return ta, tb


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Single-scale SSIM (11x11 Gaussian, sigma 1.5), averaged over channels."""
    _check(a, b)
    ta, tb = _pair_to_torch(a, b)
    with torch.no_grad():
        return float(ssim_mod.ssim(ta, tb))


def ms_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """3-scale MS-SSIM with renormalized weights (see ssim.MSSSIM_WEIGHTS)."""
    _check(a, b)
    ta, tb = _pair_to_torch(a, b)
    with torch.no_grad():
        return float(ssim_mod.ms_ssim(ta, tb))


class LpipsAdapter:
    """Pluggable perceptual-similarity backbone (SqueezeNet variant)."""

    def __init__(self, backbone: str = "squeeze"):
        self.backbone_name = backbone
        try:
            import lpips  # optional dependency

            self.model = lpips.LPIPS(net=backbone, verbose=False)
            self.model.eval()
        except Exception as e:
            raise BackboneUnavailable(
                f"LPIPS backbone '{backbone}' unavailable: {e}") from None

    def __call__(self, a: np.ndarray, b: np.ndarray) -> float:
        _check(a, b)
        ta = torch.from_numpy(np.asarray(a, np.float32))[None] * 2.0 - 1.0
        tb = torch.from_numpy(np.asarray(b, np.float32))[None] * 2.0 - 1.0
        with torch.no_grad():
            return float(self.model(ta, tb))


def lpips(a: np.ndarray, b: np.ndarray, adapter: LpipsAdapter | None = None) -> float:
    adapter = adapter or LpipsAdapter()
    return adapter(a, b)


def evaluate_pairs(dataset_root, generated_dir, out_path=None) -> MetricReport:
    """Average metrics of generated images against a dataset's targets.

    `generated_dir` holds `NNNNNN.png` files matching the manifest ids.
    Emits `report.json` when `out_path` is given.
    """
    ds = PairedDataset(dataset_root)
    gen = Path(generated_dir)
    try:
        adapter = LpipsAdapter()
    except BackboneUnavailable:
        adapter = None
    sums = {"mse": 0.0, "psnr": 0.0, "ssim": 0.0, "ms_ssim": 0.0, "lpips": 0.0}
    n = 0
    for rec in ds.records:
        name = f"{int(rec['id']):06d}.png"
        target = imutil.to_unit(imutil.load_image(ds.root / "i_t" / name))
        output = imutil.to_unit(imutil.load_image(gen / name))
        sums["mse"] += mse(output, target)
        sums["psnr"] += psnr(output, target)
        sums["ssim"] += ssim(output, target)
        sums["ms_ssim"] += ms_ssim(output, target)
        if adapter is not None:
            sums["lpips"] += adapter(output, target)
        n += 1
    if n == 0:
        raise ValueError("dataset has no samples")
    report = MetricReport(
        mse=sums["mse"] / n,
        psnr_db=sums["psnr"] / n,
        ssim=sums["ssim"] / n,
        ms_ssim=sums["ms_ssim"] / n,
        lpips=(sums["lpips"] / n) if adapter is not None else None,
        n_samples=n,
        lpips_backbone=adapter.backbone_name if adapter is not None else None,
    )
    if out_path is not None:
        Path(out_path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report
