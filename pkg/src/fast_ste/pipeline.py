"""End-to-end editing: crop in, edited crop out.

The pipeline resizes to 64x256, obtains the source mask (given or
U-Net-estimated), renders the target text in the fixed font, runs the
mask generator, then the image generator conditioned on
(source mask, estimated target mask), and resizes back.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import imutil
from .checkpoint import load_generator, load_unet, checkpoint_hash
from .data_synth import render_fixed_mask
from .errors import GlyphOverflow, MissingCheckpoint
from .generator import IMAGE
from .imutil import HEIGHT, WIDTH


@dataclass
class EditRequest:
    image: np.ndarray  # (3, H, W) in [-1, 1], any H/W
    target_text: str
    source_mask: np.ndarray | None = None  # (3, H, W) signed mask, optional

    def __post_init__(self):
        if not self.target_text:
            raise ValueError("target_text must be nonempty")


@dataclass
class EditResult:
    edited: np.ndarray           # (3, H, W), original dimensions
    source_mask: np.ndarray      # (3, 64, 256) signed, the mask actually used
    target_mask: np.ndarray      # (3, 64, 256) stage-I output (raw or binarized)


class EditPipeline:
    """Loads checkpoint models once; safe for concurrent read-only inference."""

    def __init__(self, ckpt_dir, binarize_mask: bool = False):
        ckpt = Path(ckpt_dir)
        if not ckpt.is_dir():
            raise MissingCheckpoint(f"checkpoint directory not found: {ckpt}")
        self.gm = load_generator(ckpt, "gm")
        self.gi = load_generator(ckpt, "gi")
        self.unet = load_unet(ckpt)
        self.binarize_mask = binarize_mask
        self.hash = checkpoint_hash(ckpt)

    def edit(self, request: EditRequest) -> EditResult:
        orig_h, orig_w = request.image.shape[1:]
        image = request.image
        if (orig_h, orig_w) != (HEIGHT, WIDTH):
            image = imutil.resize(image, HEIGHT, WIDTH)
        image = image.astype(np.float32)

        if request.source_mask is not None:
            m_a = request.source_mask
            if m_a.shape[1:] != (HEIGHT, WIDTH):
                m_a = imutil.resize(m_a, HEIGHT, WIDTH)
            m_a = np.where(m_a > 0, 1.0, -1.0).astype(np.float32)
        else:
            with torch.no_grad():
                soft = self.unet(torch.from_numpy(image[None]).float())[0, 0].numpy()
            m_a = np.where(soft > 0.5, 1.0, -1.0).astype(np.float32)
            m_a = np.stack([m_a] * 3, axis=0)

        m_f = render_fixed_mask(request.target_text)  # GlyphOverflow if unrenderable

        with torch.no_grad():
            t_img = torch.from_numpy(image[None]).float()
            t_ma = torch.from_numpy(m_a[None]).float()
            t_mf = torch.from_numpy(m_f[None]).float()
            if self.gm.config.condition_kind == IMAGE:
                cond = t_img
            else:
                cond = t_ma
            gm_in = torch.cat([t_ma, t_mf], 1) if self.gm.config.concat_source_mask else t_mf
            m_b = self.gm(cond, gm_in)
            if self.binarize_mask:
                m_b = torch.where(m_b > 0, 1.0, -1.0)
            edited = self.gi(t_img, torch.cat([t_ma, m_b], 1))[0].numpy()

        if (orig_h, orig_w) != (HEIGHT, WIDTH):
            edited = imutil.resize(edited, orig_h, orig_w)
        return EditResult(edited=edited.astype(np.float32),
                          source_mask=m_a,
                          target_mask=m_b[0].numpy())

    def estimate_soft_mask(self, image: np.ndarray) -> np.ndarray:
        """U-Net probability field at 64x256 for a [-1, 1] image of any size."""
        if image.shape[1:] != (HEIGHT, WIDTH):
            image = imutil.resize(image, HEIGHT, WIDTH)
        with torch.no_grad():
            return self.unet(torch.from_numpy(image[None].astype(np.float32)))[0, 0].numpy()


def edit(request: EditRequest, ckpt_dir, binarize_mask: bool = False) -> EditResult:
    """One-shot convenience wrapper around EditPipeline."""
    return EditPipeline(ckpt_dir, binarize_mask=binarize_mask).edit(request)
