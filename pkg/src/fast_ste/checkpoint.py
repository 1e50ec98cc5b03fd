"""Checkpoint directory format.

A checkpoint is a directory holding `gm.weights`, `gi.weights`,
`dm.weights`, `di.weights`, `unet.weights` (torch state dicts; only the
pieces trained so far are present) plus `config.json` echoing the
generator configs and loss weights.  Writes are atomic
(write-temp-then-rename).
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import torch

from .errors import MissingCheckpoint
from .generator import Generator, GeneratorConfig, stage2_config
from .discriminator import PatchDiscriminator
from .losses import LossWeights
from .mask_unet import MaskUNet

WEIGHT_FILES = ("gm.weights", "gi.weights", "dm.weights", "di.weights", "unet.weights")


def _atomic_torch_save(obj, path: Path):
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(obj, tmp)
    os.replace(tmp, path)


def save_checkpoint(out_dir, *, gm=None, gi=None, dm=None, di=None, unet=None,
                    gm_config: GeneratorConfig | None = None,
                    gi_config: GeneratorConfig | None = None,
                    weights: LossWeights | None = None,
                    extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    models = {"gm.weights": gm, "gi.weights": gi, "dm.weights": dm,
              "di.weights": di, "unet.weights": unet}
    for name, model in models.items():
        if model is not None:
            _atomic_torch_save(model.state_dict(), out / name)
    cfg_path = out / "config.json"
    cfg = json.loads(cfg_path.read_text()) if cfg_path.exists() else {}
    if gm_config is not None:
        cfg["gm"] = gm_config.to_dict()
    if gi_config is not None:
        cfg["gi"] = gi_config.to_dict()
    if weights is not None:
        cfg["loss_weights"] = weights.to_dict()
    if extra:
        cfg.update(extra)
    tmp = cfg_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, cfg_path)
    return out


def load_config(ckpt_dir) -> dict:
    path = Path(ckpt_dir) / "config.json"
    if not path.exists():
        raise MissingCheckpoint(f"no config.json under {ckpt_dir}")
    return json.loads(path.read_text())


def _load_state(path: Path, model):
    if not path.exists():
        raise MissingCheckpoint(f"missing weight file: {path}")
    model.load_state_dict(torch.load(path, map_location="cpu", weights_only=True))
    model.eval()
    return model


def load_generator(ckpt_dir, which: str) -> Generator:
    """which: "gm" or "gi"."""
    cfg = load_config(ckpt_dir)
    if which not in cfg:
        raise MissingCheckpoint(f"config.json has no '{which}' entry in {ckpt_dir}")
    model = Generator(GeneratorConfig.from_dict(cfg[which]))
    return _load_state(Path(ckpt_dir) / f"{which}.weights", model)


def load_discriminator(ckpt_dir, which: str) -> PatchDiscriminator:
    model = PatchDiscriminator()
    return _load_state(Path(ckpt_dir) / f"{which}.weights", model)


def load_unet(ckpt_dir, base_channels: int | None = None) -> MaskUNet:
    cfg = load_config(ckpt_dir)
    bc = base_channels or cfg.get("unet_base_channels", 64)
    model = MaskUNet(base_channels=bc)
    return _load_state(Path(ckpt_dir) / "unet.weights", model)


def checkpoint_hash(ckpt_dir) -> str:
    """Stable digest over all weight files and the config."""
    h = hashlib.sha256()
    root = Path(ckpt_dir)
    for name in (*WEIGHT_FILES, "config.json"):
        p = root / name
        if p.exists():
            h.update(name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()[:16]
