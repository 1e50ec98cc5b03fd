"""Two-stage adversarial training harness and ablation matrix runner.

Each stage alternates one discriminator step and one generator step per
iteration with Adam(0.5, 0.999).  Defaults follow the reference recipe:
lr 1e-3, batch 40, 100k iterations.  Desk-scale runs shrink iterations,
batch, and generator width through TrainConfig.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from . import losses, metrics
from .checkpoint import load_generator, save_checkpoint
from .data_synth import PairedDataset
from .discriminator import PatchDiscriminator
from .errors import EmptyDataset, MissingStage1Checkpoint, NonFiniteLoss
from .generator import (Generator, GeneratorConfig, IMAGE, MASK,
                        STAGE1_SCHEDULE, STAGE2_SCHEDULE,
                        stage1_config, stage2_config)
from .losses import LossWeights
from .mask_unet import MaskUNet, train_mask_unet

MASK_STAGE = "MASK"
IMAGE_STAGE = "IMAGE"
UNET_STAGE = "UNET"


@dataclass
class TrainConfig:
    stage: str = MASK_STAGE
    iterations: int = 100_000
    batch_size: int = 40
    lr: float = 1e-3
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    weights: LossWeights = field(default_factory=LossWeights)
    generator: GeneratorConfig = field(default_factory=stage1_config)
    seed: int = 0
    checkpoint_every: int = 10_000
    eval_every: int = 5_000

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")

    def to_dict(self) -> dict:
        return {"stage": self.stage, "iterations": self.iterations,
                "batch_size": self.batch_size, "lr": self.lr,
                "adam_beta1": self.adam_beta1, "adam_beta2": self.adam_beta2,
                "weights": self.weights.to_dict(),
                "generator": self.generator.to_dict(),
                "seed": self.seed, "checkpoint_every": self.checkpoint_every,
                "eval_every": self.eval_every}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "weights" in d:
            d["weights"] = LossWeights.from_dict(d["weights"])
        if "generator" in d:
            d["generator"] = GeneratorConfig.from_dict(d["generator"])
        return cls(**d)


class _JsonlLog:
    def __init__(self, path):
        self.path = Path(path) if path else None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.f = open(self.path, "w")

    def write(self, record: dict):
        if self.path:
            self.f.write(json.dumps(record) + "\n")
            self.f.flush()

    def close(self):
        if self.path:
            self.f.close()


def _stack_batch(dataset, indices) -> dict[str, torch.Tensor]:
    keys = ("i_a", "i_b", "m_a", "m_b", "m_f")
    items = [dataset[int(i)] for i in indices]
    return {k: torch.from_numpy(np.stack([it[k] for it in items])).float() for k in keys}


def _assemble_stage1_inputs(batch, gen_cfg: GeneratorConfig):
    cond = batch["i_a"] if gen_cfg.condition_kind == IMAGE else batch["m_a"]
    if gen_cfg.concat_source_mask:
        masks = torch.cat([batch["m_a"], batch["m_f"]], dim=1)
    else:
        masks = batch["m_f"]
    return cond, masks


def _check_finite(iteration: int, components: dict):
    bad = {k: v for k, v in components.items() if not np.isfinite(v)}
    if bad:
        raise NonFiniteLoss(iteration, bad)


def _quick_eval(generator, dataset, gen_cfg, stage: str, n: int = 16) -> dict:
    """MSE/PSNR/SSIM of current outputs on the first `n` samples."""
    generator.eval()
    n = min(n, len(dataset))
    batch = _stack_batch(dataset, range(n))
    with torch.no_grad():
        if stage == MASK_STAGE:
            cond, masks = _assemble_stage1_inputs(batch, gen_cfg)
            fake, target = generator(cond, masks), batch["m_b"]
        else:
            masks = torch.cat([batch["m_a"], batch["m_b"]], dim=1)
            fake, target = generator(batch["i_a"], masks), batch["i_b"]
    out = {"mse": 0.0, "psnr": 0.0, "ssim": 0.0}
    for i in range(n):
        a = ((fake[i] + 1) / 2).numpy()
        b = ((target[i] + 1) / 2).numpy()
        out["mse"] += metrics.mse(a, b) / n
        out["psnr"] += metrics.psnr(a, b) / n
        out["ssim"] += metrics.ssim(a, b) / n
    generator.train()
    return out


def _train_gan_stage(config: TrainConfig, dataset, out_dir, *,
                     stage: str, mask_source=None, log_path=None,
                     stop_pixel_loss: float | None = None) -> Path:
    """Shared loop for both stages; `mask_source(batch)` supplies the
    second mask channel for stage II (ground truth or frozen stage-I)."""
    if len(dataset) == 0:
        raise EmptyDataset("training dataset is empty")
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)

    if stage == MASK_STAGE:
        gen_cfg = config.generator
    else:
        gen_cfg = replace(config.generator, attention_schedule=STAGE2_SCHEDULE,
                          condition_kind=IMAGE, concat_source_mask=True)
    gen = Generator(gen_cfg)
    disc = PatchDiscriminator()
    opt_g = torch.optim.Adam(gen.parameters(), lr=config.lr,
                             betas=(config.adam_beta1, config.adam_beta2))
    opt_d = torch.optim.Adam(disc.parameters(), lr=config.lr,
                             betas=(config.adam_beta1, config.adam_beta2))
    use_perceptual = (config.weights.lambda3 if stage == MASK_STAGE
                      else config.weights.beta3) > 0
    extractor = losses.FeatureExtractor() if use_perceptual else None

    log = _JsonlLog(log_path)
    out = Path(out_dir)
    gen.train()
    disc.train()
    t0 = time.monotonic()
    pixel_name = "l2" if stage == MASK_STAGE else "l1"

    def save(tag=None):
        kwargs = ({"gm": gen, "dm": disc, "gm_config": gen_cfg}
                  if stage == MASK_STAGE else
                  {"gi": gen, "di": disc, "gi_config": gen_cfg})
        save_checkpoint(out, weights=config.weights,
                        extra={"train_config": config.to_dict()}, **kwargs)

    for it in range(1, config.iterations + 1):
        idx = rng.integers(0, len(dataset), size=config.batch_size)
        batch = _stack_batch(dataset, idx)
        if stage == MASK_STAGE:
            cond, masks = _assemble_stage1_inputs(batch, gen_cfg)
            anchor, target = batch["m_a"], batch["m_b"]
        else:
            m_b_used = mask_source(batch)
            cond = batch["i_a"]
            masks = torch.cat([batch["m_a"], m_b_used], dim=1)
            anchor, target = batch["i_a"], batch["i_b"]

        fake = gen(cond, masks)

        d_loss = losses.gan_loss_discriminator(disc(anchor, target),
                                               disc(anchor, fake.detach()))
        opt_d.zero_grad()
        d_loss.backward()
        opt_d.step()

        terms = {"gan": losses.gan_loss_generator(disc(anchor, fake))}
        if stage == MASK_STAGE:
            terms["l2"] = losses.pixel_l2(fake, target)
            terms["ssim"] = losses.msssim_loss(fake, target)
        else:
            terms["l1"] = losses.pixel_l1(fake, target)
        if extractor is not None:
            p = losses.perceptual_loss(fake, target, extractor)
            terms["p4"], terms["p9"] = p[4], p[9]
        else:
            terms["p4"] = terms["p9"] = torch.zeros(())
        g_loss = (losses.stage1_generator_objective(terms, config.weights)
                  if stage == MASK_STAGE
                  else losses.stage2_generator_objective(terms, config.weights))
        opt_g.zero_grad()
        g_loss.backward()
        opt_g.step()

        components = {k: float(v.detach()) for k, v in terms.items()}
        components["g_total"] = float(g_loss.detach())
        components["d"] = float(d_loss.detach())
        _check_finite(it, components)
        log.write({"iter": it, **components,
                   "wall_time": round(time.monotonic() - t0, 3)})

        if stop_pixel_loss is not None and components[pixel_name] < stop_pixel_loss:
            break
        if config.checkpoint_every and it % config.checkpoint_every == 0:
            save()
        if config.eval_every and it % config.eval_every == 0:
            ev = _quick_eval(gen, dataset, gen_cfg, stage)
            log.write({"iter": it, "eval": ev})

    save()
    log.close()
    return out


def train_stage1(config: TrainConfig, dataset, out_dir, log_path=None,
                 stop_pixel_loss: float | None = None) -> Path:
    """Train the target-mask generator and its discriminator."""
    return _train_gan_stage(config, dataset, out_dir, stage=MASK_STAGE,
                            log_path=log_path, stop_pixel_loss=stop_pixel_loss)


def train_stage2(config: TrainConfig, dataset, out_dir, *, cascaded: bool = False,
                 stage1_ckpt=None, log_path=None,
                 stop_pixel_loss: float | None = None) -> Path:
    """Train the image generator, teacher-forced by default.

    In cascaded mode the second guidance mask is produced by a frozen
    stage-I generator loaded from `stage1_ckpt`.
    """
    if cascaded:
        if stage1_ckpt is None or not (Path(stage1_ckpt) / "gm.weights").exists():
            raise MissingStage1Checkpoint(
                "cascaded stage-II training needs a stage-I checkpoint")
        gm = load_generator(stage1_ckpt, "gm")
        for p in gm.parameters():
            p.requires_grad_(False)
        gm_cfg = gm.config

        def mask_source(batch):
            with torch.no_grad():
                cond, masks = _assemble_stage1_inputs(batch, gm_cfg)
                return gm(cond, masks)
    else:
        def mask_source(batch):
            return batch["m_b"]

    return _train_gan_stage(config, dataset, out_dir, stage=IMAGE_STAGE,
                            mask_source=mask_source, log_path=log_path,
                            stop_pixel_loss=stop_pixel_loss)


def train_unet(config: TrainConfig, dataset, out_dir, base_channels: int = 64,
               epochs: int = 20, log_path=None) -> Path:
    """Train the source-mask U-Net on the dataset's (image, mask) pairs."""
    if len(dataset) == 0:
        raise EmptyDataset("training dataset is empty")
    model = MaskUNet(base_channels=base_channels)
    log = _JsonlLog(log_path)
    train_mask_unet(model, dataset, epochs=epochs, lr=config.lr,
                    batch_size=1, seed=config.seed, log=log.write)
    log.close()
    return save_checkpoint(out_dir, unet=model,
                           extra={"unet_base_channels": base_channels})


@dataclass
class AblationEntry:
    labels: dict
    config: TrainConfig
    dataset_root: str | None = None  # overrides the shared dataset (data mixing)


def attention_ablation_matrix(base: TrainConfig) -> list[AblationEntry]:
    """The three block-wise attention combinations, mask-conditioned."""
    rows = [("sigma", "sigma", "sigma", "sigma"),
            ("SA", "SA", "SA", "SA"),
            ("SA", "SA", "sigma", "sigma")]
    out = []
    for r in rows:
        schedule = tuple("SELF" if x == "SA" else "SIGMOID" for x in r)
        cfg = replace(base, generator=replace(
            base.generator, attention_schedule=schedule,
            condition_kind=MASK, concat_source_mask=True))
        out.append(AblationEntry(
            labels={"Block A": r[0], "Block B": r[1], "Block C": r[2], "Block D": r[3]},
            config=cfg))
    return out


def data_mixing_ablation_matrix(base: TrainConfig,
                                datasets: dict[str, str]) -> list[AblationEntry]:
    """One row per dataset label (e.g. single corpus vs concatenated mix)."""
    cfg = replace(base, generator=replace(
        base.generator, attention_schedule=STAGE1_SCHEDULE,
        condition_kind=MASK, concat_source_mask=True))
    return [AblationEntry(labels={"Dataset": name}, config=cfg, dataset_root=root)
            for name, root in datasets.items()]


def inputs_ablation_matrix(base: TrainConfig) -> list[AblationEntry]:
    """{Mask, Image} condition x {Concat, w/o Concat} source-mask input."""
    out = []
    for kind, label in ((MASK, "Mask"), (IMAGE, "Image")):
        for concat in (True, False):
            cfg = replace(base, generator=replace(
                base.generator, attention_schedule=STAGE1_SCHEDULE,
                condition_kind=kind, concat_source_mask=concat))
            out.append(AblationEntry(
                labels={"Input Image Type": label,
                        "Mask Concatenation": "Concat" if concat else "w/o Concat"},
                config=cfg))
    return out


class _ConcatDataset:
    def __init__(self, parts):
        self.parts = list(parts)

    def __len__(self):
        return sum(len(p) for p in self.parts)

    def __getitem__(self, idx):
        for p in self.parts:
            if idx < len(p):
                return p[idx]
            idx -= len(p)
        raise IndexError(idx)


def concat_datasets(roots) -> _ConcatDataset:
    """Manifest concatenation with uniform sampling (data mixing)."""
    return _ConcatDataset(PairedDataset(r) for r in roots)


def run_ablation(matrix: list[AblationEntry], dataset, out_dir) -> dict:
    """Train and evaluate every configuration; emit a table in the
    MSE/PSNR/SSIM schema (lower/higher/higher is better)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, entry in enumerate(matrix):
        ds = (PairedDataset(entry.dataset_root) if entry.dataset_root
              else dataset)
        run_dir = out / f"run{i:02d}"
        train_stage1(entry.config, ds, run_dir, log_path=run_dir / "train.jsonl")
        gen = load_generator(run_dir, "gm")
        ev = _quick_eval(gen, ds, gen.config, MASK_STAGE)
        rows.append({**entry.labels, "MSE": round(ev["mse"], 4),
                     "PSNR": round(ev["psnr"], 2), "SSIM": round(ev["ssim"], 3)})
    table = _render_table(rows)
    (out / "ablation.json").write_text(json.dumps(rows, indent=2) + "\n")
    (out / "ablation.md").write_text(table)
    return {"rows": rows, "table": table}


def _render_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0].keys())
    lines = ["| " + " | ".join(cols) + " |",
             "|" + "|".join("---" for _ in cols) + "|"]
    for r in rows:
        lines.append("| " + " | ".join(str(r[c]) for c in cols) + " |")
    return "\n".join(lines) + "\n"
