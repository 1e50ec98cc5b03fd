"""Command-line interface: `fast <subcommand>`."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import imutil, metrics
from .data_synth import (FontSet, PairedDataset, SynthConfig, convert_mostel,
                         generate_dataset, load_backgrounds, make_backgrounds)
from .errors import FastError
from .imutil import HEIGHT, WIDTH
from .pipeline import EditPipeline, EditRequest
from .trainer import (AblationEntry, TrainConfig, attention_ablation_matrix,
                      data_mixing_ablation_matrix, inputs_ablation_matrix,
                      run_ablation, train_stage1, train_stage2, train_unet)

ENV_CKPT = "FAST_CKPT_DIR"


@click.group()
def main():
    """Two-stage scene text editing toolkit."""


@main.command("gen-data")
@click.option("--count", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--fonts", "fonts_dir", type=click.Path(exists=True), default=None,
              help="Directory of TTF/OTF fonts; defaults to the system DejaVu set.")
@click.option("--backgrounds", "bg_dir", type=click.Path(exists=True), default=None,
              help="Directory of background images; defaults to procedural crops.")
@click.option("--n-backgrounds", type=int, default=64,
              help="How many procedural backgrounds when --backgrounds is absent.")
def gen_data(count, seed, out_dir, fonts_dir, bg_dir, n_backgrounds):
    """Generate a paired synthetic dataset."""
    fonts = FontSet.from_dir(fonts_dir) if fonts_dir else FontSet.default()
    bgs = load_backgrounds(bg_dir) if bg_dir else make_backgrounds(n_backgrounds, seed)
    manifest = generate_dataset(count, fonts, bgs, seed, out_dir)
    click.echo(f"wrote {count} samples, manifest: {manifest}")


@main.command("convert-mostel")
@click.option("--src", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def convert(src, out_dir):
    """Adapt a MOSTEL-format dataset into this package's layout."""
    manifest = convert_mostel(src, out_dir)
    click.echo(f"manifest: {manifest}")


def _load_train_config(config_path, stage) -> TrainConfig:
    if config_path:
        cfg = TrainConfig.from_dict(json.loads(Path(config_path).read_text()))
    else:
        cfg = TrainConfig()
    cfg.stage = stage.upper()
    return cfg


@main.command()
@click.option("--stage", type=click.Choice(["mask", "image", "unet"]), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--cascaded", is_flag=True, help="Stage II consumes frozen stage-I output.")
@click.option("--stage1-ckpt", type=click.Path(), default=None)
def train(stage, config_path, data_dir, out_dir, cascaded, stage1_ckpt):
    """Train one pipeline stage."""
    cfg = _load_train_config(config_path, stage)
    dataset = PairedDataset(data_dir)
    log = Path(out_dir) / "train.jsonl"
    if stage == "mask":
        train_stage1(cfg, dataset, out_dir, log_path=log)
    elif stage == "image":
        train_stage2(cfg, dataset, out_dir, cascaded=cascaded,
                     stage1_ckpt=stage1_ckpt or out_dir, log_path=log)
    else:
        train_unet(cfg, dataset, out_dir, log_path=log)
    click.echo(f"checkpoint: {out_dir}")


@main.command()
@click.option("--matrix", "matrix_path", type=click.Path(exists=True), default=None,
              help="JSON list of {labels, config, dataset_root?} entries.")
@click.option("--preset", type=click.Choice(["attention", "inputs"]), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def ablate(matrix_path, preset, config_path, data_dir, out_dir):
    """Run an ablation configuration matrix."""
    base = _load_train_config(config_path, "mask")
    if matrix_path:
        entries = [AblationEntry(labels=e["labels"],
                                 config=TrainConfig.from_dict(e["config"]),
                                 dataset_root=e.get("dataset_root"))
                   for e in json.loads(Path(matrix_path).read_text())]
    elif preset == "attention":
        entries = attention_ablation_matrix(base)
    elif preset == "inputs":
        entries = inputs_ablation_matrix(base)
    else:
        raise click.UsageError("provide --matrix or --preset")
    result = run_ablation(entries, PairedDataset(data_dir), out_dir)
    click.echo(result["table"])


@main.command("eval")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--generated", "generated_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default="report.json")
def eval_cmd(dataset_dir, generated_dir, out_path):
    """Compute the metric report for generated images."""
    report = metrics.evaluate_pairs(dataset_dir, generated_dir, out_path)
    click.echo(json.dumps(report.to_dict(), indent=2))


@main.command("edit")
@click.option("--image", "image_path", type=click.Path(exists=True), required=True)
@click.option("--text", required=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None)
@click.option("--ckpt", "ckpt_dir", type=click.Path(), default=None,
              help=f"Checkpoint directory; falls back to ${ENV_CKPT}.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--debug-dir", type=click.Path(), default=None,
              help="Write m_A, m_F and the stage-I mask as PNG intermediates.")
@click.option("--binarize-mask/--raw-mask", default=False,
              help="Threshold the stage-I mask at 0 before stage II (default raw).")
def edit_cmd(image_path, text, mask_path, ckpt_dir, out_path, debug_dir, binarize_mask):
    """Edit the text in one crop; exit 2 on validation errors."""
    ckpt_dir = ckpt_dir or os.environ.get(ENV_CKPT)
    try:
        if not ckpt_dir:
            raise FastError(f"no checkpoint given (--ckpt or ${ENV_CKPT})")
        pipe = EditPipeline(ckpt_dir, binarize_mask=binarize_mask)
        image = imutil.load_image(image_path)
        mask = imutil.load_mask(mask_path) if mask_path else None
        result = pipe.edit(EditRequest(image=image, target_text=text, source_mask=mask))
    except (FastError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    imutil.save_image(out_path, result.edited)
    if debug_dir:
        dbg = Path(debug_dir)
        dbg.mkdir(parents=True, exist_ok=True)
        from .data_synth import render_fixed_mask

        imutil.save_mask(dbg / "m_a.png", result.source_mask)
        imutil.save_mask(dbg / "m_f.png", render_fixed_mask(text))
        imutil.save_image(dbg / "m_b_hat.png", result.target_mask)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--ckpt", "ckpt_dir", type=click.Path(exists=True), default=None)
@click.option("--address", default="127.0.0.1:8000")
@click.option("--binarize-mask/--raw-mask", default=False)
def serve(ckpt_dir, address, binarize_mask):
    """Run the HTTP editing service."""
    from .server import serve as run

    run(ckpt_dir or os.environ.get(ENV_CKPT), address, binarize_mask=binarize_mask)


if __name__ == "__main__":
    main()
