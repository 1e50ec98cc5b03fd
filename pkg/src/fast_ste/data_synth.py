"""Synthetic paired scene-text sample generation.

Each sample is a pair of word images rendered with one shared style
(font, size, color, geometric transform) on one shared background crop,
together with exact binary glyph masks and a fixed-font reference mask
of the target text.  Dataset layout on disk:

    <root>/{i_s,i_t,mask_s,mask_t,mask_f}/NNNNNN.png
    <root>/manifest.jsonl      one JSON record per sample

Images are 8-bit RGB PNG, masks 8-bit grayscale {0,255}.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

import cv2
import numpy as np
from PIL import Image, ImageDraw, ImageFont

from . import imutil
from .errors import GlyphOverflow, InsufficientAssets, MissingFont
from .imutil import HEIGHT, WIDTH

ASSET_DIR = Path(__file__).parent / "assets"
FIXED_FONT_PATH = ASSET_DIR / "DejaVuSans.ttf"

# Working canvas is padded so geometric transforms can move glyphs
# around before the central 64x256 crop is taken.
PAD = 32
WORK_H = HEIGHT + 2 * PAD
WORK_W = WIDTH + 2 * PAD

SUBDIRS = ("i_s", "i_t", "mask_s", "mask_t", "mask_f")


@dataclass
class StyleSpec:
    """Rendering style shared by the two words of a pair."""

    font_id: str
    glyph_height_px: int
    fill_rgb: tuple[int, int, int]
    rotation_deg: float
    curve_amplitude_px: float
    perspective_warp: tuple[float, ...]  # 8 corner offsets (dx1,dy1,...,dx4,dy4)
    background_id: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fill_rgb"] = list(self.fill_rgb)
        d["perspective_warp"] = [round(float(v), 4) for v in self.perspective_warp]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StyleSpec":
        return cls(
            font_id=d["font_id"],
            glyph_height_px=int(d["glyph_height_px"]),
            fill_rgb=tuple(int(v) for v in d["fill_rgb"]),
            rotation_deg=float(d["rotation_deg"]),
            curve_amplitude_px=float(d["curve_amplitude_px"]),
            perspective_warp=tuple(float(v) for v in d["perspective_warp"]),
            background_id=d["background_id"],
        )


IDENTITY_WARP = (0.0,) * 8


def identity_style(font_id: str = "fixed", glyph_height_px: int = 40,
                   fill_rgb=(255, 255, 255), background_id: str = "none") -> StyleSpec:
    return StyleSpec(font_id=font_id, glyph_height_px=glyph_height_px,
                     fill_rgb=fill_rgb, rotation_deg=0.0, curve_amplitude_px=0.0,
                     perspective_warp=IDENTITY_WARP, background_id=background_id)


@dataclass
class SceneTextSample:
    i_a: np.ndarray
    i_b: np.ndarray
    m_a: np.ndarray
    m_b: np.ndarray
    m_f: np.ndarray
    text_src: str
    text_tgt: str
    style: StyleSpec


class FontSet:
    """Maps font ids to TTF/OTF paths."""

    def __init__(self, fonts: dict[str, str]):
        self.fonts = dict(fonts)

    def __len__(self):
        return len(self.fonts)

    def ids(self) -> list[str]:
        return sorted(self.fonts)

    def resolve(self, font_id: str) -> str:
        if font_id == "fixed":
            return str(FIXED_FONT_PATH)
        try:
            return self.fonts[font_id]
        except KeyError:
            raise MissingFont(f"unknown font id: {font_id}") from None

    @classmethod
    def from_dir(cls, directory) -> "FontSet":
        fonts = {}
        for p in sorted(Path(directory).rglob("*")):
            if p.suffix.lower() in (".ttf", ".otf"):
                fonts[p.stem] = str(p)
        return cls(fonts)

    @classmethod
    def default(cls) -> "FontSet":
        """Fonts shipped with the system (DejaVu family) plus the bundled one."""
        fonts = {"fixed-sans": str(FIXED_FONT_PATH)}
        for d in ("/usr/share/fonts/truetype/dejavu",):
            if os.path.isdir(d):
                fonts.update(FontSet.from_dir(d).fonts)
        return cls(fonts)


def load_words() -> list[str]:
    with open(ASSET_DIR / "words.txt") as f:
        return [w for w in (line.strip() for line in f) if w]


def _rasterize(text: str, font_path: str, glyph_height_px: int) -> np.ndarray:
    """Render text centered on the padded working canvas; returns alpha in [0,1]."""
    if not (1 <= len(text) <= 20) or not text.isprintable():
        raise GlyphOverflow(f"text not renderable: {text!r}")
    try:
        font = ImageFont.truetype(font_path, glyph_height_px)
    except OSError as e:
        raise MissingFont(f"cannot load font {font_path}: {e}") from None
    canvas = Image.new("L", (WORK_W, WORK_H), 0)
    draw = ImageDraw.Draw(canvas)
    left, top, right, bottom = draw.textbbox((0, 0), text, font=font)
    tw, th = right - left, bottom - top
    if tw <= 0 or th <= 0 or tw > WIDTH - 6 or th > HEIGHT - 6:
        raise GlyphOverflow(
            f"glyphs for {text!r} at {glyph_height_px}px do not fit 64x256 ({tw}x{th})")
    x = (WORK_W - tw) // 2 - left
    y = (WORK_H - th) // 2 - top
    draw.text((x, y), text, fill=255, font=font)
    return np.asarray(canvas, dtype=np.float32) / 255.0


def apply_geometric_transform(canvas: np.ndarray, style: StyleSpec) -> np.ndarray:
    """Rotation, then sinusoidal vertical curve, then perspective homography.

    `canvas` is (C, H, W) or (H, W); every channel is resampled bilinearly
    with the same maps, so alpha transforms identically to color.
    """
    single = canvas.ndim == 2
    chans = canvas[None] if single else canvas
    h, w = chans.shape[1:]
    out = []
    for ch in chans:
        x = np.ascontiguousarray(ch.astype(np.float32))
        if style.rotation_deg != 0.0:
            m = cv2.getRotationMatrix2D(((w - 1) / 2.0, (h - 1) / 2.0),
                                        style.rotation_deg, 1.0)
            x = cv2.warpAffine(x, m, (w, h), flags=cv2.INTER_LINEAR,
                               borderMode=cv2.BORDER_CONSTANT, borderValue=0.0)
        if style.curve_amplitude_px != 0.0:
            xs = np.arange(w, dtype=np.float32)
            # one half-period across the canvas; content shifts down by dy(x)
            dy = style.curve_amplitude_px * np.sin(np.pi * xs / (w - 1))
            map_x = np.tile(xs, (h, 1))
            map_y = np.arange(h, dtype=np.float32)[:, None] - dy[None, :]
            x = cv2.remap(x, map_x, map_y.astype(np.float32), cv2.INTER_LINEAR,
                          borderMode=cv2.BORDER_CONSTANT, borderValue=0.0)
        if any(v != 0.0 for v in style.perspective_warp):
            src = np.array([[0, 0], [w - 1, 0], [w - 1, h - 1], [0, h - 1]],
                           dtype=np.float32)
            off = np.asarray(style.perspective_warp, dtype=np.float32).reshape(4, 2)
            hom = cv2.getPerspectiveTransform(src, src + off)
            x = cv2.warpPerspective(x, hom, (w, h), flags=cv2.INTER_LINEAR,
                                    borderMode=cv2.BORDER_CONSTANT, borderValue=0.0)
        out.append(x)
    result = np.stack(out, axis=0)
    return result[0] if single else result


def _transformed_alpha(text: str, style: StyleSpec, font_path: str) -> np.ndarray:
    """Rasterize + transform + center-crop; raises GlyphOverflow if clipped."""
    alpha = _rasterize(text, font_path, style.glyph_height_px)
    alpha = apply_geometric_transform(alpha, style)
    solid = alpha > 0.5
    ys, xs = np.nonzero(solid)
    if ys.size == 0:
        raise GlyphOverflow(f"no visible glyphs for {text!r}")
    if (ys.min() < PAD or ys.max() >= PAD + HEIGHT
            or xs.min() < PAD or xs.max() >= PAD + WIDTH):
        raise GlyphOverflow(f"transformed glyphs for {text!r} exceed the 64x256 canvas")
    return alpha[PAD:PAD + HEIGHT, PAD:PAD + WIDTH]


def render_text_image(text: str, style: StyleSpec, background: np.ndarray,
                      fonts: FontSet | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Composite styled text over a background crop.

    Returns (image, mask), both (3, 64, 256) in [-1, 1]; the mask is +1
    exactly where transformed glyph alpha exceeds 0.5.  Alpha-over
    compositing is restricted to mask-positive pixels so that everything
    outside the mask stays bit-identical to the background.
    """
    imutil.check_shape(background, name="background")
    fonts = fonts or FontSet.default()
    alpha = _transformed_alpha(text, style, fonts.resolve(style.font_id))
    solid = alpha > 0.5
    eff = np.where(solid, alpha, 0.0).astype(np.float32)[None]
    fill = imutil.to_signed(np.asarray(style.fill_rgb, np.float32)[:, None, None] / 255.0)
    image = background * (1.0 - eff) + fill * eff
    mask = np.where(solid, 1.0, -1.0).astype(np.float32)
    return image.astype(np.float32), np.stack([mask] * 3, axis=0)


def render_fixed_mask(text: str, glyph_height_px: int = 40) -> np.ndarray:
    """Target text in the single bundled font, identity transform, centered."""
    style = identity_style(glyph_height_px=glyph_height_px)
    alpha = _transformed_alpha(text, style, str(FIXED_FONT_PATH))
    mask = np.where(alpha > 0.5, 1.0, -1.0).astype(np.float32)
    return np.stack([mask] * 3, axis=0)


def make_paired_sample(text_src: str, text_tgt: str, style: StyleSpec,
                       background: np.ndarray,
                       fonts: FontSet | None = None) -> SceneTextSample:
    fonts = fonts or FontSet.default()
    i_a, m_a = render_text_image(text_src, style, background, fonts)
    i_b, m_b = render_text_image(text_tgt, style, background, fonts)
    m_f = render_fixed_mask(text_tgt)
    return SceneTextSample(i_a=i_a, i_b=i_b, m_a=m_a, m_b=m_b, m_f=m_f,
                           text_src=text_src, text_tgt=text_tgt, style=style)


def make_backgrounds(count: int, seed: int = 0,
                     noise_sigma: float = 0.02) -> dict[str, np.ndarray]:
    """Procedural smooth background crops for desk-scale datasets."""
    rng = np.random.default_rng(seed)
    out = {}
    for i in range(count):
        low = rng.uniform(0.0, 1.0, size=(4, 16, 3)).astype(np.float32)
        img = cv2.resize(low, (WIDTH, HEIGHT), interpolation=cv2.INTER_CUBIC)
        if noise_sigma > 0:
            img += rng.normal(0.0, noise_sigma, size=img.shape).astype(np.float32)
        img = np.clip(img, 0.0, 1.0)
        # quantize to 8-bit so in-memory and PNG-round-tripped values agree
        img = np.round(img * 255.0) / 255.0
        out[f"bg{i:05d}"] = imutil.to_signed(img.transpose(2, 0, 1)).astype(np.float32)
    return out


def load_backgrounds(directory) -> dict[str, np.ndarray]:
    out = {}
    for p in sorted(Path(directory).iterdir()):
        if p.suffix.lower() in (".png", ".jpg", ".jpeg"):
            img = imutil.load_image(p)
            if img.shape != imutil.CANONICAL_SHAPE:
                img = imutil.resize(img, HEIGHT, WIDTH)
            out[p.stem] = img.astype(np.float32)
    return out


@dataclass
class SynthConfig:
    """Sampling ranges for random styles; all exposed, none hard-coded."""

    glyph_height_range: tuple[int, int] = (22, 48)
    rotation_range: tuple[float, float] = (-15.0, 15.0)
    curve_range: tuple[float, float] = (0.0, 8.0)
    perspective_max_px: float = 4.0
    contrast_threshold: int = 30  # min mean |fill - mean bg| in 0..255 units
    max_attempts: int = 200


def _mean_bg_rgb(background: np.ndarray) -> np.ndarray:
    return imutil.to_unit(background).mean(axis=(1, 2)) * 255.0


def sample_style(rng: np.random.Generator, fonts: FontSet,
                 background_ids: list[str], cfg: SynthConfig) -> StyleSpec:
    lo, hi = cfg.glyph_height_range
    warp = rng.uniform(-cfg.perspective_max_px, cfg.perspective_max_px, size=8)
    return StyleSpec(
        font_id=fonts.ids()[rng.integers(0, len(fonts))],
        glyph_height_px=int(rng.integers(lo, hi + 1)),
        fill_rgb=tuple(int(v) for v in rng.integers(0, 256, size=3)),
        rotation_deg=round(float(rng.uniform(*cfg.rotation_range)), 3),
        curve_amplitude_px=round(float(rng.uniform(*cfg.curve_range)), 3),
        perspective_warp=tuple(round(float(v), 3) for v in warp),
        background_id=background_ids[rng.integers(0, len(background_ids))],
    )


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    # per-sample stream derived from (seed, index) so generation order
    # and parallelism cannot affect the result
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def generate_sample(index: int, seed: int, fonts: FontSet,
                    backgrounds: dict[str, np.ndarray], cfg: SynthConfig,
                    words: list[str]) -> SceneTextSample:
    """Deterministically generate sample `index`; resamples rejected styles."""
    rng = _sample_rng(seed, index)
    bg_ids = sorted(backgrounds)
    for _ in range(cfg.max_attempts):
        style = sample_style(rng, fonts, bg_ids, cfg)
        background = backgrounds[style.background_id]
        if np.abs(np.asarray(style.fill_rgb, np.float32)
                  - _mean_bg_rgb(background)).mean() < cfg.contrast_threshold:
            continue
        text_src = words[rng.integers(0, len(words))]
        text_tgt = words[rng.integers(0, len(words))]
        try:
            return make_paired_sample(text_src, text_tgt, style, background, fonts)
        except GlyphOverflow:
            continue
    raise RuntimeError(f"sample {index}: no valid style after {cfg.max_attempts} attempts")


def generate_dataset(count: int, fonts: FontSet, backgrounds: dict[str, np.ndarray],
                     seed: int, out_root, cfg: SynthConfig | None = None,
                     words: list[str] | None = None) -> Path:
    """Write a paired dataset to `out_root`; returns the manifest path."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if len(fonts) == 0 or len(backgrounds) == 0:
        raise InsufficientAssets("need at least one font and one background")
    cfg = cfg or SynthConfig()
    words = words or load_words()
    root = Path(out_root)
    for sub in SUBDIRS:
        (root / sub).mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(count):
        s = generate_sample(i, seed, fonts, backgrounds, cfg, words)
        name = f"{i:06d}.png"
        imutil.save_image(root / "i_s" / name, s.i_a)
        imutil.save_image(root / "i_t" / name, s.i_b)
        imutil.save_mask(root / "mask_s" / name, s.m_a)
        imutil.save_mask(root / "mask_t" / name, s.m_b)
        imutil.save_mask(root / "mask_f" / name, s.m_f)
        rec = {"id": i, "text_src": s.text_src, "text_tgt": s.text_tgt,
               "style": s.style.to_dict(), "seed": seed}
        records.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
    manifest = root / "manifest.jsonl"
    manifest.write_text("\n".join(records) + "\n")
    return manifest


class PairedDataset:
    """Reader for the on-disk dataset layout (also the external-data contract)."""

    def __init__(self, root):
        self.root = Path(root)
        manifest = self.root / "manifest.jsonl"
        if not manifest.exists():
            raise FileNotFoundError(f"no manifest.jsonl under {self.root}")
        self.records = [json.loads(line) for line in manifest.read_text().splitlines()
                        if line.strip()]

    def __len__(self):
        return len(self.records)

    def __getitem__(self, idx: int) -> dict:
        rec = self.records[idx]
        name = f"{int(rec['id']):06d}.png"
        return {
            "i_a": imutil.load_image(self.root / "i_s" / name),
            "i_b": imutil.load_image(self.root / "i_t" / name),
            "m_a": imutil.load_mask(self.root / "mask_s" / name),
            "m_b": imutil.load_mask(self.root / "mask_t" / name),
            "m_f": imutil.load_mask(self.root / "mask_f" / name),
            "text_src": rec["text_src"],
            "text_tgt": rec["text_tgt"],
        }


def convert_mostel(src_root, dst_root, text_file: str = "i_t.txt") -> Path:
    """Adapt a MOSTEL-format directory into this package's dataset layout.

    Expects `{src}/{i_s,i_t,mask_s,mask_t}/<name>.png` plus a text file of
    "<name> <target text>" lines used to render the fixed-font masks.
    """
    src = Path(src_root)
    dst = Path(dst_root)
    texts = {}
    tf = src / text_file
    if tf.exists():
        for line in tf.read_text().splitlines():
            parts = line.strip().split(maxsplit=1)
            if len(parts) == 2:
                texts[Path(parts[0]).stem] = parts[1]
    for sub in SUBDIRS:
        (dst / sub).mkdir(parents=True, exist_ok=True)
    records = []
    names = sorted(p.stem for p in (src / "i_s").glob("*.png"))
    for i, stem in enumerate(names):
        name = f"{i:06d}.png"
        for our, theirs in (("i_s", "i_s"), ("i_t", "i_t"),
                            ("mask_s", "mask_s"), ("mask_t", "mask_t")):
            img = imutil.load_image(src / theirs / f"{stem}.png")
            if img.shape != imutil.CANONICAL_SHAPE:
                img = imutil.resize(img, HEIGHT, WIDTH)
            if our.startswith("mask"):
                imutil.save_mask(dst / our / name, np.where(img.mean(0) > 0, 1.0, -1.0)[None].repeat(3, 0))
            else:
                imutil.save_image(dst / our / name, img)
        text_tgt = texts.get(stem, "")
        if text_tgt:
            imutil.save_mask(dst / "mask_f" / name, render_fixed_mask(text_tgt))
        else:
            # no transcription available: blank fixed-font mask
            imutil.save_mask(dst / "mask_f" / name,
                             -np.ones(imutil.CANONICAL_SHAPE, np.float32))
        records.append(json.dumps({"id": i, "text_src": "", "text_tgt": text_tgt,
                                   "style": None, "seed": 0, "source": stem},
                                  sort_keys=True, separators=(",", ":")))
    manifest = dst / "manifest.jsonl"
    manifest.write_text("\n".join(records) + "\n")
    return manifest


def dataset_digest(root) -> str:
    """SHA-256 over the manifest bytes; used for determinism checks."""
    return hashlib.sha256((Path(root) / "manifest.jsonl").read_bytes()).hexdigest()
