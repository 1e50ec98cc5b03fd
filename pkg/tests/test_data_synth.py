import numpy as np
import pytest

from fast_ste import data_synth as ds, imutil
from fast_ste.errors import GlyphOverflow, InsufficientAssets, MissingFont


def style_for(fonts, bg_id="bg00000", **kw):
    base = dict(font_id=fonts.ids()[0], background_id=bg_id, fill_rgb=(240, 20, 20))
    base.update(kw)
    return ds.identity_style(**base)


class TestRenderTextImage:
    def test_compositing_touches_only_mask_pixels(self, fonts, backgrounds):
        bg = backgrounds["bg00000"]
        img, mask = ds.render_text_image("HELLO", style_for(fonts), bg, fonts)
        coverage = (mask[0] > 0).mean()
        assert coverage > 0
        outside = mask[0] < 0
        assert np.abs(img - bg)[:, outside].max() <= 2 / 255
        inside = mask[0] > 0
        assert np.abs(img - bg)[:, inside].max() > 0

    def test_identity_mask_matches_raw_rasterizer(self, fonts, backgrounds):
        # with the identity transform the mask must equal the thresholded
        # rasterizer output used standalone
        style = style_for(fonts)
        _, mask = ds.render_text_image("I", style, backgrounds["bg00000"], fonts)
        alpha = ds._rasterize("I", fonts.resolve(style.font_id), style.glyph_height_px)
        crop = alpha[ds.PAD:ds.PAD + 64, ds.PAD:ds.PAD + 256]
        expected = np.where(crop > 0.5, 1.0, -1.0)
        assert np.array_equal(mask[0], expected)

    def test_empty_text_rejected(self, fonts, backgrounds):
        with pytest.raises(GlyphOverflow):
            ds.render_text_image("", style_for(fonts), backgrounds["bg00000"], fonts)

    def test_unknown_font(self, fonts, backgrounds):
        style = style_for(fonts, font_id="no-such-font")
        with pytest.raises(MissingFont):
            ds.render_text_image("HI", style, backgrounds["bg00000"], fonts)

    def test_oversized_text_overflows(self, fonts, backgrounds):
        style = style_for(fonts, glyph_height_px=56)
        with pytest.raises(GlyphOverflow):
            ds.render_text_image("WWWWWWWWWWWWWWWWWWWW", style,
                                 backgrounds["bg00000"], fonts)


class TestGeometricTransform:
    def test_identity_is_exact(self, fonts):
        rng = np.random.default_rng(0)
        canvas = rng.uniform(0, 1, size=(ds.WORK_H, ds.WORK_W)).astype(np.float32)
        out = ds.apply_geometric_transform(canvas, ds.identity_style())
        assert np.abs(out - canvas).max() < 1e-6

    def test_rotation_180_twice_restores(self, fonts):
        canvas = np.zeros((ds.WORK_H, ds.WORK_W), np.float32)
        canvas[40:90, 100:220] = np.random.default_rng(1).uniform(
            0.2, 1.0, size=(50, 120)).astype(np.float32)
        style = ds.identity_style()
        style.rotation_deg = 180.0
        once = ds.apply_geometric_transform(canvas, style)
        twice = ds.apply_geometric_transform(once, style)
        assert np.abs(twice - canvas).max() <= 2 / 255

    def test_curve_displaces_center_by_amplitude(self):
        # a one-pixel horizontal line should move down by amp*sin(pi*x/(W-1))
        amp = 4.0
        canvas = np.zeros((ds.WORK_H, ds.WORK_W), np.float32)
        row = 50
        canvas[row, :] = 1.0
        style = ds.identity_style()
        style.curve_amplitude_px = amp
        out = ds.apply_geometric_transform(canvas, style)
        for x in (0, ds.WORK_W // 2, ds.WORK_W - 1):
            expected = row + amp * np.sin(np.pi * x / (ds.WORK_W - 1))
            ys = np.nonzero(out[:, x] > 0.01)[0]
            centroid = (ys * out[ys, x]).sum() / out[ys, x].sum()
            assert abs(centroid - expected) < 0.5

    def test_alpha_and_color_transform_identically(self):
        rng = np.random.default_rng(2)
        layer = np.zeros((2, ds.WORK_H, ds.WORK_W), np.float32)
        layer[0, 40:80, 80:240] = rng.uniform(0, 1, (40, 160))
        layer[1] = layer[0]
        style = ds.identity_style()
        style.rotation_deg = 7.0
        style.curve_amplitude_px = 3.0
        out = ds.apply_geometric_transform(layer, style)
        assert np.array_equal(out[0], out[1])


class TestMakePairedSample:
    def test_same_text_degenerate(self, fonts, backgrounds):
        s = ds.make_paired_sample("WORD", "WORD", style_for(fonts),
                                  backgrounds["bg00000"], fonts)
        assert np.array_equal(s.i_a, s.i_b)
        assert np.array_equal(s.m_a, s.m_b)

    def test_background_identical_outside_mask_union(self, fonts, backgrounds):
        s = ds.make_paired_sample("CAT", "HOUSES", style_for(fonts),
                                  backgrounds["bg00001"], fonts)
        assert not np.array_equal(s.m_a, s.m_b)
        union = (s.m_a[0] > 0) | (s.m_b[0] > 0)
        assert np.array_equal(s.i_a[:, ~union], s.i_b[:, ~union])

    def test_fixed_mask_depends_only_on_target_text(self, fonts, backgrounds):
        s1 = ds.make_paired_sample("CAT", "DOG", style_for(fonts),
                                   backgrounds["bg00000"], fonts)
        other = style_for(fonts, bg_id="bg00001")
        other.rotation_deg = 9.0
        other.glyph_height_px = 28
        s2 = ds.make_paired_sample("FISH", "DOG", other, backgrounds["bg00001"], fonts)
        assert np.array_equal(s1.m_f, s2.m_f)

    def test_masks_are_strictly_binary(self, fonts, backgrounds):
        s = ds.make_paired_sample("ONE", "TWO", style_for(fonts),
                                  backgrounds["bg00002"], fonts)
        for m in (s.m_a, s.m_b, s.m_f):
            assert set(np.unique(m)) <= {-1.0, 1.0}


class TestGenerateDataset:
    def test_seed_determinism(self, tmp_path, fonts, backgrounds):
        a, b = tmp_path / "a", tmp_path / "b"
        ds.generate_dataset(6, fonts, backgrounds, seed=7, out_root=a)
        ds.generate_dataset(6, fonts, backgrounds, seed=7, out_root=b)
        assert (a / "manifest.jsonl").read_bytes() == (b / "manifest.jsonl").read_bytes()
        for sub in ds.SUBDIRS:
            for p in sorted((a / sub).iterdir()):
                assert p.read_bytes() == (b / sub / p.name).read_bytes()

    def test_empty_assets_rejected(self, tmp_path, backgrounds, fonts):
        with pytest.raises(InsufficientAssets):
            ds.generate_dataset(3, ds.FontSet({}), backgrounds, 0, tmp_path / "x")
        with pytest.raises(InsufficientAssets):
            ds.generate_dataset(3, fonts, {}, 0, tmp_path / "y")

    def test_layout_and_reader_roundtrip(self, small_dataset_root, small_dataset):
        assert len(small_dataset) == 8
        sample = small_dataset[0]
        assert sample["i_a"].shape == (3, 64, 256)
        assert set(np.unique(sample["m_a"])) <= {-1.0, 1.0}
        coverage = (sample["m_a"][0] > 0).mean()
        assert 0.01 < coverage < 0.9

    def test_mask_image_consistency_after_roundtrip(self, small_dataset):
        for i in range(len(small_dataset)):
            s = small_dataset[i]
            union = (s["m_a"][0] > 0) | (s["m_b"][0] > 0)
            assert np.array_equal(s["i_a"][:, ~union], s["i_b"][:, ~union])


class TestConvertMostel:
    def test_roundtrip(self, tmp_path, fonts, backgrounds):
        src = tmp_path / "mostel"
        out = tmp_path / "converted"
        root = tmp_path / "orig"
        ds.generate_dataset(2, fonts, backgrounds, seed=5, out_root=root)
        # MOSTEL-style source: same subdir names, plus a transcription file
        for sub in ("i_s", "i_t", "mask_s", "mask_t"):
            (src / sub).mkdir(parents=True)
            for p in (root / sub).iterdir():
                (src / sub / p.name).write_bytes(p.read_bytes())
        records = ds.PairedDataset(root).records
        lines = [f"{r['id']:06d}.png {r['text_tgt']}" for r in records]
        (src / "i_t.txt").write_text("\n".join(lines))
        ds.convert_mostel(src, out)
        converted = ds.PairedDataset(out)
        assert len(converted) == 2
        orig = ds.PairedDataset(root)
        assert np.array_equal(converted[0]["m_f"], orig[0]["m_f"])
