import numpy as np
import pytest
import torch

from fast_ste import data_synth as ds
from fast_ste.checkpoint import save_checkpoint
from fast_ste.generator import Generator, stage1_config, stage2_config
from fast_ste.discriminator import PatchDiscriminator
from fast_ste.mask_unet import MaskUNet


@pytest.fixture(scope="session")
def fonts():
    return ds.FontSet.default()


@pytest.fixture(scope="session")
def backgrounds():
    return ds.make_backgrounds(6, seed=11)


@pytest.fixture(scope="session")
def small_dataset_root(tmp_path_factory, fonts, backgrounds):
    root = tmp_path_factory.mktemp("dataset")
    ds.generate_dataset(8, fonts, backgrounds, seed=3, out_root=root)
    return root


@pytest.fixture(scope="session")
def small_dataset(small_dataset_root):
    return ds.PairedDataset(small_dataset_root)


@pytest.fixture(scope="session")
def random_checkpoint(tmp_path_factory):
    """Untrained but fully wired checkpoint with small models."""
    torch.manual_seed(0)
    gm_cfg = stage1_config(base_channels=16)
    gi_cfg = stage2_config(base_channels=16)
    out = tmp_path_factory.mktemp("ckpt")
    save_checkpoint(out, gm=Generator(gm_cfg), gi=Generator(gi_cfg),
                    dm=PatchDiscriminator(), di=PatchDiscriminator(),
                    unet=MaskUNet(base_channels=8),
                    gm_config=gm_cfg, gi_config=gi_cfg,
                    extra={"unet_base_channels": 8})
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
