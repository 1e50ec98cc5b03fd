import numpy as np
import pytest
import torch

from fast_ste.errors import EmptyDataset, ShapeMismatch
from fast_ste.mask_unet import MaskUNet, estimate_mask, train_mask_unet


def test_estimate_mask_contract(small_dataset):
    model = MaskUNet(base_channels=8)
    est = estimate_mask(model, small_dataset[0]["i_a"])
    assert est.soft.shape == (1, 64, 256)
    assert est.soft.min() >= 0.0 and est.soft.max() <= 1.0
    assert set(np.unique(est.hard)) <= {0.0, 1.0}
    assert np.array_equal(est.hard, (est.soft > 0.5).astype(np.float32))


def test_estimate_mask_shape_check():
    with pytest.raises(ShapeMismatch):
        estimate_mask(MaskUNet(base_channels=8), np.zeros((3, 32, 128), np.float32))


def test_empty_dataset_rejected():
    with pytest.raises(EmptyDataset):
        train_mask_unet(MaskUNet(base_channels=8), [])


def test_loss_mostly_non_increasing_early(small_dataset):
    # a fixed batch's BCE should drop over the first 50 steps for most seeds
    pairs = [small_dataset[0]]
    ok = 0
    for seed in range(10):
        torch.manual_seed(seed)
        model = MaskUNet(base_channels=8)
        losses = train_mask_unet(model, pairs, steps=50, epochs=1000, seed=seed)
        if losses[-1] <= losses[0]:
            ok += 1
    assert ok >= 9


def test_single_sample_overfit(small_dataset):
    pairs = [small_dataset[0]]
    torch.manual_seed(0)
    model = MaskUNet(base_channels=8)
    losses = train_mask_unet(model, pairs, steps=500, epochs=1000, seed=0)
    assert min(losses) < 0.05
