"""Exception types shared across the package."""


class FastError(Exception):
    """Base class for package-specific errors."""


class ShapeMismatch(FastError):
    """An array/tensor did not have the expected shape."""


class GlyphOverflow(FastError):
    """Rendered or transformed text does not fit the 64x256 canvas."""


class MissingFont(FastError):
    """A font id could not be resolved to a font file."""


class InsufficientAssets(FastError):
    """Font or background asset set is empty."""


class EmptyDataset(FastError):
    """A training dataset contains no samples."""


class NonFiniteLoss(FastError):
    """A loss became NaN/Inf during training; aborts the run."""

    def __init__(self, iteration, components):
        self.iteration = iteration
        self.components = components
        super().__init__(f"non-finite loss at iteration {iteration}: {components}")


class MissingCheckpoint(FastError):
    """Checkpoint directory missing or incomplete."""


class MissingStage1Checkpoint(MissingCheckpoint):
    """Cascaded stage-II training requested without a stage-I checkpoint."""


class BackboneUnavailable(FastError):
    """A pretrained metric backbone (LPIPS) has no weights available."""
