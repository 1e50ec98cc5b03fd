"""Two-stage scene text editing: mask generation then style transfer."""

__version__ = "0.1.0"

from .errors import (BackboneUnavailable, EmptyDataset, FastError, GlyphOverflow,
                     InsufficientAssets, MissingCheckpoint, MissingFont,
                     MissingStage1Checkpoint, NonFiniteLoss, ShapeMismatch)
