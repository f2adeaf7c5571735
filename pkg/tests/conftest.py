import numpy as np
import pytest

from cdbin.codec import PixelImage, encode_image
from cdbin.data.synthetic import synthetic_document
from cdbin.ddgan.config import ModelConfig, TrainConfig

# A narrow network so training-loop tests run in seconds.
SMALL_MODEL = ModelConfig(
    generator_widths=(8, 16),
    global_channels=(4, 8),
    global_dense=(16, 8),
    local_channels=(4, 8, 8, 8, 8),
    local_dense=(16, 8, 8),
)


def small_config(**kw) -> TrainConfig:
    kw.setdefault("model", SMALL_MODEL)
    kw.setdefault("batch_size", 2)
    return TrainConfig(**kw)


def synthetic_tiles(n, size=256, quality=50, seed=0):
    """(streams, ground truth uint8) for ``n`` synthetic tiles."""
    streams, gts = [], []
    for i in range(n):
        doc, gt = synthetic_document(size, size, seed=seed + i)
        streams.append(encode_image(PixelImage(doc), quality))
        gts.append(gt)
    return streams, np.stack(gts)


@pytest.fixture(scope="session")
def four_tiles():
    return synthetic_tiles(4)
