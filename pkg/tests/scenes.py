"""Synthetic classification scene: classes differ by structure scale and
contrast, not by mean gray level, so raw pixel values are ambiguous while
attribute profiles are not."""

import numpy as np

from attriprof import LabelMap, Raster

# class -> (block side, amplitude): two classes share each amplitude, so a
# single gray value cannot separate them
CLASS_STYLE = {1: (1, 50), 2: (2, 35), 3: (4, 50), 4: (8, 35)}


def make_scene(seed=2024, size=64, tile=16):
    """Returns (image Raster u8, train LabelMap, test LabelMap).

    The image is a grid of class tiles; each tile is paved with alternating
    bright/dark square blocks of a class-specific side length around a common
    mid gray. Train/test split is pixel-parity (held-out half).
    """
    rng = np.random.default_rng(seed)
    nt = size // tile
    classes = rng.permutation(np.repeat(np.arange(1, 5), (nt * nt) // 4))
    img = np.full((size, size), 128.0)
    labels = np.zeros((size, size), dtype=np.int32)
    for t, cls in enumerate(classes):
        ti, tj = divmod(t, nt)
        r0, c0 = ti * tile, tj * tile
        side, amp = CLASS_STYLE[int(cls)]
        rr = (np.arange(tile) // side)[:, None]
        cc = (np.arange(tile) // side)[None, :]
        sign = np.where((rr + cc) % 2 == 0, 1.0, -1.0)
        img[r0:r0 + tile, c0:c0 + tile] += sign * amp
        labels[r0:r0 + tile, c0:c0 + tile] = cls
    img += rng.normal(0.0, 4.0, img.shape)
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)

    parity = (np.add.outer(np.arange(size), np.arange(size)) % 2) == 0
    train = np.where(parity, labels, 0).astype(np.int32)
    test = np.where(~parity, labels, 0).astype(np.int32)
    return (
        Raster(values=img[np.newaxis]),
        LabelMap(labels=train),
        LabelMap(labels=test),
    )


SCENE_AREA_THRESHOLDS = (2, 8, 32, 128)
