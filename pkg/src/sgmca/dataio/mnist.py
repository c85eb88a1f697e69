"""Digit images and their split into three overlapping tile modalities.

Each 28x28 image is mean-pooled 2x2 to 14x14 and scaled to [0, 1]. From the
top seven rows three 7x7 tiles are cut:

* modality 0, columns 3-9: upper-central, overlapping both others
  (4 columns with the left tile, 3 with the right);
* modality 1, columns 0-6: upper-left;
* modality 2, columns 7-13: upper-right.

Tiles are vectorized row-major, giving 49-dimensional samples. The central
tile is modality 0 because it is the one sharing pixels with both others.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .idx import IdxDimensionError, read_idx

__all__ = ["ImageSet", "TiledModalities", "load_images", "pool", "tile", "TILE_COLUMNS"]

IMAGE_SIZE = 28
TILE_ROWS = slice(0, 7)
TILE_COLUMNS = (slice(3, 10), slice(0, 7), slice(7, 14))


@dataclass(frozen=True)
class ImageSet:
    """``images`` is ``(N, 28, 28)`` uint8, ``labels`` is ``(N,)`` with values 0-9."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        images = np.asarray(self.images)
        labels = np.asarray(self.labels)
        if images.ndim != 3 or images.shape[1:] != (IMAGE_SIZE, IMAGE_SIZE):
            raise IdxDimensionError(f"images must be (N, 28, 28), got {images.shape}")
        if labels.shape != (images.shape[0],):
            raise IdxDimensionError(f"{images.shape[0]} images but labels have shape {labels.shape}")
        if images.size and (images.min() < 0 or images.max() > 255):
            raise ValueError("pixel values must lie in [0, 255]")
        if labels.size and (labels.min() < 0 or labels.max() > 9):
            raise ValueError("labels must lie in [0, 9]")
        object.__setattr__(self, "images", images.astype(np.uint8, copy=False))
        object.__setattr__(self, "labels", labels.astype(np.int64))

    @property
    def count(self) -> int:
        return self.images.shape[0]

    def subset(self, index):
        return ImageSet(self.images[index], self.labels[index])


@dataclass(frozen=True)
class TiledModalities:
    """Three matched ``(49, N)`` modality matrices plus the digit labels."""

    x0: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    labels: np.ndarray

    @property
    def count(self) -> int:
        return self.labels.shape[0]

    @property
    def modalities(self):
        return (self.x0, self.x1, self.x2)


def load_images(images_path, labels_path=None):
    """Read an IDX image file and, optionally, its IDX label file."""
    images = read_idx(images_path, ndim=3)
    if labels_path is None:
        labels = np.zeros(images.shape[0], dtype=np.int64)
    else:
        labels = read_idx(labels_path, ndim=1)
    return ImageSet(images, labels)


def pool(images):
    """2x2 mean pooling of ``(N, 28, 28)`` images to ``(N, 14, 14)`` in [0, 1]."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3 or images.shape[1:] != (IMAGE_SIZE, IMAGE_SIZE):
        raise IdxDimensionError(f"images must be (N, 28, 28), got {images.shape}")
    n = images.shape[0]
    return images.reshape(n, 14, 2, 14, 2).mean(axis=(2, 4)) / 255.0


def tile(image_set):
    """Cut every image into the three tile modalities."""
    images = image_set.images if isinstance(image_set, ImageSet) else image_set
    labels = image_set.labels if isinstance(image_set, ImageSet) else np.zeros(len(images), np.int64)
    pooled = pool(images)
    n = pooled.shape[0]
    xs = [np.ascontiguousarray(pooled[:, TILE_ROWS, cols].reshape(n, 49).T) for cols in TILE_COLUMNS]
    return TiledModalities(*xs, labels=np.asarray(labels).copy())
