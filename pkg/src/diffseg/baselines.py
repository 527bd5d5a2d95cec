"""Reference predictors the trained model is compared against."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .diffusion import video_seed
from .synthdata import Video


def class_means(videos: Sequence[Video], num_classes: int) -> np.ndarray:
    feats = np.concatenate([v.features for v in videos]).astype(np.float64)
    labels = np.concatenate([v.labels for v in videos])
    means = np.zeros((num_classes, feats.shape[1]))
    for c in range(num_classes):
        if np.any(labels == c):
            means[c] = feats[labels == c].mean(axis=0)
    return means


def nearest_prototype(video: Video, prototypes: np.ndarray) -> np.ndarray:
    """Frame-wise nearest prototype in Euclidean distance."""
    d = ((video.features[:, None, :].astype(np.float64) - prototypes[None]) ** 2).sum(axis=2)
    return d.argmin(axis=1)


def permuted_labels(video: Video, seed: int = 0) -> np.ndarray:
    """Random guess with the right class frequencies: the true labels shuffled over frames."""
    rng = np.random.default_rng(video_seed(seed, video.id))
    return rng.permutation(video.labels)
