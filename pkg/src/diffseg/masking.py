"""Soft action boundaries and the condition masks applied to encoded features.

Mask kinds:

* ``N`` - all ones, features pass through.
* ``P`` - all zeros; only position and length cues remain.
* ``B`` - zeros frames next to a ground-truth boundary.
* ``R`` - zeros every frame of one action class present in the video.
"""

from __future__ import annotations

import logging
import math
from typing import Collection

import numpy as np

log = logging.getLogger(__name__)

MASK_KINDS = ("N", "P", "B", "R")


def hard_boundaries(labels: np.ndarray) -> np.ndarray:
    """Gap ``i`` is 1 iff frames ``i`` and ``i + 1`` carry different labels."""
    labels = np.asarray(labels)
    return (labels[1:] != labels[:-1]).astype(np.float64)


def gaussian_kernel(std: float) -> np.ndarray:
    """Peak-normalised Gaussian taps over ``[-ceil(4 std), ceil(4 std)]``."""
    if std <= 0:
        raise ValueError(f"std must be positive, got {std}")
    r = math.ceil(4 * std)
    k = np.arange(-r, r + 1, dtype=np.float64)
    return np.exp(-(k**2) / (2 * std**2))


def soften_boundaries(b: np.ndarray, std: float) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.size == 0:
        return b.copy()
    soft = np.convolve(b, gaussian_kernel(std), mode="full")
    r = (soft.size - b.size) // 2
    return np.clip(soft[r : r + b.size], 0.0, 1.0)


def frame_boundary_strength(b_soft: np.ndarray, length: int) -> np.ndarray:
    """Per-frame strength: the larger of the two gaps touching each frame."""
    b_soft = np.asarray(b_soft, dtype=np.float64)
    if b_soft.size != max(length - 1, 0):
        raise ValueError(f"expected {length - 1} gap values, got {b_soft.size}")
    padded = np.concatenate([[0.0], b_soft, [0.0]])
    return np.maximum(padded[:-1], padded[1:])


def make_mask(
    kind: str,
    labels: np.ndarray,
    b_soft: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    masked_class: int | None = None,
) -> np.ndarray:
    """Binary mask of length ``L``; 0 removes the frame's conditioning features."""
    labels = np.asarray(labels)
    L = labels.size
    if kind == "N":
        return np.ones(L)
    if kind == "P":
        return np.zeros(L)
    if kind == "B":
        if b_soft is None:
            raise ValueError("mask kind B needs soft boundaries")
        return (frame_boundary_strength(b_soft, L) < 0.5).astype(np.float64)
    if kind == "R":
        if masked_class is None:
            present = np.unique(labels)
            if present.size == 1:
                log.warning("relation mask on a single-class video blanks every frame")
            if rng is None:
                raise ValueError("mask kind R needs an rng")
            masked_class = int(present[rng.integers(present.size)])
        return (labels != masked_class).astype(np.float64)
    raise ValueError(f"unknown mask kind {kind!r}; expected one of {MASK_KINDS}")


def sample_mask_kind(enabled: Collection[str], rng: np.random.Generator) -> str:
    kinds = [k for k in MASK_KINDS if k in set(enabled)]
    if not kinds:
        raise ValueError("at least one mask kind must be enabled")
    unknown = set(enabled) - set(MASK_KINDS)
    if unknown:
        raise ValueError(f"unknown mask kinds {sorted(unknown)}")
    return kinds[rng.integers(len(kinds))]
