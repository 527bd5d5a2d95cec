"""Dilated temporal-convolution encoder and step-conditioned denoising decoder.

Tensors are ``(L, channels)``. The encoder turns input features into the
conditioning features plus an auxiliary per-frame prediction; the decoder maps
a noisy label sequence, its diffusion step, and the (masked) conditioning
features to class probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .numerics import DimensionError, dilated_conv1d, matmul, softmax_rows


@dataclass
class EncoderConfig:
    input_dim: int
    num_classes: int
    layers: int = 6
    width: int = 16
    tap_layers: tuple[int, ...] = ()  # 1-based; empty means the last layer

    def __post_init__(self) -> None:
        self.tap_layers = tuple(self.tap_layers) or (self.layers,)
        if self.layers < 1:
            raise ValueError("encoder needs at least one layer")
        if not set(self.tap_layers) <= set(range(1, self.layers + 1)):
            raise ValueError(f"tap_layers {self.tap_layers} outside 1..{self.layers}")

    @property
    def cond_dim(self) -> int:
        return self.width * len(self.tap_layers)


@dataclass
class DecoderConfig:
    cond_dim: int
    num_classes: int
    layers: int = 5
    width: int = 8
    step_embed_dim: int = 64
    total_steps: int = 1000

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ValueError("decoder needs at least one layer")
        if self.step_embed_dim % 2:
            raise ValueError(f"step_embed_dim must be even, got {self.step_embed_dim}")


def step_embedding(s: int, dim: int, S: int = 1000) -> np.ndarray:
    """Sinusoidal embedding: ``dim/2`` sines then ``dim/2`` cosines of ``s``."""
    if dim % 2:
        raise ValueError(f"embedding dim must be even, got {dim}")
    if not 0 <= s <= S:
        raise ValueError(f"step {s} outside [0, {S}]")
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    angles = s * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)])


def _uniform_init(gen: torch.Generator, shape: Sequence[int], fan_in: int) -> nn.Parameter:
    bound = 1.0 / math.sqrt(fan_in)
    w = (torch.rand(*shape, generator=gen, dtype=torch.float64) * 2 - 1) * bound
    return nn.Parameter(w)


class Linear(nn.Module):
    """Frame-wise linear map (a 1x1 convolution) on ``(L, in_dim)`` input."""

    def __init__(self, in_dim: int, out_dim: int, gen: torch.Generator):
        super().__init__()
        self.weight = _uniform_init(gen, (in_dim, out_dim), in_dim)
        self.bias = nn.Parameter(torch.zeros(out_dim, dtype=torch.float64))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return matmul(x, self.weight) + self.bias


class DilatedResidual(nn.Module):
    def __init__(self, width: int, dilation: int, gen: torch.Generator):
        super().__init__()
        self.dilation = dilation
        self.conv_weight = _uniform_init(gen, (width, width, 3), width * 3)
        self.conv_bias = nn.Parameter(torch.zeros(width, dtype=torch.float64))
        self.proj = Linear(width, width, gen)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = torch.relu(dilated_conv1d(x, self.conv_weight, self.dilation, self.conv_bias))
        return x + self.proj(h)


class Encoder(nn.Module):
    def __init__(self, cfg: EncoderConfig, gen: torch.Generator):
        super().__init__()
        self.cfg = cfg
        self.inp = Linear(cfg.input_dim, cfg.width, gen)
        self.blocks = nn.ModuleList(
            DilatedResidual(cfg.width, 2**i, gen) for i in range(cfg.layers)
        )
        self.head = Linear(cfg.width, cfg.num_classes, gen)

    def forward(self, f: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if f.dim() != 2 or f.shape[1] != self.cfg.input_dim:
            raise DimensionError(
                f"encoder expects (L, {self.cfg.input_dim}) features, got {tuple(f.shape)}"
            )
        h = self.inp(f)
        taps = []
        for i, block in enumerate(self.blocks, start=1):
            h = block(h)
            if i in self.cfg.tap_layers:
                taps.append(h)
        cond = taps[0] if len(taps) == 1 else torch.cat(taps, dim=1)
        return cond, softmax_rows(self.head(h))


class Decoder(nn.Module):
    def __init__(self, cfg: DecoderConfig, gen: torch.Generator):
        super().__init__()
        self.cfg = cfg
        self.inp = Linear(cfg.cond_dim + cfg.num_classes, cfg.width, gen)
        self.step_proj = Linear(cfg.step_embed_dim, cfg.width, gen)
        self.blocks = nn.ModuleList(
            DilatedResidual(cfg.width, 2**i, gen) for i in range(cfg.layers)
        )
        self.head = Linear(cfg.width, cfg.num_classes, gen)

    def forward(self, y_s: torch.Tensor, s: int, cond: torch.Tensor) -> torch.Tensor:
        c = self.cfg
        if y_s.dim() != 2 or y_s.shape[1] != c.num_classes:
            raise DimensionError(f"decoder expects (L, {c.num_classes}) input, got {tuple(y_s.shape)}")
        if cond.shape != (y_s.shape[0], c.cond_dim):
            raise DimensionError(
                f"conditioning shape {tuple(cond.shape)} != ({y_s.shape[0]}, {c.cond_dim})"
            )
        emb = torch.as_tensor(
            step_embedding(s, c.step_embed_dim, c.total_steps), dtype=y_s.dtype
        ).unsqueeze(0)
        h = self.inp(torch.cat([cond, y_s], dim=1)) + self.step_proj(emb)
        for block in self.blocks:
            h = block(h)
        return softmax_rows(self.head(h))


@dataclass
class ModelConfig:
    input_dim: int
    num_classes: int
    enc_layers: int = 6
    enc_width: int = 16
    enc_taps: tuple[int, ...] = ()
    dec_layers: int = 5
    dec_width: int = 8
    step_embed_dim: int = 64
    total_steps: int = 1000
    init_seed: int = 0
    encoder: EncoderConfig = field(init=False, repr=False)
    decoder: DecoderConfig = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.encoder = EncoderConfig(
            self.input_dim, self.num_classes, self.enc_layers, self.enc_width, self.enc_taps
        )
        self.enc_taps = self.encoder.tap_layers
        self.decoder = DecoderConfig(
            self.encoder.cond_dim,
            self.num_classes,
            self.dec_layers,
            self.dec_width,
            self.step_embed_dim,
            self.total_steps,
        )

    def as_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "num_classes": self.num_classes,
            "enc_layers": self.enc_layers,
            "enc_width": self.enc_width,
            "enc_taps": list(self.enc_taps),
            "dec_layers": self.dec_layers,
            "dec_width": self.dec_width,
            "step_embed_dim": self.step_embed_dim,
            "total_steps": self.total_steps,
            "init_seed": self.init_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["enc_taps"] = tuple(d.get("enc_taps", ()))
        return cls(**d)


class SegmentationModel(nn.Module):
    """Encoder and decoder trained end to end."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        gen = torch.Generator().manual_seed(cfg.init_seed)
        self.encoder = Encoder(cfg.encoder, gen)
        self.decoder = Decoder(cfg.decoder, gen)

    def encode(self, f: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return self.encoder(f)

    def decode(self, y_s: torch.Tensor, s: int, cond: torch.Tensor) -> torch.Tensor:
        return self.decoder(y_s, s, cond)

    @torch.no_grad()
    def denoiser(self, features: np.ndarray, mask: np.ndarray | None = None):
        """Encode once and return a ``(y_s, s) -> probabilities`` closure."""
        cond, _ = self.encode(torch.as_tensor(features, dtype=torch.float64))
        if mask is not None:
            cond = cond * torch.as_tensor(mask, dtype=cond.dtype).unsqueeze(1)

        @torch.no_grad()
        def denoise(y_s: np.ndarray, s: int) -> np.ndarray:
            return self.decode(torch.as_tensor(y_s, dtype=torch.float64), s, cond).numpy()

        return denoise


def receptive_field(layers: int) -> int:
    """Frames seen by a stack of kernel-3 layers with dilation ``2**l``."""
    return 2 ** (layers + 1) - 1
