"""Dense-array primitives used by the networks and losses.

Everything here works on 2-D tensors laid out as ``(frames, channels)``.
Reverse-mode differentiation is delegated to ``torch.autograd``; the
finite-difference checker in this module is the independent oracle used to
validate those gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import torch
import torch.nn.functional as F


class DimensionError(ValueError):
    pass


class GradientCheckError(FloatingPointError):
    pass


def _check_2d(name: str, x: torch.Tensor) -> None:
    if x.dim() != 2:
        raise DimensionError(f"{name} must be 2-D (rows x cols), got shape {tuple(x.shape)}")


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _check_2d("a", a)
    _check_2d("b", b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul shape mismatch: {tuple(a.shape)} x {tuple(b.shape)}"
        )
    return a @ b


def dilated_conv1d(
    x: torch.Tensor,
    kernel: torch.Tensor,
    dilation: int = 1,
    bias: torch.Tensor | None = None,
) -> torch.Tensor:
    """Length-preserving dilated convolution over the frame axis.

    ``x`` is ``(L, Cin)``, ``kernel`` is ``(Cout, Cin, k)`` with odd ``k``.
    Both ends are zero padded by ``dilation * (k - 1) // 2`` frames.
    """
    _check_2d("x", x)
    if kernel.dim() != 3:
        raise DimensionError(f"kernel must be (Cout, Cin, k), got {tuple(kernel.shape)}")
    k = kernel.shape[2]
    if k % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k}")
    if dilation < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")
    if kernel.shape[1] != x.shape[1]:
        raise DimensionError(
            f"conv input has {x.shape[1]} channels, kernel expects {kernel.shape[1]}"
        )
    pad = dilation * (k - 1) // 2
    out = F.conv1d(x.t().unsqueeze(0), kernel, bias, padding=pad, dilation=dilation)
    return out.squeeze(0).t()


def softmax_rows(x: torch.Tensor) -> torch.Tensor:
    _check_2d("x", x)
    shifted = x - x.max(dim=1, keepdim=True).values
    e = torch.exp(shifted)
    return e / e.sum(dim=1, keepdim=True)


@dataclass
class GradientReport:
    h: float
    tol: float
    max_rel_error: dict[str, float] = field(default_factory=dict)
    n_coords: dict[str, int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e <= self.tol for e in self.max_rel_error.values())

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    def failures(self) -> list[str]:
        return [k for k, e in self.max_rel_error.items() if e > self.tol]


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradient(
    f: Callable[[], torch.Tensor],
    params: Mapping[str, torch.Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-6,
) -> GradientReport:
    """Compare autograd gradients with central differences.

    ``f`` re-evaluates the scalar objective from the current contents of
    ``params`` (leaf tensors with ``requires_grad``). With ``max_coords``
    set, that many coordinates are sampled per parameter block; otherwise
    every coordinate is checked.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    for p in params.values():
        p.grad = None
    value = f()
    if not torch.isfinite(value):
        raise GradientCheckError(f"objective is not finite: {value.item()}")
    value.backward()

    report = GradientReport(h=h, tol=tol)
    rng = rng if rng is not None else np.random.default_rng(0)
    with torch.no_grad():
        for name, p in params.items():
            analytic = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
            flat = p.view(-1)
            n = flat.numel()
            if max_coords is None or max_coords >= n:
                coords = np.arange(n)
            else:
                coords = rng.choice(n, size=max_coords, replace=False)
            worst = 0.0
            for i in coords:
                orig = flat[i].item()
                flat[i] = orig + h
                fp = f().item()
                flat[i] = orig - h
                fm = f().item()
                flat[i] = orig
                if not (np.isfinite(fp) and np.isfinite(fm)):
                    raise GradientCheckError(f"objective not finite while perturbing {name}[{i}]")
                numeric = (fp - fm) / (2 * h)
                worst = max(worst, relative_error(analytic.view(-1)[i].item(), numeric, floor))
            report.max_rel_error[name] = worst
            report.n_coords[name] = len(coords)
    for p in params.values():
        p.grad = None
    return report
