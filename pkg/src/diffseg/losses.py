"""Training losses on per-frame probability sequences ``(L, C)``."""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass
class LossWeights:
    w_ce: float = 1.0
    w_smo: float = 1.0
    w_bd: float = 1.0
    w_aux: float = 1.0
    smo_clip: float = 4.0
    log_eps: float = 1e-8

    def __post_init__(self) -> None:
        for name in ("w_ce", "w_smo", "w_bd", "w_aux"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.smo_clip < float("inf"):
            raise ValueError("smo_clip must be positive and finite")
        if self.log_eps <= 0:
            raise ValueError("log_eps must be positive")


def _same_shape(p: torch.Tensor, y: torch.Tensor) -> None:
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(p.shape)} vs {tuple(y.shape)}")


def loss_ce(p: torch.Tensor, y0: torch.Tensor, log_eps: float = 1e-8) -> torch.Tensor:
    """Cross-entropy averaged over all ``L * C`` entries."""
    _same_shape(p, y0)
    return -(y0 * torch.log(p + log_eps)).sum() / p.numel()


def loss_smooth(p: torch.Tensor, clip: float = 4.0, log_eps: float = 1e-8) -> torch.Tensor:
    """Mean squared frame-to-frame change of log-probabilities.

    Each absolute difference saturates at ``clip`` (no gradient beyond it).
    """
    L, C = p.shape
    if L < 2:
        return p.sum() * 0.0
    logp = torch.log(p + log_eps)
    diff = torch.clamp((logp[1:] - logp[:-1]).abs(), max=clip)
    return (diff**2).sum() / ((L - 1) * C)


def loss_boundary(p: torch.Tensor, b_soft: torch.Tensor, log_eps: float = 1e-8) -> torch.Tensor:
    """Binary cross-entropy between ``1 - <P_i, P_{i+1}>`` and soft boundaries."""
    L = p.shape[0]
    if b_soft.shape != (max(L - 1, 0),):
        raise ValueError(f"expected {L - 1} boundary values, got shape {tuple(b_soft.shape)}")
    if L < 2:
        return p.sum() * 0.0
    same = (p[1:] * p[:-1]).sum(dim=1)
    terms = -b_soft * torch.log(1 - same + log_eps) - (1 - b_soft) * torch.log(same + log_eps)
    return terms.mean()


def loss_sum(
    p: torch.Tensor,
    y0: torch.Tensor,
    b_soft: torch.Tensor,
    w: LossWeights,
    aux: torch.Tensor | None = None,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Weighted decoder losses plus auxiliary supervision on the encoder head.

    Returns the scalar objective and a float breakdown for logging.
    """
    ce = loss_ce(p, y0, w.log_eps)
    smo = loss_smooth(p, w.smo_clip, w.log_eps)
    bd = loss_boundary(p, b_soft, w.log_eps)
    total = w.w_ce * ce + w.w_smo * smo + w.w_bd * bd
    parts = {"ce": ce.item(), "smo": smo.item(), "bd": bd.item()}
    if aux is not None:
        aux_loss = loss_ce(aux, y0, w.log_eps) + loss_smooth(aux, w.smo_clip, w.log_eps)
        total = total + w.w_aux * aux_loss
        parts["aux"] = aux_loss.item()
    parts["total"] = total.item()
    return total, parts
