"""Variance schedules, skipped-step trajectories, and the label <-> diffusion space maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ScheduleConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step tables for steps ``1..S``; index ``s - 1`` holds step ``s``.

    Step 0 is the clean signal: :meth:`abar` returns 1 there.
    """

    betas: np.ndarray
    eta: float = 1.0

    def __post_init__(self) -> None:
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ScheduleConfigError("betas must be a non-empty 1-D sequence")
        if not np.all((betas > 0) & (betas < 1)):
            raise ScheduleConfigError("every beta must lie in (0, 1)")
        if self.eta < 0:
            raise ScheduleConfigError(f"eta must be >= 0, got {self.eta}")
        betas.setflags(write=False)
        object.__setattr__(self, "betas", betas)

    @property
    def S(self) -> int:
        return int(self.betas.size)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bar(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    @property
    def sigma(self) -> np.ndarray:
        """sigma_s between adjacent steps s and s-1, for s = 1..S."""
        return np.array([self.sigma_between(s, s - 1) for s in range(1, self.S + 1)])

    def abar(self, s: int) -> float:
        if not 0 <= s <= self.S:
            raise ScheduleConfigError(f"step {s} outside [0, {self.S}]")
        return 1.0 if s == 0 else float(self.alpha_bar[s - 1])

    def sigma_between(self, s: int, s_prev: int) -> float:
        a, a_prev = self.abar(s), self.abar(s_prev)
        if self.eta == 0 or s_prev == 0:
            return 0.0
        return self.eta * np.sqrt((1 - a_prev) / (1 - a)) * np.sqrt(1 - a / a_prev)


def make_linear_schedule(
    S: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02, eta: float = 1.0
) -> NoiseSchedule:
    if S < 1:
        raise ScheduleConfigError(f"S must be >= 1, got {S}")
    if not 0 < beta_start <= beta_end < 1:
        raise ScheduleConfigError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    return NoiseSchedule(np.linspace(beta_start, beta_end, S), eta=eta)


def make_skip_trajectory(S: int, n_steps: int) -> list[int]:
    """``n_steps + 1`` evenly spaced step indices from ``S`` down to 0."""
    if not 1 <= n_steps <= S:
        raise ScheduleConfigError(f"n_steps must be in [1, {S}], got {n_steps}")
    return [int(v) for v in np.round(np.linspace(S, 0, n_steps + 1))]


def to_diffusion_space(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or not np.all((y == 0) | (y == 1)) or not np.all(y.sum(axis=1) == 1):
        raise ValueError("expected one-hot rows")
    return 2.0 * y - 1.0


def from_diffusion_space(x: np.ndarray) -> np.ndarray:
    p = np.clip((np.asarray(x, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)
    total = p.sum(axis=1, keepdims=True)
    uniform = np.full_like(p, 1.0 / p.shape[1])
    return np.where(total > 0, p / np.where(total > 0, total, 1.0), uniform)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out
