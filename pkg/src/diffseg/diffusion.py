"""Forward corruption of label sequences and the skipped-step denoising loop."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .schedule import NoiseSchedule, ScheduleConfigError

# (y_s, s) -> per-frame class probabilities, both (L, C)
Denoiser = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class CorruptionRecord:
    s: int
    epsilon: np.ndarray
    y_s: np.ndarray


def forward_corrupt(
    y0: np.ndarray,
    s: int,
    schedule: NoiseSchedule,
    rng: np.random.Generator | None = None,
    epsilon: np.ndarray | None = None,
) -> CorruptionRecord:
    if not 1 <= s <= schedule.S:
        raise ValueError(f"step {s} outside [1, {schedule.S}]")
    y0 = np.asarray(y0, dtype=np.float64)
    if epsilon is None:
        if rng is None:
            raise ValueError("need either rng or epsilon")
        epsilon = rng.standard_normal(y0.shape)
    a = schedule.abar(s)
    y_s = np.sqrt(a) * y0 + epsilon * np.sqrt(1 - a)
    return CorruptionRecord(s=s, epsilon=epsilon, y_s=y_s)


def ddim_update(
    y_s: np.ndarray,
    p_s: np.ndarray,
    s: int,
    s_prev: int,
    schedule: NoiseSchedule,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """One reverse step from ``s`` to ``s_prev`` given the decoder's probabilities.

    The probabilities are read as a clean-signal estimate in diffusion space
    via ``2 * p_s - 1``.
    """
    if not s > s_prev >= 0:
        raise ValueError(f"need s > s_prev >= 0, got s={s}, s_prev={s_prev}")
    x0_hat = 2.0 * np.asarray(p_s, dtype=np.float64) - 1.0
    if s_prev == 0:
        return x0_hat
    a, a_prev = schedule.abar(s), schedule.abar(s_prev)
    sigma = schedule.sigma_between(s, s_prev)
    dir_var = 1.0 - a_prev - sigma**2
    if dir_var < 0:
        if dir_var < -1e-12:
            raise ScheduleConfigError(
                f"1 - abar[{s_prev}] - sigma^2 = {dir_var} < 0; eta too large for this schedule"
            )
        dir_var = 0.0
    eps_hat = (y_s - np.sqrt(a) * x0_hat) / np.sqrt(1 - a)
    out = np.sqrt(a_prev) * x0_hat + np.sqrt(dir_var) * eps_hat
    if sigma > 0:
        if rng is None:
            raise ValueError("stochastic update (sigma > 0) needs an rng")
        out = out + sigma * rng.standard_normal(out.shape)
    return out


def video_seed(seed: int, video_id: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, zlib.crc32(video_id.encode("utf-8"))])


def run_inference(
    denoise: Denoiser,
    shape: tuple[int, int],
    schedule: NoiseSchedule,
    trajectory: Sequence[int],
    seed: int | np.random.SeedSequence,
    y_start: np.ndarray | None = None,
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """Denoise from pure noise along ``trajectory``.

    Returns the final probabilities, the probabilities at every visited step,
    and the diffusion-space states ``Y_S, ..., Y_0``.
    """
    traj = list(trajectory)
    if len(traj) < 2 or traj[-1] != 0 or any(a <= b for a, b in zip(traj, traj[1:])):
        raise ScheduleConfigError(f"invalid trajectory {traj[:4]}...")
    if traj[0] > schedule.S:
        raise ScheduleConfigError(f"trajectory starts at {traj[0]} > S={schedule.S}")
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(shape) if y_start is None else np.asarray(y_start, dtype=np.float64)
    probs: list[np.ndarray] = []
    states = [y]
    for s, s_prev in zip(traj, traj[1:]):
        p = denoise(y, s)
        probs.append(p)
        y = ddim_update(y, p, s, s_prev, schedule, rng)
        states.append(y)
    return probs[-1], probs, states
