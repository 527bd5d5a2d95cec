"""Training loop and batched inference.

Each training sample is encoded, corrupted at its own random diffusion step,
given a randomly chosen condition mask, and denoised; the batch loss is the
mean of the per-video losses. All randomness flows from one
``numpy.random.Generator`` whose state is stored in every checkpoint, so a
resumed run continues bit-exactly.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .checkpoint import read_checkpoint, write_checkpoint
from .diffusion import forward_corrupt, run_inference, video_seed
from .losses import LossWeights, loss_sum
from .masking import MASK_KINDS, hard_boundaries, make_mask, sample_mask_kind, soften_boundaries
from .metrics import MetricAccumulator, MetricReport
from .model import ModelConfig, SegmentationModel
from .schedule import NoiseSchedule, make_skip_trajectory, one_hot, to_diffusion_space
from .synthdata import Video

log = logging.getLogger(__name__)


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 4
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    mask_kinds: tuple[str, ...] = ("N", "P", "B", "R")
    boundary_std: float = 3.0
    checkpoint_every: int = 0  # epochs; 0 keeps only the final checkpoint
    val_every: int = 0  # epochs; needs a "val" split

    def __post_init__(self) -> None:
        self.mask_kinds = tuple(self.mask_kinds)
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate < 0 or self.adam_eps <= 0:
            raise ValueError("learning_rate must be >= 0 and adam_eps > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1, beta2 must lie in [0, 1)")
        if self.boundary_std <= 0:
            raise ValueError("boundary_std must be positive")
        bad = [k for k in self.mask_kinds if k not in MASK_KINDS]
        if bad or not self.mask_kinds:
            raise ValueError(f"mask_kinds must be a non-empty subset of {MASK_KINDS}, got {self.mask_kinds}")


@dataclass
class EvalConfig:
    steps: int = 25
    seed: int = 0
    infer_mask: str = "N"
    split: str = "test"
    threads: int = 1


@dataclass
class TrainLogRecord:
    iteration: int
    epoch: int
    steps: list[int]
    masks: list[str]
    losses: dict[str, float]
    wall: float = 0.0

    def to_line(self) -> str:
        parts = [
            f"iter={self.iteration}",
            f"epoch={self.epoch}",
            "s=" + ",".join(map(str, self.steps)),
            "mask=" + ",".join(self.masks),
        ]
        parts += [f"{k}={v:.10g}" for k, v in self.losses.items()]
        parts.append(f"time={self.wall:.3f}")
        return " ".join(parts)


@dataclass
class TrainState:
    model: SegmentationModel
    optimizer: torch.optim.Adam
    rng: np.random.Generator
    epoch: int = 0
    iteration: int = 0
    best_avg: float = -math.inf
    history: list[TrainLogRecord] = field(default_factory=list)


def make_optimizer(model: SegmentationModel, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        model.parameters(),
        lr=cfg.learning_rate,
        betas=(cfg.beta1, cfg.beta2),
        eps=cfg.adam_eps,
        foreach=False,
    )


def new_state(model_cfg: ModelConfig, cfg: TrainConfig) -> TrainState:
    model = SegmentationModel(model_cfg)
    return TrainState(model, make_optimizer(model, cfg), np.random.default_rng(cfg.seed))


def _soft_boundaries(video: Video, std: float, cache: dict) -> np.ndarray:
    key = (video.id, std)
    if key not in cache:
        cache[key] = soften_boundaries(hard_boundaries(video.labels), std)
    return cache[key]


def train_step(
    state: TrainState,
    batch: Sequence[Video],
    schedule: NoiseSchedule,
    cfg: TrainConfig,
    weights: LossWeights,
    boundary_cache: dict | None = None,
) -> TrainLogRecord:
    if not batch:
        raise ValueError("empty batch")
    cache = {} if boundary_cache is None else boundary_cache
    model, rng = state.model, state.rng
    C = model.cfg.num_classes
    total = None
    sums: dict[str, float] = {}
    steps, kinds = [], []
    for video in batch:
        f = torch.as_tensor(video.features, dtype=torch.float64)
        y0 = one_hot(video.labels, C)
        cond, aux = model.encode(f)
        s = int(rng.integers(1, schedule.S + 1))
        rec = forward_corrupt(to_diffusion_space(y0), s, schedule, rng)
        kind = sample_mask_kind(cfg.mask_kinds, rng)
        b_soft = _soft_boundaries(video, cfg.boundary_std, cache)
        mask = make_mask(kind, video.labels, b_soft, rng)
        masked = cond * torch.as_tensor(mask).unsqueeze(1)
        p = model.decode(torch.as_tensor(rec.y_s), s, masked)
        loss, parts = loss_sum(p, torch.as_tensor(y0), torch.as_tensor(b_soft), weights, aux)
        total = loss if total is None else total + loss
        for k, v in parts.items():
            sums[k] = sums.get(k, 0.0) + v / len(batch)
        steps.append(s)
        kinds.append(kind)
    total = total / len(batch)
    if not torch.isfinite(total):
        raise TrainingDivergedError(
            f"non-finite loss at iteration {state.iteration}: steps={steps} masks={kinds} parts={sums}"
        )
    state.optimizer.zero_grad(set_to_none=True)
    total.backward()
    state.optimizer.step()
    state.iteration += 1
    return TrainLogRecord(state.iteration, state.epoch, steps, kinds, sums)


# --- checkpoints ------------------------------------------------------------


def save_state(path: str | Path, state: TrainState, extra_header: dict | None = None) -> None:
    header = {
        "model": state.model.cfg.as_dict(),
        "epoch": state.epoch,
        "iteration": state.iteration,
        "rng_state": state.rng.bit_generator.state,
        "best_avg": None if math.isinf(state.best_avg) else state.best_avg,
    }
    header.update(extra_header or {})
    blocks: dict[str, np.ndarray] = {}
    params = dict(state.model.named_parameters())
    for name, p in params.items():
        blocks[f"param/{name}"] = p.detach().numpy()
    steps = {}
    for name, p in params.items():
        st = state.optimizer.state.get(p)
        if st:
            blocks[f"adam_m/{name}"] = st["exp_avg"].numpy()
            blocks[f"adam_v/{name}"] = st["exp_avg_sq"].numpy()
            steps[name] = float(st["step"])
    header["adam_steps"] = steps
    write_checkpoint(path, header, blocks)


def load_model(path: str | Path) -> tuple[SegmentationModel, dict]:
    header, blocks = read_checkpoint(path)
    model = SegmentationModel(ModelConfig.from_dict(header["model"]))
    with torch.no_grad():
        for name, p in model.named_parameters():
            key = f"param/{name}"
            if key not in blocks:
                raise KeyError(f"{path}: missing parameter block {key}")
            if blocks[key].shape != tuple(p.shape):
                raise ValueError(f"{path}: {key} has shape {blocks[key].shape}, expected {tuple(p.shape)}")
            p.copy_(torch.from_numpy(blocks[key]))
    return model, header


def load_state(path: str | Path, cfg: TrainConfig) -> TrainState:
    model, header = load_model(path)
    _, blocks = read_checkpoint(path)
    opt = make_optimizer(model, cfg)
    for name, p in model.named_parameters():
        if name in header["adam_steps"]:
            opt.state[p] = {
                "step": torch.tensor(header["adam_steps"][name], dtype=torch.float32),
                "exp_avg": torch.from_numpy(blocks[f"adam_m/{name}"]).clone(),
                "exp_avg_sq": torch.from_numpy(blocks[f"adam_v/{name}"]).clone(),
            }
    rng = np.random.default_rng()
    rng.bit_generator.state = header["rng_state"]
    best = header.get("best_avg")
    return TrainState(
        model, opt, rng, header["epoch"], header["iteration"], -math.inf if best is None else best
    )


# --- training ---------------------------------------------------------------


def train(
    train_videos: Sequence[Video],
    model_cfg: ModelConfig,
    schedule: NoiseSchedule,
    cfg: TrainConfig,
    weights: LossWeights,
    out_dir: str | Path | None = None,
    resume: str | Path | None = None,
    val_videos: Sequence[Video] = (),
    eval_cfg: EvalConfig | None = None,
    stop_after_epoch: int | None = None,
    header: dict | None = None,
) -> TrainState:
    """Run ``cfg.epochs`` epochs of shuffled mini-batches.

    With ``out_dir`` set, writes ``train_log.txt``, ``final.ckpt``, periodic
    ``epoch_XXXX.ckpt`` files and, when validating, ``best.ckpt``.
    ``stop_after_epoch`` ends the run early, as if interrupted.
    """
    if not train_videos:
        raise ValueError("training set is empty")
    torch.set_num_threads(1)
    state = load_state(resume, cfg) if resume else new_state(model_cfg, cfg)
    out = Path(out_dir) if out_dir is not None else None
    logf = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        logf = open(out / "train_log.txt", "a" if resume else "w")
    header = dict(header or {})
    header["train"] = asdict(cfg)
    cache: dict = {}
    by_id = list(train_videos)
    t0 = time.perf_counter()
    try:
        while state.epoch < cfg.epochs:
            order = state.rng.permutation(len(by_id))
            for i in range(0, len(order), cfg.batch_size):
                batch = [by_id[j] for j in order[i : i + cfg.batch_size]]
                rec = train_step(state, batch, schedule, cfg, weights, cache)
                rec.wall = time.perf_counter() - t0
                state.history.append(rec)
                if logf:
                    logf.write(rec.to_line() + "\n")
            state.epoch += 1
            if out is not None and cfg.checkpoint_every and state.epoch % cfg.checkpoint_every == 0:
                save_state(out / f"epoch_{state.epoch:04d}.ckpt", state, header)
            if val_videos and cfg.val_every and state.epoch % cfg.val_every == 0:
                report = evaluate(state.model, val_videos, schedule, eval_cfg or EvalConfig()).report
                log.info("epoch %d val %s", state.epoch, report)
                if report.avg >= state.best_avg:
                    state.best_avg = report.avg
                    if out is not None:
                        save_state(out / "best.ckpt", state, header)
            if stop_after_epoch is not None and state.epoch >= stop_after_epoch:
                break
        if out is not None:
            save_state(out / "final.ckpt", state, header)
    finally:
        if logf:
            logf.close()
    return state


# --- inference --------------------------------------------------------------


@dataclass
class EvalResult:
    predictions: dict[str, np.ndarray]
    report: MetricReport
    trajectories: dict[str, list[np.ndarray]]


def oracle_denoiser(labels: np.ndarray, num_classes: int) -> Callable[[np.ndarray, int], np.ndarray]:
    truth = one_hot(labels, num_classes)
    return lambda y_s, s: truth.copy()


def predict_video(
    model: SegmentationModel | None,
    video: Video,
    schedule: NoiseSchedule,
    trajectory: Sequence[int],
    seed: int,
    infer_mask: str = "N",
    boundary_std: float = 3.0,
    num_classes: int | None = None,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Labels for one video and the argmax labels at every visited step.

    ``model=None`` substitutes an oracle that always returns the ground truth.
    Masks other than N use ground-truth labels (analysis only).
    """
    C = num_classes if model is None else model.cfg.num_classes
    seq = video_seed(seed, video.id)
    if model is None:
        denoise = oracle_denoiser(video.labels, C)
    else:
        mask = None
        if infer_mask != "N":
            b_soft = soften_boundaries(hard_boundaries(video.labels), boundary_std)
            mask_rng = np.random.default_rng(seq.spawn(1)[0])
            mask = make_mask(infer_mask, video.labels, b_soft, mask_rng)
        denoise = model.denoiser(video.features, mask)
    final, probs, _ = run_inference(denoise, (video.labels.size, C), schedule, trajectory, seq)
    return final.argmax(axis=1), [p.argmax(axis=1) for p in probs]


def evaluate(
    model: SegmentationModel | None,
    videos: Sequence[Video],
    schedule: NoiseSchedule,
    cfg: EvalConfig,
    boundary_std: float = 3.0,
    num_classes: int | None = None,
) -> EvalResult:
    torch.set_num_threads(1)
    trajectory = make_skip_trajectory(schedule.S, cfg.steps)

    def one(v: Video):
        return predict_video(model, v, schedule, trajectory, cfg.seed, cfg.infer_mask, boundary_std, num_classes)

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(one, videos))
    else:
        results = [one(v) for v in videos]
    acc = MetricAccumulator()
    preds, trajs = {}, {}
    for v, (pred, traj) in zip(videos, results):
        acc.add(pred, v.labels)
        preds[v.id] = pred
        trajs[v.id] = traj
    return EvalResult(preds, acc.report(), trajs)


def history_json(history: Sequence[TrainLogRecord]) -> str:
    """Log records without wall-clock, for determinism comparisons."""
    return json.dumps([{**asdict(r), "wall": None} for r in history], sort_keys=True)
