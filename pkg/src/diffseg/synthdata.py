"""Procedural videos with position, ordering and boundary-ambiguity structure.

A :class:`TaskGrammar` lists ordered phases of candidate actions. Each video
realises the phases in order (adjacent phases may swap with a set
probability), keeps each candidate with its occurrence probability, and
splits a random length among the realised actions. Frame features are a
per-class prototype plus Gaussian noise, linearly cross-faded between the
two neighbouring prototypes over ``blend_width`` frames around each boundary.

On-disk layout (community ground-truth style)::

    mapping.txt                 "<index> <name>" per line
    groundTruth/<video>.txt     one class name per frame
    features/<video>.bin        16-byte header + L*D float32 little-endian
    splits/<split>.split.bundle one video id per line
    meta.json                   generator parameters and prototypes (optional)

The feature header is ``b"DSEG"``, then uint32 version, L and D.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"DSEG"
FEATURE_VERSION = 1
HEADER_SIZE = 16


class GrammarError(ValueError):
    pass


class DatasetFormatError(ValueError):
    pass


@dataclass
class TaskGrammar:
    """``phases[k]`` is an ordered list of ``(class, occurrence probability)``.

    ``durations[c]`` is ``(mean, std, min)`` in frames; means act as relative
    weights once a video length is drawn. ``swaps`` holds
    ``(phase index, probability)`` pairs: phase ``k`` trades places with
    phase ``k + 1`` with that probability.
    """

    phases: list[list[tuple[int, float]]]
    durations: dict[int, tuple[float, float, float]]
    swaps: list[tuple[int, float]] = field(default_factory=list)
    class_names: list[str] | None = None

    def __post_init__(self) -> None:
        if not self.phases or any(not ph for ph in self.phases):
            raise GrammarError("grammar.phases: every phase needs at least one candidate")
        classes = [c for ph in self.phases for c, _ in ph]
        if len(set(classes)) != len(classes):
            raise GrammarError("grammar.phases: a class may appear in only one phase")
        if sorted(classes) != list(range(len(classes))):
            raise GrammarError("grammar.phases: classes must be 0..C-1 with none missing")
        for c, p in ((c, p) for ph in self.phases for c, p in ph):
            if not 0 < p <= 1:
                raise GrammarError(f"grammar.phases: occurrence probability {p} for class {c} not in (0, 1]")
        for c in classes:
            if c not in self.durations:
                raise GrammarError(f"grammar.durations: no duration for class {c}")
            mean, std, lo = self.durations[c]
            if mean <= 0 or std < 0 or lo < 1:
                raise GrammarError(f"grammar.durations: invalid (mean, std, min) for class {c}")
        for k, p in self.swaps:
            if not 0 <= k < len(self.phases) - 1 or not 0 <= p <= 1:
                raise GrammarError(f"grammar.swaps: invalid swap ({k}, {p})")
        if self.class_names is None:
            self.class_names = [f"action_{c}" for c in range(len(classes))]
        if len(self.class_names) != len(classes):
            raise GrammarError("grammar.class_names: one name per class required")

    @property
    def num_classes(self) -> int:
        return sum(len(ph) for ph in self.phases)

    def min_total(self) -> int:
        return int(sum(self.durations[c][2] for ph in self.phases for c, _ in ph))

    def sample_actions(self, rng: np.random.Generator) -> list[int]:
        order = list(range(len(self.phases)))
        for k, p in self.swaps:
            if rng.random() < p:
                order[k], order[k + 1] = order[k + 1], order[k]
        actions: list[int] = []
        for k in order:
            phase = self.phases[k]
            kept = [c for c, p in phase if rng.random() < p]
            if not kept:
                probs = np.array([p for _, p in phase])
                kept = [phase[rng.choice(len(phase), p=probs / probs.sum())][0]]
            actions.extend(kept)
        return actions

    def sample_durations(self, actions: list[int], length: int, rng: np.random.Generator) -> np.ndarray:
        mins = np.array([self.durations[c][2] for c in actions], dtype=np.float64)
        raw = np.array(
            [max(self.durations[c][2], rng.normal(self.durations[c][0], self.durations[c][1])) for c in actions]
        )
        spare = length - mins.sum()
        if spare < 0:
            raise GrammarError(f"length {length} too short for minimum durations {mins.sum():.0f}")
        extra = raw - mins + 1e-9
        share = spare * extra / extra.sum()
        base = np.floor(share)
        leftover = int(round(spare - base.sum()))
        base[np.argsort(-(share - base), kind="stable")[:leftover]] += 1
        return (mins + base).astype(np.int64)


def reference_grammar() -> TaskGrammar:
    """Six actions in three ordered phases, with the last two phases sometimes swapped."""
    return TaskGrammar(
        phases=[[(0, 1.0), (1, 0.7)], [(2, 0.9), (3, 0.8)], [(4, 1.0), (5, 0.6)]],
        durations={0: (30, 8, 8), 1: (20, 6, 8), 2: (35, 10, 8), 3: (25, 8, 8), 4: (30, 8, 8), 5: (20, 6, 8)},
        swaps=[(1, 0.2)],
    )


@dataclass
class Video:
    id: str
    features: np.ndarray  # (L, D) float32
    labels: np.ndarray  # (L,) int64


@dataclass
class SyntheticDataset:
    class_names: list[str]
    feature_dim: int
    videos: list[Video]
    splits: dict[str, list[str]]
    prototypes: np.ndarray | None = None
    noise_std: float | None = None
    blend_width: int | None = None
    seed: int | None = None

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def split(self, name: str) -> list[Video]:
        if name not in self.splits:
            raise KeyError(f"no split {name!r}; have {sorted(self.splits)}")
        by_id = {v.id: v for v in self.videos}
        return [by_id[i] for i in self.splits[name]]


def blend_features(labels: np.ndarray, prototypes: np.ndarray, blend_width: int) -> np.ndarray:
    """Noise-free features with linear cross-fades centred on each boundary."""
    feats = prototypes[labels].astype(np.float64)
    if blend_width <= 0:
        return feats
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    bounds = np.concatenate([[0], change, [labels.size]])
    half = blend_width // 2
    for k, b in enumerate(change, start=1):
        lo = max(b - half, bounds[k - 1])
        hi = min(b - half + blend_width, bounds[k + 1])
        prev_p, next_p = prototypes[labels[b - 1]], prototypes[labels[b]]
        for i in range(lo, hi):
            t = (i - (b - half) + 0.5) / blend_width
            feats[i] = (1 - t) * prev_p + t * next_p
    return feats


def generate(
    grammar: TaskGrammar,
    n_videos: int | dict[str, int],
    length_range: tuple[int, int] = (150, 250),
    seed: int = 0,
    feature_dim: int = 16,
    noise_std: float = 0.5,
    blend_width: int = 8,
) -> SyntheticDataset:
    """Build a dataset; ``n_videos`` may be a count or a ``{split: count}`` map."""
    splits_n = {"train": n_videos} if isinstance(n_videos, int) else dict(n_videos)
    total = sum(splits_n.values())
    if total < 1:
        raise GrammarError("n_videos must be >= 1")
    lo, hi = length_range
    if not 1 <= lo <= hi:
        raise GrammarError(f"data.length_range: invalid ({lo}, {hi})")
    if grammar.min_total() > lo:
        raise GrammarError(
            f"data.length_range: minimum durations sum to {grammar.min_total()} > shortest length {lo}"
        )
    if noise_std < 0 or blend_width < 0 or feature_dim < 1:
        raise GrammarError("data: noise_std, blend_width must be >= 0 and feature_dim >= 1")

    # prototypes are random unit-length directions
    raw = np.random.default_rng([seed, 0x7FFFFFFF]).standard_normal((grammar.num_classes, feature_dim))
    prototypes = raw / np.linalg.norm(raw, axis=1, keepdims=True)

    videos: list[Video] = []
    splits: dict[str, list[str]] = {}
    idx = 0
    for split, count in splits_n.items():
        splits[split] = []
        for _ in range(count):
            rng = np.random.default_rng([seed, idx])
            actions = grammar.sample_actions(rng)
            length = int(rng.integers(lo, hi + 1))
            durations = grammar.sample_durations(actions, length, rng)
            labels = np.repeat(np.array(actions, dtype=np.int64), durations)
            feats = blend_features(labels, prototypes, blend_width)
            feats = feats + noise_std * rng.standard_normal(feats.shape)
            vid = f"vid_{idx:04d}"
            videos.append(Video(vid, feats.astype(np.float32), labels))
            splits[split].append(vid)
            idx += 1
    return SyntheticDataset(
        class_names=list(grammar.class_names),
        feature_dim=feature_dim,
        videos=videos,
        splits=splits,
        prototypes=prototypes,
        noise_std=noise_std,
        blend_width=blend_width,
        seed=seed,
    )


# --- file I/O -------------------------------------------------------------


def write_features(path: Path, feats: np.ndarray) -> None:
    L, D = feats.shape
    header = FEATURE_MAGIC + struct.pack("<III", FEATURE_VERSION, L, D)
    path.write_bytes(header + np.ascontiguousarray(feats, dtype="<f4").tobytes())


def read_features(path: Path, video_id: str) -> np.ndarray:
    data = path.read_bytes()
    if len(data) < HEADER_SIZE:
        raise DatasetFormatError(f"{video_id}: feature header truncated at byte {len(data)}")
    if data[:4] != FEATURE_MAGIC:
        raise DatasetFormatError(f"{video_id}: bad magic {data[:4]!r} at byte 0")
    version, L, D = struct.unpack("<III", data[4:HEADER_SIZE])
    if version != FEATURE_VERSION:
        raise DatasetFormatError(f"{video_id}: unsupported version {version} at byte 4")
    expected = HEADER_SIZE + 4 * L * D
    if len(data) != expected:
        raise DatasetFormatError(
            f"{video_id}: feature file has {len(data)} bytes, expected {expected} (L={L}, D={D}); "
            f"data ends at byte {len(data)}"
        )
    return np.frombuffer(data, dtype="<f4", offset=HEADER_SIZE).reshape(L, D).astype(np.float32)


def write_mapping(path: Path, names: list[str]) -> None:
    path.write_text("".join(f"{i} {n}\n" for i, n in enumerate(names)))


def read_mapping(path: Path) -> list[str]:
    entries: dict[int, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(maxsplit=1)
        if len(parts) != 2 or not parts[0].lstrip("-").isdigit():
            raise DatasetFormatError(f"{path}:{lineno}: expected '<index> <name>'")
        i, name = int(parts[0]), parts[1].strip()
        if i in entries:
            raise DatasetFormatError(f"{path}:{lineno}: duplicate index {i}")
        if name in entries.values():
            raise DatasetFormatError(f"{path}:{lineno}: duplicate name {name!r}")
        entries[i] = name
    if sorted(entries) != list(range(len(entries))):
        raise DatasetFormatError(f"{path}: indices must be 0..C-1")
    return [entries[i] for i in range(len(entries))]


def write_labels(path: Path, labels: np.ndarray, names: list[str]) -> None:
    path.write_text("".join(f"{names[c]}\n" for c in labels))


def read_labels(path: Path, names: list[str]) -> np.ndarray:
    index = {n: i for i, n in enumerate(names)}
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        name = line.strip()
        if name not in index:
            raise DatasetFormatError(f"{path}:{lineno}: unknown class {name!r}")
        out.append(index[name])
    return np.array(out, dtype=np.int64)


def write_dataset(ds: SyntheticDataset, root: str | Path) -> None:
    root = Path(root)
    for sub in ("features", "groundTruth", "splits"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    write_mapping(root / "mapping.txt", ds.class_names)
    for v in ds.videos:
        write_features(root / "features" / f"{v.id}.bin", v.features)
        write_labels(root / "groundTruth" / f"{v.id}.txt", v.labels, ds.class_names)
    for split, ids in ds.splits.items():
        (root / "splits" / f"{split}.split.bundle").write_text("".join(f"{i}\n" for i in ids))
    meta = {
        "feature_dim": ds.feature_dim,
        "noise_std": ds.noise_std,
        "blend_width": ds.blend_width,
        "seed": ds.seed,
        "prototypes": None if ds.prototypes is None else ds.prototypes.tolist(),
        "split_order": list(ds.splits),
    }
    (root / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")


def read_dataset(root: str | Path) -> SyntheticDataset:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory {root} does not exist")
    names = read_mapping(root / "mapping.txt")
    meta = {}
    if (root / "meta.json").exists():
        meta = json.loads((root / "meta.json").read_text())
    split_files = {p.name[: -len(".split.bundle")]: p for p in (root / "splits").glob("*.split.bundle")}
    order = [s for s in meta.get("split_order", []) if s in split_files]
    order += sorted(s for s in split_files if s not in order)
    splits = {s: split_files[s].read_text().split() for s in order}
    seen: dict[str, str] = {}
    for s, ids in splits.items():
        for i in ids:
            if i in seen:
                raise DatasetFormatError(f"video {i} is in both split {seen[i]!r} and {s!r}")
            seen[i] = s
    videos = []
    dim = meta.get("feature_dim")
    for vid in seen:
        feats = read_features(root / "features" / f"{vid}.bin", vid)
        labels = read_labels(root / "groundTruth" / f"{vid}.txt", names)
        if feats.shape[0] != labels.size:
            raise DatasetFormatError(f"{vid}: {feats.shape[0]} feature frames but {labels.size} labels")
        if dim is None:
            dim = feats.shape[1]
        elif feats.shape[1] != dim:
            raise DatasetFormatError(f"{vid}: feature dim {feats.shape[1]} != {dim}")
        videos.append(Video(vid, feats, labels))
    protos = meta.get("prototypes")
    return SyntheticDataset(
        class_names=names,
        feature_dim=int(dim or 0),
        videos=videos,
        splits=splits,
        prototypes=None if protos is None else np.array(protos, dtype=np.float64),
        noise_std=meta.get("noise_std"),
        blend_width=meta.get("blend_width"),
        seed=meta.get("seed"),
    )
