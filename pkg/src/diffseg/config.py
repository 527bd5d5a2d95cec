"""Experiment configuration: one INI file, one section per component.

Unknown sections and keys are rejected, and every value is validated before
any work starts. ``ExperimentConfig.to_ini()`` writes the fully resolved
configuration (defaults included) so it can be echoed next to outputs.
"""

from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .losses import LossWeights
from .masking import MASK_KINDS
from .pipeline import EvalConfig, TrainConfig
from .schedule import ScheduleConfigError, make_linear_schedule, NoiseSchedule
from .synthdata import GrammarError, TaskGrammar, reference_grammar


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    seed: int = 0
    n_train: int = 60
    n_test: int = 20
    n_val: int = 0
    length_min: int = 150
    length_max: int = 250
    feature_dim: int = 16
    noise_std: float = 0.5
    blend_width: int = 8


@dataclass
class GrammarConfig:
    """Text form of a task grammar.

    ``phases``: phases separated by ``|``, candidates as ``class:prob``.
    ``durations``: ``mean/std/min`` per class, comma separated.
    ``swaps``: ``phase:prob`` entries, comma separated.
    """

    phases: str = ""
    durations: str = ""
    swaps: str = ""
    class_names: tuple[str, ...] = ()

    def build(self) -> TaskGrammar:
        if not self.phases:
            return reference_grammar()
        try:
            phases = [
                [(int(c), float(p)) for c, p in (tok.split(":") for tok in ph.split())]
                for ph in self.phases.split("|")
            ]
        except ValueError as exc:
            raise ConfigError(f"grammar.phases: cannot parse {self.phases!r}") from exc
        try:
            durs = [tuple(float(x) for x in d.split("/")) for d in self.durations.split(",") if d.strip()]
            if any(len(d) != 3 for d in durs):
                raise ValueError
        except ValueError as exc:
            raise ConfigError(f"grammar.durations: expected mean/std/min per class, got {self.durations!r}") from exc
        try:
            swaps = [(int(k), float(p)) for k, p in (t.split(":") for t in self.swaps.split(",") if t.strip())]
        except ValueError as exc:
            raise ConfigError(f"grammar.swaps: cannot parse {self.swaps!r}") from exc
        try:
            return TaskGrammar(
                phases=phases,
                durations=dict(enumerate(durs)),
                swaps=swaps,
                class_names=list(self.class_names) or None,
            )
        except GrammarError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class ScheduleConfig:
    steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    eta: float = 1.0

    def build(self) -> NoiseSchedule:
        return make_linear_schedule(self.steps, self.beta_start, self.beta_end, self.eta)


@dataclass
class ModelSection:
    enc_layers: int = 6
    enc_width: int = 16
    enc_taps: tuple[int, ...] = ()
    dec_layers: int = 5
    dec_width: int = 8
    step_embed_dim: int = 64
    init_seed: int = 0


SECTIONS: dict[str, type] = {
    "data": DataConfig,
    "grammar": GrammarConfig,
    "schedule": ScheduleConfig,
    "model": ModelSection,
    "loss": LossWeights,
    "train": TrainConfig,
    "eval": EvalConfig,
}


def _convert(section: str, key: str, raw: str, tp):
    origin = typing.get_origin(tp)
    try:
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        if tp is str:
            return raw
        if origin is tuple:
            (inner, _) = typing.get_args(tp)
            items = [t for t in raw.replace(",", " ").split() if t]
            return tuple(inner(t) for t in items)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r} as {tp}") from exc
    raise ConfigError(f"{section}.{key}: unsupported type {tp}")


def _format(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


@dataclass
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    grammar: GrammarConfig = field(default_factory=GrammarConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    model: ModelSection = field(default_factory=ModelSection)
    loss: LossWeights = field(default_factory=LossWeights)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    @classmethod
    def from_string(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        parts = {}
        for name in parser.sections():
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]")
        for name, dc in SECTIONS.items():
            hints = typing.get_type_hints(dc)
            known = {f.name for f in dataclasses.fields(dc) if f.init}
            kwargs = {}
            if parser.has_section(name):
                for key, raw in parser.items(name):
                    if key not in known:
                        raise ConfigError(f"unknown key {name}.{key}")
                    kwargs[key] = _convert(name, key, raw.strip(), hints[key])
            try:
                parts[name] = dc(**kwargs)
            except (ValueError, ScheduleConfigError) as exc:
                raise ConfigError(f"[{name}] {exc}") from exc
        cfg = cls(**parts)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        return cls.from_string(path.read_text())

    def validate(self) -> None:
        d = self.data
        for key in ("n_train", "n_test", "n_val", "length_min", "feature_dim", "blend_width"):
            if getattr(d, key) < 0:
                raise ConfigError(f"data.{key} must be >= 0")
        if d.n_train < 1:
            raise ConfigError("data.n_train must be >= 1")
        if not 1 <= d.length_min <= d.length_max:
            raise ConfigError("data.length_min/length_max: need 1 <= min <= max")
        if d.noise_std < 0:
            raise ConfigError("data.noise_std must be >= 0")
        grammar = self.grammar.build()
        if grammar.min_total() > d.length_min:
            raise ConfigError(
                f"grammar.durations: minimum durations sum to {grammar.min_total()} > data.length_min"
            )
        try:
            self.schedule.build()
        except ScheduleConfigError as exc:
            raise ConfigError(f"schedule: {exc}") from exc
        m = self.model
        if m.enc_layers < 1 or m.dec_layers < 1 or m.enc_width < 1 or m.dec_width < 1:
            raise ConfigError("model: layer counts and widths must be >= 1")
        if m.step_embed_dim < 2 or m.step_embed_dim % 2:
            raise ConfigError("model.step_embed_dim must be a positive even number")
        if not set(m.enc_taps) <= set(range(1, m.enc_layers + 1)):
            raise ConfigError(f"model.enc_taps must lie in 1..{m.enc_layers}")
        bad = set(self.train.mask_kinds) - set(MASK_KINDS)
        if bad or not self.train.mask_kinds:
            raise ConfigError(f"train.mask_kinds: must be a non-empty subset of {MASK_KINDS}")
        if self.eval.infer_mask not in MASK_KINDS:
            raise ConfigError(f"eval.infer_mask must be one of {MASK_KINDS}")
        if not 1 <= self.eval.steps <= self.schedule.steps:
            raise ConfigError("eval.steps must be in [1, schedule.steps]")

    def to_ini(self) -> str:
        lines = []
        for name in SECTIONS:
            lines.append(f"[{name}]")
            obj = getattr(self, name)
            for f in dataclasses.fields(obj):
                if f.init:
                    lines.append(f"{f.name} = {_format(getattr(obj, f.name))}")
            lines.append("")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {name: dataclasses.asdict(getattr(self, name)) for name in SECTIONS}

    def replace(self, section: str, **changes) -> "ExperimentConfig":
        new = dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})
        new.validate()
        return new
