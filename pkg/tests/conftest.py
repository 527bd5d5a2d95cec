"""Shared fixtures: the reference benchmark is trained once per session."""

from __future__ import annotations

import time
from pathlib import Path

import pytest

from diffseg.cli import build_dataset, model_config
from diffseg.config import ExperimentConfig
from diffseg.pipeline import train

ROOT = Path(__file__).resolve().parents[1]
BENCHMARK_INI = ROOT / "configs" / "benchmark.ini"

# (criterion number, passed, detail) in the order the checks ran
CRITERIA: list[tuple[int, bool, str]] = []


def record(number: int, passed: bool, detail: str) -> None:
    CRITERIA.append((number, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


class Benchmark:
    """Lazily trains the reference config once per mask subset."""

    def __init__(self, out: Path):
        self.cfg = ExperimentConfig.load(BENCHMARK_INI)
        self.cfg.validate()
        self.dataset = build_dataset(self.cfg)
        self.schedule = self.cfg.schedule.build()
        self.out = out
        self._runs: dict[tuple[str, str], tuple[object, float]] = {}

    def config_for(self, kinds: str) -> ExperimentConfig:
        return self.cfg.replace("train", mask_kinds=tuple(kinds))

    def train(self, kinds: str = "NPBR", tag: str = "a"):
        """Returns (state, seconds); ``tag`` distinguishes independent reruns."""
        key = (kinds, tag)
        if key not in self._runs:
            cfg = self.config_for(kinds)
            t0 = time.perf_counter()
            state = train(
                self.dataset.split("train"),
                model_config(cfg, self.dataset),
                self.schedule,
                cfg.train,
                cfg.loss,
                out_dir=self.out / f"{kinds}_{tag}",
            )
            self._runs[key] = (state, time.perf_counter() - t0)
        return self._runs[key]

    def checkpoint(self, kinds: str = "NPBR", tag: str = "a") -> Path:
        self.train(kinds, tag)
        return self.out / f"{kinds}_{tag}" / "final.ckpt"


@pytest.fixture(scope="session")
def benchmark(tmp_path_factory) -> Benchmark:
    return Benchmark(tmp_path_factory.mktemp("benchmark"))
