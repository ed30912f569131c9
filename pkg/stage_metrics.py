"""
Wall-clock time and resident memory per pipeline stage.
Feeds RunManifest.timings and the summary printed by the CLI.
"""

import logging
import time
from contextlib import contextmanager
from typing import Iterator, List

import psutil

from schemas import StageTiming

logger = logging.getLogger(__name__)


class StageTimer:
    def __init__(self):
        self._proc = psutil.Process()
        self.timings: List[StageTiming] = []

    def rss_mb(self) -> float:
        try:
            return self._proc.memory_info().rss / 1024 / 1024
        except (psutil.NoSuchProcess, psutil.AccessDenied):
            return 0.0

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            timing = StageTiming(stage=name, seconds=round(elapsed, 6), rss_mb=round(self.rss_mb(), 2))
            self.timings.append(timing)
            logger.debug(f"Stage {name}: {elapsed:.3f}s, RSS {timing.rss_mb:.1f} MB")

    @property
    def total_seconds(self) -> float:
        return sum(t.seconds for t in self.timings)

    @property
    def peak_rss_mb(self) -> float:
        return max((t.rss_mb for t in self.timings), default=0.0)

    def summary_rows(self) -> List[List]:
        return [[t.stage, f"{t.seconds:.3f}", f"{t.rss_mb:.1f}"] for t in self.timings]
