"""
Read accounting, phase timing and allocation tracking.

Slice stores record every slice read in a ``ReadLog``; ``log_phase`` turns
those counters into per-phase log lines (wall time and bytes read) and
``track_allocations`` measures the peak traced allocation of a block, which
is how the memory contract of the streaming algorithms is checked.
"""

import logging
import time
import tracemalloc
from collections import Counter
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass
from dataclasses import field

logger = logging.getLogger(__name__)


@dataclass
class ReadLog:
    """Per-slice read counters of one slice store."""

    counts: Counter = field(default_factory=Counter)
    bytes_read: int = 0

    def record(self, slice_index: int, nbytes: int) -> None:
        self.counts[slice_index] += 1
        self.bytes_read += nbytes

    def reset(self) -> None:
        self.counts.clear()
        self.bytes_read = 0

    @property
    def total_reads(self) -> int:
        return sum(self.counts.values())

    def reads_per_slice(self, n_slices: int) -> list[int]:
        return [self.counts.get(i, 0) for i in range(n_slices)]


@dataclass
class PhaseStats:
    name: str
    elapsed_seconds: float = 0.0
    bytes_read: int = 0


@contextmanager
def log_phase(name: str, *read_logs: ReadLog) -> Iterator[PhaseStats]:
    """
    Time a pipeline phase and log its wall time and bytes read.

    Args:
        name: Phase label used in the log line
        read_logs: Read logs of the stores touched by the phase
    """
    stats = PhaseStats(name=name)
    before = sum(log.bytes_read for log in read_logs)
    start = time.perf_counter()
    try:
        yield stats
    finally:
        stats.elapsed_seconds = time.perf_counter() - start
        stats.bytes_read = sum(log.bytes_read for log in read_logs) - before
        logger.info(
            f"Phase {name}: {stats.elapsed_seconds:.3f}s wall, {stats.bytes_read} bytes read",
        )


@dataclass
class AllocationReport:
    peak_bytes: int = 0


@contextmanager
def track_allocations() -> Iterator[AllocationReport]:
    """
    Measure the peak traced allocation of the enclosed block.

    numpy registers its data buffers with ``tracemalloc``, so array storage is
    included. The peak is reported relative to the memory already traced when
    the block starts.
    """
    report = AllocationReport()
    started_here = not tracemalloc.is_tracing()
    if started_here:
        tracemalloc.start()
    baseline, _ = tracemalloc.get_traced_memory()
    tracemalloc.reset_peak()
    try:
        yield report
    finally:
        _, peak = tracemalloc.get_traced_memory()
        report.peak_bytes = max(0, peak - baseline)
        if started_here:
            tracemalloc.stop()
        logger.debug(f"Peak traced allocation: {report.peak_bytes} bytes")
