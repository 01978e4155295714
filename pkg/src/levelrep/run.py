"""Chunked, multi-threaded ensemble runs feeding integer tallies.

Members are split into fixed chunks of consecutive indices.  Chunk
boundaries depend only on ``chunk_size``, never on the thread count, and
every tally merges by integer addition, so results are bit-identical for any
number of workers.
"""

from __future__ import annotations

import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import DegeneracyError, check_int
from .ensemble import EnsembleConfig, sample_parameters, to_alpha
from .spectra import TIE_THRESHOLD, WindowBatch, generate_batch

DEFAULT_CHUNK = 4096


@dataclass
class LevelCountTally:
    """Total in-window level count, for the unfolded mean density."""

    levels: int = 0
    members: int = 0
    window_width: float = 0.0

    def empty_like(self) -> "LevelCountTally":
        return LevelCountTally(window_width=self.window_width)

    def update(self, batch: WindowBatch) -> None:
        self.levels += int(batch.counts.sum())
        self.members += len(batch)
        self.window_width = 2 * batch.half_width

    def merge(self, other: "LevelCountTally") -> None:
        self.levels += other.levels
        self.members += other.members
        self.window_width = other.window_width or self.window_width

    @property
    def density(self) -> float:
        return self.levels / (self.members * self.window_width)


@dataclass
class RunSummary:
    members: int
    chunks: int
    threads: int
    degenerate_pairs: int
    duration: float
    degenerate_chunks: list = field(default_factory=list)


def chunk_bounds(n: int, chunk_size: int):
    return [(a, min(a + chunk_size, n)) for a in range(0, n, chunk_size)]


def member_parameters(config: EnsembleConfig, start: int, stop: int) -> np.ndarray:
    """Physical shape parameters (alpha or beta) for members ``[start, stop)``."""
    values = sample_parameters(config, start, stop)
    return to_alpha(values, config.aspect) if config.system == "rect" else values


def generate_chunk(config: EnsembleConfig, start: int, stop: int) -> WindowBatch:
    params = member_parameters(config, start, stop)
    return generate_batch(config.system, params, config.energy, config.window_width,
                          np.arange(start, stop, dtype=np.int64), check_degeneracy=False)


def default_threads() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def run_ensemble(config: EnsembleConfig, tallies, *, threads: int | None = None,
                 chunk_size: int = DEFAULT_CHUNK, on_degeneracy: str = "warn",
                 progress=None, on_batch=None) -> RunSummary:
    """Generate every member of ``config`` and feed each chunk to ``tallies``.

    ``tallies`` are objects with ``empty_like``, ``update(batch)`` and
    ``merge``; they are updated in place.  ``on_degeneracy`` is ``"raise"``
    (DegeneracyError on any pair of levels closer than the tie threshold) or
    ``"warn"`` (count them in the summary).  ``progress`` is an optional
    text stream for progress lines.  ``on_batch`` is called with every
    generated batch, in member order, from the calling thread.
    """
    if on_degeneracy not in ("warn", "raise"):
        raise ValueError("on_degeneracy must be 'warn' or 'raise'")
    check_int(chunk_size, "chunk_size", minimum=1)
    threads = default_threads() if threads is None else check_int(threads, "threads", minimum=1)
    bounds = chunk_bounds(config.member_count, chunk_size)
    t0 = time.perf_counter()

    def work(ab):
        batch = generate_chunk(config, *ab)
        local = [t.empty_like() for t in tallies]
        for t in local:
            t.update(batch)
        return local, batch.ties(), (batch if on_batch is not None else None)

    pairs = 0
    bad = []
    done = 0
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for k, (local, ties, batch) in enumerate(pool.map(work, bounds)):
            if ties:
                if on_degeneracy == "raise":
                    raise DegeneracyError(f"{ties} level pair(s) closer than {TIE_THRESHOLD} in chunk {bounds[k]}")
                pairs += ties
                bad.append(list(bounds[k]))
            for t, part in zip(tallies, local):
                t.merge(part)
            if on_batch is not None:
                on_batch(batch)
            done += bounds[k][1] - bounds[k][0]
            if progress is not None:
                progress.write(f"\r  {done}/{config.member_count} members")
                progress.flush()
    if progress is not None:
        progress.write("\n")
    summary = RunSummary(config.member_count, len(bounds), threads, pairs, time.perf_counter() - t0, bad)
    if pairs and progress is not None:
        print(f"warning: {pairs} near-degenerate level pair(s) kept", file=sys.stderr)
    return summary
