"""Seeded chunked Monte Carlo with order-fixed reductions.

Paths are processed in fixed-size chunks; chunk ``i`` of stream ``name``
draws from ``SeedSequence(seed, spawn_key=(crc32(name), i))``.  Results are
concatenated in chunk order and reduced with ``math.fsum``, so the worker
count never changes a report.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

CHUNK = 2000
SE_BAND = 4.0
MAX_REL_SE = 0.25


def stream_rng(seed: int, name: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(name.encode()), index)))


def chunk_sizes(n_paths: int, chunk: int = CHUNK) -> list[int]:
    full, rest = divmod(int(n_paths), chunk)
    return [chunk] * full + ([rest] if rest else [])


def _call(fn, seed, name, i, n):
    return fn(stream_rng(seed, name, i), n)


def map_chunks(
    fn: Callable[[np.random.Generator, int], dict[str, np.ndarray]],
    n_paths: int,
    seed: int,
    name: str,
    workers: int = 1,
    chunk: int = CHUNK,
) -> dict[str, np.ndarray]:
    """Run ``fn(rng, n)`` per chunk and concatenate its per-path arrays in chunk order."""
    sizes = chunk_sizes(n_paths, chunk)
    args = [(fn, seed, name, i, n) for i, n in enumerate(sizes)]
    if workers > 1 and len(sizes) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_call, *zip(*args)))
    else:
        parts = [_call(*a) for a in args]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def mean_se(x: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error, both with compensated summation."""
    x = np.asarray(x, dtype=float)
    n = x.size
    mean = math.fsum(x) / n
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass
class McReport:
    name: str
    estimate: float
    std_error: float
    target: float
    mode: str
    n_paths: int
    status: str = ""
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = judge(self.estimate, self.std_error, self.target, self.mode)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_json(self) -> dict:
        """Everything except wall time, which would break byte-identical reruns."""
        d = asdict(self)
        d.pop("wall_time")
        d["pass"] = self.passed
        return d


def judge(estimate: float, std_error: float, target: float, mode: str) -> str:
    """'pass' / 'fail' / 'inconclusive' under 4-SE bands."""
    if mode == "two-sided":
        return "pass" if abs(estimate - target) <= SE_BAND * std_error else "fail"
    if mode == "bound":
        rel = std_error / abs(estimate) if estimate else math.inf
        if rel > MAX_REL_SE:
            return "inconclusive"
        return "pass" if estimate <= target * (1.0 + SE_BAND * rel) else "fail"
    if mode == "exact":
        return "pass" if estimate == target else "fail"
    raise ValueError(f"unknown comparison mode {mode!r}")
