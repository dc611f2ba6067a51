"""Shared Monte Carlo plumbing: chunked counter-based streams and reductions.

Sampling is partitioned into fixed-size chunks.  Chunk i draws from an
independent Philox stream keyed by the run seed with the chunk index placed
in the high half of the 256-bit counter, so streams never overlap and any
chunk (hence any trajectory) is recomputable in isolation.  Partial sums are
combined in ascending chunk order, which makes every estimate bit-identical
for a given (seed, chunk_size, n) regardless of how many workers execute the
chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Estimate

DEFAULT_CHUNK_SIZE = 1 << 16

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo run parameters.

    chunk_size defaults to min(2**16, n_trajectories) and must not exceed
    n_trajectories; it is part of the reproducibility contract (it fixes the
    random-stream layout).  path_dt is only consumed by path-integrating
    samplers; None selects a model-dependent default.
    """

    n_trajectories: int
    seed: int = 0
    chunk_size: int | None = None
    path_dt: float | None = None

    def __post_init__(self) -> None:
        n = int(self.n_trajectories)
        if n < 1:
            raise ValueError(f"n_trajectories must be >= 1, got {self.n_trajectories!r}")
        object.__setattr__(self, "n_trajectories", n)
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        if self.chunk_size is not None:
            c = int(self.chunk_size)
            if c < 1 or c > n:
                raise ValueError(
                    f"chunk_size must be in [1, n_trajectories], got {self.chunk_size!r}"
                )
            object.__setattr__(self, "chunk_size", c)
        if self.path_dt is not None:
            dt = float(self.path_dt)
            if not math.isfinite(dt) or dt <= 0.0:
                raise ValueError(f"path_dt must be finite and > 0, got {self.path_dt!r}")
            object.__setattr__(self, "path_dt", dt)

    @property
    def resolved_chunk_size(self) -> int:
        if self.chunk_size is not None:
            return self.chunk_size
        return min(DEFAULT_CHUNK_SIZE, self.n_trajectories)


def chunk_sizes(cfg: McConfig) -> list[int]:
    """Trajectory counts per chunk, in chunk-index order."""
    c = cfg.resolved_chunk_size
    full, rest = divmod(cfg.n_trajectories, c)
    return [c] * full + ([rest] if rest else [])


def chunk_stream(seed: int, chunk_index: int) -> np.random.Generator:
    """Independent generator for one chunk of one run."""
    return np.random.Generator(np.random.Philox(key=seed, counter=chunk_index << 128))


def aux_stream(seed: int, tag: int) -> np.random.Generator:
    """Generator for side tasks (e.g. bootstrap), disjoint from all chunks."""
    if tag < 1:
        raise ValueError("tag must be >= 1 to stay clear of the chunk key")
    return np.random.Generator(np.random.Philox(key=(int(tag) << 64) | seed))


def map_chunks(worker, cfg: McConfig, workers: int = 1) -> list:
    """Run worker(chunk_index, chunk_n) for every chunk, results in order."""
    sizes = chunk_sizes(cfg)
    if workers <= 1:
        return [worker(i, m) for i, m in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, range(len(sizes)), sizes))


class RunningMoments:
    """Ordered accumulator of sums and cross-products of sample columns."""

    def __init__(self, dim: int):
        self.dim = dim
        self.n = 0
        self.s = np.zeros(dim)
        self.ss = np.zeros((dim, dim))

    @classmethod
    def from_samples(cls, cols: np.ndarray) -> RunningMoments:
        """cols has shape (n_samples, dim)."""
        rm = cls(cols.shape[1])
        rm.n = cols.shape[0]
        rm.s = cols.sum(axis=0)
        rm.ss = cols.T @ cols
        return rm

    def add(self, other: RunningMoments) -> None:
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        self.n += other.n
        self.s += other.s
        self.ss += other.ss

    @classmethod
    def combine(cls, parts: list[RunningMoments]) -> RunningMoments:
        total = cls(parts[0].dim)
        for p in parts:
            total.add(p)
        return total

    def mean(self) -> np.ndarray:
        return self.s / self.n

    def cov_of_mean(self) -> np.ndarray:
        """Covariance matrix of the sample means (sample cov / n)."""
        if self.n < 2:
            return np.zeros((self.dim, self.dim))
        m = self.mean()
        sample_cov = (self.ss - self.n * np.outer(m, m)) / (self.n - 1)
        return sample_cov / self.n

    def estimate(self, index: int) -> Estimate:
        """Mean of one column as an Estimate."""
        var = max(self.cov_of_mean()[index, index], 0.0)
        return Estimate(float(self.mean()[index]), math.sqrt(var), self.n)

    def delta_estimate(self, value: float, grad: np.ndarray) -> Estimate:
        """Estimate for a smooth function of the means, first-order error."""
        g = np.asarray(grad, dtype=float)
        var = max(float(g @ self.cov_of_mean() @ g), 0.0)
        return Estimate(float(value), math.sqrt(var), self.n)


def collect_moments(sample_cols, cfg: McConfig, workers: int = 1) -> RunningMoments:
    """Accumulate RunningMoments over all chunks.

    sample_cols(rng, m) must return an (m, dim) array drawn from rng.
    """

    def worker(i: int, m: int) -> RunningMoments:
        rng = chunk_stream(cfg.seed, i)
        return RunningMoments.from_samples(sample_cols(rng, m))

    return RunningMoments.combine(map_chunks(worker, cfg, workers))
