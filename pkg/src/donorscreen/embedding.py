"""Delay-coordinate (Takens) embedding of a scalar series.

The embedding of a length-T series under dimension d and delay tau is the
set of vectors [y_t, y_{t-tau}, ..., y_{t-(d-1)tau}] for base positions
t = (d-1)*tau .. T-1 (0-based positions within the series window), giving
T - (d-1)*tau vectors. Components are stored most-recent first.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError, UsageError
from .panel import TimeSeries


@dataclass(frozen=True, eq=False)
class EmbeddingConfig:
    d: int = 4
    tau: int = 1

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise UsageError(f"embedding dimension d must be an integer >= 1, got {self.d}")
        if int(self.tau) != self.tau or self.tau < 1:
            raise UsageError(f"delay tau must be an integer >= 1, got {self.tau}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "tau", int(self.tau))

    @property
    def min_series_length(self) -> int:
        return (self.d - 1) * self.tau + 1

    @property
    def n_neighbors(self) -> int:
        """Cross-map neighbor count: one more than the dimension."""
        return self.d + 1


@dataclass(frozen=True, eq=False)
class DelayEmbedding:
    config: EmbeddingConfig
    base_times: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base_times", np.asarray(self.base_times, dtype=np.int64))
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=np.float64))
        if self.vectors.shape != (len(self.base_times), self.config.d):
            raise DataError("vectors shape must be (n_base_times, d)")

    def __len__(self) -> int:
        return len(self.base_times)

    def row_of(self, t: int) -> int:
        pos = int(t) - int(self.base_times[0])
        if pos < 0 or pos >= len(self.base_times):
            raise UsageError(f"base time {t} not present in embedding")
        return pos


def delay_embed(s: TimeSeries, cfg: EmbeddingConfig) -> DelayEmbedding:
    """Embed a series; positions are 0-based offsets into the series window."""
    T = len(s)
    if T < cfg.min_series_length:
        raise DataError(
            f"series of length {T} too short to embed: need at least {cfg.min_series_length}"
        )
    base = np.arange((cfg.d - 1) * cfg.tau, T, dtype=np.int64)
    idx = base[:, None] - np.arange(cfg.d, dtype=np.int64)[None, :] * cfg.tau
    return DelayEmbedding(config=cfg, base_times=base, vectors=s.values[idx])


def embedding_distance(e: DelayEmbedding, t: int, t_other: int) -> float:
    """Euclidean distance between the delay vectors at two base times."""
    a = e.vectors[e.row_of(t)]
    b = e.vectors[e.row_of(t_other)]
    return float(np.linalg.norm(a - b))


def write_embedding_csv(e: DelayEmbedding, path) -> None:
    """Debug dump: header base_time,c0,c1,...,c{d-1}."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["base_time", *(f"c{j}" for j in range(e.config.d))])
        for t, row in zip(e.base_times, e.vectors):
            writer.writerow([int(t), *(format(v, ".12g") for v in row)])
