"""Convergent cross mapping with MAE scores over a library-size grid.

Cross-mapping one direction: embed the source series, find the d+1 nearest
library neighbors of each prediction point in that reconstruction, form
exponential distance weights, and estimate the target at the same time
indices. The per-point absolute errors aggregate to one MAE per library
size; lower means the source reconstruction carries more information about
the target.

Two prediction modes:

* ``holdout`` (default): library = the first L time points, predictions are
  all strictly later embedded points. No self-matching is possible.
* ``leave_one_out``: library = all embedded points among the first L;
  each library point is predicted with neighbors outside its Theiler
  exclusion window.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .embedding import DelayEmbedding, EmbeddingConfig, delay_embed
from .errors import DataError, InternalError, UsageError
from .panel import TimeSeries, normalize_zscore

HOLDOUT = "holdout"
LEAVE_ONE_OUT = "leave_one_out"


@dataclass(frozen=True, eq=False)
class CcmConfig:
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    library_sizes: tuple = ()
    prediction_mode: str = HOLDOUT
    theiler_window: int | None = None
    normalize: bool = True

    def __post_init__(self):
        if self.prediction_mode not in (HOLDOUT, LEAVE_ONE_OUT):
            raise UsageError(f"unknown prediction mode {self.prediction_mode!r}")
        sizes = tuple(int(L) for L in self.library_sizes)
        if not sizes:
            raise UsageError("library_sizes must be nonempty")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise UsageError("library_sizes must be strictly ascending")
        if sizes[0] < self.min_library_size:
            raise UsageError(
                f"library size {sizes[0]} cannot hold d+1 embedded points; "
                f"minimum is {self.min_library_size}"
            )
        object.__setattr__(self, "library_sizes", sizes)
        if self.theiler_window is None:
            object.__setattr__(
                self, "theiler_window", (self.embedding.d - 1) * self.embedding.tau
            )
        elif self.theiler_window < 0:
            raise UsageError("theiler_window must be >= 0")

    @property
    def min_library_size(self) -> int:
        e = self.embedding
        return (e.d - 1) * e.tau + e.d + 1


def default_library_sizes(T: int, cfg: EmbeddingConfig, n_points: int = 8) -> tuple:
    """Eight evenly spaced library sizes from the smallest feasible L up to
    T - max(5, T//10) (holdout leaves that many prediction points)."""
    lo = (cfg.d - 1) * cfg.tau + cfg.d + 1
    hi = T - max(5, T // 10)
    if hi < lo:
        raise DataError(f"series of length {T} too short for a library grid (min L={lo})")
    grid = sorted(set(int(round(x)) for x in np.linspace(lo, hi, num=min(n_points, hi - lo + 1))))
    return tuple(grid)


@dataclass(frozen=True, eq=False)
class NeighborSet:
    """The d+1 nearest library points of one embedded target."""

    target_time: int
    indices: np.ndarray
    distances: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        dist = np.asarray(self.distances, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "distances", dist)
        if len(idx) != len(dist) or len(idx) == 0:
            raise UsageError("indices and distances must be nonempty and equal-length")
        if len(np.unique(idx)) != len(idx):
            raise InternalError("neighbor indices must be distinct")
        if np.any(dist < 0) or np.any(np.diff(dist) < 0):
            raise InternalError("neighbor distances must be sorted and nonnegative")


def find_neighbors(
    e: DelayEmbedding, t: int, library, exclude_radius: int | None = None
) -> NeighborSet:
    """The d+1 smallest-distance library points for base time t.

    Ties break toward the smaller time index. ``exclude_radius`` drops all
    library points within that many steps of t (Theiler window).
    """
    lib = np.asarray(sorted(set(int(x) for x in library)), dtype=np.int64)
    if exclude_radius is not None:
        lib = lib[np.abs(lib - int(t)) > exclude_radius]
    k = e.config.n_neighbors
    if len(lib) < k:
        raise DataError(f"library has {len(lib)} eligible points, need {k}")
    target = e.vectors[e.row_of(t)]
    rows = np.array([e.row_of(x) for x in lib], dtype=np.int64)
    dists = np.linalg.norm(e.vectors[rows] - target[None, :], axis=1)
    order = np.lexsort((lib, dists))[:k]
    return NeighborSet(target_time=int(t), indices=lib[order], distances=dists[order])


def cross_map_weights(n: NeighborSet) -> np.ndarray:
    """Exponential distance weights exp(-d_i/d_1), normalized to sum 1.

    When the nearest distance is zero the limit is uniform weight over the
    exact matches and zero elsewhere.
    """
    d = n.distances
    if d[0] == 0.0:
        w = (d == 0.0).astype(np.float64)
    else:
        w = np.exp(-d / d[0])
    return w / w.sum()


def cross_map_estimate(n: NeighborSet, w: np.ndarray, target: TimeSeries) -> float:
    """Convex combination of the target values at the neighbor times."""
    if np.any(n.indices < 0) or np.any(n.indices >= len(target)):
        raise InternalError("neighbor index outside target range: embedding misaligned")
    return float(np.dot(np.asarray(w, dtype=np.float64), target.values[n.indices]))


def _prepare(source: TimeSeries, target: TimeSeries, cfg: CcmConfig):
    if len(source) != len(target):
        raise UsageError("source and target series must have the same length")
    if cfg.normalize:
        source = normalize_zscore(source)
        target = normalize_zscore(target)
    return source, target


def _score_prepared(source: TimeSeries, target: TimeSeries, cfg: CcmConfig, L: int) -> float:
    T = len(source)
    if L < cfg.min_library_size:
        raise UsageError(f"library size {L} below minimum {cfg.min_library_size}")
    e = delay_embed(source, cfg.embedding)
    base = e.base_times
    if cfg.prediction_mode == HOLDOUT:
        if L >= T:
            raise UsageError(f"holdout needs L < T, got L={L}, T={T}")
        library = base[base <= L - 1]
        prediction_points = base[base > L - 1]
        if len(prediction_points) == 0:
            raise UsageError(f"no prediction points: L={L} leaves nothing past the library")
        exclude = None
    else:
        if L > T:
            raise UsageError(f"leave_one_out needs L <= T, got L={L}, T={T}")
        library = base[base <= L - 1]
        prediction_points = library
        exclude = cfg.theiler_window
    k = cfg.embedding.n_neighbors

    # All-pairs search, one argsort per prediction point. Library times are
    # ascending, so a stable distance sort breaks ties toward the smaller
    # time index, exactly like find_neighbors.
    lib_rows = library - base[0]
    pred_rows = prediction_points - base[0]
    diffs = e.vectors[pred_rows][:, None, :] - e.vectors[lib_rows][None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diffs, diffs))
    if exclude is not None:
        banned = np.abs(prediction_points[:, None] - library[None, :]) <= exclude
        if np.any(banned.sum(axis=1) > len(library) - k):
            raise DataError(f"library has too few eligible points outside the exclusion window for k={k}")
        dist = np.where(banned, np.inf, dist)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.arange(len(pred_rows))[:, None]
    nn_dist = dist[rows, order]
    nn_times = library[order]

    d1 = nn_dist[:, :1]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(d1 > 0, np.exp(-nn_dist / d1), (nn_dist == 0).astype(np.float64))
    w /= w.sum(axis=1, keepdims=True)
    estimates = np.einsum("ij,ij->i", w, target.values[nn_times])
    errors = np.abs(target.values[prediction_points] - estimates)
    return float(errors.mean())


def ccm_score(source: TimeSeries, target: TimeSeries, cfg: CcmConfig, L: int) -> float:
    """MAE of cross-mapping the target from the source reconstruction at
    library size L (the score of ``CCM(target | source)``)."""
    source, target = _prepare(source, target, cfg)
    return _score_prepared(source, target, cfg, L)


@dataclass(frozen=True, eq=False)
class CcmCurve:
    """Directional MAE scores across the library-size grid for one pair."""

    pair: tuple
    library_sizes: tuple
    mae_source_to_target: tuple
    mae_target_to_source: tuple

    def __post_init__(self):
        n = len(self.library_sizes)
        if len(self.mae_source_to_target) != n or len(self.mae_target_to_source) != n:
            raise InternalError("curve needs one entry per library size and direction")
        vals = tuple(self.mae_source_to_target) + tuple(self.mae_target_to_source)
        if any(not np.isfinite(v) or v < 0 for v in vals):
            raise InternalError("curve scores must be finite and nonnegative")


def ccm_curve(
    source: TimeSeries,
    target: TimeSeries,
    cfg: CcmConfig,
    pair=("source", "target"),
    threads: int = 1,
) -> CcmCurve:
    """Both directional scores at every configured library size.

    Cells (direction, L) are independent; with ``threads > 1`` they are
    evaluated on a thread pool and written back by cell index, so the curve
    is bit-identical regardless of scheduling.
    """
    src, tgt = _prepare(source, target, cfg)
    cells = [(s, t, L) for s, t in ((src, tgt), (tgt, src)) for L in cfg.library_sizes]

    def run(cell):
        s, t, L = cell
        return _score_prepared(s, t, cfg, L)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(run, cells))
    else:
        scores = [run(c) for c in cells]
    n = len(cfg.library_sizes)
    return CcmCurve(
        pair=tuple(pair),
        library_sizes=cfg.library_sizes,
        mae_source_to_target=tuple(scores[:n]),
        mae_target_to_source=tuple(scores[n:]),
    )


@dataclass(frozen=True)
class CurveDiagnostic:
    min_mae: float
    gap: float
    converged: bool


def convergence_diagnostic(c: CcmCurve, rel_slack: float = 0.05) -> CurveDiagnostic:
    """Summary of a curve: the better largest-L score, the directional gap,
    and whether both directions end at or below their smallest-L score plus
    a relative slack."""
    end_st = c.mae_source_to_target[-1]
    end_ts = c.mae_target_to_source[-1]
    start_st = c.mae_source_to_target[0]
    start_ts = c.mae_target_to_source[0]
    converged = end_st <= start_st + rel_slack * start_st and end_ts <= start_ts + rel_slack * start_ts
    return CurveDiagnostic(
        min_mae=float(min(end_st, end_ts)),
        gap=float(abs(end_st - end_ts)),
        converged=bool(converged),
    )


def write_curve_csv(c: CcmCurve, path) -> None:
    """Export: header ``L,direction,mae`` with direction src->tgt / tgt->src."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["L", "direction", "mae"])
        for L, v in zip(c.library_sizes, c.mae_source_to_target):
            writer.writerow([L, "src->tgt", format(v, ".12g")])
        for L, v in zip(c.library_sizes, c.mae_target_to_source):
            writer.writerow([L, "tgt->src", format(v, ".12g")])


def curve_report(c: CcmCurve, cfg: CcmConfig) -> dict:
    """JSON-ready diagnostic including a config echo."""
    diag = convergence_diagnostic(c)
    return {
        "pair": {"source": c.pair[0], "target": c.pair[1]},
        "config": {
            "d": cfg.embedding.d,
            "tau": cfg.embedding.tau,
            "library_sizes": list(cfg.library_sizes),
            "prediction_mode": cfg.prediction_mode,
            "theiler_window": cfg.theiler_window,
            "normalize": cfg.normalize,
        },
        "scores": {
            "src->tgt": list(c.mae_source_to_target),
            "tgt->src": list(c.mae_target_to_source),
        },
        "min_mae": diag.min_mae,
        "gap": diag.gap,
        "converged": diag.converged,
    }
