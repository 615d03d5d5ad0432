"""Linear autoregressive ground truth for the cross-mapping machinery.

The system is a driver/response pair

    X_t = alpha * X_{t-1} + mu + eps_t
    Y_t = beta  * X_{t-1} + mu + zeta_t        (t = 1..T, X_0 given)

with iid Gaussian innovations. Because the recursion solves in closed form,
the absolute cross-map error for any fixed neighbor scheme has an exact
expression, and its large-library limit under an idealized scheme is a
folded normal. This module provides the simulation, the exact score
formulas, the limiting distributions, and a Monte-Carlo harness that checks
sampled scores against those limits with a Kolmogorov-Smirnov distance.

Index conventions: noise arrays have length T+1 with slot 0 fixed at zero,
so ``eps[t]`` is the innovation at time t. The response solves to

    Y_t = beta * alpha^(t-1) * X_0 + (beta * P_{t-1}(alpha) + 1) * mu
          + beta * E_{t-1} + zeta_t

with P_t(alpha) = (1 - alpha^t)/(1 - alpha) and E_t the geometrically
weighted innovation sum; note the E index is t-1, matching the recursion.
"""

from __future__ import annotations

from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr
from scipy.stats import kstest

from . import rng as _rng
from .ccm import CcmConfig, ccm_score
from .errors import NumericalError, UsageError
from .panel import TimeSeries


@dataclass(frozen=True, eq=False)
class Ar1Params:
    alpha: float
    beta: float = 0.0
    mu: float = 0.0
    sigma_x: float = 1.0
    sigma_y: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        if not abs(self.alpha) < 1:
            raise UsageError(f"|alpha| must be < 1, got {self.alpha}")
        if self.beta < 0:
            raise UsageError(f"beta must be >= 0, got {self.beta}")
        if self.sigma_x < 0 or self.sigma_y < 0:
            raise UsageError("noise scales must be >= 0")

    @property
    def stationary_mean(self) -> float:
        return self.mu / (1.0 - self.alpha)


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Innovation paths; index t holds the time-t draw, slot 0 is zero."""

    eps: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=np.float64)
        zeta = np.asarray(self.zeta, dtype=np.float64)
        if eps.shape != zeta.shape or eps.ndim != 1 or len(eps) < 2:
            raise UsageError("eps and zeta must be equal-length 1-d arrays, length >= 2")
        if not (np.all(np.isfinite(eps)) and np.all(np.isfinite(zeta))):
            raise UsageError("noise must be finite")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "zeta", zeta)

    @property
    def horizon(self) -> int:
        return len(self.eps) - 1


def draw_noise(p: Ar1Params, T: int, seed: int, *key: int) -> NoisePath:
    if T < 1:
        raise UsageError("T must be >= 1")
    gen = _rng.generator(seed, *key)
    eps = np.zeros(T + 1)
    zeta = np.zeros(T + 1)
    eps[1:] = _rng.normal(gen, size=T, sd=p.sigma_x)
    zeta[1:] = _rng.normal(gen, size=T, sd=p.sigma_y)
    return NoisePath(eps=eps, zeta=zeta)


def series_from_noise(p: Ar1Params, noise: NoisePath):
    """Run the recursion on a given noise path.

    Returns X on times 0..T (including the initial state) and Y on times
    1..T (the response has no time-0 value).
    """
    T = noise.horizon
    x = np.empty(T + 1)
    x[0] = p.x0
    for t in range(1, T + 1):
        x[t] = p.alpha * x[t - 1] + p.mu + noise.eps[t]
    y = p.beta * x[:-1] + p.mu + noise.zeta[1:]
    return TimeSeries(np.arange(T + 1), x), TimeSeries(np.arange(1, T + 1), y)


def simulate_ar1(p: Ar1Params, T: int, seed: int, *key: int):
    """Draw a noise path and run the recursion; returns (X, Y, noise)."""
    noise = draw_noise(p, T, seed, *key)
    x, y = series_from_noise(p, noise)
    return x, y, noise


def innovation_sums(p: Ar1Params, noise: NoisePath) -> np.ndarray:
    """E_t = sum_{s=1..t} alpha^(t-s) eps_s for t = 0..T (E_0 = 0)."""
    return lfilter([1.0], [1.0, -p.alpha], noise.eps)


def geometric_sum(alpha: float, t: int) -> float:
    """P_t(alpha) = 1 + alpha + ... + alpha^(t-1)."""
    if t < 0:
        raise UsageError("t must be >= 0")
    return float((1.0 - alpha**t) / (1.0 - alpha)) if alpha != 1.0 else float(t)


def closed_form_state(p: Ar1Params, t: int, noise: NoisePath):
    """Exact (X_t, Y_t, E_t, P_t(alpha)) from the solved recursion."""
    if not (1 <= t <= noise.horizon):
        raise UsageError(f"t must be in 1..{noise.horizon}")
    E = innovation_sums(p, noise)
    p_t = geometric_sum(p.alpha, t)
    x_t = p.alpha**t * p.x0 + p_t * p.mu + E[t]
    y_t = (
        p.beta * p.alpha ** (t - 1) * p.x0
        + (p.beta * geometric_sum(p.alpha, t - 1) + 1.0) * p.mu
        + p.beta * E[t - 1]
        + noise.zeta[t]
    )
    return float(x_t), float(y_t), float(E[t]), float(p_t)


@dataclass(frozen=True, eq=False)
class NeighborScheme:
    """A fixed cross-map neighbor assignment: target time, neighbor times,
    and convex weights. Injectable so the closed-form scores can be checked
    without running any neighbor search."""

    t: int
    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)
        if idx.ndim != 1 or len(idx) == 0 or idx.shape != w.shape:
            raise UsageError("indices and weights must be equal-length nonempty vectors")
        if len(np.unique(idx)) != len(idx):
            raise UsageError("scheme indices must be distinct")
        if np.any(idx < 1):
            raise UsageError("scheme indices must be >= 1")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise UsageError("weights must be nonnegative and sum to 1 within 1e-12")
        if self.t < 1:
            raise UsageError("target time must be >= 1")


def closed_form_score_x(p: Ar1Params, scheme: NeighborScheme, noise: NoisePath) -> float:
    """Exact |X_t - sum_i w_i X_{t_i}| via the solved recursion."""
    if scheme.indices.max() > noise.horizon or scheme.t > noise.horizon:
        raise UsageError("scheme indices must lie within the noise horizon")
    E = innovation_sums(p, noise)
    w = scheme.weights
    idx = scheme.indices
    a = p.alpha
    centered_x0 = p.x0 - p.stationary_mean
    mean_term = centered_x0 * (a**scheme.t - np.dot(w, a ** idx.astype(np.float64)))
    noise_term = E[scheme.t] - np.dot(w, E[idx])
    return float(abs(mean_term + noise_term))


def closed_form_score_y(p: Ar1Params, scheme: NeighborScheme, noise: NoisePath) -> float:
    """Exact |Y_t - sum_i w_i Y_{t'_i}|; uses the recursion's E_{t-1} indexing."""
    if scheme.indices.max() > noise.horizon or scheme.t > noise.horizon:
        raise UsageError("scheme indices must lie within the noise horizon")
    E = innovation_sums(p, noise)
    w = scheme.weights
    idx = scheme.indices
    a = p.alpha
    centered_x0 = p.x0 - p.stationary_mean
    mean_term = p.beta * centered_x0 * (
        a ** (scheme.t - 1) - np.dot(w, a ** (idx - 1).astype(np.float64))
    )
    drive_term = p.beta * (E[scheme.t - 1] - np.dot(w, E[idx - 1]))
    obs_term = noise.zeta[scheme.t] - np.dot(w, noise.zeta[idx])
    return float(abs(mean_term + drive_term + obs_term))


@dataclass(frozen=True)
class FoldedNormalParams:
    mean_param: float
    var_param: float

    def __post_init__(self):
        if self.var_param < 0:
            raise UsageError("variance parameter must be >= 0")


def limit_params_x(p: Ar1Params, t: int) -> FoldedNormalParams:
    """Folded-normal limit of the driver-direction score at fixed t."""
    a2t = p.alpha ** (2 * t)
    mean = (p.x0 - p.stationary_mean) * p.alpha**t
    var = (2.0 - a2t) / (1.0 - p.alpha**2) * p.sigma_x**2
    return FoldedNormalParams(mean_param=float(mean), var_param=float(var))


def limit_params_y(p: Ar1Params, t: int) -> FoldedNormalParams:
    """Folded-normal limit of the response-direction score at fixed t."""
    a2t = p.alpha ** (2 * t)
    mean = p.beta * (p.x0 - p.stationary_mean) * p.alpha ** (t - 1)
    var = (2.0 - a2t) / (1.0 - p.alpha**2) * p.beta**2 * p.sigma_x**2 + 2.0 * p.sigma_y**2
    return FoldedNormalParams(mean_param=float(mean), var_param=float(var))


class FoldedNormal:
    """|N(mu, sigma^2)| with standard pdf/cdf/mean identities."""

    def __init__(self, params: FoldedNormalParams):
        self.params = params

    @property
    def mean(self) -> float:
        mu = self.params.mean_param
        var = self.params.var_param
        if var == 0.0:
            return abs(mu)
        sd = np.sqrt(var)
        return float(
            sd * np.sqrt(2.0 / np.pi) * np.exp(-(mu**2) / (2.0 * var))
            + mu * (1.0 - 2.0 * ndtr(-mu / sd))
        )

    def _require_scale(self):
        if self.params.var_param == 0.0:
            raise NumericalError("degenerate point mass: pdf/cdf undefined at zero variance")

    def pdf(self, x):
        self._require_scale()
        x = np.asarray(x, dtype=np.float64)
        mu = self.params.mean_param
        sd = np.sqrt(self.params.var_param)
        out = (
            np.exp(-((x - mu) ** 2) / (2 * sd**2)) + np.exp(-((x + mu) ** 2) / (2 * sd**2))
        ) / (sd * np.sqrt(2 * np.pi))
        return np.where(x >= 0, out, 0.0)

    def cdf(self, x):
        self._require_scale()
        x = np.asarray(x, dtype=np.float64)
        mu = self.params.mean_param
        sd = np.sqrt(self.params.var_param)
        out = ndtr((x - mu) / sd) - ndtr((-x - mu) / sd)
        return np.where(x >= 0, out, 0.0)


def folded_normal_stats(f: FoldedNormalParams) -> FoldedNormal:
    """Distribution object exposing pdf, cdf, and mean."""
    return FoldedNormal(f)


@dataclass(frozen=True, eq=False)
class SchemeRule:
    """Numeric stand-in for the limit regime: neighbor indices at least
    ``index_floor``, pairwise at least ``gap_floor`` apart (and equally far
    from the target), with exactly uniform weights."""

    index_floor: int = 500
    gap_floor: int = 200
    n_neighbors: int = 5
    horizon: int = 2000

    def __post_init__(self):
        if self.index_floor < 1 or self.gap_floor < 1 or self.n_neighbors < 1:
            raise UsageError("floors and neighbor count must be >= 1")
        if self.horizon < 1:
            raise UsageError("horizon must be >= 1")

    def build(self, t: int) -> NeighborScheme:
        start = max(self.index_floor, t + self.gap_floor)
        indices = start + self.gap_floor * np.arange(self.n_neighbors, dtype=np.int64)
        if indices.max() > self.horizon:
            raise UsageError(
                f"scheme needs index {int(indices.max())} beyond horizon {self.horizon}; "
                "raise the horizon or lower the floors"
            )
        weights = np.full(self.n_neighbors, 1.0 / self.n_neighbors)
        return NeighborScheme(t=t, indices=indices, weights=weights)


@dataclass(frozen=True, eq=False)
class LimitValidation:
    direction: str
    ks_stat: float
    tolerance: float
    passed: bool
    n_samples: int
    samples: np.ndarray
    limit: FoldedNormalParams


def validate_limit_distribution(
    p: Ar1Params,
    t: int,
    n_samples: int,
    seed: int,
    rule: SchemeRule,
    direction: str = "x",
    tolerance: float = 0.03,
) -> LimitValidation:
    """KS distance between sampled closed-form scores and the stated limit.

    Draws ``n_samples`` independent innovation paths, evaluates the exact
    score for the rule's scheme on each, and compares the sample to the
    folded-normal limit for the requested direction.
    """
    if direction not in ("x", "y"):
        raise UsageError("direction must be 'x' or 'y'")
    if n_samples < 1:
        raise UsageError("n_samples must be >= 1")
    scheme = rule.build(t)
    horizon = int(max(scheme.indices.max(), t))
    gen = _rng.generator(seed, 0 if direction == "x" else 1)

    a = p.alpha
    w = scheme.weights
    idx = scheme.indices
    centered_x0 = p.x0 - p.stationary_mean

    eps = np.zeros((n_samples, horizon + 1))
    eps[:, 1:] = _rng.normal(gen, size=(n_samples, horizon), sd=p.sigma_x)
    E = lfilter([1.0], [1.0, -a], eps, axis=1)
    if direction == "x":
        mean_term = centered_x0 * (a**t - np.dot(a ** idx.astype(np.float64), w))
        samples = np.abs(mean_term + E[:, t] - E[:, idx] @ w)
        limit = limit_params_x(p, t)
    else:
        zeta = np.zeros((n_samples, horizon + 1))
        zeta[:, 1:] = _rng.normal(gen, size=(n_samples, horizon), sd=p.sigma_y)
        mean_term = p.beta * centered_x0 * (
            a ** (t - 1) - np.dot(a ** (idx - 1).astype(np.float64), w)
        )
        samples = np.abs(
            mean_term
            + p.beta * (E[:, t - 1] - E[:, idx - 1] @ w)
            + zeta[:, t]
            - zeta[:, idx] @ w
        )
        limit = limit_params_y(p, t)

    fn = FoldedNormal(limit)
    ks = float(kstest(samples, fn.cdf).statistic)
    return LimitValidation(
        direction=direction,
        ks_stat=ks,
        tolerance=tolerance,
        passed=bool(ks < tolerance),
        n_samples=n_samples,
        samples=samples,
        limit=limit,
    )


@dataclass(frozen=True, eq=False)
class DirectionStudy:
    """Mean final-library cross-map scores per direction over many systems."""

    scores_x_given_y: np.ndarray
    scores_y_given_x: np.ndarray

    @property
    def mean_score_x_given_y(self) -> float:
        return float(self.scores_x_given_y.mean())

    @property
    def mean_score_y_given_x(self) -> float:
        return float(self.scores_y_given_x.mean())

    @property
    def mean_gap(self) -> float:
        """mean(score_y_given_x - score_x_given_y), paired per run."""
        return float((self.scores_y_given_x - self.scores_x_given_y).mean())

    @property
    def gap_se(self) -> float:
        d = self.scores_y_given_x - self.scores_x_given_y
        if len(d) < 2:
            return float("nan")
        return float(d.std(ddof=1) / np.sqrt(len(d)))


def direction_study(
    p: Ar1Params,
    runs: int,
    ccm_cfg: CcmConfig,
    seed: int,
    T: int = 300,
    threads: int = 1,
) -> DirectionStudy:
    """Simulate ``runs`` systems and cross-map both directions end to end
    through the real pipeline, scoring at the largest configured library
    size. Series are aligned on times 1..T."""
    if runs < 1:
        raise UsageError("runs must be >= 1")
    L = ccm_cfg.library_sizes[-1]

    def one(r: int):
        x, y, _ = simulate_ar1(p, T, seed, r)
        xs = TimeSeries(np.arange(T), x.values[1:])
        ys = TimeSeries(np.arange(T), y.values)
        # CCM(X|Y): reconstruct from the response, estimate the driver.
        sxy = ccm_score(ys, xs, ccm_cfg, L)
        syx = ccm_score(xs, ys, ccm_cfg, L)
        return sxy, syx

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(runs)))
    else:
        results = [one(r) for r in range(runs)]
    sx = np.array([a for a, _ in results])
    sy = np.array([b for _, b in results])
    return DirectionStudy(scores_x_given_y=sx, scores_y_given_x=sy)
