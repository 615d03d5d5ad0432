"""Synthetic-control weight fitting under simplex constraints.

The solver minimizes the pre-period sum of squared gaps between the treated
series and a weighted combination of control series, with weights
constrained to the probability simplex (nonnegative, summing to one). It is
projected gradient descent with a backtracking (halving) Armijo line
search from a uniform start, followed by an exact least-squares polish on
the active face when that strictly improves the objective. Counterfactual
prediction and per-period effect estimation sit on top of the fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, UsageError
from .panel import Panel, PanelData, TimeSeries

_ARMIJO_C = 1e-4
_SUM_TOL = 1e-9
_CLAMP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SimplexWeights:
    """Nonnegative weights over named controls, summing to one."""

    control_ids: tuple
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).copy()
        ids = tuple(str(u) for u in self.control_ids)
        if len(ids) != len(w):
            raise UsageError("control_ids and w must have matching length")
        if len(set(ids)) != len(ids):
            raise UsageError("control ids must be unique")
        if np.any(w < -_CLAMP_TOL):
            raise UsageError("weights must be nonnegative")
        w[w < 0.0] = 0.0
        if abs(w.sum() - 1.0) > _SUM_TOL:
            raise UsageError(f"weights must sum to 1 within {_SUM_TOL}, got {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "control_ids", ids)
        object.__setattr__(self, "w", w)

    def as_dict(self, zero_below: float = 0.0) -> dict:
        return {
            uid: (0.0 if v < zero_below else float(v))
            for uid, v in zip(self.control_ids, self.w)
        }


def simplex_project(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or len(v) == 0:
        raise UsageError("expects a nonempty vector")
    if not np.all(np.isfinite(v)):
        raise UsageError("vector must be finite")
    u = np.sort(v)[::-1]
    cumsum = np.cumsum(u)
    j = np.arange(1, len(v) + 1)
    mask = u + (1.0 - cumsum) / j > 0
    rho = int(np.nonzero(mask)[0][-1])
    lam = (1.0 - cumsum[rho]) / (rho + 1.0)
    return np.maximum(v + lam, 0.0)


@dataclass(frozen=True, eq=False)
class FitResult:
    weights: "SimplexWeights"
    pre_rmse: float
    objective_trace: np.ndarray
    n_iter: int
    converged: bool


def _objective(C: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    r = y - C @ w
    return float(r @ r)


def fit_weights_detailed(
    pre_panel: Panel, tol: float = 1e-12, max_iter: int = 100_000
) -> FitResult:
    """Projected-gradient fit on pre-period outcomes, with iteration trace.

    Stops once the objective improves by less than ``tol`` (or at the
    iteration cap, raising ``NumericalError`` that carries the best-so-far
    weights). The objective trace is nonincreasing by construction.
    """
    ids = pre_panel.control_ids
    if not ids:
        raise UsageError("need at least one control unit")
    y = pre_panel.treated.values
    C = pre_panel.values_of(ids).T  # (T_pre, J)
    J = len(ids)

    w = np.full(J, 1.0 / J)
    f = _objective(C, y, w)
    trace = [f]
    # 2*lambda_max(C^T C) bounds the gradient Lipschitz constant
    lip = 2.0 * (np.linalg.norm(C, 2) ** 2)
    step = 1.0 / lip if lip > 0 else 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = 2.0 * (C.T @ (C @ w - y))
        alpha = step
        while True:
            w_new = simplex_project(w - alpha * g)
            f_new = _objective(C, y, w_new)
            if f_new <= f + _ARMIJO_C * float(g @ (w_new - w)) or alpha < 1e-20:
                break
            alpha *= 0.5
        step = alpha * 2.0
        improvement = f - f_new
        if f_new <= f:
            w, f = w_new, f_new
        # collinear active faces stall the gradient steps; an exact
        # equality-constrained solve on the current face clears them
        if it % 250 == 0:
            w_p, f_p = _polish_active_face(C, y, w, f)
            if f_p < f:
                improvement = max(improvement, f - f_p)
                w, f = w_p, f_p
        trace.append(f)
        if improvement < tol:
            converged = True
            break

    w_polished, f_polished = _polish_active_face(C, y, w, f)
    if f_polished < f:
        w, f = w_polished, f_polished
        trace.append(f)

    pre_rmse = float(np.sqrt(f / len(y)))
    weights = SimplexWeights(control_ids=ids, w=w)
    result = FitResult(
        weights=weights,
        pre_rmse=pre_rmse,
        objective_trace=np.asarray(trace),
        n_iter=it,
        converged=converged,
    )
    if not converged:
        raise NumericalError(
            f"no convergence after {max_iter} iterations", payload=result
        )
    return result


def _polish_active_face(C, y, w, f):
    """Equality-constrained least squares on the strictly positive support.

    The gradient stop rule alone leaves O(sqrt(tol)) weight error on
    exactly-representable treated units; one face solve removes it. The
    polish is accepted only when feasible and strictly better.
    """
    support = np.nonzero(w > 0.0)[0]
    if len(support) == 0:
        return w, f
    Cs = C[:, support]
    k = len(support)
    # KKT system for min ||y - Cs v||^2 subject to sum(v) = 1
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * (Cs.T @ Cs)
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.concatenate([2.0 * (Cs.T @ y), [1.0]])
    try:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    except np.linalg.LinAlgError:
        return w, f
    v = sol[:k]
    if np.any(v < -_CLAMP_TOL):
        return w, f
    v = np.maximum(v, 0.0)
    s = v.sum()
    if s <= 0:
        return w, f
    v = v / s
    w_new = np.zeros_like(w)
    w_new[support] = v
    f_new = _objective(C, y, w_new)
    if f_new < f:
        return w_new, f_new
    return w, f


def fit_weights(pre_panel: Panel, tol: float = 1e-12, max_iter: int = 100_000):
    """Fit simplex weights on a pre-period panel; returns (weights, pre_rmse)."""
    res = fit_weights_detailed(pre_panel, tol=tol, max_iter=max_iter)
    return res.weights, res.pre_rmse


def predict_counterfactual(w: SimplexWeights, panel: Panel) -> TimeSeries:
    """Weighted combination of the control series over the whole panel."""
    missing = [uid for uid in w.control_ids if uid not in panel.unit_ids]
    if missing:
        raise UsageError(f"weights reference unknown units: {missing}")
    values = w.w @ panel.values_of(w.control_ids)
    return TimeSeries(panel.times.copy(), values)


@dataclass(frozen=True, eq=False)
class EffectPath:
    """Per-period post-intervention effect estimates and their average."""

    times: np.ndarray
    tau_hat: np.ndarray
    ate: float

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.int64))
        object.__setattr__(self, "tau_hat", np.asarray(self.tau_hat, dtype=np.float64))
        if len(self.times) != len(self.tau_hat) or len(self.times) == 0:
            raise UsageError("times and tau_hat must be nonempty and equal-length")
        if abs(self.ate - float(self.tau_hat.mean())) > 1e-12:
            raise UsageError("ate must equal mean(tau_hat)")


def effect_path(panel: PanelData, w: SimplexWeights) -> EffectPath:
    """Treated-minus-synthetic gaps over the post period."""
    cf = predict_counterfactual(w, panel)
    post = panel.times > panel.t0
    tau = panel.treated.values[post] - cf.values[post]
    return EffectPath(times=panel.times[post], tau_hat=tau, ate=float(tau.mean()))


def scm_report(panel: PanelData, w: SimplexWeights, pre_rmse: float) -> dict:
    """JSON-ready fit summary; weights below 1e-6 are reported as 0."""
    path = effect_path(panel, w)
    return {
        "weights": w.as_dict(zero_below=1e-6),
        "pre_rmse": pre_rmse,
        "ate": path.ate,
        "effect_path": [
            {"time": panel.label_of(int(t)), "tau_hat": float(v)}
            for t, v in zip(path.times, path.tau_hat)
        ],
    }
