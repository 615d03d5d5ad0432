"""Donor-pool screening by cross-map strength, composed with the
synthetic-control fit.

Each control is cross-mapped against the treated unit on pre-intervention
data only. Its curve summary (best final score, directional gap,
convergence flag) is compared against Monte-Carlo null thresholds obtained
by re-running the same analysis on weakly-coupled surrogates: either both
series plus independent Gaussian noise scaled to their own spread, or a
circularly shifted control. Controls that fail are removed, and the
synthetic-control weights are fitted on the survivors.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .ccm import CcmConfig, CcmCurve, ccm_curve, convergence_diagnostic
from .errors import DataError, UsageError
from .panel import PanelData, TimeSeries, split_pre_post
from .scm import SimplexWeights, EffectPath, effect_path, fit_weights

NULL_NOISE = "noise"
NULL_CIRCULAR_SHIFT = "circular_shift"


@dataclass(frozen=True, eq=False)
class ScreeningConfig:
    ccm: CcmConfig
    null_method: str = NULL_NOISE
    kappa: float = 1.0
    replicates: int = 200
    q_min: float = 0.10
    q_gap: float = 0.90
    base_seed: int = 0
    pooled: bool = False

    def __post_init__(self):
        if self.null_method not in (NULL_NOISE, NULL_CIRCULAR_SHIFT):
            raise UsageError(f"unknown null method {self.null_method!r}")
        if self.kappa < 0:
            raise UsageError("kappa must be >= 0")
        if self.replicates < 1:
            raise UsageError("replicates must be >= 1")
        for name, q in (("q_min", self.q_min), ("q_gap", self.q_gap)):
            if not (0.0 < q < 1.0):
                raise UsageError(f"{name} must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class ScreeningDecision:
    control_id: str
    min_mae: float
    gap: float
    converged: bool
    theta_min: float
    theta_gap: float
    keep: bool = field(default=None)

    def __post_init__(self):
        expected = bool(
            self.min_mae <= self.theta_min and self.gap <= self.theta_gap and self.converged
        )
        if self.keep is None:
            object.__setattr__(self, "keep", expected)
        elif bool(self.keep) != expected:
            raise UsageError("keep flag contradicts its defining predicate")


def _replicate_pair(treated, control, cfg: ScreeningConfig, control_index: int, rep: int):
    gen = _rng.generator(cfg.base_seed, control_index, rep)
    if cfg.null_method == NULL_NOISE:
        out = []
        for s in (treated, control):
            sd = cfg.kappa * float(np.std(s.values, ddof=1))
            noise = _rng.normal(gen, size=len(s), sd=sd) if sd > 0 else np.zeros(len(s))
            out.append(s.with_values(s.values + noise))
        return out[0], out[1]
    T = len(control)
    lo, hi = T // 4, (3 * T) // 4
    offset = int(gen.integers(lo, hi + 1))
    return treated, control.with_values(np.roll(control.values, offset))


def null_distribution(
    treated: TimeSeries,
    control: TimeSeries,
    cfg: ScreeningConfig,
    control_index: int = 0,
    threads: int = 1,
):
    """Replicate (min_mae, gap) samples under the weak-coupling null.

    Each replicate derives its own generator from (base_seed, control
    index, replicate index), so samples do not depend on scheduling.
    """

    def one(rep: int):
        t_rep, c_rep = _replicate_pair(treated, control, cfg, control_index, rep)
        diag = convergence_diagnostic(ccm_curve(t_rep, c_rep, cfg.ccm))
        return diag.min_mae, diag.gap

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(one, range(cfg.replicates)))
    else:
        pairs = [one(rep) for rep in range(cfg.replicates)]
    null_min = np.array([a for a, _ in pairs])
    null_gap = np.array([b for _, b in pairs])
    return null_min, null_gap


def empirical_quantile(samples, q: float) -> float:
    """Lower (type-1) empirical quantile: the ceil(q*n)-th order statistic."""
    s = np.sort(np.asarray(samples, dtype=np.float64))
    if len(s) == 0:
        raise UsageError("quantile of empty sample")
    k = int(np.ceil(q * len(s))) - 1
    return float(s[min(max(k, 0), len(s) - 1)])


def thresholds(null_min, null_gap, cfg: ScreeningConfig):
    """(theta_min, theta_gap) = type-1 quantiles of the null samples."""
    return empirical_quantile(null_min, cfg.q_min), empirical_quantile(null_gap, cfg.q_gap)


def _screen_one(pre_treated, pre_control, cfg, control_id, control_index, threads=1):
    curve = ccm_curve(
        pre_treated, pre_control, cfg.ccm, pair=("treated", control_id)
    )
    diag = convergence_diagnostic(curve)
    null_min, null_gap = null_distribution(
        pre_treated, pre_control, cfg, control_index=control_index, threads=threads
    )
    return curve, diag, null_min, null_gap


def screen_controls(panel: PanelData, cfg: ScreeningConfig, threads: int = 1):
    """Per-control keep/drop decisions on pre-intervention data."""
    decisions, _ = _screen_with_curves(panel, cfg, threads=threads)
    return decisions


def _screen_with_curves(panel: PanelData, cfg: ScreeningConfig, threads: int = 1):
    pre, _ = split_pre_post(panel)
    treated = pre.treated
    controls = pre.control_ids

    def stage_one(item):
        index, cid = item
        return _screen_one(treated, pre.get(cid), cfg, cid, index)

    items = list(enumerate(controls))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            staged = list(pool.map(stage_one, items))
    else:
        staged = [stage_one(it) for it in items]

    if cfg.pooled:
        pooled_min = np.concatenate([s[2] for s in staged])
        pooled_gap = np.concatenate([s[3] for s in staged])
        theta = thresholds(pooled_min, pooled_gap, cfg)
        theta_by_control = [theta] * len(controls)
    else:
        theta_by_control = [thresholds(s[2], s[3], cfg) for s in staged]

    decisions = []
    curves = {}
    for (cid, (curve, diag, _, _), (theta_min, theta_gap)) in zip(
        controls, staged, theta_by_control
    ):
        curves[cid] = curve
        decisions.append(
            ScreeningDecision(
                control_id=cid,
                min_mae=diag.min_mae,
                gap=diag.gap,
                converged=diag.converged,
                theta_min=theta_min,
                theta_gap=theta_gap,
            )
        )
    return decisions, curves


@dataclass(frozen=True, eq=False)
class PipelineReport:
    decisions: tuple
    kept_ids: tuple
    weights: SimplexWeights
    pre_rmse: float
    effect: EffectPath
    curves: dict


class AllControlsScreenedOut(DataError):
    def __init__(self, decisions):
        super().__init__(
            "all controls screened out; relax q_min/q_gap or inspect the decisions"
        )
        self.decisions = decisions


def ccm_scm_pipeline(panel: PanelData, cfg: ScreeningConfig, threads: int = 1) -> PipelineReport:
    """Screen the donor pool, then fit the synthetic control on survivors.

    When every control is kept, the fit runs on the panel exactly as given,
    so the weights are bit-identical to an unscreened fit.
    """
    decisions, curves = _screen_with_curves(panel, cfg, threads=threads)
    kept = tuple(d.control_id for d in decisions if d.keep)
    if not kept:
        raise AllControlsScreenedOut(decisions)
    kept_set = set(kept) | {panel.treated_id}
    sub_units = tuple((uid, s) for uid, s in panel.units if uid in kept_set)
    sub_panel = PanelData(
        units=sub_units, treated_id=panel.treated_id, labels=panel.labels, t0=panel.t0
    )
    pre, _ = split_pre_post(sub_panel)
    weights, pre_rmse = fit_weights(pre)
    effect = effect_path(sub_panel, weights)
    return PipelineReport(
        decisions=tuple(decisions),
        kept_ids=kept,
        weights=weights,
        pre_rmse=pre_rmse,
        effect=effect,
        curves=curves,
    )


def report_json(report: PipelineReport, panel: PanelData) -> dict:
    return {
        "decisions": [
            {
                "control": d.control_id,
                "min_mae": d.min_mae,
                "gap": d.gap,
                "converged": d.converged,
                "theta_min": d.theta_min,
                "theta_gap": d.theta_gap,
                "keep": d.keep,
            }
            for d in report.decisions
        ],
        "kept_ids": list(report.kept_ids),
        "weights": report.weights.as_dict(zero_below=1e-6),
        "pre_rmse": report.pre_rmse,
        "ate": report.effect.ate,
        "effect_path": [
            {"time": panel.label_of(int(t)), "tau_hat": float(v)}
            for t, v in zip(report.effect.times, report.effect.tau_hat)
        ],
        "curves": {
            cid: {
                "library_sizes": list(c.library_sizes),
                "treated_to_control": list(c.mae_source_to_target),
                "control_to_treated": list(c.mae_target_to_source),
            }
            for cid, c in sorted(report.curves.items())
        },
    }


def write_summary_csv(decisions, path) -> None:
    """Header: control,min_mae,gap,theta_min,theta_gap,converged,keep."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["control", "min_mae", "gap", "theta_min", "theta_gap", "converged", "keep"])
        for d in decisions:
            writer.writerow(
                [
                    d.control_id,
                    format(d.min_mae, ".12g"),
                    format(d.gap, ".12g"),
                    format(d.theta_min, ".12g"),
                    format(d.theta_gap, ".12g"),
                    str(bool(d.converged)).lower(),
                    str(bool(d.keep)).lower(),
                ]
            )
