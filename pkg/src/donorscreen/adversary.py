"""Artificial control units and known-truth treated units.

The attack recipes fabricate donor-pool units that fit a treated series
statistically while being dynamically unrelated to it: scaling a template
onto the outcome's range, level-shifting it so the pre-period matches, and
emitting autoregressive noisy copies of a template. Truth panels replace
the treated unit with an exact convex combination of controls plus a known
post-period effect, so estimators can be judged against ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .errors import DataError, NumericalError, UsageError
from .panel import Panel, PanelData, TimeSeries
from .scm import SimplexWeights


@dataclass(frozen=True, eq=False)
class ArNoiseSpec:
    order: int = 1
    noise_sd_multiplier: float = 1.0

    def __post_init__(self):
        if self.order != 1:
            raise UsageError("only order-1 autoregressive fits are supported")
        if self.noise_sd_multiplier < 0:
            raise UsageError("noise multiplier must be >= 0")


@dataclass(frozen=True, eq=False)
class AttackSpec:
    template: TimeSeries
    scale_k: float = 1.0
    shift_a: float = 0.0
    shift_b: float = 0.0
    t_cut: int = 0
    n_units: int = 1
    ar_noise: ArNoiseSpec | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_units < 1:
            raise UsageError("n_units must be >= 1")
        if not (0 <= self.t_cut < len(self.template)):
            raise UsageError(f"t_cut={self.t_cut} outside template range")


def scale_template(template: TimeSeries, k: float) -> TimeSeries:
    """Pointwise k * template."""
    return template.with_values(k * template.values)


def level_shift(s: TimeSeries, a: float, b: float, t_cut: int) -> TimeSeries:
    """value - a + b on positions <= t_cut, value - a afterwards."""
    if not (0 <= t_cut < len(s)):
        raise UsageError(f"t_cut={t_cut} outside series range")
    bump = np.where(np.arange(len(s)) <= t_cut, b, 0.0)
    return s.with_values(s.values - a + bump)


def fit_ar1(template: TimeSeries):
    """Least-squares lag-1 fit; returns (slope, intercept, residual_sd)."""
    v = template.values
    if len(v) < 3:
        raise UsageError("template must have length >= 3")
    if float(np.std(v)) == 0.0:
        raise NumericalError("zero variance: cannot fit an autoregression to a constant")
    x, y = v[:-1], v[1:]
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(len(resid) - 2, 1)
    resid_sd = float(np.sqrt((resid @ resid) / dof))
    return float(slope), float(intercept), resid_sd


def ar_noisy_copies(template: TimeSeries, spec: AttackSpec) -> list:
    """n_units copies of the template plus iid Gaussian noise whose sd is
    multiplier * the template's fitted lag-1 residual sd."""
    noise_spec = spec.ar_noise or ArNoiseSpec()
    _, _, resid_sd = fit_ar1(template)
    sd = noise_spec.noise_sd_multiplier * resid_sd
    copies = []
    for unit in range(spec.n_units):
        gen = _rng.generator(spec.seed, unit)
        noise = _rng.normal(gen, size=len(template), sd=sd) if sd > 0 else 0.0
        copies.append(template.with_values(template.values + noise))
    return copies


def make_adversaries(spec: AttackSpec) -> list:
    """Full recipe: scale, level-shift at the cut, then (optionally) emit
    noisy copies; without an ar_noise section the units are exact copies."""
    shaped = level_shift(
        scale_template(spec.template, spec.scale_k), spec.shift_a, spec.shift_b, spec.t_cut
    )
    if spec.ar_noise is None:
        return [shaped.with_values(shaped.values) for _ in range(spec.n_units)]
    inner = AttackSpec(
        template=shaped,
        t_cut=spec.t_cut,
        n_units=spec.n_units,
        ar_noise=spec.ar_noise,
        seed=spec.seed,
    )
    return ar_noisy_copies(shaped, inner)


def inject(panel: PanelData, units, id_prefix: str) -> PanelData:
    """Append the given series as controls named <prefix>1..n."""
    units = list(units)
    for u in units:
        if len(u) != panel.T:
            raise DataError(f"injected unit length {len(u)} != panel length {panel.T}")
    new_ids = [f"{id_prefix}{i}" for i in range(1, len(units) + 1)]
    clash = set(new_ids) & set(panel.unit_ids)
    if clash:
        raise DataError(f"injected ids collide with existing units: {sorted(clash)}")
    grid = panel.times
    appended = tuple(
        (uid, TimeSeries(grid.copy(), u.values)) for uid, u in zip(new_ids, units)
    )
    return PanelData(
        units=panel.units + appended,
        treated_id=panel.treated_id,
        labels=panel.labels,
        t0=panel.t0,
    )


@dataclass(frozen=True, eq=False)
class TruthPanel:
    """Panel whose treated series is a known convex combination of controls
    plus a known post-period effect."""

    panel: PanelData
    true_weights: SimplexWeights
    tau: float

    def __post_init__(self):
        p = self.panel
        combo = self.true_weights.w @ p.values_of(self.true_weights.control_ids)
        jump = np.where(p.times > p.t0, self.tau, 0.0)
        if np.max(np.abs(p.treated.values - (combo + jump))) > 1e-12:
            raise DataError("treated series does not equal weights * controls + effect")


def build_truth_panel(controls: PanelData, weights: SimplexWeights, tau: float) -> TruthPanel:
    """Replace the treated series with the exact convex combination of the
    weighted controls plus tau after the intervention index."""
    unknown = [u for u in weights.control_ids if u not in controls.control_ids]
    if unknown:
        raise UsageError(f"weights reference non-control units: {unknown}")
    combo = weights.w @ controls.values_of(weights.control_ids)
    jump = np.where(controls.times > controls.t0, tau, 0.0)
    treated = TimeSeries(controls.times.copy(), combo + jump)
    units = tuple(
        (uid, treated if uid == controls.treated_id else s) for uid, s in controls.units
    )
    panel = PanelData(
        units=units, treated_id=controls.treated_id, labels=controls.labels, t0=controls.t0
    )
    return TruthPanel(panel=panel, true_weights=weights, tau=float(tau))
