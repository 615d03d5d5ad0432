"""Seeded panel fixtures shared by the screening and acceptance tests.

The donor pool rides a common chaotic driver (logistic map, burn-in
discarded, re-scaled on the pre window), so every donor is strongly
dynamically coupled to the treated unit. The treated series is an exact
convex combination of the first five donors plus a constant level offset
that no simplex combination of donors can reach, plus the known effect
after t0. The artificial units are built with the scale/level-shift recipe:
smooth trending templates whose shifted pre-period level sits above the
donor levels, so an intercept-free least-squares fit finds them
irresistible, while their lack of shared dynamics makes them easy prey for
the cross-map screen. Their post-period level drops by the shift constant,
which is what biases the unscreened estimator.
"""

import numpy as np

from donorscreen import (
    EmbeddingConfig,
    CcmConfig,
    PanelData,
    ScreeningConfig,
    default_library_sizes,
    inject,
    level_shift,
    scale_template,
    series,
)
from donorscreen import rng as dsrng

TAU_TRUE = 4.0
T_FIXTURE = 60
T0_FIXTURE = 39
TRUE_WEIGHTS = np.array([0.164, 0.069, 0.199, 0.234, 0.334])
LEVEL_OFFSET = 8.0
N_CONTROLS = 10


def chaotic_driver(seed, T=T_FIXTURE, t0=T0_FIXTURE, burn=100):
    gen = dsrng.generator(seed, 7001)
    x = 0.2 + 0.6 * dsrng.uniform_open(gen)
    path = np.empty(T + burn)
    for t in range(T + burn):
        x = 3.9 * x * (1.0 - x)
        path[t] = x
    drv = path[burn:]
    return (drv - drv[: t0 + 1].mean()) / np.std(drv[: t0 + 1], ddof=1), gen


def make_coupled_panel(seed) -> PanelData:
    """Clean panel: treated = convex combo of donors + level offset + effect."""
    drv, gen = chaotic_driver(seed)
    controls = {}
    for j in range(N_CONTROLS):
        level = float(dsrng.normal(gen, mean=85.0, sd=2.0))
        amp = float(5.0 + dsrng.normal(gen, sd=0.5))
        idio = dsrng.normal(gen, size=T_FIXTURE, sd=0.25)
        controls[f"c{j}"] = level + amp * drv + idio
    combo = sum(TRUE_WEIGHTS[j] * controls[f"c{j}"] for j in range(5))
    jump = np.where(np.arange(T_FIXTURE) > T0_FIXTURE, TAU_TRUE, 0.0)
    treated = combo + LEVEL_OFFSET + jump
    units = (("treated", series(treated)),) + tuple(
        (k, series(v)) for k, v in controls.items()
    )
    return PanelData(units=units, treated_id="treated", t0=T0_FIXTURE)


def make_attacked_panel(seed, n_adversaries=5):
    """Clean panel plus level-shifted artificial units (recipe constants
    scale 6, shift -50/+90 at t0)."""
    panel = make_coupled_panel(seed)
    tgrid = np.arange(T_FIXTURE)
    units = []
    for i in range(n_adversaries):
        slope = 2.0 + 0.5 * i
        ramp = slope * (tgrid - T0_FIXTURE / 2) / T0_FIXTURE
        curve = 0.3 * np.sin(np.pi * (tgrid + 2 * i) / T_FIXTURE)
        template = series(13.0 + (ramp + curve) / 6.0)
        shaped = level_shift(scale_template(template, 6.0), 50.0, 90.0, T0_FIXTURE)
        units.append(shaped)
    return inject(panel, units, "AD"), panel


def fixture_screening_config(seed, replicates=200) -> ScreeningConfig:
    emb = EmbeddingConfig(d=4, tau=1)
    sizes = default_library_sizes(T0_FIXTURE + 1, emb)
    return ScreeningConfig(
        ccm=CcmConfig(embedding=emb, library_sizes=sizes),
        base_seed=seed,
        replicates=replicates,
    )
