"""Command-line surface.

Subcommands: ``ccm`` (pairwise curve + diagnostic), ``scm`` (plain
synthetic-control fit), ``screen`` (cross-map screening composed with the
fit), ``effect`` (effect path for given weights), ``simulate`` (driver/
response panel and direction study), ``attack`` (augment a panel with
artificial units), ``validate`` (limiting-distribution check).

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
error. Statistical outcomes (a failed distributional check) are report
fields, never exit codes.

Every flag can also be supplied from a flat ``key = value`` config file
(``--config``) or an environment variable ``DONORSCREEN_<FLAG>``; explicit
flags win over environment values, which win over the config file.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .adversary import ArNoiseSpec, AttackSpec, inject, make_adversaries
from .ar1 import Ar1Params, SchemeRule, direction_study, simulate_ar1, validate_limit_distribution
from .ccm import CcmConfig, ccm_curve, curve_report, default_library_sizes, write_curve_csv
from .embedding import EmbeddingConfig
from .errors import DataError, NumericalError, UsageError
from .panel import PanelData, TimeSeries, load_panel, split_pre_post, write_panel_long
from .report import write_json
from .scm import fit_weights, scm_report, SimplexWeights, effect_path
from .screening import ScreeningConfig, ccm_scm_pipeline, report_json, write_summary_csv

ENV_PREFIX = "DONORSCREEN_"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p):
    p.add_argument("--config", type=str, default=None, help="flat key = value config file")
    p.add_argument("--seed", type=int, default=0, help="base seed for all randomness")
    p.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker threads; results are identical for any value",
    )


def _add_panel_args(p):
    p.add_argument("--panel", type=str, required=True, help="long CSV: unit,time,value")
    p.add_argument("--treated-id", type=str, required=True)
    p.add_argument("--t0", type=str, required=True, help="time label of the last pre-period")


def _add_ccm_args(p):
    p.add_argument("--d", type=int, default=4, help="embedding dimension")
    p.add_argument("--tau", type=int, default=1, help="embedding delay")
    p.add_argument(
        "--library-sizes",
        type=str,
        default=None,
        help="comma-separated ascending Ls (default: 8 evenly spaced feasible sizes)",
    )
    p.add_argument("--prediction-mode", choices=["holdout", "leave_one_out"], default="holdout")
    p.add_argument("--theiler-window", type=int, default=None)
    p.add_argument("--no-normalize", action="store_true", help="skip per-series z-scoring")


def build_parser() -> _Parser:
    parser = _Parser(prog="donorscreen", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ccm", help="cross-map one control against the treated unit")
    _add_common(p); _add_panel_args(p); _add_ccm_args(p)
    p.add_argument("--control", type=str, required=True, help="control unit id")
    p.add_argument("--pre-only", action="store_true", help="restrict to the pre-period")
    p.add_argument("--out-csv", type=str, required=True)
    p.add_argument("--out-json", type=str, required=True)

    p = sub.add_parser("scm", help="plain synthetic-control fit and effect path")
    _add_common(p); _add_panel_args(p)
    p.add_argument("--out-json", type=str, required=True)

    p = sub.add_parser("effect", help="effect path for externally supplied weights")
    _add_common(p); _add_panel_args(p)
    p.add_argument("--weights", type=str, required=True, help="CSV: unit,weight")
    p.add_argument("--out-json", type=str, required=True)

    p = sub.add_parser("screen", help="cross-map screening composed with the SCM fit")
    _add_common(p); _add_panel_args(p); _add_ccm_args(p)
    p.add_argument("--null-method", choices=["noise", "circular_shift"], default="noise")
    p.add_argument("--kappa", type=float, default=1.0, help="null noise scale multiplier")
    p.add_argument("--replicates", type=int, default=200, help="null replicates per control")
    p.add_argument("--q-min", type=float, default=0.10)
    p.add_argument("--q-gap", type=float, default=0.90)
    p.add_argument("--pooled", action="store_true", help="pool null samples across controls")
    p.add_argument("--out-json", type=str, required=True)
    p.add_argument("--out-csv", type=str, required=True)

    p = sub.add_parser("simulate", help="simulate the driver/response pair")
    _add_common(p); _add_ccm_args(p)
    _add_ar1_args(p)
    p.add_argument("--T", type=int, default=300, help="series length")
    p.add_argument("--runs", type=int, default=200, help="direction-study repetitions")
    p.add_argument("--library-size", type=int, default=200, help="library size for the study")
    p.add_argument("--out-panel", type=str, required=True, help="panel CSV of one realization")
    p.add_argument("--out-json", type=str, required=True, help="direction-study summary")

    p = sub.add_parser("attack", help="augment a panel with artificial control units")
    _add_common(p); _add_panel_args(p)
    p.add_argument("--template", type=str, required=True, help="CSV with a 'value' column or unit,time,value rows of one unit")
    p.add_argument("--scale-k", type=float, default=1.0)
    p.add_argument("--shift-a", type=float, default=0.0)
    p.add_argument("--shift-b", type=float, default=0.0)
    p.add_argument("--t-cut", type=int, default=None, help="last shifted position (default: panel t0)")
    p.add_argument("--n-units", type=int, default=1)
    p.add_argument("--noise-multiplier", type=float, default=None, help="enable AR-fit noisy copies with this residual-sd multiplier")
    p.add_argument("--id-prefix", type=str, default="AD")
    p.add_argument("--out-panel", type=str, required=True)

    p = sub.add_parser("validate", help="check sampled scores against the closed-form limit")
    _add_common(p)
    _add_ar1_args(p)
    p.add_argument("--t", type=int, default=500, help="score time index")
    p.add_argument("--n", type=int, default=5000, help="Monte-Carlo sample count")
    p.add_argument("--direction", choices=["x", "y"], default="x")
    p.add_argument("--index-floor", type=int, default=500)
    p.add_argument("--gap-floor", type=int, default=200)
    p.add_argument("--neighbors", type=int, default=5)
    p.add_argument("--horizon", type=int, default=2000, help="max neighbor index allowed")
    p.add_argument("--tolerance", type=float, default=0.03)
    p.add_argument("--out-json", type=str, required=True)
    p.add_argument("--out-csv", type=str, required=True, help="sampled scores for plotting")
    return parser


def _add_ar1_args(p):
    p.add_argument("--alpha", type=float, default=0.9)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma-x", type=float, default=1.0)
    p.add_argument("--sigma-y", type=float, default=1.0)
    p.add_argument("--x0", type=float, default=1.0)


def _load_config_file(path) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected 'key = value'")
                key, _, raw = line.partition("=")
                values[key.strip().replace("-", "_")] = raw.strip()
        return values
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None


def _apply_overrides(args, argv):
    """config file < environment < explicit flags."""
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token[2:].split("=")[0].replace("-", "_"))
    merged = {}
    if getattr(args, "config", None):
        merged.update(_load_config_file(args.config))
    for key in vars(args):
        env_key = ENV_PREFIX + key.upper()
        if env_key in os.environ:
            merged[key] = os.environ[env_key]
    for key, raw in merged.items():
        if key in ("config", "command") or key in explicit or not hasattr(args, key):
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, raw.lower() in ("1", "true", "yes", "on"))
        elif isinstance(current, int) and not isinstance(current, bool):
            setattr(args, key, int(raw))
        elif isinstance(current, float):
            setattr(args, key, float(raw))
        else:
            setattr(args, key, raw)
    return args


def _ccm_config(args, T: int) -> CcmConfig:
    emb = EmbeddingConfig(d=args.d, tau=args.tau)
    if args.library_sizes:
        sizes = tuple(int(x) for x in str(args.library_sizes).split(",") if x.strip())
    else:
        sizes = default_library_sizes(T, emb)
    return CcmConfig(
        embedding=emb,
        library_sizes=sizes,
        prediction_mode=args.prediction_mode,
        theiler_window=args.theiler_window,
        normalize=not args.no_normalize,
    )


def _load_panel_args(args) -> PanelData:
    return load_panel(args.panel, args.treated_id, args.t0)


def _cmd_ccm(args) -> int:
    panel = _load_panel_args(args)
    if args.control not in panel.control_ids:
        raise DataError(f"unknown control id {args.control!r}")
    if args.pre_only:
        panel_view, _ = split_pre_post(panel)
        treated, control = panel_view.treated, panel_view.get(args.control)
        T = len(treated)
    else:
        treated, control = panel.treated, panel.get(args.control)
        T = panel.T
    cfg = _ccm_config(args, T)
    curve = ccm_curve(treated, control, cfg, pair=(panel.treated_id, args.control), threads=args.threads)
    write_curve_csv(curve, args.out_csv)
    write_json(curve_report(curve, cfg), args.out_json)
    return 0


def _cmd_scm(args) -> int:
    panel = _load_panel_args(args)
    pre, _ = split_pre_post(panel)
    weights, pre_rmse = fit_weights(pre)
    write_json(scm_report(panel, weights, pre_rmse), args.out_json)
    return 0


def _cmd_effect(args) -> int:
    panel = _load_panel_args(args)
    entries = {}
    with open(args.weights, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["unit", "weight"]:
            raise DataError("expected weights CSV header 'unit,weight'")
        for row in reader:
            if not row:
                continue
            entries[row[0].strip()] = float(row[1])
    weights = SimplexWeights(control_ids=tuple(entries), w=np.array(list(entries.values())))
    path = effect_path(panel, weights)
    write_json(
        {
            "weights": weights.as_dict(zero_below=1e-6),
            "ate": path.ate,
            "effect_path": [
                {"time": panel.label_of(int(t)), "tau_hat": float(v)}
                for t, v in zip(path.times, path.tau_hat)
            ],
        },
        args.out_json,
    )
    return 0


def _cmd_screen(args) -> int:
    panel = _load_panel_args(args)
    pre_T = panel.t0 + 1
    cfg = ScreeningConfig(
        ccm=_ccm_config(args, pre_T),
        null_method=args.null_method,
        kappa=args.kappa,
        replicates=args.replicates,
        q_min=args.q_min,
        q_gap=args.q_gap,
        base_seed=args.seed,
        pooled=args.pooled,
    )
    report = ccm_scm_pipeline(panel, cfg, threads=args.threads)
    write_json(report_json(report, panel), args.out_json)
    write_summary_csv(report.decisions, args.out_csv)
    return 0


def _cmd_simulate(args) -> int:
    params = Ar1Params(
        alpha=args.alpha, beta=args.beta, mu=args.mu,
        sigma_x=args.sigma_x, sigma_y=args.sigma_y, x0=args.x0,
    )
    x, y, _ = simulate_ar1(params, args.T, args.seed, 10**6)
    aligned = PanelData(
        units=(
            ("response", TimeSeries(np.arange(args.T), y.values)),
            ("driver", TimeSeries(np.arange(args.T), x.values[1:])),
        ),
        treated_id="response",
        t0=args.T // 2,
    )
    write_panel_long(aligned, args.out_panel)
    emb = EmbeddingConfig(d=args.d, tau=args.tau)
    cfg = CcmConfig(
        embedding=emb,
        library_sizes=(args.library_size,),
        prediction_mode=args.prediction_mode,
        theiler_window=args.theiler_window,
        normalize=not args.no_normalize,
    )
    study = direction_study(params, args.runs, cfg, args.seed, T=args.T, threads=args.threads)
    write_json(
        {
            "params": {
                "alpha": params.alpha, "beta": params.beta, "mu": params.mu,
                "sigma_x": params.sigma_x, "sigma_y": params.sigma_y, "x0": params.x0,
            },
            "runs": args.runs,
            "T": args.T,
            "library_size": args.library_size,
            "mean_score_x_given_y": study.mean_score_x_given_y,
            "mean_score_y_given_x": study.mean_score_y_given_x,
            "mean_gap": study.mean_gap,
            "gap_se": study.gap_se,
        },
        args.out_json,
    )
    return 0


def _read_template(path) -> TimeSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"empty template file {path}")
        header = [h.strip() for h in header]
        values = []
        if header == ["unit", "time", "value"]:
            units = set()
            for row in reader:
                if not row:
                    continue
                units.add(row[0].strip())
                values.append(float(row[2]))
            if len(units) != 1:
                raise DataError("template CSV must contain exactly one unit")
        elif "value" in header:
            col = header.index("value")
            for row in reader:
                if not row:
                    continue
                values.append(float(row[col]))
        else:
            raise DataError("template CSV needs a 'value' column or unit,time,value rows")
    if not values:
        raise DataError("template has no rows")
    return TimeSeries(np.arange(len(values)), values)


def _cmd_attack(args) -> int:
    panel = _load_panel_args(args)
    template = _read_template(args.template)
    if len(template) != panel.T:
        raise DataError(
            f"template length {len(template)} must match panel length {panel.T}"
        )
    t_cut = panel.t0 if args.t_cut is None else args.t_cut
    noise = None if args.noise_multiplier is None else ArNoiseSpec(noise_sd_multiplier=args.noise_multiplier)
    spec = AttackSpec(
        template=template,
        scale_k=args.scale_k,
        shift_a=args.shift_a,
        shift_b=args.shift_b,
        t_cut=t_cut,
        n_units=args.n_units,
        ar_noise=noise,
        seed=args.seed,
    )
    units = make_adversaries(spec)
    augmented = inject(panel, units, args.id_prefix)
    write_panel_long(augmented, args.out_panel)
    return 0


def _cmd_validate(args) -> int:
    params = Ar1Params(
        alpha=args.alpha, beta=args.beta, mu=args.mu,
        sigma_x=args.sigma_x, sigma_y=args.sigma_y, x0=args.x0,
    )
    rule = SchemeRule(
        index_floor=args.index_floor,
        gap_floor=args.gap_floor,
        n_neighbors=args.neighbors,
        horizon=args.horizon,
    )
    result = validate_limit_distribution(
        params, args.t, args.n, args.seed, rule,
        direction=args.direction, tolerance=args.tolerance,
    )
    write_json(
        {
            "params": {
                "alpha": params.alpha, "beta": params.beta, "mu": params.mu,
                "sigma_x": params.sigma_x, "sigma_y": params.sigma_y, "x0": params.x0,
            },
            "direction": result.direction,
            "t": args.t,
            "n": result.n_samples,
            "scheme": {
                "index_floor": rule.index_floor,
                "gap_floor": rule.gap_floor,
                "n_neighbors": rule.n_neighbors,
            },
            "limit": {
                "mean_param": result.limit.mean_param,
                "var_param": result.limit.var_param,
            },
            "ks_stat": result.ks_stat,
            "tolerance": result.tolerance,
            "pass": result.passed,
        },
        args.out_json,
    )
    with open(args.out_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["score"])
        for v in result.samples:
            writer.writerow([format(float(v), ".12g")])
    return 0


_HANDLERS = {
    "ccm": _cmd_ccm,
    "scm": _cmd_scm,
    "effect": _cmd_effect,
    "screen": _cmd_screen,
    "simulate": _cmd_simulate,
    "attack": _cmd_attack,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_overrides(args, argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
