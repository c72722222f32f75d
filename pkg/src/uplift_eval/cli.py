"""Command-line driver: generation, evaluation, counterexamples, studies.

Every command is a thin adapter over the library modules: it parses flags,
calls the public operations, and writes their outputs. Human-readable text
goes to stdout; machine-readable files are written only when ``--output`` is
given, with figures rendered next to them unless ``--no-plot`` is passed.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import plots
from .curves import (
    TABLE1_VARIANTS,
    KernelSpec,
    curve_header,
    curve_ips_global,
    curve_ips_local,
    curve_rebalanced,
    curve_to_csv,
    curve_v1,
    curve_v2,
    curve_vnu,
    interpolate_iso_uplift,
    table1_curve,
)
from .data import load_dataset, rank_by_score, save_dataset
from .errors import UpliftEvalError, ValidationError
from .experiments import (
    VarianceStudyConfig,
    analytic_segments,
    nu_surface_sweep,
    run_counterexample,
    variance_study,
)
from .generators import (
    generate,
    heterogeneous_spec,
    spec_from_json,
    spec_to_json,
    toy1_spec,
    toy2_spec,
    toy3_spec,
)
from .metrics import area_under_curve, metric_report, pehe

SEED_ENV_VAR = "UPLIFT_EVAL_SEED"
ESTIMATORS = ("v1", "v2", "vnu", "rebalanced", "ips-local", "ips-global") + tuple(
    f"table1:{v}" for v in TABLE1_VARIANTS
)


class UsageError(ValidationError):
    """Inconsistent flags; maps to exit code 2."""


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    return int(env) if env else 0


def _stem(path: Path) -> Path:
    return path.with_suffix("") if path.suffix in (".csv", ".json", ".png") else path


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (default: ${SEED_ENV_VAR} or 0)")
    p.add_argument("--output", type=Path, default=None, help="path for machine-readable output files")
    p.add_argument("--format", choices=("csv", "json"), default="json", help="machine output format")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering next to --output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uplift-eval", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic logged-bandit dataset plus ground truth")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--builtin", choices=("toy1", "toy2", "toy3", "hetero"))
    group.add_argument("--spec", type=Path, help="population spec JSON document")
    p.add_argument("--n", type=int, default=100_000, help="population size")
    p.add_argument("--segments", type=int, default=4, help="hetero: number of segments")
    p.add_argument("--alpha", type=float, default=0.5, help="hetero: treatment probability")
    p.add_argument("--p-y1", type=float, default=0.5, help="hetero: target responder rate")
    _common_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="curve + area metrics of a scored dataset")
    p.add_argument("dataset", type=Path)
    p.add_argument("--scores-column", default=None, help="use the dataset's own score column (default when present)")
    p.add_argument("--scores-file", type=Path, default=None, help="CSV unit_id,score joined on unit_id")
    p.add_argument("--estimator", choices=ESTIMATORS, default="rebalanced")
    p.add_argument("--nu", type=float, default=None, help="mixing weight (vnu only)")
    p.add_argument("--kernel-width", type=int, default=None, help="boxcar half width (ips-local only)")
    p.add_argument(
        "--interpolate-ties",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="interpolate across equal-score runs before integrating",
    )
    p.add_argument("--upto", type=float, default=None, help="integrate over [0, upto] only")
    _common_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("counterexample", help="reproduce a built-in counterexample")
    p.add_argument("id", choices=("toy1", "toy2", "toy3"))
    p.add_argument("--n", type=int, default=40_000)
    p.add_argument("--realizations", type=int, default=200)
    p.add_argument("--estimator", choices=("v1", "rebalanced"), default="v1")
    p.add_argument("--q0", type=float, default=None, help="override every group's treatment probability")
    _common_flags(p)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("variance-study", help="metric variance across mixing weights")
    p.add_argument("--config", type=Path, required=True, help="study config JSON document")
    _common_flags(p)
    p.set_defaults(func=cmd_variance_study)

    p = sub.add_parser("nu-sweep", help="variance surface across responder-rate targets")
    p.add_argument("--config", type=Path, required=True, help="study config JSON with a p_y1_grid field")
    _common_flags(p)
    p.set_defaults(func=cmd_nu_sweep)

    p = sub.add_parser("pehe", help="mean squared error against ground-truth effects")
    p.add_argument("truth", type=Path, help="CSV with unit_id and tau columns")
    p.add_argument("predictions", type=Path, help="CSV with unit_id and tau_hat (or tau) columns")
    _common_flags(p)
    p.set_defaults(func=cmd_pehe)

    return parser


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def _build_spec(args, seed: int):
    if args.spec is not None:
        from dataclasses import replace

        return replace(spec_from_json(args.spec), n=args.n, seed=seed)
    if args.builtin == "hetero":
        return heterogeneous_spec(args.segments, args.alpha, args.p_y1, seed=seed, n=args.n)
    return {"toy1": toy1_spec, "toy2": toy2_spec, "toy3": toy3_spec}[args.builtin](n=args.n, seed=seed)


def cmd_generate(args) -> int:
    seed = _resolve_seed(args)
    print(f"seed: {seed}")
    spec = _build_spec(args, seed)
    gen = generate(spec)
    if args.output is None:
        raise UsageError("generate requires --output for the dataset file")
    out = args.output if args.output.suffix == ".csv" else args.output.with_suffix(".csv")
    save_dataset(gen.logged, out, scores=gen.scores)
    truth = out.with_name(out.stem + "_truth.csv")
    with open(truth, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit_id", "y1", "y0", "tau", "score_u_true", "score_model"])
        for i in range(len(gen.full)):
            writer.writerow(
                [
                    int(gen.full.unit_ids[i]),
                    int(gen.full.outcomes_treated[i]),
                    int(gen.full.outcomes_control[i]),
                    _fmt(gen.full.true_ite[i]),
                    _fmt(gen.score_sets["true"][i]),
                    _fmt(gen.scores[i]),
                ]
            )
    spec_path = out.with_name(out.stem + "_spec.json")
    spec_path.write_text(spec_to_json(spec), encoding="utf-8")
    treated = gen.logged.n_treated / len(gen.logged)
    print(f"wrote {out} ({len(gen.logged)} records, treated fraction {treated:.4f})")
    print(f"wrote {truth}")
    print(f"wrote {spec_path}")
    return 0


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _load_scores(args, dataset) -> np.ndarray:
    if args.scores_column is not None and args.scores_file is not None:
        raise UsageError("--scores-column and --scores-file are mutually exclusive")
    if args.scores_file is not None:
        by_id = {}
        with open(args.scores_file, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "unit_id" not in reader.fieldnames or "score" not in reader.fieldnames:
                raise ValidationError(f"{args.scores_file}: header must contain unit_id and score")
            for row in reader:
                by_id[int(row["unit_id"])] = float(row["score"])
        try:
            return np.array([by_id[int(u)] for u in dataset.unit_ids])
        except KeyError as e:
            raise ValidationError(f"scores file missing unit_id {e}") from None
    if args.scores_column is not None and args.scores_column != "score":
        raise UsageError(f"dataset schema has a single score column named 'score', not {args.scores_column!r}")
    if dataset.scores is None:
        raise ValidationError("dataset has no score column; pass --scores-file")
    return dataset.scores


def _build_curve(args, scored):
    est = args.estimator
    if args.nu is not None and est != "vnu":
        raise UsageError("--nu is only valid with --estimator vnu")
    if args.kernel_width is not None and est != "ips-local":
        raise UsageError("--kernel-width is only valid with --estimator ips-local")
    if est == "v1":
        return curve_v1(scored)
    if est == "v2":
        return curve_v2(scored)
    if est == "vnu":
        if args.nu is None:
            raise UsageError("--estimator vnu requires --nu")
        return curve_vnu(scored, args.nu)
    if est == "rebalanced":
        return curve_rebalanced(scored)
    if est == "ips-local":
        return curve_ips_local(scored, KernelSpec(half_width=args.kernel_width or 25))
    if est == "ips-global":
        return curve_ips_global(scored)
    return table1_curve(scored, est.split(":", 1)[1])


def cmd_evaluate(args) -> int:
    seed = _resolve_seed(args)
    print(f"seed: {seed}")
    dataset = load_dataset(args.dataset)
    scored = rank_by_score(dataset, _load_scores(args, dataset))
    curve = _build_curve(args, scored)
    # tie interpolation is defined on the joint per-record grid only
    if args.interpolate_ties and len(curve) == len(scored):
        curve = interpolate_iso_uplift(curve, scored)
    report = metric_report(curve)
    auuc = area_under_curve(curve, upto=args.upto) if args.upto is not None else report.auuc

    print(f"estimator: {args.estimator}   N: {len(scored)}   tie runs: {len(scored.iso_last)}")
    print(f"auuc: {auuc:.6g}   delta_auuc: {report.delta_auuc:.6g}   endpoint: {report.endpoint:.6g}")
    print(f"auuc_riemann: {report.auuc_riemann:.6g}   interpolated: {report.interpolated}")

    if args.output is not None:
        stem = _stem(args.output)
        curve_path = stem.with_name(stem.name + ".curve.csv")
        curve_path.write_text(curve_to_csv(curve), encoding="utf-8")
        meta_path = stem.with_name(stem.name + ".curve.meta.json")
        meta_path.write_text(json.dumps(curve_header(curve), indent=2) + "\n", encoding="utf-8")
        metrics = report.to_dict()
        if args.upto is not None:
            metrics["auuc_upto"] = auuc
            metrics["upto"] = args.upto
        _write_report(metrics, stem.with_name(stem.name + ".metrics." + args.format))
        if not args.no_plot:
            plots.plot_curve(curve, stem.with_name(stem.name + ".png"), title=args.estimator)
        print(f"wrote {curve_path}, {meta_path}")
    return 0


# ---------------------------------------------------------------------------
# counterexample / studies / pehe
# ---------------------------------------------------------------------------

def cmd_counterexample(args) -> int:
    seed = _resolve_seed(args)
    print(f"seed: {seed}")
    report = run_counterexample(
        args.id,
        n=args.n,
        realizations=args.realizations,
        seed=seed,
        estimator=args.estimator,
        q_override=args.q0,
    )
    print(f"counterexample: {args.id}   estimator: {args.estimator}   N: {args.n}   realizations: {args.realizations}")
    print("group slopes: " + "   ".join(f"{k}={v:.6g}" for k, v in report.analytic_slopes.items()))
    for name in sorted(report.analytic_auuc):
        print(
            f"  {name:>6}: analytic auuc {report.analytic_auuc[name]: .6f}   "
            f"mc {report.mc_auuc_mean[name]: .6f} +- {report.mc_auuc_stderr[name]:.6f}"
        )
    print(f"AUUC misranks: {str(report.verdict).lower()}")

    if args.output is not None:
        stem = _stem(args.output)
        if args.format == "json":
            Path(stem.with_suffix(".json")).write_text(
                json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
            )
        else:
            with open(stem.with_suffix(".csv"), "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["model", "analytic_auuc", "mc_auuc_mean", "mc_auuc_stderr", "verdict"])
                for name in sorted(report.analytic_auuc):
                    writer.writerow(
                        [
                            name,
                            repr(report.analytic_auuc[name]),
                            repr(report.mc_auuc_mean[name]),
                            repr(report.mc_auuc_stderr[name]),
                            report.verdict,
                        ]
                    )
        if not args.no_plot:
            spec = {"toy1": toy1_spec, "toy2": toy2_spec, "toy3": toy3_spec}[args.id](n=args.n, seed=seed)
            if args.q0 is not None:
                from .generators import with_uniform_treatment_prob

                spec = with_uniform_treatment_prob(spec, args.q0)
            segments = {
                name: analytic_segments(spec, name, args.estimator) for name in spec.available_score_sets
            }
            plots.plot_counterexample(report, segments, stem.with_suffix(".png"))
        print(f"wrote {stem.with_suffix('.' + args.format)}")
    return 0


def _study_config(path: Path, seed: int) -> tuple[VarianceStudyConfig, list[float] | None]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "hetero" in doc:
        h = doc["hetero"]
        population = heterogeneous_spec(
            int(h.get("n_segments", 4)),
            float(h.get("alpha", 0.5)),
            float(h.get("p_y1_target", 0.5)),
            seed=int(h.get("seed", seed)),
            n=int(h.get("n", 10_000)),
        )
    elif "population" in doc:
        population = spec_from_json(doc["population"])
    else:
        raise ValidationError("config needs a 'population' document or a 'hetero' section")
    config = VarianceStudyConfig(
        population=population,
        nus=tuple(doc.get("nus", [round(0.05 * i, 2) for i in range(21)])),
        realizations=int(doc.get("realizations", 101)),
        seed=int(doc.get("seed", seed)),
        metric=doc.get("metric", "auuc_trapezoid"),
        score_set=doc.get("score_set", "model"),
    )
    grid = doc.get("p_y1_grid")
    return config, None if grid is None else [float(p) for p in grid]


def cmd_variance_study(args) -> int:
    seed = _resolve_seed(args)
    print(f"seed: {seed}")
    config, _ = _study_config(args.config, seed)
    report = variance_study(config)
    print(f"realizations: {report.realizations}   metric: {report.metric}   P(y=1): {report.p_y1:.4f}")
    print("  nu      mean        var")
    for nu, mean, var in zip(report.nus, report.means, report.variances):
        print(f"  {nu:4.2f}  {mean:10.6f}  {var:10.3e}")
    print(
        f"argmin nu: empirical {report.argmin_nu_empirical:.4f}   "
        f"theoretical {report.argmin_nu_theoretical:.4f}"
    )
    if args.output is not None:
        stem = _stem(args.output)
        _write_study(report, stem, args.format)
        if not args.no_plot:
            plots.plot_variance_study(report, stem.with_suffix(".png"))
        print(f"wrote {stem.with_suffix('.' + args.format)}")
    return 0


def cmd_nu_sweep(args) -> int:
    seed = _resolve_seed(args)
    print(f"seed: {seed}")
    config, grid = _study_config(args.config, seed)
    if grid is None:
        raise ValidationError("nu-sweep config needs a p_y1_grid field")
    report = nu_surface_sweep(grid, config.nus, config)
    print(f"surface: {len(report.p_y1_grid)} responder rates x {len(report.nus)} mixing weights")
    for p, emp, theo in zip(report.p_y1_grid, report.argmin_nu_empirical, report.argmin_nu_theoretical):
        print(f"  P(y=1)={p:4.2f}   argmin nu: empirical {emp:.4f}   theoretical {theo:.4f}")
    if args.output is not None:
        stem = _stem(args.output)
        _write_study(report, stem, args.format)
        if not args.no_plot:
            plots.plot_nu_surface(report, stem.with_suffix(".png"))
        print(f"wrote {stem.with_suffix('.' + args.format)}")
    return 0


def _write_study(report, stem: Path, fmt: str) -> None:
    if fmt == "json":
        stem.with_suffix(".json").write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    else:
        stem.with_suffix(".csv").write_text(report.to_tidy_csv(), encoding="utf-8")


def _read_tau_column(path: Path, preferred: tuple[str, ...]) -> dict[int, float]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        col = next((c for c in preferred if c in names), None)
        if col is None or "unit_id" not in names:
            raise ValidationError(f"{path}: need unit_id and one of {preferred}")
        return {int(row["unit_id"]): float(row[col]) for row in reader}


def cmd_pehe(args) -> int:
    seed = _resolve_seed(args)
    print(f"seed: {seed}")
    truth = _read_tau_column(args.truth, ("tau", "tau_hat"))
    preds = _read_tau_column(args.predictions, ("tau_hat", "tau", "score_model"))
    if set(truth) != set(preds):
        raise ValidationError("truth and prediction files cover different unit ids")
    ids = sorted(truth)
    value = pehe([preds[u] for u in ids], [truth[u] for u in ids])
    print(f"pehe: {value:.10g}   units: {len(ids)}")
    if args.output is not None:
        target = _stem(args.output).with_suffix("." + args.format)
        _write_report({"pehe": value, "units": len(ids)}, target)
        print(f"wrote {target}")
    return 0


def _write_report(doc: dict, path: Path) -> None:
    if path.suffix == ".json":
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["key", "value"])
            for k, v in doc.items():
                writer.writerow([k, v])


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except UpliftEvalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
