"""Command-line entry point: ``biasamp <command> ...``.

Exit codes: 0 success, 2 input validation failure, 3 computation error.
The default master seed is read from ``BIASAMP_SEED`` (0 when unset).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .attacker import COMPAS_ATTACKER, AttackerConfig, TrainingDivergedError
from .compas import CompasInputError, PipelineParams, load_compas, run_pipeline
from .cooccurrence import BA_DIRECTIONAL, BA_MALS, MULTI_DIRECTIONAL, ba_directional, ba_mals, multi_directional
from .core import DegenerateConditionalError, Direction, MissingChannelError
from .formats import (
    PredictionsFileError,
    dumps_report,
    read_predictions,
    result_record,
    results_to_csv,
    write_predictions,
)
from .predictability import DPA, LA, DpaConfig, dpa, leakage_amplification
from .synthetic import (
    CategoricalSynthConfig,
    HeatmapConfig,
    PolySynthConfig,
    ROBUSTNESS_ATTACKER,
    relative_curves,
    run_heatmap,
    run_robustness,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COMPUTE = 3

SEED_ENV = "BIASAMP_SEED"
METRICS = (BA_DIRECTIONAL, MULTI_DIRECTIONAL, DPA, LA, BA_MALS)
DIRECTIONAL = (BA_DIRECTIONAL, MULTI_DIRECTIONAL, DPA)
ATTACKER_PRESETS = {"default": AttackerConfig(), "compas": COMPAS_ATTACKER}

log = logging.getLogger("biasamp")


class InputError(Exception):
    """Bad flags or input files; maps to exit code 2."""


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _csv_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _int_range(text: str) -> list[int]:
    """``5:40:5`` (inclusive) or ``5,10,20``."""
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        return list(range(start, stop + 1, step))
    return [int(v) for v in _csv_list(text)]


def _directions(text: str) -> list[Direction]:
    if text == "both":
        return [Direction.AtoT, Direction.TtoA]
    try:
        return [Direction.parse(text)]
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _write_text(text: str, output: Optional[str]) -> None:
    if output is None or output == "-":
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _dpa_config(args, seed: int) -> DpaConfig:
    try:
        return DpaConfig(
            attacker=ATTACKER_PRESETS[args.attacker],
            quality=args.quality,
            iterations=args.iterations,
            master_seed=seed,
            mode=args.mode,
            equalize=not args.no_equalize,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _add_dpa_flags(p: argparse.ArgumentParser, quality: str, attacker: str) -> None:
    p.add_argument("--mode", choices=("trained", "exact"), default="trained",
                   help="exact uses the closed-form Bayes-optimal attacker")
    p.add_argument("--quality", default=quality,
                   help="accuracy | inverse_cross_entropy | one_minus_cross_entropy")
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--attacker", choices=sorted(ATTACKER_PRESETS), default=attacker)
    p.add_argument("--no-equalize", action="store_true", help="skip accuracy equalization")
    p.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads; never changes results")


def _required_channels(metrics, directions) -> list[str]:
    needed = []
    for m in metrics:
        if m in DIRECTIONAL:
            for d in directions:
                needed.append("t_hat" if d is Direction.AtoT else "a_hat")
        elif m == LA:
            needed.append("t_hat")
        elif m == BA_MALS:
            needed += ["a_hat", "t_hat"]
    return list(dict.fromkeys(needed))


def cmd_compute(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    metrics = _csv_list(args.metrics)
    unknown = [m for m in metrics if m not in METRICS]
    if unknown:
        raise InputError(f"unknown metric(s): {', '.join(unknown)}; choose from {', '.join(METRICS)}")
    directions = _directions(args.direction)
    cfg = _dpa_config(args, seed)
    pf = read_predictions(args.predictions)
    missing = [c for c in _required_channels(metrics, directions) if pf.dataset.channel(c) is None]
    if missing:
        raise InputError(
            f"{args.predictions}: line 1: missing column(s) {', '.join(missing)} "
            "required by the requested metrics"
        )
    train = read_predictions(args.train).dataset if args.train else pf.dataset

    results = []
    for m in metrics:
        if m in DIRECTIONAL:
            for d in directions:
                if m == BA_DIRECTIONAL:
                    results.append(ba_directional(pf.dataset, d))
                elif m == MULTI_DIRECTIONAL:
                    results.append(multi_directional(pf.dataset, d)[0])
                else:
                    results.append(dpa(pf.dataset, d, cfg, n_jobs=args.jobs))
        elif m == LA:
            results.append(leakage_amplification(pf.dataset, cfg, n_jobs=args.jobs))
        else:
            results.append(ba_mals(train, pf.dataset))

    uses_seed = any(r.metric_id in (DPA, LA) for r in results)
    records = [result_record(r, seed if r.metric_id in (DPA, LA) else None) for r in results]
    if args.format == "csv":
        _write_text(results_to_csv(records), args.output)
    else:
        report = {
            "command": "compute",
            "input": Path(args.predictions).name,
            "seed": seed,
            "label_maps": pf.label_maps,
            "results": records,
        }
        if uses_seed:
            report["config"] = _config_dict(cfg)
        _write_text(dumps_report(report), args.output)
    return EXIT_OK


def _config_dict(cfg: DpaConfig) -> dict:
    att = cfg.attacker
    return {
        "mode": cfg.mode,
        "quality": cfg.quality.value,
        "iterations": cfg.iterations,
        "equalize": cfg.equalize,
        "attacker": {
            "depth": att.depth,
            "width": att.width,
            "activation": list(att.layer_activations()),
            "optimizer": att.optimizer,
            "learning_rate": att.learning_rate,
            "epochs": att.epochs,
            "batch_size": att.batch_size,
        },
    }


def cmd_pipeline_compas(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    cfg = _dpa_config(args, seed)
    params = PipelineParams(
        max_depth=args.max_depth if args.max_depth > 0 else None,
        min_leaf=args.min_leaf,
        balance_seed=seed,
        dpa=cfg,
        n_jobs=args.jobs,
    )
    data = load_compas(args.data)
    reports = run_pipeline(data, params)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records, variants = [], {}
    for rep in reports:
        write_predictions(out / f"predictions_{rep.name}.csv", list(rep.data.ids), rep.dataset)
        for r in rep.results:
            rec = result_record(r, seed if r.metric_id in (DPA, LA) else None)
            rec["variant"] = rep.name
            records.append(rec)
        variants[rep.name] = rep.counts()
    report = {
        "command": "pipeline-compas",
        "input": Path(args.data).name,
        "seed": seed,
        "label_maps": {"a": {"Caucasian": 0, "African-American": 1},
                       "t": {"No Recidivism": 0, "Recidivism": 1}},
        "config": {**_config_dict(cfg), "max_depth": args.max_depth, "min_leaf": args.min_leaf},
        "variants": variants,
        "results": records,
    }
    (out / "report.json").write_text(dumps_report(report))
    sys.stdout.write(results_to_csv(records))
    return EXIT_OK


def cmd_heatmap(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    try:
        cfg = HeatmapConfig(
            alpha_min=args.alpha_min,
            alpha_max=args.alpha_max,
            step=args.steps,
            metric_id=args.metric,
            direction=args.direction,
            quality=args.quality,
            mode=args.mode,
            n=args.n,
            seed=seed,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    grid = run_heatmap(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"heatmap_{cfg.metric_id}_{cfg.direction.value}"
    grid.to_csv(out / f"{stem}.csv")
    lo, hi = grid.to_pgm(out / f"{stem}.pgm")
    v = grid.values
    sys.stdout.write(
        f"grid {v.shape[0]}x{v.shape[1]} min={lo!r} max={hi!r} mean={float(np.mean(v))!r}\n"
    )
    return EXIT_OK


def cmd_robustness(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    widths = _int_range(args.widths)
    depths = _int_range(args.depths)
    if not widths or not depths or min(widths + depths) < 1:
        raise InputError("widths and depths must be positive integers")
    if args.data == "categorical":
        data_cfg = CategoricalSynthConfig(n=args.n, seed=seed)
    else:
        data_cfg = PolySynthConfig(alpha1=args.alpha1, alpha2=args.alpha2, n=args.n, seed=seed)
    attacker = ROBUSTNESS_ATTACKER.with_seed(seed)
    result = run_robustness(widths, depths, data_cfg, attacker)
    lines = []
    writer = csv.writer(_Lines(lines), lineterminator="\n")
    writer.writerow(["variant", "width", "depth", "psi_d", "psi_m", "amplification"])
    for variant in ("relative", "absolute"):
        for row in result.rows:
            writer.writerow([variant, row.width, row.depth, repr(row.psi_d), repr(row.psi_m),
                             repr(row.amplification(variant))])
    for variant in ("relative", "absolute"):
        writer.writerow([f"sd_{variant}", "", "", "", "", repr(result.sd(variant))])
    _write_text("".join(lines), args.output)
    return EXIT_OK


class _Lines:
    def __init__(self, sink: list):
        self.sink = sink

    def write(self, text: str) -> None:
        self.sink.append(text)


def cmd_curves(args) -> int:
    psi_d = [float(v) for v in _csv_list(args.psi_d)]
    if args.points < 2 or args.psi_m_max <= args.psi_m_min:
        raise InputError("need --points >= 2 and --psi-m-max > --psi-m-min")
    psi_m = np.linspace(args.psi_m_min, args.psi_m_max, args.points)
    curves = relative_curves(psi_d, psi_m)
    lines = []
    writer = csv.writer(_Lines(lines), lineterminator="\n")
    writer.writerow(["psi_d", "psi_m", "dpa", "la"])
    for d, c in curves.items():
        for m, r, la in zip(c["psi_m"], c["dpa"], c["la"]):
            writer.writerow([repr(d), repr(float(m)), repr(float(r)), repr(float(la))])
    _write_text("".join(lines), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biasamp", description="Bias amplification metrics.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="metrics on a predictions CSV (id,a,t,a_hat,t_hat)")
    p.add_argument("predictions")
    p.add_argument("--metrics", default=",".join(METRICS))
    p.add_argument("--direction", default="both", help="AtoT | TtoA | both")
    p.add_argument("--train", help="training-label CSV for ba-mals (default: the predictions file)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o")
    _add_dpa_flags(p, quality="inverse_cross_entropy", attacker="default")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("pipeline-compas", help="decision-tree pipeline on a COMPAS-schema CSV")
    p.add_argument("data")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-depth", type=int, default=5, help="0 for unlimited")
    p.add_argument("--min-leaf", type=int, default=8)
    _add_dpa_flags(p, quality="accuracy", attacker="compas")
    p.set_defaults(func=cmd_pipeline_compas)

    p = sub.add_parser("heatmap", help="metric over a grid of synthetic dataset/model biases")
    p.add_argument("--metric", default=DPA)
    p.add_argument("--direction", default="AtoT")
    p.add_argument("--alpha-min", type=float, default=-0.25)
    p.add_argument("--alpha-max", type=float, default=0.25)
    p.add_argument("--steps", "--step", dest="steps", type=float, default=0.005)
    p.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    p.add_argument("--quality", default="accuracy")
    p.add_argument("--n", type=int, default=100_000, help="samples per joint in sampled mode")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("robustness", help="DPA variance across attacker architectures")
    p.add_argument("--data", choices=("categorical", "polynomial"), default="categorical")
    p.add_argument("--widths", default="5:40:5")
    p.add_argument("--depths", default="1")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--alpha1", type=float, default=2.0)
    p.add_argument("--alpha2", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("curves", help="DPA and LA as functions of model bias")
    p.add_argument("--psi-d", default="0.1,1,2")
    p.add_argument("--psi-m-min", type=float, default=0.0)
    p.add_argument("--psi-m-max", type=float, default=3.0)
    p.add_argument("--points", type=int, default=301)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_curves)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PredictionsFileError as exc:
        for line in exc.diagnostics:
            print(f"error: {args.predictions if hasattr(args, 'predictions') else ''}: {line}",
                  file=sys.stderr)
        return EXIT_INPUT
    except (InputError, CompasInputError, MissingChannelError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DegenerateConditionalError, TrainingDivergedError, ValueError, ArithmeticError) as exc:
        print(f"error: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
