"""Command-line interface.

Subcommands: run (one experiment), grid (many experiments + rank table),
ampute (synthesize missingness), impute (fit/apply one imputer), metrics
(score a predictions CSV), predict (apply a saved prediction context).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .data import load_csv, write_csv
from .ensemble import load_context, predict_batch
from .errors import ConfigError, DataError, MdewError
from .imputers import fit_imputer, imputer_to_dict, spec_from_name, IMPUTER_NAMES
from .metrics import ScoredSet, auroc, average_precision, brier
from .missingness import ampute
from .runner import (
    emit_report,
    load_config,
    load_grid_config,
    run_experiment,
    run_grid,
    write_rank_table,
)

__all__ = ["main", "build_parser"]


def _target_column_arg(value: str) -> str | None:
    """'none' (any case) means the CSV has no target column."""
    return None if value.lower() == "none" else value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdew",
        description=(
            "Missingness-aware dynamically weighted ensembles for tabular "
            "binary classification."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a JSON config")
    p_run.add_argument("--config", required=True, help="experiment config JSON")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument("--out", default=None, help="override config output_dir")

    p_grid = sub.add_parser("grid", help="run an experiment grid and rank methods")
    p_grid.add_argument("--config", required=True, help="grid config JSON")
    p_grid.add_argument("--seed", type=int, default=None, help="override every experiment seed")
    p_grid.add_argument("--out", default=None, help="base output directory override")
    p_grid.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p_amp = sub.add_parser("ampute", help="mask cells of a complete CSV under a chosen mechanism")
    p_amp.add_argument("--mechanism", required=True, choices=["mcar", "mar", "mnar"])
    p_amp.add_argument("--rate", type=float, default=0.3)
    p_amp.add_argument("--column-fraction", type=float, default=0.3)
    p_amp.add_argument("--cause-fraction", type=float, default=3.0 / 7.0)
    p_amp.add_argument("--seed", type=int, default=0)
    p_amp.add_argument("--in", dest="input", required=True, help="input CSV")
    p_amp.add_argument("--out", required=True, help="output CSV with masked cells blanked")
    p_amp.add_argument("--plan-out", default=None, help="JSON file for the mask plan + ground truth")
    p_amp.add_argument(
        "--target-column",
        type=_target_column_arg,
        default="target",
        help="target column name, or 'none' if the CSV has no target",
    )

    p_imp = sub.add_parser("impute", help="fit an imputer on a CSV and fill its missing cells")
    p_imp.add_argument("--imputer", required=True, choices=sorted(IMPUTER_NAMES))
    p_imp.add_argument("--in", dest="input", required=True, help="input CSV")
    p_imp.add_argument("--out", required=True, help="output CSV (complete)")
    p_imp.add_argument("--model-out", default=None, help="fitted-imputer JSON (default: OUT.imputer.json)")
    p_imp.add_argument("--seed", type=int, default=0)
    p_imp.add_argument(
        "--target-column",
        type=_target_column_arg,
        default="target",
        help="target column name, or 'none' if the CSV has no target",
    )

    p_met = sub.add_parser("metrics", help="score a long-form predictions CSV")
    p_met.add_argument(
        "--in",
        dest="input",
        required=True,
        help="CSV with columns: row_id, target, probability, method",
    )
    p_met.add_argument("--out", default=None, help="metrics JSON (default: stdout)")

    p_pred = sub.add_parser("predict", help="predict a CSV of samples with a saved context")
    p_pred.add_argument("--context", required=True, help="directory written by save_context")
    p_pred.add_argument("--in", dest="input", required=True, help="samples CSV")
    p_pred.add_argument("--out", required=True, help="output CSV of probabilities")
    p_pred.add_argument("--method", choices=["mdew", "uma"], default="mdew")
    p_pred.add_argument("--k", type=int, default=5, help="neighborhood size for competence")
    p_pred.add_argument(
        "--target-column",
        type=_target_column_arg,
        default="none",
        help="target column name if the samples CSV carries one, else 'none'",
    )
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    start = time.perf_counter()
    report = run_experiment(config)
    paths = emit_report(report, config.output_dir, wall_clock_seconds=time.perf_counter() - start)
    print(paths["report"])
    return 0


def _cmd_grid(args) -> int:
    configs = load_grid_config(args.config)
    if args.seed is not None:
        configs = [replace(c, seed=args.seed) for c in configs]
    if args.out is not None:
        configs = [
            replace(c, output_dir=os.path.join(args.out, c.name)) for c in configs
        ]
    reports, table = run_grid(configs, jobs=args.jobs)
    if table is None:
        print("no experiment succeeded", file=sys.stderr)
        return 4
    base = args.out if args.out is not None else os.path.dirname(os.path.abspath(args.config))
    os.makedirs(base, exist_ok=True)
    rank_path = os.path.join(base, "rank_table.csv")
    write_rank_table(table, rank_path)
    print(rank_path)
    return 0


def _cmd_ampute(args) -> int:
    data = load_csv(args.input, target_column=args.target_column)
    kwargs = {}
    if args.mechanism in ("mar", "mnar"):
        kwargs = {
            "column_fraction": args.column_fraction,
            "cause_fraction": args.cause_fraction,
        }
    result = ampute(data, mechanism=args.mechanism, rate=args.rate, seed=args.seed, **kwargs)
    write_csv(result.data, args.out, target_column=args.target_column)
    if args.plan_out is not None:
        with open(args.plan_out, "w") as fh:
            json.dump(result.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    print(args.out)
    return 0


def _cmd_impute(args) -> int:
    data = load_csv(args.input, target_column=args.target_column)
    spec = spec_from_name(args.imputer)
    fitted = fit_imputer(spec, data, seed=args.seed)
    completed = fitted.transform(data)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(data.column_names)
        if args.target_column is not None:
            header.append(args.target_column)
        writer.writerow(header)
        for i in range(data.n_rows):
            row = [repr(float(v)) for v in completed[i]]
            if args.target_column is not None:
                row.append(str(int(data.target[i])))
            writer.writerow(row)
    model_out = args.model_out or args.out + ".imputer.json"
    with open(model_out, "w") as fh:
        json.dump(imputer_to_dict(fitted), fh, sort_keys=True)
        fh.write("\n")
    print(args.out)
    return 0


def _cmd_metrics(args) -> int:
    by_method: dict[str, dict[str, list]] = {}
    try:
        with open(args.input, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"row_id", "target", "probability", "method"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise DataError(
                    f"{args.input}: need columns {sorted(required)}, "
                    f"got {reader.fieldnames}"
                )
            for line in reader:
                entry = by_method.setdefault(line["method"], {"y": [], "p": []})
                entry["y"].append(int(line["target"]))
                entry["p"].append(float(line["probability"]))
    except OSError as exc:
        raise DataError(f"cannot open {args.input}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{args.input}: unparseable cell: {exc}") from exc
    if not by_method:
        raise DataError(f"{args.input}: no prediction rows")
    out = {}
    for method in sorted(by_method):
        s = ScoredSet(
            np.array(by_method[method]["y"]),
            np.array(by_method[method]["p"]),
            method,
        )
        out[method] = {
            "auroc": auroc(s),
            "average_precision": average_precision(s),
            "brier": brier(s),
            "n": s.n,
        }
    text = json.dumps(out, sort_keys=True, indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(args.out)
    return 0


def _cmd_predict(args) -> int:
    pipelines, em = load_context(args.context)
    data = load_csv(args.input, target_column=args.target_column)
    preds = predict_batch(pipelines, em, data, k=args.k, method=args.method)
    labels = [pl.spec.label for pl in pipelines]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["row_id", "method", "probability"]
            + [f"prob__{l}" for l in labels]
            + [f"weight__{l}" for l in labels]
        )
        for i, pred in enumerate(preds):
            writer.writerow(
                [int(data.row_ids[i]), args.method, repr(pred.probability)]
                + [repr(float(v)) for v in pred.per_pipeline_probs]
                + [repr(float(w)) for w in pred.weights]
            )
    print(args.out)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "grid": _cmd_grid,
    "ampute": _cmd_ampute,
    "impute": _cmd_impute,
    "metrics": _cmd_metrics,
    "predict": _cmd_predict,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except MdewError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # noqa: BLE001 - map unexpected failures to exit 4
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
