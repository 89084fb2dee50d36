"""End-to-end tests for experiment configs, the runner, and the CLI."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mdew.data import load_csv, write_csv
from mdew.errors import ConfigError
from mdew.metrics import ScoredSet, auroc, average_precision, brier
from mdew.runner import (
    ExperimentConfig,
    emit_report,
    load_config,
    load_grid_config,
    run_experiment,
    run_grid,
    write_rank_table,
)

from conftest import make_classification

SMALL_POOL = [
    {"imputer": "mean", "classifier": "rf", "params": {"n_trees": 8, "max_depth": 3}},
    {"imputer": "knn", "classifier": "gbm", "params": {"n_trees": 8, "max_depth": 3}},
]


@pytest.fixture(scope="module")
def synth_csv(tmp_path_factory):
    data = make_classification(240, 6, seed=90)
    path = tmp_path_factory.mktemp("synth") / "synth.csv"
    write_csv(data, str(path))
    return str(path)


def _config(synth_csv, **overrides):
    base = dict(
        dataset_path=synth_csv,
        mechanism="mcar",
        rate=0.3,
        pool=SMALL_POOL,
        folds=4,
        seed=11,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def _cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "mdew", *args], capture_output=True, text=True
    )


class TestExperimentConfig:
    def test_defaults_and_name_derivation(self, synth_csv):
        cfg = ExperimentConfig(dataset_path=synth_csv, mechanism="mar")
        assert cfg.folds == 5
        assert cfg.k_neighbors == 5
        assert cfg.stage2_fraction == 0.2
        assert cfg.name == "synth-mar"

    def test_validation(self, synth_csv):
        with pytest.raises(ConfigError):
            ExperimentConfig(dataset_path=synth_csv, mechanism="drift")
        with pytest.raises(ConfigError):
            ExperimentConfig(dataset_path=synth_csv, mechanism="mcar", rate=1.5)
        with pytest.raises(ConfigError):
            ExperimentConfig(dataset_path=synth_csv, folds=1)
        with pytest.raises(ConfigError):
            ExperimentConfig(dataset_path=synth_csv, k_neighbors=0)
        with pytest.raises(ConfigError):
            ExperimentConfig(dataset_path=synth_csv, stage2_fraction=0.0)
        with pytest.raises(ConfigError):
            ExperimentConfig(dataset_path=synth_csv, pool=[])
        with pytest.raises(ConfigError):
            ExperimentConfig(dataset_path="")

    def test_from_dict_rejects_unknown_keys(self, synth_csv):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"dataset_path": synth_csv, "surprise": 1})

    def test_round_trip_through_dict(self, synth_csv):
        cfg = _config(synth_csv, name="round")
        clone = ExperimentConfig.from_dict(cfg.to_dict())
        assert clone.to_dict() == cfg.to_dict()

    def test_config_echo_omits_output_destination(self, synth_csv):
        cfg = _config(synth_csv, output_dir="/somewhere/else")
        assert "output_dir" not in cfg.to_dict()

    def test_load_config_files(self, synth_csv, tmp_path):
        single = tmp_path / "one.json"
        single.write_text(json.dumps({"dataset_path": synth_csv, "mechanism": "mcar"}))
        assert load_config(str(single)).mechanism == "mcar"

        grid = tmp_path / "grid.json"
        grid.write_text(
            json.dumps(
                {
                    "defaults": {"dataset_path": synth_csv, "folds": 3},
                    "experiments": [
                        {"name": "a", "mechanism": "mcar"},
                        {"name": "b", "mechanism": "mar"},
                    ],
                }
            )
        )
        configs = load_grid_config(str(grid))
        assert [c.name for c in configs] == ["a", "b"]
        assert all(c.folds == 3 for c in configs)

        dup = tmp_path / "dup.json"
        dup.write_text(
            json.dumps(
                {
                    "defaults": {"dataset_path": synth_csv},
                    "experiments": [{"name": "same"}, {"name": "same"}],
                }
            )
        )
        with pytest.raises(ConfigError):
            load_grid_config(str(dup))


@pytest.fixture(scope="module")
def report(synth_csv):
    return run_experiment(_config(synth_csv))


class TestRunExperiment:
    def test_report_is_complete(self, report):
        assert report.n_rows == 240 and report.n_features == 6
        assert report.method_labels == ["mdew", "uma", "mean+rf", "knn+gbm"]
        for label in report.method_labels:
            for key in ("auroc", "average_precision", "brier"):
                assert 0.0 <= report.metrics[label][key] <= 1.0
        assert 0.0 <= report.fraction_improved <= 1.0
        assert report.t_test["alternative"] == "less"
        assert len(report.per_fold) == 4
        assert len(report.stage2_sizes) == 4
        assert report.amputation_plan["mechanism"] == "mcar"

    def test_predictions_cover_every_row_once(self, report):
        rows = report.predictions
        assert len(rows) == 240
        assert sorted(r["row_id"] for r in rows) == list(range(240))
        assert {r["fold"] for r in rows} == {0, 1, 2, 3}

    def test_weights_lie_on_the_simplex(self, report):
        for row in report.predictions:
            w = np.array(row["weights"])  # ordered like the pipeline labels
            assert w.shape == (2,)
            assert w.min() >= 0.0
            assert abs(w.sum() - 1.0) <= 1e-9

    def test_pooled_metrics_recomputable_from_predictions(self, report):
        y = np.array([r["target"] for r in report.predictions])
        for method in ("mdew", "uma"):
            p = np.array([r[f"{method}_prob"] for r in report.predictions])
            s = ScoredSet(y, p)
            assert report.metrics[method]["auroc"] == pytest.approx(auroc(s), abs=1e-12)
            assert report.metrics[method]["average_precision"] == pytest.approx(
                average_precision(s), abs=1e-12
            )
            assert report.metrics[method]["brier"] == pytest.approx(brier(s), abs=1e-12)

    def test_rerun_is_identical(self, synth_csv, report):
        again = run_experiment(_config(synth_csv))
        assert again.to_dict() == report.to_dict()
        for a, b in zip(again.predictions, report.predictions):
            assert a == b

    def test_per_fold_amputation_changes_masks_not_contract(self, synth_csv, report):
        per_fold = run_experiment(_config(synth_csv, per_fold_amputation=True))
        assert per_fold.amputation_plan["per_fold"] is True
        assert len(per_fold.amputation_plan["folds"]) == 4
        assert len(per_fold.per_fold) == 4
        assert per_fold.to_dict() != report.to_dict()

    def test_native_missing_cells_run_without_amputation(self, tmp_path):
        data = make_classification(120, 4, seed=91)
        values = data.values.copy()
        rng = np.random.default_rng(91)
        values[rng.random(values.shape) < 0.2] = np.nan
        from mdew.data import dataset_from_arrays

        holey = dataset_from_arrays(values, data.target)
        path = tmp_path / "holey.csv"
        write_csv(holey, str(path))
        cfg = ExperimentConfig(
            dataset_path=str(path), mechanism="none", pool=SMALL_POOL, folds=3, seed=1
        )
        report = run_experiment(cfg)
        assert report.amputation_plan["mechanism"] == "none"
        assert len(report.predictions) == 120


class TestEmitAndGrid:
    def test_emit_report_writes_all_files(self, synth_csv, tmp_path):
        report = run_experiment(_config(synth_csv, folds=3))
        paths = emit_report(report, str(tmp_path), wall_clock_seconds=1.25)
        assert set(paths) == {"report", "predictions", "metrics", "folds", "timing"}

        body = json.loads((tmp_path / "report.json").read_text())
        assert body["name"] == report.name
        assert "output_dir" not in body["config"]
        assert "predictions" not in body

        with open(tmp_path / "predictions.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 240
        assert {"row_id", "fold", "target", "uma_prob", "mdew_prob"} <= set(rows[0])
        got = {
            (int(r["row_id"]), float(r["mdew_prob"]), float(r["uma_prob"]))
            for r in rows
        }
        want = {
            (r["row_id"], r["mdew_prob"], r["uma_prob"]) for r in report.predictions
        }
        assert got == want  # repr round-trip keeps float identity

        folds = json.loads((tmp_path / "folds.json").read_text())
        assert folds["n_folds"] == 3
        covered = sorted(i for fold in folds["splits"] for i in fold["test"])
        assert covered == list(range(240))

        timing = json.loads((tmp_path / "timing.json").read_text())
        assert timing["wall_clock_seconds"] == 1.25

    def test_run_grid_ranks_and_survives_failures(self, synth_csv, tmp_path):
        good_a = _config(synth_csv, name="grid-a", output_dir=str(tmp_path / "a"))
        good_b = _config(
            synth_csv, name="grid-b", seed=12, output_dir=str(tmp_path / "b")
        )
        bad = _config(
            synth_csv,
            name="grid-bad",
            dataset_path=str(tmp_path / "missing.csv"),
            output_dir=str(tmp_path / "c"),
        )
        with pytest.warns(UserWarning, match="grid-bad"):
            reports, table = run_grid([good_a, bad, good_b])
        assert [r.name for r in reports] == ["grid-a", "grid-b"]
        assert table.experiment_names == ["grid-a", "grid-b"]
        assert set(table.labels) == {"mdew", "uma", "mean+rf", "knn+gbm"}
        out = tmp_path / "ranks.csv"
        write_rank_table(table, str(out))
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "experiment"
        assert rows[-1][0] == "iqr_rank"


class TestCli:
    def test_run_subcommand_and_seed_override(self, synth_csv, tmp_path):
        cfg = {
            "dataset_path": synth_csv,
            "mechanism": "mcar",
            "rate": 0.3,
            "pool": SMALL_POOL,
            "folds": 3,
            "seed": 5,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert _cli("run", "--config", str(cfg_path), "--out", str(out_a)).returncode == 0
        proc = _cli(
            "run", "--config", str(cfg_path), "--out", str(out_b), "--seed", "6"
        )
        assert proc.returncode == 0
        rep_a = json.loads((out_a / "report.json").read_text())
        rep_b = json.loads((out_b / "report.json").read_text())
        assert rep_a["seed"] == 5 and rep_b["seed"] == 6
        assert rep_a["metrics"] != rep_b["metrics"]

    def test_exit_codes(self, synth_csv, tmp_path):
        bad_json = tmp_path / "broken.json"
        bad_json.write_text("{not json")
        assert _cli("run", "--config", str(bad_json)).returncode == 2

        gone = {"dataset_path": str(tmp_path / "gone.csv"), "pool": SMALL_POOL}
        gone_path = tmp_path / "gone.json"
        gone_path.write_text(json.dumps(gone))
        proc = _cli("run", "--config", str(gone_path), "--out", str(tmp_path / "x"))
        assert proc.returncode == 3
        assert proc.stderr.strip()

        assert _cli("nonsense").returncode == 2  # argparse rejects the verb

    def test_ampute_impute_round_trip(self, synth_csv, tmp_path):
        holey = tmp_path / "holey.csv"
        plan = tmp_path / "plan.json"
        proc = _cli(
            "ampute",
            "--in",
            synth_csv,
            "--out",
            str(holey),
            "--mechanism",
            "mcar",
            "--rate",
            "0.3",
            "--seed",
            "3",
            "--plan-out",
            str(plan),
        )
        assert proc.returncode == 0, proc.stderr
        masked = load_csv(str(holey), "target")
        assert masked.mask.sum() > 0
        body = json.loads(plan.read_text())
        assert body["plan"]["mechanism"] == "mcar"
        assert len(body["ground_truth"]["values"]) == masked.mask.sum()

        filled = tmp_path / "filled.csv"
        proc = _cli(
            "impute", "--in", str(holey), "--out", str(filled), "--imputer", "mean"
        )
        assert proc.returncode == 0, proc.stderr
        complete = load_csv(str(filled), "target")
        assert complete.mask.sum() == 0
        assert (tmp_path / "filled.csv.imputer.json").exists()

    def test_metrics_subcommand(self, tmp_path):
        scored = tmp_path / "scored.csv"
        with open(scored, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row_id", "target", "probability", "method"])
            for i, (y, p) in enumerate([(1, 0.9), (1, 0.8), (0, 0.7), (1, 0.6), (0, 0.3), (0, 0.1)]):
                writer.writerow([i, y, p, "demo"])
        out = tmp_path / "metrics.json"
        proc = _cli("metrics", "--in", str(scored), "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        body = json.loads(out.read_text())
        assert body["demo"]["auroc"] == pytest.approx(8 / 9, abs=1e-12)
        assert body["demo"]["n"] == 6

    def test_predict_matches_library(self, synth_csv, tmp_path):
        from mdew.data import take, two_stage_split
        from mdew.ensemble import (
            build_error_matrix,
            fit_pool,
            pool_from_config,
            predict_batch,
            save_context,
        )

        data = load_csv(synth_csv, "target")
        s1_idx, s2_idx = two_stage_split(data, np.arange(data.n_rows), 0.2, seed=4)
        pool = fit_pool(pool_from_config(SMALL_POOL), take(data, s1_idx), seed=4)
        em = build_error_matrix(pool, take(data, s2_idx))
        ctx = tmp_path / "ctx"
        save_context(str(ctx), pool, em)

        queries = make_classification(10, 6, seed=92)
        qpath = tmp_path / "queries.csv"
        write_csv(queries, str(qpath), target_column=None)
        out = tmp_path / "preds.csv"
        proc = _cli(
            "predict",
            "--context",
            str(ctx),
            "--in",
            str(qpath),
            "--out",
            str(out),
            "--k",
            "3",
        )
        assert proc.returncode == 0, proc.stderr
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        want = predict_batch(pool, em, queries, k=3)
        assert len(rows) == 10
        for row, pred in zip(rows, want):
            assert float(row["probability"]) == pred.probability
            assert row["method"] == "mdew"

    def test_grid_subcommand_writes_rank_table(self, synth_csv, tmp_path):
        grid = {
            "defaults": {
                "dataset_path": synth_csv,
                "pool": SMALL_POOL,
                "folds": 3,
                "mechanism": "mcar",
                "rate": 0.3,
            },
            "experiments": [{"name": "g1", "seed": 1}, {"name": "g2", "seed": 2}],
        }
        gpath = tmp_path / "grid.json"
        gpath.write_text(json.dumps(grid))
        out = tmp_path / "gridout"
        proc = _cli("grid", "--config", str(gpath), "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        assert (out / "rank_table.csv").exists()
        assert (out / "g1" / "report.json").exists()
        assert (out / "g2" / "report.json").exists()
