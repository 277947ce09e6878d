"""Сквозные тесты экспериментов и командной строки на уменьшенной конфигурации."""

import math

import pytest
import torch

from radarloc import core
from radarloc.config.core import build_config
from radarloc.core import build_parser, load_app_config, main
from radarloc.experiments import runners
from radarloc.experiments.reporting import read_csv
from radarloc.radar.namf import breakdown_threshold


def test_threshold_experiment(small_config, tmp_path):
    rows = runners.run_threshold_experiment(small_config, tmp_path)

    assert len(rows) == 2
    assert {row["snapshots"] for row in rows} == {100}
    assert rows[0]["threshold_db"] == pytest.approx(10.0 * math.log10(0.4))

    table = read_csv(tmp_path / "threshold.csv")
    assert list(table[0]) == list(runners.THRESHOLD_COLUMNS)
    knees = read_csv(tmp_path / "threshold_knee.csv")
    assert float(knees[0]["knee_scnr_db"]) == pytest.approx(10.0)


def test_threshold_experiment_is_reproducible(small_config, tmp_path):
    runners.run_threshold_experiment(small_config, tmp_path / "a")
    runners.run_threshold_experiment(small_config, tmp_path / "b")
    first = (tmp_path / "a" / "threshold.csv").read_bytes()
    assert first == (tmp_path / "b" / "threshold.csv").read_bytes()


def test_scnr_sweep(small_config, tmp_path):
    rows = runners.run_scnr_sweep(small_config, tmp_path)

    assert [row["mean_output_scnr_db"] for row in rows] == [0.0, 20.0]
    for row in rows:
        assert row["err_cnn_m"] > 0
        assert row["gain_factor"] == pytest.approx(row["err_namf_m"] / row["err_cnn_m"])
        assert row["err_ls_az_deg"] <= 10.0
    assert len(read_csv(tmp_path / "scnr_sweep.csv")) == 2


def test_size_sweep(small_config, tmp_path):
    rows = runners.run_size_sweep(small_config, tmp_path)

    assert [row["n_samples"] for row in rows] == [10, 20]
    assert [row["n_train"] for row in rows] == [9, 18]
    # классические оценки считаются на общей проверочной части
    assert rows[0]["err_namf_m"] == rows[1]["err_namf_m"]


def test_mismatch_and_fsl(small_config, tmp_path):
    context = runners.prepare_mismatch(small_config)
    assert context.distances["O"] == pytest.approx(0.0, abs=1e-9)
    assert all(context.distances[s] >= 0.0 for s in "NWSE")

    rows = runners.run_mismatch_experiment(small_config, tmp_path, context=context)
    assert [row["scenario"] for row in rows] == ["O", "N", "W", "S", "E"]
    summary = read_csv(tmp_path / "mismatch_summary.csv")
    assert summary[0]["experiment"] == "mismatch"

    fsl_rows = runners.run_fsl_experiment(small_config, tmp_path, context=context)
    assert [row["scenario"] for row in fsl_rows] == ["N", "W", "S", "E"]
    assert all(row["trainable_parameters"] == 6414 for row in fsl_rows)
    # исходная сеть не меняется при дообучении
    assert not context.model.features_frozen


def test_displaced_predictions_use_scenario_grid(small_config):
    context = runners.prepare_mismatch(small_config)
    dataset = context.datasets["N"]
    predictions = runners.predict_coordinates(context.model, dataset.tensors, dataset.grid)
    lower, upper = dataset.grid.label_bounds()
    assert (predictions[:, 0] >= lower[0]).all() and (predictions[:, 0] <= upper[0]).all()
    assert upper[0] < 14000.0


@pytest.mark.slow
def test_doppler_experiment(small_config, tmp_path):
    rows = runners.run_doppler_experiment(small_config, tmp_path)
    assert len(rows) == 2
    for row in rows:
        assert row["err_namf_v_mps"] <= 15.0
        assert row["err_cnn_v_mps"] <= 15.0
    assert list(read_csv(tmp_path / "doppler.csv")[0]) == list(runners.DOPPLER_COLUMNS)


def test_cli_generate_train_evaluate(small_config_file, tmp_path):
    out = tmp_path / "results"
    common = ["--config", str(small_config_file), "--out", str(out)]

    assert main(common + ["generate"]) == 0
    assert (out / "dataset.rlhm").exists()

    assert main(["train", "--dataset", str(out / "dataset.rlhm")] + common) == 0
    assert (out / "model.rlnn").exists()
    history = read_csv(out / "history.csv")
    assert history[0]["epoch"] == "0"

    assert main(common + ["evaluate", "--dataset", str(out / "dataset.rlhm"),
                          "--checkpoint", str(out / "model.rlnn")]) == 0
    evaluation = read_csv(out / "evaluation.csv")
    assert evaluation[0]["scenario"] == "O"
    assert evaluation[0]["n_evaluated"] == "2"


def test_cli_reports_failure(small_config_file, tmp_path, capsys):
    code = main(["--config", str(small_config_file), "--out", str(tmp_path),
                 "train", "--dataset", str(tmp_path / "absent.rlhm")])
    assert code == 1
    assert "radarloc: FileNotFoundError" in capsys.readouterr().err


def test_cli_rejects_unknown_command():
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args(["unknown"])
    assert excinfo.value.code == 2


def test_cli_flags_after_subcommand():
    args = build_parser().parse_args(["threshold", "--seed", "7", "--scenario", "W"])
    assert args.command == "threshold"
    assert args.seed == 7
    assert args.scenario == "W"


@pytest.mark.slow
def test_cli_deterministic_threshold(small_config_file, tmp_path):
    try:
        for name in ("a", "b"):
            argv = ["--config", str(small_config_file), "--out", str(tmp_path / name),
                    "--deterministic", "--workers", "4", "threshold"]
            assert main(argv) == 0
    finally:
        torch.use_deterministic_algorithms(False)
    assert (tmp_path / "a" / "threshold.csv").read_bytes() == (tmp_path / "b" / "threshold.csv").read_bytes()


@pytest.mark.slow
def test_evaluate_doppler_dataset_reports_velocity(small_config, tmp_path):
    dataset = runners.run_generate(small_config, tmp_path, doppler=True)
    checkpoint = runners.run_train(small_config, dataset, tmp_path)

    rows = runners.run_evaluate(small_config, dataset, checkpoint, tmp_path)

    assert all(column in rows[0] for column in runners.EVALUATION_VELOCITY_COLUMNS)
    evaluation = read_csv(tmp_path / "evaluation.csv")
    assert list(evaluation[0]) == list(runners.EVALUATION_COLUMNS + runners.EVALUATION_VELOCITY_COLUMNS)


def test_evaluate_baseline_dataset_has_no_velocity_columns(small_config, tmp_path):
    dataset = runners.run_generate(small_config, tmp_path)
    checkpoint = runners.run_train(small_config, dataset, tmp_path)

    runners.run_evaluate(small_config, dataset, checkpoint, tmp_path)

    assert list(read_csv(tmp_path / "evaluation.csv")[0]) == list(runners.EVALUATION_COLUMNS)


def test_cli_seed_sets_experiment_and_training_seed(small_config_file):
    args = build_parser().parse_args(["--config", str(small_config_file), "threshold", "--seed", "7"])

    app = load_app_config(args)

    assert app.experiments.seed == 7
    assert app.training.seed == 7
    assert app.experiments.experiment == "threshold"
    assert app.experiments.n_samples == 20


def test_cli_config_comes_from_load_config(monkeypatch, small_config_file):
    calls = []
    original = core.config.load_config

    def recording_load_config(path=None):
        calls.append(path)
        return original(path)

    monkeypatch.setattr(core.config, "load_config", recording_load_config)
    app = load_app_config(build_parser().parse_args(["--config", str(small_config_file), "generate"]))

    assert calls == [str(small_config_file)]
    assert app.experiments.experiment is None
    assert app == original(str(small_config_file))


def test_cli_dispatches_on_experiment_tag(monkeypatch, small_config_file, tmp_path):
    seen = []
    monkeypatch.setitem(core.EXPERIMENT_RUNNERS, "scnr_sweep", lambda app, out, workers: seen.append(app) or [])

    assert main(["--config", str(small_config_file), "--out", str(tmp_path), "sweep-scnr"]) == 0

    assert [app.experiments.experiment for app in seen] == ["scnr_sweep"]


def acceptance_config(tmp_path, **experiments):
    return build_config({}, {"experiments": {"output_dir": str(tmp_path), **experiments}})


@pytest.mark.slow
def test_breakdown_knee_near_predicted_threshold(tmp_path):
    app = acceptance_config(tmp_path, n_validation=2000, threshold_snapshots=[100])

    rows = runners.run_threshold_experiment(app, tmp_path)

    predicted = breakdown_threshold(app.processing.pulses, app.processing.channels, 100)
    assert rows[0]["threshold_db"] == pytest.approx(predicted)
    knee = float(read_csv(tmp_path / "threshold_knee.csv")[0]["knee_scnr_db"])
    assert abs(knee - predicted) <= 3.0


@pytest.mark.slow
def test_cnn_beats_namf_at_high_scnr(tmp_path):
    app = acceptance_config(tmp_path, scnr_grid_db=[20.0], n_samples=10000)

    rows = runners.run_scnr_sweep(app, tmp_path)

    assert rows[0]["err_cnn_m"] < rows[0]["err_namf_m"]
    assert rows[0]["gain_factor"] > 1.0


@pytest.mark.slow
def test_larger_dataset_does_not_hurt_cnn(tmp_path):
    app = acceptance_config(tmp_path, size_grid=[1000, 10000])

    rows = runners.run_size_sweep(app, tmp_path)

    errors = {row["n_samples"]: row["err_cnn_m"] for row in rows}
    assert errors[10000] <= errors[1000]


@pytest.mark.slow
def test_fine_tuning_lowers_displaced_error(tmp_path):
    app = acceptance_config(tmp_path, n_samples=10000, fsl_shots=64)

    rows = runners.run_fsl_experiment(app, tmp_path)

    assert [row["scenario"] for row in rows] == ["N", "W", "S", "E"]
    for row in rows:
        assert row["err_cnn_m"] < row["err_cnn_unadapted_m"], row["scenario"]
