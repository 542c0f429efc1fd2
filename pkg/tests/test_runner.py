import io

import pandas as pd
import pytest

from lib.analysis import metrics
from lib.auto_run import runner, util
from lib.config import DefaultConfig


def _scenario(methods=("closed_form", "quadrature"), mu=1, trials=20_000):
    return {
        "network": {
            "relays": 2,
            "receivers": 2,
            "eavesdroppers": 2,
            "antennas_rx": 2,
            "antennas_eve": 1,
            "hop_sp": {"kappa": 1, "mu": mu, "m": 2},
            "hop_pq": {"kappa": 1, "mu": mu, "m": 2, "avg_snr_db": 5},
            "hop_pw": {"kappa": 1, "mu": 1, "m": 2, "avg_snr_db": -5},
        },
        "sweep": {
            "variable": "avg_snr_pq_db",
            "grid": [0, 10],
            "metrics": ["pnsmc", "sopm", "esmc"],
            "methods": list(methods),
            "target_rate": 0.5,
            "curves": [{"name": "base", "set": {}}, {"name": "three-rx", "set": {"receivers": 3}}],
        },
        "simulation": {"trials": trials, "seed": 11, "block_size": 4096},
    }


def _read(path):
    return pd.read_csv(path, comment="#")


def test_sweep_is_byte_identical_across_workers(write_config, tmp_path):
    config = write_config(_scenario(methods=("closed_form", "quadrature", "monte_carlo")))
    outputs = []
    for name, workers in (("one.csv", "1"), ("three.csv", "3"), ("again.csv", "3")):
        out = tmp_path / name
        code = runner.main(["sweep", "--config", str(config), "--out", str(out), "--workers", workers, "--no-header-timestamp"])
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_sweep_columns_and_order(write_config, tmp_path):
    out = tmp_path / "sweep.csv"
    assert runner.main(["sweep", "--config", str(write_config(_scenario())), "--out", str(out), "--no-header-timestamp"]) == 0
    frame = _read(out)
    assert list(frame.columns) == [
        "curve",
        "variable",
        "value",
        "metric",
        "method",
        "result",
        "stderr_or_tail",
        "terms_used",
        "wall_ms",
        "result_positive",
        "error",
    ]
    assert len(frame) == 2 * 2 * 3 * 2
    assert list(frame["curve"][:12]) == ["base"] * 12
    assert frame["wall_ms"].isna().all()
    assert frame["error"].isna().all()
    probabilities = frame[frame["metric"] != "esmc"]["result"]
    assert ((probabilities >= 0.0) & (probabilities <= 1.0)).all()
    assert frame[frame["metric"] == "esmc"]["result_positive"].notna().all()


def test_timestamp_header_by_default(write_config, tmp_path):
    out = tmp_path / "stamped.csv"
    assert runner.main(["sweep", "--config", str(write_config(_scenario())), "--out", str(out), "--method", "quadrature"]) == 0
    text = out.read_text(encoding="utf-8")
    assert text.startswith("# generated ")
    assert _read(out)["wall_ms"].notna().all()


def test_eval_prints_base_point(write_config, capsys):
    code = runner.main(["eval", "--config", str(write_config(_scenario())), "--no-header-timestamp"])
    assert code == 0
    frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert len(frame) == 3 * 2
    assert set(frame["value"]) == {0}
    assert set(frame["curve"]) == {"base"}


def test_method_override(write_config, tmp_path):
    out = tmp_path / "mc.csv"
    code = runner.main(["sweep", "--config", str(write_config(_scenario())), "--out", str(out), "--method", "monte_carlo", "--seed", "4"])
    assert code == 0
    frame = _read(out)
    assert set(frame["method"]) == {"monte_carlo"}
    assert (frame["terms_used"] == 20_000).all()


def test_bad_config_exits_one(write_config):
    document = _scenario()
    document["sweep"]["grid"] = [10, 0, 5]
    assert runner.main(["sweep", "--config", str(write_config(document))]) == 1


def test_missing_config_exits_one(tmp_path):
    assert runner.main(["eval", "--config", str(tmp_path / "nowhere.json")]) == 1


def test_bad_workers_exit_one(write_config):
    assert runner.main(["sweep", "--config", str(write_config(_scenario())), "--workers", "0"]) == 1


def test_closed_form_with_fractional_shape_exits_two(write_config, tmp_path):
    out = tmp_path / "fractional.csv"
    code = runner.main(["sweep", "--config", str(write_config(_scenario(mu=1.5))), "--out", str(out), "--no-header-timestamp"])
    assert code == 2
    frame = _read(out)
    closed = frame[frame["method"] == "closed_form"]
    assert closed["error"].str.startswith("ShapeIntegralityError").all()
    assert frame[frame["method"] == "quadrature"]["result"].notna().all()


def test_compare_passes(write_config, tmp_path, monkeypatch):
    monkeypatch.setattr(DefaultConfig, "MC_CONFIDENCE_Z", 10.0)
    out = tmp_path / "compare.csv"
    assert runner.main(["compare", "--config", str(write_config(_scenario())), "--out", str(out), "--no-header-timestamp"]) == 0
    frame = _read(out)
    assert len(frame) == 2 * 2 * 3
    assert frame["passed"].all()
    assert (frame["gap"] <= frame["tolerance"]).all()
    assert frame["physical"].isna().all()


def test_compare_failure_exits_three(write_config, tmp_path, monkeypatch):
    monkeypatch.setattr(DefaultConfig, "TOL_PROBABILITY", -1.0)
    monkeypatch.setattr(DefaultConfig, "TOL_CAPACITY_BITS", -1.0)
    out = tmp_path / "compare.csv"
    assert runner.main(["compare", "--config", str(write_config(_scenario())), "--out", str(out)]) == 3
    assert not _read(out)["passed"].any()


def test_compare_physical_column(write_config, tmp_path, monkeypatch):
    monkeypatch.setattr(DefaultConfig, "MC_CONFIDENCE_Z", 10.0)
    document = _scenario(trials=5_000)
    document["sweep"].update(grid=[10], metrics=["pnsmc"], curves=[{"name": "base", "set": {}}])
    out = tmp_path / "physical.csv"
    runner.main(["compare", "--config", str(write_config(document)), "--out", str(out), "--physical"])
    frame = _read(out)
    assert len(frame) == 1
    assert 0.0 <= frame["physical"][0] <= 1.0


def test_sample_verb(write_config, tmp_path):
    out = tmp_path / "draws.csv"
    config = str(write_config(_scenario()))
    assert runner.main(["sample", "--config", config, "--hop", "pw", "--count", "5000", "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["snr"]
    assert len(frame) == 5000
    assert (frame["snr"] >= 0.0).all()
    assert frame["snr"].mean() == pytest.approx(10.0**-0.5, rel=0.1)


def test_sample_is_seeded(write_config, tmp_path):
    config = str(write_config(_scenario()))
    texts = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        runner.main(["sample", "--config", config, "--count", "1000", "--seed", "9", "--out", str(out)])
        texts.append(out.read_text(encoding="utf-8"))
    assert texts[0] == texts[1]


def test_workers_flag_reaches_monte_carlo(write_config, tmp_path, monkeypatch):
    seen = []
    simulate = metrics.simulate_metrics

    def recording(plan, target_rate, workers=None):
        seen.append(workers)
        return simulate(plan, target_rate, workers)

    monkeypatch.setattr(metrics, "simulate_metrics", recording)
    metrics._simulated.cache_clear()
    config = str(write_config(_scenario(trials=4_000)))
    single, pooled = tmp_path / "single.csv", tmp_path / "pooled.csv"
    common = ["--method", "monte_carlo", "--seed", "77", "--no-header-timestamp"]
    assert runner.main(["sweep", "--config", config, "--out", str(single), "--workers", "1"] + common) == 0
    assert seen and set(seen) == {1}
    metrics._simulated.cache_clear()
    assert runner.main(["sweep", "--config", config, "--out", str(pooled), "--workers", "3"] + common) == 0
    assert single.read_bytes() == pooled.read_bytes()


def test_unexpected_point_failure_keeps_sweep(write_config, tmp_path, monkeypatch):
    evaluate = util.evaluate_metric

    def failing(metric, *args, **kwargs):
        if metric == "sopm":
            raise FloatingPointError("overflow encountered")
        return evaluate(metric, *args, **kwargs)

    monkeypatch.setattr(util, "evaluate_metric", failing)
    out = tmp_path / "partial.csv"
    code = runner.main(["sweep", "--config", str(write_config(_scenario())), "--out", str(out), "--no-header-timestamp"])
    assert code == 2
    frame = _read(out)
    assert len(frame) == 2 * 2 * 3 * 2
    sopm_rows = frame[frame["metric"] == "sopm"]
    assert sopm_rows["error"].str.startswith("NumericalError: FloatingPointError").all()
    assert frame[frame["metric"] != "sopm"]["result"].notna().all()


def test_compare_reports_strict_band(write_config, tmp_path):
    out = tmp_path / "compare.csv"
    runner.main(["compare", "--config", str(write_config(_scenario())), "--out", str(out), "--no-header-timestamp"])
    frame = _read(out)
    assert "mc_strict" in frame.columns
    assert frame["mc_strict"].isin([True, False]).all()
