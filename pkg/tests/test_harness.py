import json
from pathlib import Path

import numpy as np
import pytest

from shrinkcomb.harness import (
    CSV_COLUMNS,
    METHODS,
    RunConfig,
    SweepRecord,
    SweepSpec,
    emit_csv,
    emit_svg_plot,
    read_csv,
    run_sweep,
    run_trial,
)
from shrinkcomb.scenario import ConfigError, ScenarioConfig
from shrinkcomb.shrinkfit import FitOptions

FIGS = Path(__file__).resolve().parents[1] / "figs"


def small_run(**scen):
    cfg = ScenarioConfig(data_len=200, **scen)
    return RunConfig(scenario=cfg, sweep=SweepSpec("ue_power_dbm", (10.0, 18.0)), trials=6)


def test_perfect_csi_is_a_lower_bound_per_trial():
    cfg = ScenarioConfig(ue_tx_power_dbm=18.0, data_len=300)
    run = RunConfig(scenario=cfg, sweep=SweepSpec())
    wins = {m: 0 for m in METHODS if m != "perfect_csi"}
    n = 100
    for i in range(n):
        out = run_trial(cfg, i, run).methods
        for m in wins:
            wins[m] += out["perfect_csi"].errors <= out[m].errors
    assert all(w >= 0.95 * n for w in wins.values()), wins


def test_no_reg_ignores_fit_options():
    cfg = ScenarioConfig(data_len=200)
    a = RunConfig(scenario=cfg, sweep=SweepSpec(), methods=("no_reg",))
    b = RunConfig(scenario=cfg, sweep=SweepSpec(), methods=("no_reg",),
                  fit=FitOptions(step="fixed", beta=5.0, max_iters=3))
    for i in range(5):
        assert np.array_equal(run_trial(cfg, i, a).methods["no_reg"].errors_per_ue,
                              run_trial(cfg, i, b).methods["no_reg"].errors_per_ue)


def test_trial_is_deterministic():
    cfg = ScenarioConfig(data_len=200)
    t1, t2 = run_trial(cfg, 4), run_trial(cfg, 4)
    for m in METHODS:
        assert np.array_equal(t1.methods[m].errors_per_ue, t2.methods[m].errors_per_ue)
        assert t1.methods[m].alpha == t2.methods[m].alpha


def test_worker_count_does_not_change_results(tmp_path):
    run = small_run()
    one = run_sweep(run, threads=1)
    two = run_sweep(run, threads=2)
    emit_csv(one.records, tmp_path / "a.csv", timing=False)
    emit_csv(two.records, tmp_path / "b.csv", timing=False)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert one.per_ue == two.per_ue


def test_env_thread_fallback(monkeypatch):
    monkeypatch.setenv("SHRINKCOMB_THREADS", "2")
    run = small_run()
    assert [r.symbol_errors for r in run_sweep(run).records] == \
        [r.symbol_errors for r in run_sweep(run, threads=1).records]
    monkeypatch.setenv("SHRINKCOMB_THREADS", "0")
    with pytest.raises(ConfigError):
        run_sweep(run)


def test_record_consistency():
    res = run_sweep(small_run())
    assert len(res.records) == 2 * len(METHODS)
    for r in res.records:
        assert r.ser == r.symbol_errors / r.total_symbols
        assert r.total_symbols == r.trials * 200 * 6
    per = {}
    for m, _, v, _, e, _ in res.per_ue:
        per[(m, v)] = per.get((m, v), 0) + e
    for r in res.records:
        assert per[(r.method, r.sweep_value)] == r.symbol_errors


def test_empty_csv_is_header_only(tmp_path):
    emit_csv([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == ",".join(CSV_COLUMNS) + "\n"
    assert read_csv(tmp_path / "e.csv") == []


def test_csv_round_trip(tmp_path):
    recs = [
        SweepRecord("no_reg", "ue_power_dbm", 2.0, 10, 3, 60000, 3 / 60000, None, None, 0.25),
        SweepRecord("reg_data_iter", "pilot_len", 8.0, 10, 0, 60000, 0.0, 0.0123456789, 4.5, 1.5),
    ]
    emit_csv(recs, tmp_path / "r.csv")
    assert read_csv(tmp_path / "r.csv") == recs
    emit_csv(recs, tmp_path / "n.csv", timing=False)
    assert all(r.wallclock_s is None for r in read_csv(tmp_path / "n.csv"))


def test_record_rejects_zero_trials():
    with pytest.raises(ValueError):
        SweepRecord("no_reg", "ue_power_dbm", 2.0, 0, 0, 0, 0.0, None, None, None)


def test_svg_has_one_series_per_method(tmp_path):
    res = run_sweep(small_run())
    emit_csv(res.records, tmp_path / "s.csv")
    emit_svg_plot(tmp_path / "s.csv", tmp_path / "s.svg")
    svg = (tmp_path / "s.svg").read_text()
    assert svg.startswith("<svg")
    for m in METHODS:
        assert svg.count(f'data-method="{m}"') == 1


def test_shipped_sweep_configs():
    f2 = RunConfig.from_dict(json.loads((FIGS / "fig2.json").read_text()))
    f3 = RunConfig.from_dict(json.loads((FIGS / "fig3.json").read_text()))
    f4 = RunConfig.from_dict(json.loads((FIGS / "fig4.json").read_text()))
    assert f2.sweep.values == f3.sweep.values == (2, 6, 10, 14, 18, 22)
    assert f2.scenario.interferers == ()
    assert [i.power_offset_db for i in f3.scenario.interferers] == [-5.0]
    assert f4.sweep.kind == "pilot_len" and f4.sweep.values == (8, 12, 16, 20, 24)
    assert f4.scenario.ue_tx_power_dbm == 15.0 and len(f4.scenario.interferers) == 1
    for f in (f2, f3, f4):
        assert f.trials == 2000 and f.exh_step == 0.01


def test_short_pilots_resample_then_fail():
    # Q has rank tau_p < B*M, so the unregularised inverse never exists.
    cfg = ScenarioConfig(num_ues=2, pilot_len=4, data_len=100)
    out = run_trial(cfg, 0)
    assert out.resamples == 2
    assert out.methods["no_reg"].failed
    for m in ("reg_data", "reg_data_iter", "reg_exh", "perfect_csi"):
        assert not out.methods[m].failed
    res = run_sweep(RunConfig(scenario=cfg, sweep=SweepSpec("pilot_len", (4,)), trials=3))
    assert res.failures == {("no_reg", 4.0): 3}
    assert "no_reg" not in {r.method for r in res.records}


def test_pilot_sweep_rejects_fractional():
    with pytest.raises(ConfigError):
        SweepSpec("pilot_len", (8.5,)).apply(ScenarioConfig(), 8.5)


@pytest.mark.parametrize("doc", [
    {"scenario": {}, "trials": 0},
    {"scenario": {}, "methods": ["bogus"]},
    {"scenario": {}, "sweep": {"kind": "bandwidth", "values": [1]}},
    {"scenario": {}, "sweep": {"values": []}},
    {"scenario": {}, "exhaustive": {"criterion": "ber"}},
    {"scenario": {}, "perfect_csi": "zf"},
    {"scenario": {}, "fit": {"learning_rate": 1}},
    {"scenario": {}, "colour": "blue"},
    {"scenario": {"num_ues": 0}},
])
def test_config_errors(doc):
    with pytest.raises((ConfigError, ValueError)):
        RunConfig.from_dict(doc)


def test_bare_scenario_document():
    run = RunConfig.from_dict({"ue_tx_power_dbm": 10.0, "data_len": 50})
    assert run.sweep.values == (10.0,) and run.scenario.data_len == 50
