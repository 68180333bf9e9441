import csv
import io
import math
import statistics

import numpy as np
import pytest

from spikelink import bench
from spikelink.bench import (
    CSV_HEADER,
    BenchRecord,
    LatencyProbe,
    find_realtime_limit,
    latency_config,
    measure_bandwidth,
    measure_latency,
    measure_rtf,
    scalability_config,
    sweep_overhead,
    write_records_csv,
)
from spikelink.errors import BracketInvalid, NoResponse
from spikelink.runtime import build_graph, run


def test_csv_header_exact(tmp_path):
    write_records_csv(tmp_path / "b.csv", [BenchRecord("s", "regular", 10, 1.5, 0.05, 0, 0.1, 5.0, 10.0)])
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == (
        "scenario,encoder,n_neurons,rate_hz,delta_t_s,trial,t_build_s,t_run_s,t_sim_s,rtf,latency_s,spikes"
    )
    assert tuple(lines[0].split(",")) == CSV_HEADER
    row = dict(zip(CSV_HEADER, lines[1].split(",")))
    assert float(row["rtf"]) == 2.0
    assert row["latency_s"] == ""


def test_record_rtf_definition():
    assert BenchRecord("s", "e", 1, 0.0, 0.05, 0, 0.0, 5.0, 10.0).rtf == 2.0


def test_measure_rtf_five_trials_plus_mean():
    doc = scalability_config("regular", 200)
    recs = measure_rtf(doc, 1.0, 5)
    assert len(recs) == 6
    assert [r.trial for r in recs] == [0, 1, 2, 3, 4, "mean"]
    for r in recs:
        assert r.rtf * r.t_run_s == pytest.approx(r.t_sim_s, rel=1e-9)
    trials = recs[:-1]
    assert recs[-1].t_run_s == pytest.approx(statistics.fmean(r.t_run_s for r in trials))
    assert recs[-1].rtf_std == pytest.approx(statistics.stdev(r.rtf for r in trials))
    # deterministic spike counts do not vary across trials
    assert len({r.spikes for r in trials}) == 1


@pytest.mark.parametrize("encoder", ["regular", "poisson", "nef"])
def test_scalability_scenarios_build_and_run(encoder):
    doc = scalability_config(encoder, 300)
    rep = run(build_graph(doc), 0.5)
    assert rep.completed
    assert rep.spikes_encoded > 0 or encoder != "nef"


def test_rate_scenario_fires_between_one_and_two_hz():
    rep = run(build_graph(scalability_config("regular", 1000)), 10.0)
    assert rep.spikes_encoded == pytest.approx(1000 * 1.5 * 10.0, rel=0.01)


def test_limit_synthetic_oracle():
    res = find_realtime_limit(bracket=(100, 5000), runner=lambda n: 1000.0 / n)
    assert abs(res.n_limit - 1000) / 1000 <= 0.10
    assert 1000.0 / res.n_limit >= 1.0
    assert res.n_probes <= 2 + math.ceil(math.log2(math.log(50) / math.log(1.1))) + 2


def test_limit_auto_doubles():
    res = find_realtime_limit(bracket=(2000, 4000), runner=lambda n: 50_000.0 / n)
    probed = [n for n, _ in res.probes]
    assert probed[:5] == [2000, 4000, 8000, 16000, 32000]
    assert 45_000 <= res.n_limit <= 50_000


def test_limit_invalid_brackets():
    with pytest.raises(BracketInvalid):
        find_realtime_limit(bracket=(5000, 10000), runner=lambda n: 1000.0 / n)
    with pytest.raises(BracketInvalid):
        find_realtime_limit(bracket=(10, 10), runner=lambda n: 1.0)
    with pytest.raises(BracketInvalid):
        find_realtime_limit(bracket=(1, 2), runner=lambda n: 2.0, max_doublings=3)


def test_bandwidth_throughput_matches_rates():
    rates = [0.0, 5.0, 20.0]
    recs = measure_bandwidth(500, rates, t_sim=2.0)
    assert [r.rate_hz for r in recs] == rates
    # only the first tick fires: it reads the adapter's zero initial frame
    assert recs[0].spikes <= 500 * 1.0 * 0.05
    for r in recs[1:]:
        assert r.spikes / r.t_sim_s == pytest.approx(500 * r.rate_hz, rel=0.05)


@pytest.mark.parametrize("hops", [1, 2, 3])
def test_latency_law(hops):
    res = measure_latency([0.001, 0.005, 0.01, 0.05], hops)
    for r in res.records:
        assert round(r.latency_s / r.delta_t_s) == hops
        assert r.latency_s == pytest.approx(hops * r.delta_t_s, rel=1e-12)
    assert res.slope == pytest.approx(hops, rel=1e-9)
    assert res.r_squared > 0.999


def test_latency_three_hops_fifty_ms():
    res = measure_latency([0.05], 3)
    assert res.records[0].latency_s == pytest.approx(0.150, abs=1e-12)


def test_latency_declared_parrot_delay():
    res = measure_latency([0.05], 2, parrot_delay=1)
    assert res.records[0].latency_s == pytest.approx(0.150, abs=1e-12)


def test_latency_is_reproducible():
    a = [r.latency_s for r in measure_latency([0.01, 0.02], 2, trials=3).records]
    assert len(set(a[:3])) == 1 and len(set(a[3:])) == 1


def test_realtime_latency_not_below_deterministic():
    det = measure_latency([0.01], 2).records[0].latency_s
    rt = measure_latency([0.01], 2, mode="realtime").records[0].latency_s
    assert rt >= det


def test_latency_no_response():
    with pytest.raises(NoResponse):
        measure_latency([0.01], 1, probe=LatencyProbe(threshold=2.0))


def test_latency_config_shape():
    doc = latency_config(3, 0.01)
    assert [sc.kind for sc in doc.stages.values()] == ["step", "regular", "parrot", "parrot", "decoder", "sink"]


def test_overhead_grid_and_borders():
    res = sweep_overhead([0.005, 0.05], [10, 100], t_sim=0.2, trials=2)
    assert len(res.records) == 2 * 2 * 2
    assert set(res.borders) == {0.005, 0.05}
    for dt, border in res.borders.items():
        assert border in (0, 10, 100)
    assert isinstance(res.monotone, bool)


def test_overhead_monotone_verdict():
    assert bench.OverheadResult([], {0.001: 10, 0.01: 100}).monotone
    assert not bench.OverheadResult([], {0.001: 100, 0.01: 10}).monotone


def test_aggregate_row_recomputable(tmp_path):
    recs = measure_rtf(scalability_config("poisson", 100), 0.5, 3)
    write_records_csv(tmp_path / "r.csv", recs)
    rows = bench.read_records_csv(tmp_path / "r.csv")
    t_runs = [float(r["t_run_s"]) for r in rows if r["trial"] != "mean"]
    mean = [r for r in rows if r["trial"] == "mean"][0]
    assert float(mean["t_run_s"]) == pytest.approx(statistics.fmean(t_runs), rel=1e-12)
    assert float(mean["rtf"]) == pytest.approx(float(mean["t_sim_s"]) / float(mean["t_run_s"]), rel=1e-12)
