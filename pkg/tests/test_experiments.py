from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smmusim.experiments import (
    ExperimentKind,
    ExperimentSpec,
    LatencySummary,
    Scenario,
    ThroughputRow,
    default_calibration,
    latency_matrix,
    mode_estimate,
    probe_micro_tlb_depth,
    probe_point,
    reduction,
    run_latency_experiment,
    throughput_kb,
)
from smmusim.smmu import SmmuConfig
from smmusim.tlb import TlbConfig


def spec(**kw):
    kw.setdefault("iterations", 400)
    return ExperimentSpec(ExperimentKind.LATENCY, **kw)


def test_mode_picks_densest_bin_and_reports_its_mean():
    assert mode_estimate([180.0] * 5 + [200.0] * 3) == 180.0
    assert mode_estimate([180.0, 180.5, 190.0]) == 180.25
    # ties resolve to the lower bin
    assert mode_estimate([10.0, 20.0]) == 10.0
    with pytest.raises(ValueError):
        mode_estimate([])


def test_summary_ratios():
    base = LatencySummary.from_samples([100.0, 100.0, 120.0])
    other = LatencySummary.from_samples([150.0, 150.0, 180.0]).relative_to(base)
    assert other.ratio_avg == pytest.approx(1.5)
    assert (other.ratio_mode, other.ratio_max, other.ratio_min) == (1.5, 1.5, 1.5)


def test_throughput_unit_is_kib_per_ms():
    # 1024 B every microsecond = 1000 KiB per millisecond
    assert throughput_kb(1024, 1000, 10**12) == pytest.approx(1000.0)


def test_reduction_against_solo():
    rows = [
        ThroughputRow(Scenario.SOLO, 16, 100, True, 10, 1, 100.0),
        ThroughputRow(Scenario.INTERF_TBU, 16, 100, True, 10, 1, 70.0),
    ]
    assert reduction(rows, 16, Scenario.INTERF_TBU) == pytest.approx(0.3)


@pytest.mark.parametrize("depth", [2, 5, 16])
def test_probe_finds_configured_depth(depth):
    result = probe_micro_tlb_depth(SmmuConfig().with_micro_depth(depth), n_max=depth + 4)
    assert result.depth == depth
    assert not result.lower_bound


def test_probe_reports_lower_bound_when_no_knee():
    result = probe_micro_tlb_depth(SmmuConfig(), n_max=10)
    assert result.depth is None and result.lower_bound
    assert len(result.rows) == 10


def test_probe_needs_warmup():
    with pytest.raises(ValueError):
        probe_micro_tlb_depth(SmmuConfig(), warmup_iterations=0)


def test_probe_counts_only_measured_pass():
    row = probe_point(SmmuConfig().with_micro_depth(4), 6)
    # 6 source pages + 1 buffer over 4 LRU entries: every source read misses, the buffer stays hot
    assert (row.smmu_access_total, row.tlb_alloc_read, row.tlb_alloc_write) == (12, 6, 0)


def test_solo_has_no_faults_and_hits():
    r = run_latency_experiment(spec())
    assert r.faults == 0
    assert r.summary.samples == 400
    assert r.summary.min_ns == 180.0


def test_matrix_always_runs_baseline_and_attaches_ratios():
    results = latency_matrix(
        frequencies=[300], enabled=[True], scenarios=[Scenario.INTERF_TBU], base=spec(iterations=200)
    )
    assert [r.spec.scenario for r in results] == [Scenario.INTERF_TBU]
    assert results[0].summary.ratio_avg > 1.2


def test_same_seed_same_result():
    a = run_latency_experiment(spec(scenario=Scenario.INTERF_TBU, seed=7))
    b = run_latency_experiment(spec(scenario=Scenario.INTERF_TBU, seed=7))
    assert a.summary == b.summary


@settings(max_examples=6, deadline=None)
@given(
    freq=st.sampled_from([100, 150, 300]),
    scenario=st.sampled_from([Scenario.INTERF_TBU, Scenario.INTERF_TCU]),
    enabled=st.booleans(),
    seed=st.integers(0, 1000),
)
def test_interference_never_lowers_average(freq, scenario, enabled, seed):
    base = spec(fpga_freq_mhz=freq, smmu_enabled=enabled, seed=seed, iterations=300)
    solo = run_latency_experiment(base).summary
    loaded = run_latency_experiment(replace(base, scenario=scenario)).summary
    assert loaded.avg_ns >= solo.avg_ns
    assert loaded.min_ns >= solo.min_ns


@settings(max_examples=5, deadline=None)
@given(micro=st.sampled_from([8, 32, 64, 128]), macro_sets=st.sampled_from([16, 125, 500]))
def test_disabled_smmu_ignores_tlb_geometry(micro, macro_sets):
    cal = default_calibration()
    other = replace(cal, smmu=replace(cal.smmu.with_micro_depth(micro), tcu=TlbConfig(4 * macro_sets, 4)))
    base = spec(smmu_enabled=False, scenario=Scenario.INTERF_TBU, iterations=300)
    assert run_latency_experiment(base).summary == run_latency_experiment(replace(base, calibration=other)).summary


def test_spec_validation():
    with pytest.raises(ValueError):
        spec(iterations=0)
    with pytest.raises(ValueError):
        spec(warmup_iterations=-1)
