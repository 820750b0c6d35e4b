import pytest

from smmusim.config import SEED_ENV, ConfigError, load_config, parse_config
from smmusim.experiments import Scenario, default_calibration
from smmusim.simcore import ns
from smmusim.tlb import Replacement
from smmusim.traffic import Jitter


def test_empty_config_uses_defaults():
    cfg = parse_config({}, env={})
    assert cfg.calibration == default_calibration()
    assert cfg.scenarios == list(Scenario)
    assert cfg.frequencies_mhz == [100, 150, 300]
    assert (cfg.iterations, cfg.warmup, cfg.seed) == (10_000, 3, 0)


@pytest.mark.parametrize(
    "raw",
    [
        {"iteratons": 5},
        {"calibration": {"latencies_ns": {"t_walk": 100}}},
        {"calibration": {"micro_tlb": {"depth": 8, "ways": 2}}},
        {"scenarios": ["solo", "crowded"]},
        {"payloads": [8]},
        {"iterations": 0},
    ],
)
def test_invalid_documents_rejected(raw):
    with pytest.raises(ConfigError):
        parse_config(raw, env={})


def test_inconsistent_calibration_rejected():
    with pytest.raises(ConfigError):
        parse_config({"calibration": {"macro_tlb": {"depth": 10, "associativity": 4}}}, env={})


def test_calibration_overrides():
    cfg = parse_config(
        {
            "calibration": {
                "latencies_ns": {"t_ptw": 50},
                "micro_tlb": {"depth": 8, "replacement": "fifo"},
                "macro_tlb": {"depth": 1000},
                "memory": {"jitter": "none", "service_time_per_beat_ns": 3},
                "interference": {"base_cycles": 40},
                "in_order_responses": True,
            }
        },
        env={},
    )
    cal = cfg.calibration
    assert cal.smmu.latencies.t_ptw == ns(50)
    assert all(c.depth == 8 and c.replacement is Replacement.FIFO for _, c in cal.smmu.tbus)
    assert (cal.smmu.tcu.depth, cal.smmu.tcu.associativity) == (1000, 4)
    assert cal.memory.jitter is Jitter.NONE
    assert cal.memory.service_time_per_beat == ns(3)
    assert cal.interf_base_cycles == 40
    assert cal.smmu.in_order_responses


def test_seed_env_overrides_file(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text("seed: 4\n")
    assert load_config(p, env={}).seed == 4
    assert load_config(p, env={SEED_ENV: "99"}).seed == 99
    with pytest.raises(ConfigError):
        load_config(p, env={SEED_ENV: "abc"})


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml", env={})
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(bad, env={})
    broken = tmp_path / "broken.yaml"
    broken.write_text("seed: [1\n")
    with pytest.raises(ConfigError):
        load_config(broken, env={})


def test_empty_file_is_defaults(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    assert load_config(p, env={}).iterations == 10_000


def test_shipped_example_config_matches_defaults():
    from pathlib import Path

    example = Path(__file__).resolve().parent.parent / "configs" / "default.yaml"
    cfg = load_config(example, env={})
    assert cfg.calibration == default_calibration()
    assert cfg == parse_config({}, env={})
