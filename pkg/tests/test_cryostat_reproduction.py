"""End-to-end runs of the reference cryostat; slow, deselect with -m "not slow"."""
from pathlib import Path

import pandas as pd
import pytest

from modules.scenario import load_scenario
from modules.simulation import run_scenario

SCENARIO = Path(__file__).resolve().parent.parent / "data" / "cryostat_default.scenario"

pytestmark = pytest.mark.slow


def test_reference_cryostat_is_rich_in_multipath(tmp_path):
    result = run_scenario(load_scenario(SCENARIO), output_dir=tmp_path)
    assert [link.label for link in result.links] == ["B1", "B2", "B3", "B4", "B5", "B6"]
    for link in result.links:
        assert link.metrics.path_count >= 10, link.label
        assert link.metrics.rms_delay_spread > 0
        assert link.metrics.received_energy > 0
    assert set(result.acceptance) == {"min_paths_per_link", "delay_spread_range", "received_power_spread_db",
                                      "max_coherence_bandwidth_hz"}
    failed = {name: check["value"] for name, check in result.acceptance.items() if not check["passed"]}
    assert not failed

    spreads = [link.metrics.rms_delay_spread for link in result.links]
    assert all(0.1e-9 <= s <= 1.5e-9 for s in spreads)
    assert sum(0.3e-9 <= s <= 0.7e-9 for s in spreads) >= 4
    assert result.acceptance["received_power_spread_db"]["value"] <= 6.0
    assert max(1.0 / s for s in spreads) <= 5e9

    sweep = pd.read_csv(tmp_path / "snr_sweep.csv")
    assert len(sweep) == 6 * 3 * 5
    for (_, _), group in sweep.groupby(["link_label", "noise_model"]):
        assert group.sort_values("bandwidth_hz")["snr_db"].is_monotonic_decreasing


def test_reduced_cryostat_run_is_deterministic(tmp_path):
    scenario = load_scenario(SCENARIO).with_overrides(ray_count=100_000, max_bounces=6)
    run_scenario(scenario, output_dir=tmp_path / "a")
    run_scenario(scenario, output_dir=tmp_path / "b")
    for path in sorted((tmp_path / "a").iterdir()):
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes(), path.name
