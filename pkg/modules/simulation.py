"""Scenario execution: trace every link, synthesize channels, write artifacts."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

import config
from modules import export
from modules.channel import ChannelImpulseResponse, FrequencyResponse, frequency_grid, frequency_response, \
    synthesize_cir, transmission_db
from modules.errors import CryoChannelError, ScenarioError, TracerError
from modules.metrics import LinkMetrics, link_metrics, power_spread_db, snr_sweep
from modules.propagation import PathComponent, compare_engines, trace_images, trace_rays_multi
from modules.scenario import Scenario, check_scenario
from utils.helpers import format_delay, linear_to_db, sha256_file

logger = logging.getLogger(__name__)

EMPTY_LINK = "no_paths"


@dataclass
class LinkResult:
    label: str
    paths: List[PathComponent]
    cir: ChannelImpulseResponse
    response: FrequencyResponse
    metrics: LinkMetrics
    reference_paths: Optional[List[PathComponent]] = None  # image-source paths when both engines ran


@dataclass
class RunResult:
    scenario: Scenario
    links: List[LinkResult]
    output_dir: Path
    artifacts: Dict[str, str] = field(default_factory=dict)
    acceptance: Dict[str, Any] = field(default_factory=dict)
    agreement: Optional[pd.DataFrame] = None

    @property
    def empty_links(self) -> List[str]:
        return [link.label for link in self.links if not link.paths]


def trace_links(scenario: Scenario) -> Dict[str, Dict[str, List[PathComponent]]]:
    """Paths per engine per receiver label."""
    scene = scenario.build_scene()
    tx_antenna, rx_antenna = scenario.antennas()
    tx = scenario.layout.tx_position
    labels = scenario.layout.rx_labels
    receivers = [position for _, position in scenario.layout.rx_positions]
    traced: Dict[str, Dict[str, List[PathComponent]]] = {}
    try:
        if scenario.engine in ("images", "both"):
            def image_link(rx):
                return trace_images(scene, tx, rx, scenario.max_order, frequency=scenario.frequency,
                                    tx_antenna=tx_antenna, rx_antenna=rx_antenna)
            with ThreadPoolExecutor(max_workers=config.TRACE_WORKERS) as executor:
                traced["images"] = dict(zip(labels, executor.map(image_link, receivers)))
        if scenario.engine in ("rays", "both"):
            per_rx = trace_rays_multi(scene, tx, receivers, scenario.ray_count, scenario.max_bounces,
                                      scenario.rx_radius, frequency=scenario.frequency, tx_antenna=tx_antenna,
                                      rx_antenna=rx_antenna)
            traced["rays"] = dict(zip(labels, per_rx))
    except CryoChannelError as e:
        raise TracerError(f"tracing failed: {e}") from e
    except (FloatingPointError, MemoryError) as e:
        raise TracerError(f"tracing failed: {e!r}") from e
    return traced


def _link(scenario: Scenario, label: str, paths: List[PathComponent],
          reference: Optional[List[PathComponent]]) -> LinkResult:
    cir = synthesize_cir(paths, scenario.cir_bandwidth, sample_interval=scenario.sample_interval,
                         pulse=scenario.pulse, roll_off=scenario.roll_off, carrier_frequency=scenario.frequency)
    grid = frequency_grid(scenario.frequency, scenario.response_span, scenario.response_points)
    response = frequency_response(paths, grid, reference_frequency=scenario.frequency)
    s21 = transmission_db(response, scenario.frequency) if paths else float("-inf")
    metrics = link_metrics(label, paths, scenario.p_tx, scenario.noise_models, scenario.bandwidths,
                           distance=scenario.layout.separation(label), transmission=s21)
    return LinkResult(label, paths, cir, response, metrics, reference)


def _warn_empty(scenario: Scenario, label: str):
    if scenario.engine != "images" and scenario.ray_count >= config.MIN_CONVERGENT_RAYS:
        logger.warning("Link %s did not converge: 0 paths received with %d rays", label, scenario.ray_count)
    else:
        logger.warning("Link %s received no paths", label)


def acceptance_checks(links: List[LinkResult]) -> Dict[str, Any]:
    """Reverberant-enclosure properties expected of the reference cryostat"""
    metrics = [link.metrics for link in links]
    spreads = [m.rms_delay_spread for m in metrics if m.converged]
    in_band = sum(1 for s in spreads if 0.3e-9 <= s <= 0.7e-9)
    coherence = [m.coherence_bandwidth_estimate for m in metrics if m.converged]
    power_spread = power_spread_db(metrics)
    checks = {
        "min_paths_per_link": {"value": min((m.path_count for m in metrics), default=0),
                               "passed": all(m.path_count >= 10 for m in metrics)},
        "delay_spread_range": {"value": spreads,
                               "passed": bool(spreads) and all(0.1e-9 <= s <= 1.5e-9 for s in spreads)
                               and in_band >= min(4, len(links))},
        "received_power_spread_db": {"value": power_spread,
                                     "passed": not math.isnan(power_spread) and power_spread <= 6.0},
        "max_coherence_bandwidth_hz": {"value": max(coherence, default=float("nan")),
                                       "passed": bool(coherence) and max(coherence) <= 5e9},
    }
    for name, check in checks.items():
        if not check["passed"]:
            logger.warning("Acceptance check %s not met: %s", name, check["value"])
    return checks


def run_scenario(scenario: Scenario, output_dir: Optional[Path] = None) -> RunResult:
    """Trace, synthesize and export every link of a scenario; writes the run manifest last."""
    diagnostics = check_scenario(scenario)
    if diagnostics:
        raise ScenarioError(diagnostics)
    out = Path(output_dir or scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    logger.info("Running scenario %s (%s engine) into %s", scenario.name, scenario.engine, out)

    traced = trace_links(scenario)
    primary = traced["images"] if scenario.engine in ("images", "both") else traced["rays"]
    labels = scenario.layout.rx_labels
    with ThreadPoolExecutor(max_workers=config.TRACE_WORKERS) as executor:
        links = list(executor.map(
            lambda label: _link(scenario, label, primary[label], traced.get("images", {}).get(label)), labels))
    for link in links:
        if not link.paths:
            _warn_empty(scenario, link.label)

    result = RunResult(scenario, links, out)
    artifacts: List[Path] = []
    for link in links:
        artifacts.append(export.write_paths(link.paths, out / f"paths_{link.label}.csv"))
        artifacts.append(export.write_cir(link.cir, out / f"cir_{link.label}.csv"))
        artifacts.append(export.write_frequency_response(link.response, out / f"freq_response_{link.label}.csv"))
    artifacts.append(export.write_frame(export.metrics_frame(link.metrics for link in links), out / "metrics.csv"))
    sweep = snr_sweep({link.label: link.metrics.received_energy for link in links}, scenario.p_tx,
                      scenario.noise_models, scenario.bandwidths)
    artifacts.append(export.write_frame(sweep, out / "snr_sweep.csv"))
    if scenario.engine == "both":
        frames = []
        for label in labels:
            frame = compare_engines(traced["images"][label], traced["rays"][label])
            frame.insert(0, "link_label", label)
            frames.append(frame)
        result.agreement = pd.concat(frames, ignore_index=True)
        artifacts.append(export.write_frame(result.agreement, out / "engine_agreement.csv"))

    result.artifacts = {p.name: sha256_file(p) for p in sorted(artifacts)}
    if scenario.scene_kind == "cryostat":
        result.acceptance = acceptance_checks(links)
    export.write_json(build_manifest(result), out / "manifest.json")
    return result


def build_manifest(result: RunResult) -> Dict[str, Any]:
    scenario = result.scenario
    return {
        "scenario": {"source": Path(scenario.source).name, "sha256": scenario.digest},
        "seed": scenario.seed,
        "parameters": scenario.resolved(),
        "defaults_filled": sorted(scenario.defaults),
        "overrides": scenario.overrides,
        "links": {link.label: {"paths": len(link.paths),
                               "status": "ok" if link.paths else EMPTY_LINK,
                               "distance_m": link.metrics.distance}
                  for link in result.links},
        "empty_links": result.empty_links,
        "artifacts": result.artifacts,
        "acceptance": result.acceptance,
        "conventions": {"cir": export.BASEBAND_NOTE, "power_units": "watts and dBm, p_tx_w in watts",
                        "float_format": export.FLOAT_FORMAT},
    }


def summarize(result: RunResult) -> List[str]:
    lines = [f"Scenario: {result.scenario.name} ({result.scenario.engine})", f"Output: {result.output_dir}"]
    for link in result.links:
        m = link.metrics
        if not link.paths:
            lines.append(f"  {link.label}: no paths")
            continue
        lines.append(f"  {link.label}: {m.path_count} paths | DS {format_delay(m.rms_delay_spread)} | "
                     f"mean delay {format_delay(m.mean_delay)} | energy {linear_to_db(m.received_energy):.2f} dB")
    for name, check in result.acceptance.items():
        lines.append(f"  check {name}: {'ok' if check['passed'] else 'NOT MET'}")
    return lines
