"""Command-line harness for cryostat channel scenarios.

Example usage:
  python simulate.py run data/cryostat_default.scenario --out results/cryostat
  python simulate.py run data/box.scenario --engine both --rays 1000000
  python simulate.py validate data/cryostat_default.scenario
  python simulate.py describe data/box.scenario --json

Exit codes: 0 ok, 1 usage, 2 schema/validation, 3 runtime tracer failure.
"""
from __future__ import annotations
import argparse, json, logging, sys
from pathlib import Path
from typing import List, Optional
import config
from modules.errors import CryoChannelError, ScenarioError, TracerError
from modules.scenario import check_scenario, load_scenario, validate
from modules.simulation import run_scenario, summarize
from utils.helpers import format_frequency

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_TRACER = 0, 1, 2, 3

logger = logging.getLogger("simulate")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simulate", description="Geometric multipath channel simulation for cryostat enclosures.")
    parser.add_argument("--log-level", default=None, help="Override CRYO_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="Trace every link and write the artifacts")
    run.add_argument("scenario", help="Scenario JSON file")
    run.add_argument("--out", help="Output directory (default: scenario output_dir, then CRYO_OUTPUT_DIR)")
    run.add_argument("--engine", choices=["images", "rays", "both"], help="Propagation engine")
    run.add_argument("--rays", type=int, help="Ray count for the ray-launch engine")
    run.add_argument("--bounces", type=int, help="Maximum bounces per ray")
    run.add_argument("--json", action="store_true", help="Print the manifest instead of the summary")

    for name, text in (("validate", "List schema and invariant violations"),
                       ("describe", "Print the resolved scene and antenna layout")):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("scenario", help="Scenario JSON file")
        cmd.add_argument("--json", action="store_true", help="Output raw JSON only")
    return parser


def _print_diagnostics(diagnostics, as_json: bool):
    if as_json:
        print(json.dumps([{"location": d.location, "message": d.message} for d in diagnostics], indent=2))
        return
    for d in diagnostics:
        logger.error("%s", d)


def cmd_validate(args) -> int:
    diagnostics = validate(args.scenario)
    _print_diagnostics(diagnostics, args.json)
    if not args.json:
        print(f"{args.scenario}: {'valid' if not diagnostics else f'{len(diagnostics)} problem(s)'}")
    return EXIT_OK if not diagnostics else EXIT_INVALID


def cmd_describe(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as e:
        _print_diagnostics(e.diagnostics, args.json)
        return EXIT_INVALID
    try:
        surfaces = scenario.build_scene().describe()
    except CryoChannelError as e:
        logger.error("%s", e)
        return EXIT_INVALID
    report = {"parameters": scenario.resolved(), "surfaces": surfaces, "defaults_filled": list(scenario.defaults)}
    if args.json:
        print(json.dumps(report, indent=2, default=str))
        return EXIT_OK
    print(f"\n=== Scenario {scenario.name} ===")
    print(f"Scene: {scenario.scene_kind} | engine: {scenario.engine} | f = {format_frequency(scenario.frequency)}")
    for s in surfaces:
        print(f"  [{s['index']}] {s['label']:<12} {s['shape']:<10} {s['material']}")
    layout = scenario.layout
    print(f"TX {layout.tx_label}: {layout.tx_position.tolist()}")
    for label, position in layout.rx_positions:
        print(f"RX {label}: {position.tolist()}  ({layout.separation(label) * 1e3:.2f} mm)")
    for d in check_scenario(scenario):
        print(f"  ! {d}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as e:
        _print_diagnostics(e.diagnostics, False)
        return EXIT_INVALID
    if args.rays is not None and args.rays < 1:
        logger.error("--rays must be positive")
        return EXIT_USAGE
    if args.bounces is not None and args.bounces < 0:
        logger.error("--bounces must be non-negative")
        return EXIT_USAGE
    scenario = scenario.with_overrides(engine=args.engine, ray_count=args.rays, max_bounces=args.bounces,
                                       output_dir=args.out)
    try:
        result = run_scenario(scenario)
    except ScenarioError as e:
        _print_diagnostics(e.diagnostics, False)
        return EXIT_INVALID
    except TracerError as e:
        logger.error("%s", e)
        return EXIT_TRACER
    if args.json:
        print((Path(result.output_dir) / "manifest.json").read_text(encoding="utf-8"), end="")
    else:
        print("\n".join(summarize(result)))
        print("\nDone.")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    config.configure_logging(args.log_level)
    handlers = {"run": cmd_run, "validate": cmd_validate, "describe": cmd_describe}
    try:
        return handlers[args.command](args)
    except OSError as e:
        logger.error("cannot read scenario: %s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
