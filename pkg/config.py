import logging
import os
try:
	from dotenv import load_dotenv  # type: ignore
	load_dotenv()
except Exception:
	pass

def _setting(name: str, default: str | None = None):
	# Env var wins, then the built-in default
	if name in os.environ:
		return os.environ[name]
	return default

# Output / logging
OUTPUT_DIR = _setting("CRYO_OUTPUT_DIR", "results")
LOG_LEVEL = _setting("CRYO_LOG_LEVEL", "INFO")

# Physical constants fixed as exact values
EPSILON_0 = 8.8541878128e-12  # F/m
SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Design point
DESIGN_FREQUENCY = float(_setting("CRYO_DESIGN_FREQUENCY_HZ", "28e9"))

# Ray launcher
RAY_COUNT = int(_setting("CRYO_RAY_COUNT", "1000000"))
MAX_BOUNCES = int(_setting("CRYO_MAX_BOUNCES", "12"))
RAY_BATCH_SIZE = int(_setting("CRYO_RAY_BATCH_SIZE", "131072"))
TRACE_WORKERS = int(_setting("CRYO_TRACE_WORKERS", "4"))
MIN_CONVERGENT_RAYS = 1_000_000
MAX_IMAGE_ORDER = 6
GEOMETRY_EPSILON = 1e-6  # m, self-intersection guard

# Channel synthesis
BANDWIDTH = float(_setting("CRYO_BANDWIDTH_HZ", "5e9"))
SAMPLE_INTERVAL = float(_setting("CRYO_SAMPLE_INTERVAL_S", "20e-12"))
PULSE_SHAPE = _setting("CRYO_PULSE_SHAPE", "rrc")
RRC_ROLL_OFF = float(_setting("CRYO_RRC_ROLL_OFF", "0.25"))
PULSE_HALF_SPAN = 4  # symbol widths on each side

# Metrics
PDP_THRESHOLD_DB = float(_setting("CRYO_PDP_THRESHOLD_DB", "-40"))

# Scene defaults not published for the reference cryostat
SHIELD_CONDUCTIVITY = float(_setting("CRYO_SHIELD_CONDUCTIVITY", "2.9e8"))
TUBE_RADIUS = float(_setting("CRYO_TUBE_RADIUS_M", "0.02"))

def configure_logging(level: str | None = None):
	logging.basicConfig(
		level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
		format="%(asctime)s %(levelname)s %(name)s: %(message)s",
	)
