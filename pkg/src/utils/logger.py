"""
Logging configuration module.
"""
import logging
import os
import sys
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Logger emitting one JSON record per time step at DEBUG
STEP_LOGGER = 'src.simulation_service'

_TRUE = ('1', 'true', 'yes', 'on')


def setup_logger(log_level: Optional[str] = None, step_records: Optional[bool] = None) -> None:
    """
    Configure the root logger on stderr so CSV written to stdout stays clean.

    Per-step records are only emitted when asked for; at DEBUG a long run
    would otherwise log every step.

    Args:
        log_level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL); falls back to LOG_LEVEL
        step_records: Emit per-step JSON records; falls back to SAVNLS_LOG_STEPS

    Raises:
        ValueError: For an unknown level name
    """
    if log_level is None:
        log_level = os.environ.get('LOG_LEVEL', 'INFO')
    if step_records is None:
        step_records = os.environ.get('SAVNLS_LOG_STEPS', '').strip().lower() in _TRUE

    numeric_level = getattr(logging, log_level.upper(), None)
    if not isinstance(numeric_level, int):
        raise ValueError(f"Invalid log level: {log_level}")

    logging.basicConfig(
        level=numeric_level,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )
    step_level = logging.DEBUG if step_records else max(numeric_level, logging.INFO)
    logging.getLogger(STEP_LOGGER).setLevel(step_level)
