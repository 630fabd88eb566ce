"""logging_setup.py — structlog configuration for the reap CLI and library.

Configures:
  - one stdlib handler on stderr at the requested level (artifacts never receive log lines)
  - structlog processor chain: contextvars, ISO timestamp, level, logger name, renderer

Usage (in cli.main)::

    from reap.logging_setup import configure_logging, set_log_level
    configure_logging()
    config = load_config(path)
    set_log_level(config.log_level)
"""

from __future__ import annotations

import logging
import sys

import structlog

_logging_configured = False
_handler: logging.Handler | None = None


def configure_logging(level: str = "INFO", *, json_logs: bool = True) -> None:
    """Configure structlog on top of stdlib logging.

    Idempotent: calls after the first are no-ops.

    Args:
        level: stdlib level name (``DEBUG``, ``INFO``, ``WARNING``, ...).
        json_logs: Render JSON lines when true, the console renderer otherwise.
    """
    global _logging_configured, _handler
    if _logging_configured:
        return

    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(logging.Formatter("%(message)s"))
    root = logging.getLogger()
    root.addHandler(_handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))

    renderer: structlog.types.Processor = (
        structlog.processors.JSONRenderer()
        if json_logs
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            renderer,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    _logging_configured = True


def reset_logging() -> None:
    """Reset logging state. Intended for tests."""
    global _logging_configured, _handler
    if _handler is not None:
        logging.getLogger().removeHandler(_handler)
        _handler = None
    _logging_configured = False
    structlog.reset_defaults()


def set_log_level(level: str) -> None:
    """Change the root level of an already configured setup."""
    logging.getLogger().setLevel(getattr(logging, level.upper(), logging.INFO))
