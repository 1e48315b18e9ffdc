"""Logging configuration for the application."""

import json
import logging
import sys
from typing import Optional

from app.core.config import settings

LOG_LEVEL_MAP = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}

DEFAULT_LOG_LEVEL = LOG_LEVEL_MAP.get(settings.LOG_LEVEL.upper(), logging.INFO)

# Attributes every LogRecord carries; anything else arrived through ``extra=``.
_RESERVED_ATTRS = frozenset(
    logging.LogRecord("", 0, "", 0, "", None, None).__dict__.keys()
) | {"message", "asctime"}


class JSONFormatter(logging.Formatter):
    """
    Formatter that outputs one JSON object per record.

    @param dict fmt_dict: Key: logging format attribute pairs. Defaults to {"message": "message"}.
    @param str time_format: time.strftime() format string. Default: "%Y-%m-%dT%H:%M:%S"
    @param str msec_format: Microsecond formatting. Appended at the end. Default: "%s.%03dZ"

    Structured context passed as ``logger.info(..., extra={"scene_id": ...})`` is merged
    into the object under its own key.
    """

    def __init__(
        self,
        fmt_dict: Optional[dict] = None,
        time_format: str = "%Y-%m-%dT%H:%M:%S",
        msec_format: str = "%s.%03dZ",
    ):
        super().__init__()
        self.fmt_dict = fmt_dict if fmt_dict is not None else {"message": "message"}
        self.default_time_format = time_format
        self.default_msec_format = msec_format
        self.datefmt = None

    def usesTime(self) -> bool:
        return "asctime" in self.fmt_dict.values()

    def formatMessage(self, record) -> dict:
        message_dict = {
            fmt_key: record.__dict__[fmt_val]
            for fmt_key, fmt_val in self.fmt_dict.items()
        }
        for key, value in record.__dict__.items():
            if key not in _RESERVED_ATTRS and not key.startswith("_"):
                message_dict[key] = value
        return message_dict

    def format(self, record) -> str:
        record.message = record.getMessage()

        if self.usesTime():
            record.asctime = self.formatTime(record, self.datefmt)

        message_dict = self.formatMessage(record)

        if record.exc_info and not record.exc_text:
            record.exc_text = self.formatException(record.exc_info)

        if record.exc_text:
            message_dict["exc_info"] = record.exc_text

        if record.stack_info:
            message_dict["stack_info"] = self.formatStack(record.stack_info)

        return json.dumps(message_dict, default=str)


def set_log_level(level: str) -> None:
    """Change the level of every logger created through ``setup_logger``."""
    resolved = LOG_LEVEL_MAP.get(level.upper())
    if resolved is None:
        raise ValueError(f"Unknown log level: {level}")
    for name in list(logging.Logger.manager.loggerDict):
        candidate = logging.getLogger(name)
        if getattr(candidate, "_selfhdr_configured", False):
            candidate.setLevel(resolved)
            for handler in candidate.handlers:
                handler.setLevel(resolved)


def setup_logger(name: Optional[str] = None) -> logging.Logger:
    """Set up and return a logger instance writing to stderr."""
    logger_name = name if name else __name__
    logger = logging.getLogger(logger_name)

    # Only set up handlers if they haven't been set up already
    if not logger.handlers:
        logger.setLevel(DEFAULT_LOG_LEVEL)
        logger.propagate = False

        # stdout is reserved for command output
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(DEFAULT_LOG_LEVEL)

        if settings.LOG_JSON:
            formatter = JSONFormatter(
                {
                    "level": "levelname",
                    "message": "message",
                    "loggerName": "name",
                    "timestamp": "asctime",
                }
            )
        else:
            formatter = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
        console_handler.setFormatter(formatter)

        logger.addHandler(console_handler)
        logger._selfhdr_configured = True

    return logger


# Default application logger
logger = setup_logger("app")
