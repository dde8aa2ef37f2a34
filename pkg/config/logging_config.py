import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from pythonjsonlogger import jsonlogger

from .settings import settings


CONSOLE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
JSON_FORMAT = '%(asctime)s %(name)s %(levelname)s %(message)s'


def setup_logging(level: Optional[str] = None, log_file: Optional[Path] = None) -> None:
    """
    Configure the root logger for a command-line run.

    Console output is plain text; the rotating log file receives one JSON
    object per record.

    Args:
        level: Log level name, defaults to settings.LOG_LEVEL
        log_file: Log file path, defaults to settings.LOG_DIR / settings.LOG_FILE
    """
    level = (level or settings.LOG_LEVEL).upper()
    log_file = Path(log_file) if log_file else settings.LOG_DIR / settings.LOG_FILE
    log_file.parent.mkdir(parents=True, exist_ok=True)

    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=10 * 1024 * 1024,  # 10MB
        backupCount=5
    )
    file_handler.setFormatter(jsonlogger.JsonFormatter(JSON_FORMAT))

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))

    logging.basicConfig(
        level=getattr(logging, level),
        handlers=[file_handler, console_handler],
        force=True
    )
