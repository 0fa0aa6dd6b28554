"""
Logging configuration for the texture attack engine
"""

import logging
import os
import sys
from typing import Any, Optional

from config.settings import Settings


class Logger:
    """Centralized logging configuration"""

    @staticmethod
    def setup_logger(name: str = 'src', level: int = logging.INFO,
                     log_file: Optional[str] = None) -> logging.Logger:
        """Setup and configure logger"""

        logger = logging.getLogger(name)
        logger.setLevel(level)

        formatter = logging.Formatter(
            Settings.LOG_SETTINGS['format'],
            datefmt=Settings.LOG_SETTINGS['date_format']
        )

        # Prevent duplicate handlers, but honour level changes and new log files
        has_console = any(getattr(h, '_fashionadv_console', False) for h in logger.handlers)
        if not has_console:
            console_handler = logging.StreamHandler(sys.stdout)
            console_handler.setFormatter(formatter)
            console_handler._fashionadv_console = True
            logger.addHandler(console_handler)

        for handler in logger.handlers:
            handler.setLevel(level)

        if log_file:
            Logger.add_file_handler(logger, log_file, level)

        return logger

    @staticmethod
    def add_file_handler(logger: logging.Logger, log_file: str, level: int = logging.INFO) -> None:
        """Attach a file handler unless one already writes to the same path"""
        for handler in logger.handlers:
            if isinstance(handler, logging.FileHandler) and handler.baseFilename == os.path.abspath(log_file):
                return
        try:
            file_handler = logging.FileHandler(log_file)
            file_handler.setLevel(level)
            file_handler.setFormatter(logging.Formatter(
                Settings.LOG_SETTINGS['format'],
                datefmt=Settings.LOG_SETTINGS['date_format']
            ))
            logger.addHandler(file_handler)
        except OSError as e:
            logger.warning(f"Could not create file handler: {e}")

    @staticmethod
    def remove_file_handler(logger: logging.Logger, log_file: str) -> None:
        """Detach and close the file handler writing to ``log_file``"""
        for handler in list(logger.handlers):
            if isinstance(handler, logging.FileHandler) and handler.baseFilename == os.path.abspath(log_file):
                logger.removeHandler(handler)
                handler.close()

    @staticmethod
    def get_logger(name: str = __name__) -> logging.Logger:
        """Get existing logger or create new one"""
        return logging.getLogger(name)

    @staticmethod
    def event(logger: logging.Logger, event: str, level: int = logging.INFO, **fields: Any) -> None:
        """Log a structured ``event key=value ...`` line"""
        if not logger.isEnabledFor(level):
            return
        parts = [event]
        for key, value in fields.items():
            if isinstance(value, float):
                parts.append(f"{key}={value:.6g}")
            else:
                parts.append(f"{key}={value}")
        logger.log(level, ' '.join(parts))
