"""
Run logging for mapping pipelines and benchmarks.

Lines are written bash-style (``[timestamp] [LEVEL] message``) to the console
and optionally mirrored to a size-rotated log file, so that long benchmark runs
leave a readable trail next to their CSV output.
"""

from __future__ import annotations

import platform
import sys
import traceback
from datetime import datetime
from pathlib import Path

MAX_BYTES = 1048576 * 100  # 100 MB

_LEVELS = ("DEBUG", "INFO", "WARN", "ERROR")


class MapLogger:
    def __init__(
        self,
        debug: bool = False,
        quiet: bool = False,
        output_path: Path | str | None = None,
        max_bytes: int = MAX_BYTES,
    ):
        self.debug_enabled = debug
        self.quiet = quiet
        self.output_path = Path(output_path) if output_path else None
        self.max_bytes = max_bytes

    def _ensure_logfile(self) -> None:
        if self.output_path and not self.output_path.exists():
            self.output_path.parent.mkdir(exist_ok=True, parents=True)
            self.output_path.touch()

    def _rotate_if_needed(self) -> None:
        """Move the log file to ``<name>.old`` once it grows past ``max_bytes``."""
        if self.output_path and self.output_path.exists():
            if self.output_path.stat().st_size > self.max_bytes:
                backup = self.output_path.with_suffix(self.output_path.suffix + ".old")
                if backup.exists():
                    backup.unlink()
                self.output_path.rename(backup)

    @staticmethod
    def _library_versions() -> str:
        """Versions of the numerical stack, for reproducibility notes in run logs."""
        import numpy
        import scipy

        return f"numpy {numpy.__version__}, scipy {scipy.__version__}"

    def log_startup(self, run_name: str, version: str | None = None) -> None:
        """
        Log a banner at the start of a run.

        :param run_name: Name of the command or experiment being run
        :type run_name: str
        :param version: Package version, defaults to None
        :type version: str | None, optional
        """
        self.info(f"{'=' * 50}", startup=True)
        self.info(f"Run: {run_name}")
        if version:
            self.info(f"pyroomgp: {version}")
        self.info(f"Python: {platform.python_version()}")
        self.info(self._library_versions())
        self.info(f"{'=' * 50}")

    def update_log(
        self, level: str, message: str, startup: bool = False, exit_code: int | None = None
    ) -> None:
        """
        Log a message with the specified level and optionally exit.

        :param level: The log level (debug, info, warn, error)
        :type level: str
        :param message: The message to log
        :type message: str
        :param startup: If True, prefix the line with a blank line
        :type startup: bool, defaults to False
        :param exit_code: If provided, exit with this code after logging, defaults to None
        :type exit_code: int | None, optional
        :raises ValueError: If ``level`` is not a known level
        """
        level_upper = level.upper()
        if level_upper not in _LEVELS:
            raise ValueError(f"Unknown log level '{level}'. Supported levels: {', '.join(_LEVELS)}")

        suppressed = (level_upper == "DEBUG" and not self.debug_enabled) or (
            level_upper in ("INFO", "DEBUG") and self.quiet
        )
        if not suppressed:
            timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
            line = f"[{timestamp}] [{level_upper}] {message.strip()}"
            if startup:
                line = f"\n{line}"

            stream = sys.stderr if level_upper == "ERROR" else sys.stdout
            stream.write(f"{line}\n")

            if self.output_path:
                self._rotate_if_needed()
                self._ensure_logfile()
                with open(self.output_path, "a") as log_file:
                    log_file.write(f"{line}\n")

        if exit_code is not None:
            sys.exit(exit_code)

    def debug(self, message: str, exit_code: int | None = None) -> None:
        """Log a DEBUG message."""
        self.update_log("debug", message, exit_code=exit_code)

    def info(
        self, message: str, startup: bool | None = False, exit_code: int | None = None
    ) -> None:
        """Log an INFO message."""
        self.update_log("info", message, bool(startup), exit_code)

    def warn(self, message: str, exit_code: int | None = None) -> None:
        """Log a WARN message."""
        self.update_log("warn", message, exit_code=exit_code)

    def error(self, message: str, exit_code: int | None = None) -> None:
        """Log an ERROR message."""
        self.update_log("error", message, exit_code=exit_code)

    def get_log_path(self) -> Path | None:
        """Return the log file path if configured."""
        return self.output_path

    def flush(self) -> None:
        sys.stdout.flush()
        sys.stderr.flush()

    def log_exception(self, message: str, exc: Exception, exit_code: int | None = None) -> None:
        """Log an exception with full traceback."""
        tb = "".join(traceback.format_exception(type(exc), exc, exc.__traceback__))
        self.update_log("error", f"{message}\n{tb}", exit_code=exit_code)
