"""
Configuration settings for qareuse.

This module provides a `Config` class that encapsulates every tunable of the
pipeline: post filtering, snippet extraction, clone detection and sharding,
commit attribution, license detection, remote downloads and logging. Values
come from built-in defaults, an optional INI profile file, ``QAREUSE_*``
environment variables and finally command-line flags, in that order.
"""

import configparser
import os
from datetime import datetime
from typing import Any, Dict, Iterable, Mapping, Optional

from .exceptions import ConfigurationError
from .models import CloneConfig, NormalizationLevel
from .utils import parse_datetime, format_datetime

ENV_PREFIX = "QAREUSE_"

_INT_FIELDS = {
    "min_lines", "shard_size_qa", "shard_size_app", "header_lines",
    "ambiguity_window_days", "workers", "max_retries", "request_timeout",
    "queue_size",
}
_FLOAT_FIELDS = {
    "similarity_threshold", "match_fraction", "license_confidence_floor",
    "retry_delay", "backoff_factor",
}
_BOOL_FIELDS = {"inherit_question_tags", "show_progress", "inconsistent_files_only"}
_SET_FIELDS = {"required_tags", "source_extensions"}


class Config:
    """Configuration class for qareuse settings"""

    def __init__(self):
        # Q&A ingestion
        self.required_tags = {"java", "android"}
        self.date_ceiling: Optional[datetime] = None
        self.inherit_question_tags = False
        self.min_lines = 10
        self.queue_size = 1024

        # Application ingestion
        self.source_extensions = {".java"}
        self.header_lines = 60
        self.inconsistent_files_only = False

        # Clone detection
        self.similarity_threshold = 0.70
        self.normalization_level = NormalizationLevel.TYPE2
        self.shard_size_qa = 2000
        self.shard_size_app = 800
        self.workers = 1

        # Attribution
        self.match_fraction = 0.9
        self.ambiguity_window_days = 2

        # Licenses
        self.license_confidence_floor = 0.5
        self.qa_domains = ("stackoverflow.com", "stackexchange.com")

        # HTTP settings
        self.request_timeout = 30
        self.max_retries = 3
        self.retry_delay = 1
        self.backoff_factor = 2

        # Logging
        self.show_progress = True
        self.log_level = "INFO"
        self.log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    def update(self, **overrides: Any) -> "Config":
        """
        Apply overrides, ignoring ``None`` values (unset CLI flags)

        Args:
            **overrides: Attribute names and their new values

        Returns:
            Config: This instance, for chaining
        """
        for name, value in overrides.items():
            if value is None:
                continue
            if not hasattr(self, name):
                raise ConfigurationError(f"Unknown configuration option: {name}")
            try:
                setattr(self, name, self._coerce(name, value))
            except ValueError as exc:
                raise ConfigurationError(f"Invalid value for {name}: {value!r}") from exc
        return self

    def load_file(self, path: str, profile: str = "default") -> "Config":
        """Load a profile section from an INI file; ``[default]`` is applied first"""
        parser = configparser.ConfigParser()
        if not parser.read(path, encoding="utf-8"):
            raise ConfigurationError(f"Configuration file not found: {path}")

        if profile != "default" and not parser.has_section(profile):
            raise ConfigurationError(f"Profile '{profile}' not found in {path}")

        sections = ["default"] if profile == "default" else ["default", profile]
        for section in sections:
            if parser.has_section(section):
                self.update(**dict(parser.items(section)))
        return self

    def update_from_env(self, environ: Optional[Mapping[str, str]] = None) -> "Config":
        """Update configuration from QAREUSE_* environment variables"""
        environ = os.environ if environ is None else environ
        overrides = {}
        for key, value in environ.items():
            if key.startswith(ENV_PREFIX):
                name = key[len(ENV_PREFIX):].lower()
                if hasattr(self, name):
                    overrides[name] = value
        return self.update(**overrides)

    def _coerce(self, name: str, value: Any) -> Any:
        if name in _INT_FIELDS:
            return int(value)
        if name in _FLOAT_FIELDS:
            return float(value)
        if name in _BOOL_FIELDS:
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if name in _SET_FIELDS:
            return _as_set(value)
        if name == "normalization_level":
            if isinstance(value, NormalizationLevel):
                return value
            return NormalizationLevel(str(value).upper())
        if name == "date_ceiling":
            if isinstance(value, datetime) or value is None:
                return value
            parsed = parse_datetime(str(value))
            if parsed is None:
                raise ConfigurationError(f"Invalid date ceiling: {value}")
            return parsed
        if name == "qa_domains":
            return tuple(sorted(_as_set(value)))
        return value

    def validate(self) -> bool:
        """Validate configuration settings"""
        if not 0 < self.similarity_threshold <= 1:
            raise ConfigurationError("Similarity threshold must be in (0, 1]")

        if self.min_lines < 1:
            raise ConfigurationError("Minimum lines must be at least 1")

        if self.shard_size_qa < 1 or self.shard_size_app < 1:
            raise ConfigurationError("Shard sizes must be at least 1")

        if not 0 < self.match_fraction <= 1:
            raise ConfigurationError("Match fraction must be in (0, 1]")

        if self.ambiguity_window_days < 0:
            raise ConfigurationError("Ambiguity window cannot be negative")

        if not self.required_tags:
            raise ConfigurationError("At least one required tag is needed")

        if self.workers < 1:
            raise ConfigurationError("Workers must be at least 1")

        if self.max_retries < 0:
            raise ConfigurationError("Max retries cannot be negative")

        if self.request_timeout <= 0:
            raise ConfigurationError("Request timeout must be positive")

        return True

    def clone_config(self) -> CloneConfig:
        """Build the immutable clone engine settings"""
        self.validate()
        return CloneConfig(
            min_lines=self.min_lines,
            similarity_threshold=self.similarity_threshold,
            normalization_level=self.normalization_level,
            shard_size_a=self.shard_size_qa,
            shard_size_b=self.shard_size_app,
        )

    def snapshot(self) -> Dict[str, Any]:
        """
        Settings that influence results, in a JSON-friendly form.

        Worker count, progress display, HTTP and logging options are left out
        so that reports do not depend on how a run was executed.
        """
        return {
            "similarity_threshold": self.similarity_threshold,
            "min_lines": self.min_lines,
            "normalization_level": self.normalization_level.value,
            "shard_size_qa": self.shard_size_qa,
            "shard_size_app": self.shard_size_app,
            "required_tags": sorted(self.required_tags),
            "date_ceiling": format_datetime(self.date_ceiling),
            "inherit_question_tags": self.inherit_question_tags,
            "source_extensions": sorted(self.source_extensions),
            "header_lines": self.header_lines,
            "inconsistent_files_only": self.inconsistent_files_only,
            "match_fraction": self.match_fraction,
            "ambiguity_window_days": self.ambiguity_window_days,
            "license_confidence_floor": self.license_confidence_floor,
            "qa_domains": sorted(self.qa_domains),
        }


def _as_set(value: Any) -> set:
    if isinstance(value, str):
        return {part.strip().lower() for part in value.split(",") if part.strip()}
    if isinstance(value, Iterable):
        return {str(part).strip().lower() for part in value if str(part).strip()}
    raise ConfigurationError(f"Expected a comma separated list, got {value!r}")


# Global configuration instance
config = Config()
