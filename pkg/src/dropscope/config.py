"""Service configuration: JSON file with environment-variable overrides.

Recognized file keys: ``listen`` ("host:port"), ``activity_path``,
``cohort_path``, ``mapping_path``, ``admin_token``, ``cors_origin``.
Each has a ``DROPSCOPE_*`` environment override that wins over the file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping


class ConfigError(ValueError):
    """Malformed or incomplete service configuration."""


@dataclass(frozen=True)
class ServiceConfig:
    activity_path: str
    cohort_path: str
    admin_token: str
    mapping_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    cors_origin: str | None = None


_ENV_KEYS = {
    "listen": "DROPSCOPE_LISTEN",
    "activity_path": "DROPSCOPE_ACTIVITY_PATH",
    "cohort_path": "DROPSCOPE_COHORT_PATH",
    "mapping_path": "DROPSCOPE_MAPPING_PATH",
    "admin_token": "DROPSCOPE_ADMIN_TOKEN",
    "cors_origin": "DROPSCOPE_CORS_ORIGIN",
}


def _parse_listen(listen: str) -> tuple[str, int]:
    host, _, port_text = listen.rpartition(":")
    if not host or not port_text.isdigit():
        raise ConfigError(f"listen must look like host:port, got {listen!r}")
    return host, int(port_text)


def load_service_config(
    path: str | Path | None, env: Mapping[str, str] | None = None
) -> ServiceConfig:
    """Merge the optional config file with environment overrides."""
    env = os.environ if env is None else env
    values: dict = {}
    if path is not None:
        try:
            values = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    for key, env_key in _ENV_KEYS.items():
        if env_key in env:
            values[key] = env[env_key]

    host, port = "127.0.0.1", 8000
    if "listen" in values:
        host, port = _parse_listen(str(values["listen"]))
    missing = [key for key in ("activity_path", "cohort_path", "admin_token") if not values.get(key)]
    if missing:
        raise ConfigError(f"missing required config value(s): {', '.join(missing)}")
    return ServiceConfig(
        activity_path=str(values["activity_path"]),
        cohort_path=str(values["cohort_path"]),
        admin_token=str(values["admin_token"]),
        mapping_path=str(values["mapping_path"]) if values.get("mapping_path") else None,
        host=host,
        port=port,
        cors_origin=str(values["cors_origin"]) if values.get("cors_origin") else None,
    )
