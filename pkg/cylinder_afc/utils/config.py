"""
Run-configuration helpers: TOML loading, dataclass construction with
unknown-key rejection, and stable configuration hashing.
"""

import dataclasses
import hashlib
import json
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from typing import Any, Dict, Iterable, Type, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")


class ConfigurationError(ValueError):
    """Raised for invalid or unknown configuration values."""


def load_toml(file_path: str) -> Dict[str, Any]:
    """
    Read a TOML run configuration.

    Args:
        file_path: Path to the configuration file

    Returns:
        Parsed mapping of section name to section values
    """
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"Config file not found: {file_path}")

    try:
        with open(file_path, "rb") as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"Malformed config file {file_path}: {e}") from e


def check_sections(data: Dict[str, Any], allowed: Iterable[str]) -> None:
    """Reject top-level sections that are not in ``allowed``."""
    allowed = set(allowed)
    for key, value in data.items():
        if key not in allowed:
            raise ConfigurationError(f"Unknown config section [{key}]")
        if not isinstance(value, dict):
            raise ConfigurationError(f"Config entry '{key}' must be a section")


def field_names(cls: Type) -> set:
    return {f.name for f in dataclasses.fields(cls) if f.init}


def build_dataclass(cls: Type[T], values: Dict[str, Any], section: str, base: T = None) -> T:
    """
    Build a config dataclass from a section, rejecting unknown keys.

    Lists are converted to tuples wherever the dataclass default is a tuple,
    since TOML has no tuple type.

    Args:
        cls: Dataclass type to build
        values: Section values from the config file
        section: Section name, used in error messages
        base: Optional instance whose values act as defaults

    Returns:
        New instance of ``cls``
    """
    known = field_names(cls)
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigurationError(f"Unknown key(s) in [{section}]: {', '.join(unknown)}")

    defaults = {}
    if base is not None:
        defaults = {name: getattr(base, name) for name in known}
    else:
        for f in dataclasses.fields(cls):
            if f.default is not dataclasses.MISSING:
                defaults[f.name] = f.default
            elif f.default_factory is not dataclasses.MISSING:
                defaults[f.name] = f.default_factory()

    kwargs = dict(defaults)
    for key, value in values.items():
        if isinstance(value, list) and isinstance(defaults.get(key), tuple):
            value = tuple(value)
        kwargs[key] = value

    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigurationError(f"Invalid values in [{section}]: {e}") from e


def split_section(values: Dict[str, Any], section: str, *classes: Type) -> list:
    """
    Distribute one section's keys over several dataclasses by field name.

    Returns:
        One dict of values per class, in the order given
    """
    parts = [{} for _ in classes]
    for key, value in values.items():
        for i, cls in enumerate(classes):
            if key in field_names(cls):
                parts[i][key] = value
                break
        else:
            raise ConfigurationError(f"Unknown key in [{section}]: {key}")
    return parts


def to_plain(obj: Any) -> Any:
    """Convert dataclasses, tuples and numpy scalars into JSON-friendly values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def config_hash(config: Any) -> str:
    """SHA-256 over the canonical JSON form of a configuration."""
    payload = json.dumps(to_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
