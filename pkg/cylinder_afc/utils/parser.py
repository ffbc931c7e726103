"""
Parsing utilities for sensor layout strings and CSV time series.
"""

import os
import re
from typing import Optional, Sequence, Tuple

import pandas as pd

from cylinder_afc.utils.config import ConfigurationError

SERIES_COLUMNS = ("t", "cd", "cl")
EPISODE_COLUMNS = ("episode", "mean_cd", "std_cl", "total_reward")

_LAYOUT_PATTERN = re.compile(r"^\s*(L[123])\s*(?::\s*([0-9]+(?:\.[0-9]+)?)\s*)?$", re.IGNORECASE)


def parse_layout_spec(text: str) -> Tuple[str, Optional[float]]:
    """
    Parse a sensor layout string.

    Accepted forms are "L1" (wake sensors), "L2:N" (surface ring of N
    sensors) and "L3:theta" (single surface sensor at theta degrees).

    Args:
        text: Layout string from the run config or command line

    Returns:
        Tuple of (layout tag, parameter or None)
    """
    match = _LAYOUT_PATTERN.match(str(text))
    if not match:
        raise ConfigurationError(f"Unsupported sensor layout '{text}'; expected L1, L2:N or L3:theta")

    tag = match.group(1).upper()
    value = match.group(2)
    if tag == "L1":
        if value is not None:
            raise ConfigurationError(f"Layout L1 takes no parameter, got '{text}'")
        return tag, None
    if value is None:
        raise ConfigurationError(f"Layout {tag} requires a parameter, got '{text}'")
    return tag, float(value)


def _check_csv(file_path: str) -> None:
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"File not found: {file_path}")
    file_ext = os.path.splitext(file_path)[1].lower()
    if file_ext != ".csv":
        raise ValueError(f"Unsupported file format: {file_ext}")


def read_table(file_path: str, columns: Sequence[str]) -> pd.DataFrame:
    """Read a CSV file and check that it carries the expected columns."""
    _check_csv(file_path)
    frame = pd.read_csv(file_path)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ValueError(f"{file_path} is missing column(s): {', '.join(missing)}")
    return frame


def read_series(file_path: str) -> pd.DataFrame:
    """Read a t,cd,cl force trace."""
    return read_table(file_path, SERIES_COLUMNS)


def read_episodes(file_path: str) -> pd.DataFrame:
    """Read an episodes.csv learning record."""
    return read_table(file_path, EPISODE_COLUMNS)


def write_table(frame: pd.DataFrame, file_path: str) -> None:
    directory = os.path.dirname(os.path.abspath(file_path))
    os.makedirs(directory, exist_ok=True)
    frame.to_csv(file_path, index=False, float_format="%.17g")
