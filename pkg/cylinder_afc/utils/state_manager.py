"""
Run directory management: episode records, traces, checkpoints and baselines.

Layout under ``<root>/<name>``:
    baseline/{snapshot.bin, baseline.json, forces.csv}
    seed<k>/{episodes.csv, traces/, checkpoints/, config.lock, evaluation/}
"""

import json
import logging
import os
import re
from typing import Any, Dict, List, Optional

import pandas as pd

from cylinder_afc.utils.config import config_hash, to_plain
from cylinder_afc.utils.parser import EPISODE_COLUMNS, read_episodes, write_table

logger = logging.getLogger(__name__)


class RunStore:
    """Manages the on-disk state of one named run."""

    def __init__(self, root: str, name: str):
        """
        Initialize the run store.

        Args:
            root: Directory holding all runs
            name: Run name
        """
        self.root = os.path.normpath(os.path.abspath(root))
        self.name = name
        self.run_dir = os.path.join(self.root, name)

    def seed_dir(self, seed: int) -> str:
        path = os.path.join(self.run_dir, f"seed{seed}")
        for sub in ("traces", "checkpoints"):
            os.makedirs(os.path.join(path, sub), exist_ok=True)
        return path

    def checkpoint_dir(self, seed: int, tag: str = "latest") -> str:
        return os.path.join(self.seed_dir(seed), "checkpoints", tag)

    def evaluation_dir(self, seed: Optional[int] = None) -> str:
        base = self.seed_dir(seed) if seed is not None else self.baseline_dir
        path = os.path.join(base, "evaluation")
        os.makedirs(path, exist_ok=True)
        return path

    @property
    def baseline_dir(self) -> str:
        path = os.path.join(self.run_dir, "baseline")
        os.makedirs(path, exist_ok=True)
        return path

    @property
    def snapshot_path(self) -> str:
        return os.path.join(self.baseline_dir, "snapshot.bin")

    def write_config_lock(self, seed: int, config: Any) -> str:
        """Record the resolved configuration and its hash next to the results."""
        digest = config_hash(config)
        write_json(
            os.path.join(self.seed_dir(seed), "config.lock"),
            {"config_hash": digest, "seed": seed, "config": to_plain(config)},
        )
        return digest

    def read_config_lock(self, seed: int) -> Dict[str, Any]:
        return read_json(os.path.join(self.seed_dir(seed), "config.lock"))

    def append_episode(self, seed: int, row: Dict[str, Any]) -> None:
        """Append one row to episodes.csv, writing the header on first use."""
        path = os.path.join(self.seed_dir(seed), "episodes.csv")
        frame = pd.DataFrame([{c: row[c] for c in EPISODE_COLUMNS}])
        frame.to_csv(path, mode="a", header=not os.path.exists(path), index=False, float_format="%.17g")

    def load_episodes(self, seed: int) -> pd.DataFrame:
        return read_episodes(os.path.join(self.seed_dir(seed), "episodes.csv"))

    def write_trace(self, seed: int, episode: int, forces: pd.DataFrame, telemetry: pd.DataFrame) -> None:
        traces = os.path.join(self.seed_dir(seed), "traces")
        write_table(forces, os.path.join(traces, f"forces_{episode:05d}.csv"))
        write_table(telemetry, os.path.join(traces, f"telemetry_{episode:05d}.csv"))

    def list_seeds(self) -> List[int]:
        """Seeds with an episodes.csv record, ascending."""
        if not os.path.isdir(self.run_dir):
            return []
        seeds = []
        for entry in os.listdir(self.run_dir):
            match = re.fullmatch(r"seed(\d+)", entry)
            if match and os.path.exists(os.path.join(self.run_dir, entry, "episodes.csv")):
                seeds.append(int(match.group(1)))
        return sorted(seeds)

    def save_baseline_stats(self, stats: Dict[str, Any], forces: pd.DataFrame) -> None:
        write_json(os.path.join(self.baseline_dir, "baseline.json"), stats)
        write_table(forces, os.path.join(self.baseline_dir, "forces.csv"))

    def load_baseline_stats(self) -> Dict[str, Any]:
        path = os.path.join(self.baseline_dir, "baseline.json")
        if not os.path.exists(path):
            raise FileNotFoundError(f"Baseline not prepared: {path}")
        return read_json(path)


def write_json(file_path: str, data: Dict[str, Any]) -> None:
    """Write ``data`` as indented JSON, creating the parent directory."""
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(to_plain(data), f, indent=2)


def read_json(file_path: str) -> Dict[str, Any]:
    """Read a JSON file, returning an empty dict if it is missing or corrupted."""
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (json.JSONDecodeError, FileNotFoundError, OSError):
        return {}
