"""
Dynamic feature lifting: stack recent sensor and action rows into the agent state.
"""

from dataclasses import dataclass

import numpy as np

from cylinder_afc.utils.config import ConfigurationError


@dataclass(frozen=True)
class LiftingConfig:
    depth: int = 30
    alpha_scale: float = 1.0
    beta_scale: float = 1.0
    standardize_window: int = 30

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigurationError(f"Lifting depth must be at least 1, got {self.depth}")
        if self.standardize_window < 2:
            raise ConfigurationError(f"standardize_window must be at least 2, got {self.standardize_window}")

    @classmethod
    def vanilla(cls, standardize_window: int = 30) -> "LiftingConfig":
        """Single-snapshot sensor feedback without action history."""
        return cls(depth=1, beta_scale=0.0, standardize_window=standardize_window)


@dataclass(frozen=True)
class LiftedState:
    """depth x (sensors + actions) matrix, oldest row first."""

    matrix: np.ndarray
    n_sensors: int
    n_actions: int

    @property
    def depth(self) -> int:
        return self.matrix.shape[0]

    @property
    def shape(self):
        return self.matrix.shape


def lift(sensor_history, action_history, config: LiftingConfig) -> LiftedState:
    """
    Assemble the lifted state from aligned histories.

    Row t pairs the standardized reading s_t with the action a_(t-1) that
    preceded it. Histories shorter than the depth are front-padded with
    their first row.

    Args:
        sensor_history: Array (T, sensors)
        action_history: Array (T, actions)
        config: Lifting configuration

    Returns:
        LiftedState with exactly ``config.depth`` rows
    """
    sensors = np.asarray(sensor_history, dtype=float)
    actions = np.asarray(action_history, dtype=float)
    if sensors.ndim != 2 or actions.ndim != 2:
        raise ValueError("Histories must be two-dimensional (steps, channels)")
    if len(sensors) != len(actions):
        raise ValueError(f"Sensor and action histories differ in length: {len(sensors)} vs {len(actions)}")

    n_sensors, n_actions = sensors.shape[1], actions.shape[1]
    if len(sensors) == 0:
        return LiftedState(np.zeros((config.depth, n_sensors + n_actions)), n_sensors, n_actions)

    rows = np.concatenate(
        [config.alpha_scale * sensors[-config.depth:], config.beta_scale * actions[-config.depth:]], axis=1
    )
    if len(rows) < config.depth:
        pad = np.repeat(rows[:1], config.depth - len(rows), axis=0)
        rows = np.concatenate([pad, rows])
    return LiftedState(rows, n_sensors, n_actions)


def flatten(state: LiftedState) -> np.ndarray:
    """Row-major vector of the lifted matrix."""
    return np.ascontiguousarray(state.matrix).reshape(-1).copy()


def unflatten(vector: np.ndarray, depth: int) -> np.ndarray:
    vector = np.asarray(vector)
    if vector.size % depth:
        raise ValueError(f"Vector of length {vector.size} does not split into {depth} rows")
    return vector.reshape(depth, -1)
