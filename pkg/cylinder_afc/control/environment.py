"""
Flow-control environment: one solver instance driven at the agent cadence.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from cylinder_afc.control.features import LiftedState, LiftingConfig, lift
from cylinder_afc.control.sensors import (
    LayoutKind,
    SensorLayout,
    layout_positions,
    sensor_cells,
    read_sensors,
    standardize,
)
from cylinder_afc.solver.forces import ForceTrace, compute_forces
from cylinder_afc.solver.jets import JetConfig, JetState, normalized_flow_rate, smooth_action
from cylinder_afc.solver.lattice import FlowConfig, LatticeField, SolverDivergenceError, step
from cylinder_afc.utils.config import ConfigurationError

logger = logging.getLogger(__name__)

TELEMETRY_COLUMNS = ("step", "a_raw", "v_top", "v_bottom", "q_star")


@dataclass(frozen=True)
class EpisodeConfig:
    """
    Episode and reward settings.

    The baseline-derived fields stay None until resolved against a measured
    uncontrolled baseline.
    """

    steps_per_episode: int = 100
    agent_step_fraction: float = 0.075
    cl_penalty_weight: float = 0.1
    divergence_penalty: float = -10.0
    seeds: Tuple[int, ...] = (0, 1, 2)
    n_envs: int = 5
    cd_baseline: Optional[float] = None
    shedding_period: Optional[float] = None
    reward_window: Optional[float] = None
    agent_step_duration: Optional[float] = None

    def __post_init__(self):
        if self.steps_per_episode < 1:
            raise ConfigurationError(f"steps_per_episode must be at least 1, got {self.steps_per_episode}")
        if self.n_envs < 1:
            raise ConfigurationError(f"n_envs must be at least 1, got {self.n_envs}")
        if not self.seeds:
            raise ConfigurationError("At least one seed is required")
        if self.agent_step_fraction <= 0:
            raise ConfigurationError(f"agent_step_fraction must be positive, got {self.agent_step_fraction}")
        if self.agent_step_duration is not None and self.agent_step_duration <= 0:
            raise ConfigurationError(f"agent_step_duration must be positive, got {self.agent_step_duration}")

    def resolve(self, cd_baseline: float, shedding_period: float) -> "EpisodeConfig":
        """Fill the reward reference and timing from a measured baseline."""
        return replace(
            self,
            cd_baseline=cd_baseline,
            shedding_period=shedding_period,
            reward_window=self.reward_window or shedding_period,
            agent_step_duration=self.agent_step_duration or self.agent_step_fraction * shedding_period,
        )

    @property
    def resolved(self) -> bool:
        return None not in (self.cd_baseline, self.reward_window, self.agent_step_duration)


@dataclass(frozen=True)
class StepResult:
    state: LiftedState
    reward: float
    terminal: bool
    done: bool
    forces: ForceTrace


def compute_reward(trace: ForceTrace, config: EpisodeConfig) -> float:
    """
    r = cd_baseline - <C_D>_T - w * |<C_L>_T| over the trailing reward window.

    Traces shorter than the window use every available sample.
    """
    if config.cd_baseline is None or config.reward_window is None:
        raise ValueError("Episode config is not resolved against a baseline")
    if len(trace) == 0:
        raise ValueError("Cannot compute a reward from an empty force trace")
    recent = trace.tail(config.reward_window)
    cd = float(np.mean(recent.cd))
    cl = float(np.mean(recent.cl))
    return config.cd_baseline - cd - config.cl_penalty_weight * abs(cl)


def hold_steps(config: EpisodeConfig, flow: FlowConfig) -> int:
    return max(1, int(round(config.agent_step_duration * flow.time_scale)))


class FlowEnvironment:
    """
    Solver, jets and sensing for one environment worker.

    Every episode starts from a copy of the baseline field.
    """

    def __init__(
        self,
        flow: FlowConfig,
        jets: JetConfig,
        layout: SensorLayout,
        lifting: LiftingConfig,
        episode: EpisodeConfig,
        baseline_field: LatticeField,
        seed: int = 0,
    ):
        if not episode.resolved:
            raise ConfigurationError("Episode config must be resolved against a baseline before use")
        self.flow = flow
        self.jets = jets
        self.layout = layout
        self.lifting = lifting
        self.episode = episode
        self.baseline_field = baseline_field
        self.seed = seed
        self.hold_steps = hold_steps(episode, flow)

        if layout.kind is LayoutKind.WAKE147:
            sensor_cells(layout_positions(layout, flow), baseline_field)

        logger.info(
            f"Environment {seed}: layout {layout.spec}, {layout.channels} channel(s), "
            f"{self.hold_steps} solver steps per action"
        )

        self.field: Optional[LatticeField] = None
        self.jet_state = JetState.create(jets)
        self.trace = ForceTrace()
        self.raw_readings: List[np.ndarray] = []
        self.sensor_rows: List[np.ndarray] = []
        self.action_rows: List[np.ndarray] = []
        self.telemetry: List[Dict[str, float]] = []
        self.agent_steps = 0
        self.terminated = False

    def _sense(self, action: float) -> None:
        reading = read_sensors(self.field, self.layout, self.flow)
        self.raw_readings.append(reading.values)
        window = self.lifting.standardize_window
        recent = np.array(self.raw_readings[-window:])
        self.sensor_rows.append(standardize(recent, window)[-1])
        self.action_rows.append(np.array([action]))

    def reset(self) -> LiftedState:
        """Restart from the baseline field with jets off."""
        self.field = self.baseline_field.copy()
        self.jet_state = JetState.create(self.jets)
        self.trace = ForceTrace()
        self.raw_readings = []
        self.sensor_rows = []
        self.action_rows = []
        self.telemetry = []
        self.agent_steps = 0
        self.terminated = False
        self._sense(0.0)
        return self.observe()

    def observe(self) -> LiftedState:
        n_sensors = self.layout.channels
        sensors = np.array(self.sensor_rows).reshape(-1, n_sensors)
        actions = np.array(self.action_rows).reshape(-1, 1)
        return lift(sensors, actions, self.lifting)

    def agent_step(self, action) -> StepResult:
        """
        Hold one action for the agent-step duration.

        The jet velocity approaches the action by one smoothing step per solver
        step. Sensors are read at the end of the hold.

        Returns:
            StepResult with the next lifted state, the reward and the forces
            recorded during the hold
        """
        if self.field is None:
            raise RuntimeError("Environment must be reset before stepping")
        a_raw = float(np.asarray(action, dtype=float).reshape(-1)[0])
        hold = ForceTrace()

        try:
            for k in range(self.hold_steps):
                smooth_action(self.jet_state, a_raw, self.jets, record=(k == 0))
                step(self.field, self.jet_state, self.flow)
                sample = compute_forces(self.field, self.flow)
                hold.append(sample)
                self.trace.append(sample)
        except SolverDivergenceError as e:
            logger.error(f"Environment {self.seed}: {e}; truncating episode")
            self.terminated = True
            self.agent_steps += 1
            return StepResult(self.observe(), self.episode.divergence_penalty, True, True, hold)

        applied = self.jet_state.action_history[-1]
        self._sense(applied)
        self.telemetry.append(
            {
                "step": self.agent_steps,
                "a_raw": a_raw,
                "v_top": self.jet_state.v_top,
                "v_bottom": self.jet_state.v_bottom,
                "q_star": normalized_flow_rate(self.jet_state, self.jets),
            }
        )
        self.agent_steps += 1
        reward = compute_reward(self.trace, self.episode)
        done = self.agent_steps >= self.episode.steps_per_episode
        return StepResult(self.observe(), reward, False, done, hold)

    def telemetry_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.telemetry, columns=list(TELEMETRY_COLUMNS))

    @property
    def clamp_count(self) -> int:
        return self.jet_state.clamp_count
