"""
Training harness: baseline preparation, parallel-environment SAC training and
deterministic evaluation.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import signal
from tqdm import tqdm

from cylinder_afc.agent.replay import ReplayBuffer, Transition
from cylinder_afc.agent.sac import SacAgent, SacConfig
from cylinder_afc.control.environment import EpisodeConfig, FlowEnvironment
from cylinder_afc.control.features import LiftingConfig
from cylinder_afc.control.sensors import SensorLayout
from cylinder_afc.solver.forces import EstimationError, ForceTrace, compute_forces, measure_strouhal
from cylinder_afc.solver.jets import JetConfig, JetState
from cylinder_afc.solver.lattice import FlowConfig, LatticeField, init_field, step
from cylinder_afc.solver.snapshot import load_snapshot, save_snapshot
from cylinder_afc.utils.analysis import TraceSummary, psd, summarize
from cylinder_afc.utils.config import (
    ConfigurationError,
    build_dataclass,
    check_sections,
    config_hash,
    load_toml,
    split_section,
    to_plain,
)
from cylinder_afc.utils.parser import read_series, write_table
from cylinder_afc.utils.state_manager import RunStore, write_json

logger = logging.getLogger(__name__)

SECTIONS = ("flow", "jets", "sensors", "agent", "training")
STATIONARY_PERIODS = 10
STATIONARY_TOLERANCE = 0.01
BASELINE_KEYS = ("cd_baseline", "shedding_period", "strouhal")


class BaselineConvergenceError(RuntimeError):
    """Raised when the uncontrolled flow does not reach periodic shedding."""


@dataclass(frozen=True)
class TrainingConfig:
    name: str = "df_drl"
    episodes: int = 300
    checkpoint_every: int = 50
    evaluate_duration: float = 100.0
    baseline_time: float = 400.0
    out_dir: str = "runs"
    save_buffer: bool = False

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigurationError(f"episodes must be at least 1, got {self.episodes}")
        if self.checkpoint_every < 1:
            raise ConfigurationError(f"checkpoint_every must be at least 1, got {self.checkpoint_every}")
        if self.evaluate_duration <= 0 or self.baseline_time <= 0:
            raise ConfigurationError("evaluate_duration and baseline_time must be positive")


@dataclass(frozen=True)
class RunConfig:
    flow: FlowConfig = FlowConfig()
    jets: JetConfig = JetConfig()
    layout: SensorLayout = SensorLayout.from_spec("L3:150")
    lifting: LiftingConfig = LiftingConfig()
    agent: SacConfig = SacConfig()
    episode: EpisodeConfig = EpisodeConfig()
    training: TrainingConfig = TrainingConfig()

    def with_layout(self, spec: str) -> "RunConfig":
        return replace(self, layout=SensorLayout.from_spec(spec))

    def vanilla(self) -> "RunConfig":
        """Single-snapshot feedback arm: one row, no action history."""
        return replace(self, lifting=LiftingConfig.vanilla(self.lifting.standardize_window))

    @property
    def obs_dim(self) -> int:
        return self.lifting.depth * (self.layout.channels + 1)


def run_config_from_dict(data: Dict[str, Any]) -> RunConfig:
    """Build a RunConfig from parsed config sections."""
    check_sections(data, SECTIONS)

    flow_values = dict(data.get("flow", {}))
    preset = flow_values.pop("preset", None)
    base_flow = FlowConfig.from_preset(preset) if preset else None
    flow = build_dataclass(FlowConfig, flow_values, "flow", base_flow)

    jets = build_dataclass(JetConfig, data.get("jets", {}), "jets")

    sensor_values = dict(data.get("sensors", {}))
    layout = SensorLayout.from_spec(sensor_values.pop("layout", "L3:150"))
    if "lifting_depth" in sensor_values:
        sensor_values["depth"] = sensor_values.pop("lifting_depth")
    lifting = build_dataclass(LiftingConfig, sensor_values, "sensors")

    agent = build_dataclass(SacConfig, data.get("agent", {}), "agent")

    episode_values, training_values = split_section(
        data.get("training", {}), "training", EpisodeConfig, TrainingConfig
    )
    episode = build_dataclass(EpisodeConfig, episode_values, "training")
    training = build_dataclass(TrainingConfig, training_values, "training")

    return RunConfig(flow, jets, layout, lifting, agent, episode, training)


def load_run_config(file_path: str) -> RunConfig:
    return run_config_from_dict(load_toml(file_path))


@dataclass
class Baseline:
    field: LatticeField
    cd_baseline: float
    shedding_period: float
    strouhal: float
    cl_amplitude: float
    trace: ForceTrace

    def stats(self) -> Dict[str, float]:
        return {
            "cd_baseline": self.cd_baseline,
            "shedding_period": self.shedding_period,
            "strouhal": self.strouhal,
            "cl_amplitude": self.cl_amplitude,
            "step_index": self.field.step_index,
        }


def shedding_peaks(cl: np.ndarray) -> np.ndarray:
    """Indices of lift maxima with prominence above a tenth of the lift range."""
    cl = np.asarray(cl, dtype=float)
    if cl.size < 3:
        return np.array([], dtype=int)
    span = float(cl.max() - cl.min())
    if span <= 0:
        return np.array([], dtype=int)
    peaks, _ = signal.find_peaks(cl, prominence=0.1 * span)
    return peaks


def is_stationary(cl: np.ndarray, periods: int = STATIONARY_PERIODS, tolerance: float = STATIONARY_TOLERANCE) -> bool:
    """Whether the last ``periods`` lift peaks agree within ``tolerance``."""
    peaks = shedding_peaks(cl)
    if len(peaks) < periods + 1:
        return False
    amplitudes = np.asarray(cl)[peaks[-periods:]]
    scale = float(np.mean(np.abs(amplitudes)))
    return scale > 0 and float(amplitudes.max() - amplitudes.min()) <= tolerance * scale


def prepare_baseline(
    flow: FlowConfig,
    jets: Optional[JetConfig] = None,
    time_budget: float = 400.0,
    progress: bool = True,
) -> Baseline:
    """
    Run the uncontrolled flow until the shedding is periodic.

    Args:
        flow: Flow configuration
        jets: Jet arcs (inactive here, needed for the boundary links)
        time_budget: Nondimensional time allowed before giving up
        progress: Show a progress bar

    Returns:
        Baseline with the converged field, mean drag over the last ten
        periods and the shedding period

    Raises:
        BaselineConvergenceError: the lift amplitude did not settle in time
    """
    jets = jets or JetConfig()
    field = init_field(flow, jets, at_rest=False)
    off = JetState.create(jets)
    trace = ForceTrace()

    total = int(math.ceil(time_budget * flow.time_scale))
    check_every = max(1, int(round(flow.time_scale)))
    converged = False
    logger.info(f"Preparing baseline: Re={flow.reynolds}, D={flow.diameter_lu}, budget {total} steps")

    with tqdm(total=total, desc="baseline", unit="step", disable=not progress) as bar:
        for n in range(1, total + 1):
            step(field, off, flow)
            trace.append(compute_forces(field, flow))
            bar.update(1)
            if n % check_every == 0 and is_stationary(trace.cl):
                converged = True
                break

    if not converged:
        raise BaselineConvergenceError(
            f"Lift amplitude not stationary within {time_budget} time units ({total} steps)"
        )

    t, cd, cl = trace.arrays()
    peaks = shedding_peaks(cl)
    start = int(peaks[-(STATIONARY_PERIODS + 1)])
    try:
        strouhal = measure_strouhal(cl[start:], 1.0 / flow.time_scale)
    except EstimationError as e:
        raise BaselineConvergenceError(f"Shedding frequency could not be measured: {e}") from e

    amplitude = 0.5 * float(cl[start:].max() - cl[start:].min())
    baseline = Baseline(
        field=field,
        cd_baseline=float(cd[start:].mean()),
        shedding_period=1.0 / strouhal,
        strouhal=strouhal,
        cl_amplitude=amplitude,
        trace=trace,
    )
    logger.info(
        f"Baseline converged at t={t[-1]:.1f}: mean C_D={baseline.cd_baseline:.4f}, "
        f"St={strouhal:.4f}, C_L amplitude={amplitude:.4f}"
    )
    return baseline


def save_baseline(store: RunStore, baseline: Baseline, flow: FlowConfig) -> None:
    save_snapshot(store.snapshot_path, baseline.field, flow)
    store.save_baseline_stats(baseline.stats(), baseline.trace.to_frame())


def load_baseline(store: RunStore, flow: FlowConfig, jets: Optional[JetConfig] = None) -> Baseline:
    stats = store.load_baseline_stats()
    missing = [key for key in BASELINE_KEYS if key not in stats]
    if missing:
        path = os.path.join(store.baseline_dir, "baseline.json")
        raise ConfigurationError(f"Baseline statistics in {path} are unreadable or lack {', '.join(missing)}")
    field = load_snapshot(store.snapshot_path, flow, jets)
    forces = os.path.join(store.baseline_dir, "forces.csv")
    trace = ForceTrace.from_frame(read_series(forces)) if os.path.exists(forces) else ForceTrace()
    return Baseline(
        field=field,
        cd_baseline=float(stats["cd_baseline"]),
        shedding_period=float(stats["shedding_period"]),
        strouhal=float(stats["strouhal"]),
        cl_amplitude=float(stats.get("cl_amplitude", 0.0)),
        trace=trace,
    )


@dataclass(frozen=True)
class EpisodeSummary:
    episode: int
    mean_cd: float
    std_cl: float
    total_reward: float

    def to_dict(self) -> Dict[str, float]:
        return dict(self.__dict__)


@dataclass
class RunRecord:
    seed: int
    config_hash: str
    episodes: List[EpisodeSummary] = field(default_factory=list)
    transitions: int = 0
    update_rounds: int = 0
    agent: Optional[SacAgent] = field(default=None, repr=False, compare=False)

    def append(self, summary: EpisodeSummary) -> None:
        self.episodes.append(summary)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [e.to_dict() for e in self.episodes], columns=["episode", "mean_cd", "std_cl", "total_reward"]
        )


def _episode_summary(episode: int, env: FlowEnvironment, total_reward: float) -> EpisodeSummary:
    if len(env.trace):
        mean_cd, std_cl = float(np.mean(env.trace.cd)), float(np.std(env.trace.cl))
    else:
        mean_cd, std_cl = float("nan"), float("nan")
    return EpisodeSummary(episode, mean_cd, std_cl, total_reward)


def make_environments(config: RunConfig, baseline: Baseline, seed: int, count: int) -> List[FlowEnvironment]:
    episode = config.episode.resolve(baseline.cd_baseline, baseline.shedding_period)
    return [
        FlowEnvironment(
            config.flow, config.jets, config.layout, config.lifting, episode, baseline.field, seed * 1000 + k
        )
        for k in range(count)
    ]


def _save_checkpoint(agent: SacAgent, buffer: ReplayBuffer, store: RunStore, seed: int, tag: str, save_buffer: bool):
    directory = store.checkpoint_dir(seed, tag)
    agent.save(directory, buffer.statistics())
    if save_buffer:
        buffer.save(os.path.join(directory, "buffer.npz"))


def train(config: RunConfig, baseline: Baseline, seed: int, store: Optional[RunStore] = None) -> RunRecord:
    """
    Train one agent with ``n_envs`` environments stepping in parallel.

    Episodes are numbered across environments: round j, environment k gives
    episode j * n_envs + k. Actions are chosen on the calling thread; the
    solver advances on the worker threads.

    Args:
        config: Run configuration
        baseline: Prepared uncontrolled baseline
        seed: Seed for the agent, buffer and environments
        store: Run store for episode records, traces and checkpoints

    Returns:
        RunRecord with one summary per episode
    """
    cfg = config.agent
    n_envs = config.episode.n_envs
    envs = make_environments(config, baseline, seed, n_envs)
    agent = SacAgent(config.obs_dim, 1, cfg, seed)
    buffer = ReplayBuffer(cfg.buffer_capacity, seed)

    digest = config_hash(config)
    if store is not None:
        store.write_config_lock(seed, config)
    record = RunRecord(seed, digest)

    done_episodes = 0
    agent_steps = 0
    next_checkpoint = config.training.checkpoint_every
    logger.info(f"Training seed {seed}: {config.training.episodes} episodes, {n_envs} environment(s)")

    with ThreadPoolExecutor(max_workers=n_envs) as pool:
        try:
            while done_episodes < config.training.episodes:
                active = envs[:min(n_envs, config.training.episodes - done_episodes)]
                states = list(pool.map(lambda env: env.reset(), active))
                totals = [0.0] * len(active)
                running = list(range(len(active)))

                while running:
                    actions = {k: agent.select_action(states[k], "stochastic") for k in running}
                    results = list(pool.map(lambda k: active[k].agent_step(actions[k]), running))
                    for k, result in zip(list(running), results):
                        buffer.store(
                            Transition(states[k].matrix, actions[k], result.reward, result.state.matrix, result.terminal)
                        )
                        states[k] = result.state
                        totals[k] += result.reward
                        if result.done:
                            running.remove(k)

                    rounds = (agent_steps + len(results)) // cfg.update_every - agent_steps // cfg.update_every
                    agent_steps += len(results)
                    record.transitions = agent_steps
                    for _ in range(rounds):
                        if len(buffer) < cfg.batch_size:
                            break
                        for _ in range(cfg.gradient_steps):
                            losses = agent.update(buffer.sample(cfg.batch_size))
                        record.update_rounds += 1
                        logger.debug(
                            f"Update round at step {agent_steps}: critic {losses.critic1:.4g}/{losses.critic2:.4g}, "
                            f"actor {losses.actor:.4g}, entropy {losses.entropy:.4g}"
                        )

                for k, env in enumerate(active):
                    summary = _episode_summary(done_episodes + k, env, totals[k])
                    record.append(summary)
                    logger.info(
                        f"Seed {seed} episode {summary.episode}: mean C_D={summary.mean_cd:.4f}, "
                        f"std C_L={summary.std_cl:.4f}, reward={summary.total_reward:.3f}, clamps={env.clamp_count}"
                    )
                    if store is not None:
                        store.append_episode(seed, summary.to_dict())
                        store.write_trace(seed, summary.episode, env.trace.to_frame(), env.telemetry_frame())
                done_episodes += len(active)

                if store is not None and done_episodes >= next_checkpoint:
                    tag = f"episode_{done_episodes:05d}"
                    _save_checkpoint(agent, buffer, store, seed, tag, config.training.save_buffer)
                    next_checkpoint += config.training.checkpoint_every
        except Exception as e:
            logger.error(f"Training seed {seed} aborted after {done_episodes} episode(s): {e}")
            raise

    if store is not None:
        _save_checkpoint(agent, buffer, store, seed, "latest", config.training.save_buffer)
    record.agent = agent
    return record


def train_repeats(
    config: RunConfig, baseline: Baseline, seeds: Optional[Sequence[int]] = None, store: Optional[RunStore] = None
) -> List[RunRecord]:
    """Independent training runs, one per seed."""
    seeds = config.episode.seeds if seeds is None else seeds
    return [train(config, baseline, seed, store) for seed in seeds]


@dataclass
class Evaluation:
    trace: ForceTrace
    telemetry: pd.DataFrame
    summary: TraceSummary
    diverged: bool = False
    clamp_count: int = 0


def evaluate(
    config: RunConfig,
    baseline: Baseline,
    agent: Optional[SacAgent] = None,
    duration: Optional[float] = None,
) -> Evaluation:
    """
    Deterministic rollout from the baseline field.

    Args:
        config: Run configuration
        baseline: Prepared uncontrolled baseline
        agent: Trained agent; None holds the jets at zero
        duration: Nondimensional rollout length, default from the training config

    Returns:
        Evaluation with the force trace, jet telemetry and summary statistics
    """
    duration = duration or config.training.evaluate_duration
    env = make_environments(config, baseline, 0, 1)[0]
    n_steps = int(math.ceil(duration / env.episode.agent_step_duration))

    state = env.reset()
    diverged = False
    for _ in tqdm(range(n_steps), desc="evaluate", unit="action", disable=n_steps < 10):
        action = agent.select_action(state, "deterministic") if agent is not None else 0.0
        result = env.agent_step(action)
        state = result.state
        if result.terminal:
            diverged = True
            logger.error(f"Evaluation diverged after {env.agent_steps} action(s); keeping partial trace")
            break

    if not len(env.trace):
        raise RuntimeError("Evaluation produced no force samples")
    summary = summarize(env.trace, len(env.trace), baseline.cd_baseline)
    logger.info(
        f"Evaluation: mean C_D={summary.mean_cd:.4f} ({summary.reduction_pct:.2f}% reduction), "
        f"std C_L={summary.std_cl:.4f}"
    )
    return Evaluation(env.trace, env.telemetry_frame(), summary, diverged, env.clamp_count)


def write_evaluation(directory: str, evaluation: Evaluation, flow: FlowConfig) -> Dict[str, Any]:
    """Write forces, telemetry, C_L/C_D spectra and summary.json into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    write_table(evaluation.trace.to_frame(), os.path.join(directory, "forces.csv"))
    write_table(evaluation.telemetry, os.path.join(directory, "telemetry.csv"))

    summary = evaluation.summary.to_dict()
    summary["diverged"] = evaluation.diverged
    summary["clamp_count"] = evaluation.clamp_count
    dt = 1.0 / flow.time_scale
    try:
        for name, series in (("cl", evaluation.trace.cl), ("cd", evaluation.trace.cd)):
            result = psd(series, dt)
            write_table(result.to_frame(), os.path.join(directory, f"psd_{name}.csv"))
            summary[f"psd_{name}"] = result.metadata
    except EstimationError as e:
        logger.warning(f"Skipping spectra: {e}")

    write_json(os.path.join(directory, "summary.json"), summary)
    return to_plain(summary)
