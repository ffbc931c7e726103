"""
Post-processing: spectra, trace statistics and learning-curve aggregation.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import signal

from cylinder_afc.solver.forces import EstimationError

logger = logging.getLogger(__name__)

PSD_SEGMENT = 256
PSD_OVERLAP = 128
CURVE_METRICS = ("mean_cd", "std_cl", "total_reward")
SMOOTHING_EPISODES = 10
FINAL_EPISODES = 10


@dataclass(frozen=True)
class PsdResult:
    frequencies: np.ndarray
    power: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def bin_width(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    @property
    def peak_frequency(self) -> float:
        return float(self.frequencies[1:][np.argmax(self.power[1:])])

    def power_at(self, frequency: float) -> float:
        """Power in the bin nearest to ``frequency``."""
        return float(self.power[np.argmin(np.abs(self.frequencies - frequency))])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"frequency": self.frequencies, "power": self.power})


def psd(series, dt: float) -> PsdResult:
    """
    Welch power spectral density (256-sample Hann segments, 50% overlap).

    Args:
        series: Time series samples
        dt: Sample spacing in nondimensional time

    Returns:
        PsdResult with one-sided density and the Parseval ratio in its metadata
    """
    x = np.asarray(series, dtype=float)
    if x.size < PSD_SEGMENT:
        raise EstimationError(f"PSD needs at least {PSD_SEGMENT} samples, got {x.size}")

    freqs, power = signal.welch(
        x,
        fs=1.0 / dt,
        window="hann",
        nperseg=PSD_SEGMENT,
        noverlap=PSD_OVERLAP,
        detrend="constant",
        scaling="density",
    )
    variance = float(np.var(x))
    total = float(np.sum(power) * (freqs[1] - freqs[0]))
    metadata = {
        "method": "welch",
        "window": "hann",
        "nperseg": PSD_SEGMENT,
        "noverlap": PSD_OVERLAP,
        "detrend": "constant",
        "dt": dt,
        "samples": int(x.size),
        "variance": variance,
        "parseval_ratio": total / variance if variance > 0 else float("nan"),
    }
    return PsdResult(freqs, power, metadata)


def spectral_suppression(baseline_cl, controlled_cl, dt: float, strouhal: float) -> float:
    """Controlled over uncontrolled C_L power at the uncontrolled shedding frequency."""
    base = psd(baseline_cl, dt).power_at(strouhal)
    if base <= 0:
        raise EstimationError("Uncontrolled spectrum has no power at the shedding frequency")
    return psd(controlled_cl, dt).power_at(strouhal) / base


@dataclass(frozen=True)
class TraceSummary:
    window: int
    mean_cd: float
    std_cd: float
    std_cl: float
    rms_cl: float
    cd_baseline: Optional[float] = None
    reduction_pct: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def summarize(trace: Union[pd.DataFrame, Any], window: int, cd_baseline: Optional[float] = None) -> TraceSummary:
    """
    Statistics over the trailing ``window`` samples of a force trace.

    Args:
        trace: DataFrame with cd and cl columns, or a ForceTrace
        window: Number of trailing samples
        cd_baseline: Uncontrolled mean drag for the reduction percentage

    Returns:
        TraceSummary
    """
    frame = trace if isinstance(trace, pd.DataFrame) else trace.to_frame()
    if window < 1 or window > len(frame):
        raise ValueError(f"Window of {window} samples does not fit a trace of {len(frame)}")

    recent = frame.iloc[-window:]
    cd = recent["cd"].to_numpy(dtype=float)
    cl = recent["cl"].to_numpy(dtype=float)
    mean_cd = float(cd.mean())
    reduction = None
    if cd_baseline is not None:
        reduction = (cd_baseline - mean_cd) / cd_baseline * 100.0
    return TraceSummary(
        window=int(window),
        mean_cd=mean_cd,
        std_cd=float(cd.std()),
        std_cl=float(cl.std()),
        rms_cl=float(np.sqrt(np.mean(cl ** 2))),
        cd_baseline=cd_baseline,
        reduction_pct=reduction,
    )


@dataclass(frozen=True)
class LearningCurves:
    curves: pd.DataFrame
    final: Dict[str, Dict[str, float]]
    n_records: int


def _episode_frame(record) -> pd.DataFrame:
    return record if isinstance(record, pd.DataFrame) else record.to_frame()


def aggregate_learning_curves(
    records: Sequence,
    metrics: Sequence[str] = CURVE_METRICS,
    smoothing: int = SMOOTHING_EPISODES,
) -> LearningCurves:
    """
    Mean and spread of learning curves across repeated runs.

    Records are truncated to the shortest one. Spread is the population
    standard deviation across records.

    Args:
        records: RunRecords or episode DataFrames
        metrics: Episode columns to aggregate
        smoothing: Moving-average window in episodes

    Returns:
        LearningCurves with per-episode columns <metric>_mean, <metric>_std,
        <metric>_smooth and last-episode statistics per record
    """
    frames = [_episode_frame(r) for r in records]
    if not frames:
        raise ValueError("At least one run record is required")
    length = min(len(f) for f in frames)
    if length == 0:
        raise ValueError("Run records contain no episodes")

    curves = pd.DataFrame({"episode": np.arange(length)})
    final: Dict[str, Dict[str, float]] = {}
    for metric in metrics:
        stacked = np.stack([f[metric].to_numpy(dtype=float)[:length] for f in frames])
        mean = stacked.mean(axis=0)
        curves[f"{metric}_mean"] = mean
        curves[f"{metric}_std"] = stacked.std(axis=0)
        curves[f"{metric}_smooth"] = pd.Series(mean).rolling(smoothing, min_periods=1).mean().to_numpy()

        tail = stacked[:, -FINAL_EPISODES:].mean(axis=1)
        final[metric] = {"mean": float(tail.mean()), "std": float(tail.std()), "per_record": tail.tolist()}

    return LearningCurves(curves, final, len(frames))
