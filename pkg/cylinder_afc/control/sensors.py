"""
Sensor layouts and pressure sampling.

Surface azimuths are degrees clockwise from the windward stagnation point.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from cylinder_afc.solver.forces import pressure_field, surface_node, surface_azimuth_to_point
from cylinder_afc.solver.lattice import FlowConfig, LatticeField
from cylinder_afc.utils.config import ConfigurationError
from cylinder_afc.utils.parser import parse_layout_spec

logger = logging.getLogger(__name__)

RING_COUNTS = (4, 8, 12, 24, 36)
SINGLE_ANGLES = tuple(float(a) for a in range(0, 181, 15))
STD_FLOOR = 1e-8

# Wake sensor stand-in: a ring near the surface plus a rectangular wake grid (units of D)
WAKE_RING_RADIUS = 0.6
WAKE_RING_COUNT = 15
WAKE_GRID_X = (1.0, 6.0, 12)
WAKE_GRID_Y = (-1.5, 1.5, 11)


class LayoutKind(Enum):
    WAKE147 = "L1"
    SURFACE_RING = "L2"
    SINGLE_SURFACE = "L3"


@dataclass(frozen=True)
class SensorLayout:
    kind: LayoutKind
    count: int = 0
    angle: float = 0.0

    def __post_init__(self):
        if self.kind is LayoutKind.SURFACE_RING and self.count not in RING_COUNTS:
            raise ConfigurationError(f"Surface ring size must be one of {RING_COUNTS}, got {self.count}")
        if self.kind is LayoutKind.SINGLE_SURFACE and float(self.angle) not in SINGLE_ANGLES:
            raise ConfigurationError(
                f"Single sensor angle must be a multiple of 15 in [0, 180], got {self.angle}"
            )

    @classmethod
    def from_spec(cls, text: str) -> "SensorLayout":
        tag, value = parse_layout_spec(text)
        kind = LayoutKind(tag)
        if kind is LayoutKind.SURFACE_RING:
            if value != int(value):
                raise ConfigurationError(f"Surface ring size must be an integer, got {value}")
            return cls(kind, count=int(value))
        if kind is LayoutKind.SINGLE_SURFACE:
            return cls(kind, angle=float(value))
        return cls(kind)

    @property
    def spec(self) -> str:
        if self.kind is LayoutKind.SURFACE_RING:
            return f"L2:{self.count}"
        if self.kind is LayoutKind.SINGLE_SURFACE:
            return f"L3:{self.angle:g}"
        return "L1"

    @property
    def channels(self) -> int:
        if self.kind is LayoutKind.SURFACE_RING:
            return self.count
        if self.kind is LayoutKind.SINGLE_SURFACE:
            return 1
        return WAKE_RING_COUNT + WAKE_GRID_X[2] * WAKE_GRID_Y[2]


@dataclass(frozen=True)
class SensorPositions:
    """Sensor points in lattice coordinates; azimuths are set for surface layouts."""

    points: np.ndarray
    azimuths: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class SensorReading:
    t: float
    values: np.ndarray


def surface_angles(layout: SensorLayout) -> np.ndarray:
    if layout.kind is LayoutKind.SURFACE_RING:
        n = layout.count
        return 360.0 * np.arange(1, n + 1) / (n + 1)
    if layout.kind is LayoutKind.SINGLE_SURFACE:
        return np.array([float(layout.angle)])
    raise ValueError(f"Layout {layout.spec} has no surface sensors")


def wake_offsets() -> np.ndarray:
    """Wake sensor offsets from the cylinder center, in units of D."""
    angles = 2.0 * np.pi * np.arange(WAKE_RING_COUNT) / WAKE_RING_COUNT
    ring = WAKE_RING_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    gx, gy = np.meshgrid(np.linspace(*WAKE_GRID_X), np.linspace(*WAKE_GRID_Y), indexing="ij")
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return np.concatenate([ring, grid])


def layout_positions(layout: SensorLayout, config: FlowConfig) -> SensorPositions:
    """Deterministic sensor coordinates for a layout."""
    if layout.kind is LayoutKind.WAKE147:
        cx, cy = config.center_lu
        points = wake_offsets() * config.diameter_lu + np.array([cx, cy])
        return SensorPositions(points)

    azimuths = surface_angles(layout)
    points = np.array([surface_azimuth_to_point(theta, config) for theta in azimuths])
    return SensorPositions(points, azimuths)


def sensor_cells(positions: SensorPositions, field: LatticeField) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lattice cells containing each sensor point.

    Raises:
        ConfigurationError: a sensor lies outside the domain or in a solid cell
    """
    ny, nx = field.shape
    xs = np.floor(positions.points[:, 0]).astype(int)
    ys = np.floor(positions.points[:, 1]).astype(int)
    outside = (xs < 0) | (xs >= nx) | (ys < 0) | (ys >= ny)
    if outside.any():
        raise ConfigurationError(f"{int(outside.sum())} sensor(s) lie outside the domain")
    solid = field.obstacle_mask[ys, xs]
    if solid.any():
        raise ConfigurationError(f"{int(solid.sum())} sensor(s) lie inside the cylinder")
    return ys, xs


def read_sensors(field: LatticeField, layout: SensorLayout, config: FlowConfig) -> SensorReading:
    """Pressure at every sensor of the layout."""
    p = pressure_field(field, config)
    positions = layout_positions(layout, config)
    if positions.azimuths is not None:
        cells = [surface_node(field, float(theta)) for theta in positions.azimuths]
        values = np.array([p[y, x] for y, x in cells])
    else:
        ys, xs = sensor_cells(positions, field)
        values = p[ys, xs]
    return SensorReading(t=field.step_index / config.time_scale, values=values)


def standardize(history: np.ndarray, window: int) -> np.ndarray:
    """
    Trailing-window z-score of each channel.

    Args:
        history: Samples of shape (T, channels)
        window: Trailing window length, at least 2

    Returns:
        Array of the same shape; rows whose window std is at or below the
        floor map to 0
    """
    if window < 2:
        raise ValueError(f"Standardization window must be at least 2, got {window}")
    history = np.asarray(history, dtype=float)
    if history.ndim == 1:
        history = history[:, None]

    out = np.zeros_like(history)
    for t in range(len(history)):
        chunk = history[max(0, t - window + 1):t + 1]
        mean = chunk.mean(axis=0)
        std = chunk.std(axis=0)
        ok = std > STD_FLOOR
        out[t, ok] = (history[t, ok] - mean[ok]) / std[ok]
    return out
