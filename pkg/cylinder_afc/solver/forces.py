"""
Force coefficients, surface pressure and wake frequency from the lattice state.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import pandas as pd
from scipy import signal

from cylinder_afc.solver.jets import azimuth_to_math, wrap_degrees
from cylinder_afc.solver.lattice import (
    C,
    CS2,
    RHO0,
    W,
    FlowConfig,
    LatticeField,
    link_populations,
    wall_velocity,
)

logger = logging.getLogger(__name__)

# Relative detrended variance below which a series counts as constant
VARIANCE_FLOOR = 1e-12


class EstimationError(ValueError):
    """Raised when a spectral estimate cannot be formed from a series."""


@dataclass(frozen=True)
class ForceSample:
    t: float
    cd: float
    cl: float


@dataclass
class ForceTrace:
    """Append-only record of force coefficients at every solver step."""

    t: List[float] = field(default_factory=list)
    cd: List[float] = field(default_factory=list)
    cl: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    def append(self, sample: ForceSample) -> None:
        self.t.append(sample.t)
        self.cd.append(sample.cd)
        self.cl.append(sample.cl)

    def extend(self, other: "ForceTrace") -> None:
        self.t.extend(other.t)
        self.cd.extend(other.cd)
        self.cl.extend(other.cl)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.asarray(self.t), np.asarray(self.cd), np.asarray(self.cl)

    def tail(self, duration: float) -> "ForceTrace":
        """Samples within the trailing ``duration`` time units (all samples if shorter)."""
        if not self.t:
            return ForceTrace()
        t = np.asarray(self.t)
        start = int(np.searchsorted(t, t[-1] - duration, side="right"))
        start = min(start, len(t) - 1)
        return ForceTrace(self.t[start:], self.cd[start:], self.cl[start:])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.t, "cd": self.cd, "cl": self.cl})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "ForceTrace":
        return cls(frame["t"].tolist(), frame["cd"].tolist(), frame["cl"].tolist())


def force_scale(config: FlowConfig) -> float:
    """Dynamic-pressure normalization 0.5 * rho0 * U_mean^2 * D in lattice units."""
    return 0.5 * RHO0 * config.u_mean_lb ** 2 * config.diameter_lu


def _cylinder_exchange(field: LatticeField, config: FlowConfig):
    links = field.boundary_links
    cyl = links.cylinder
    f_out, f_back = link_populations(field, config, cyl)
    u_wall = wall_velocity(field, field.jet_speed_lb)[cyl]
    return cyl, f_out, f_back, u_wall


def _link_forces(field: LatticeField, config: FlowConfig) -> np.ndarray:
    """Force on the cylinder through each link, shape (n, 2)."""
    cyl, f_out, f_back, u_wall = _cylinder_exchange(field, config)
    c = C[field.boundary_links.direction[cyl]].astype(float)
    return c * (f_out + f_back)[:, None] - u_wall * (f_out - f_back)[:, None]


def compute_forces(field: LatticeField, config: FlowConfig) -> ForceSample:
    """
    Drag and lift coefficients by Galilean-invariant momentum exchange.

    The exchange is evaluated for the populations the next streaming step
    sends across the cylinder links, so the result depends on the field only.
    """
    force = _link_forces(field, config).sum(axis=0)

    scale = force_scale(config)
    return ForceSample(
        t=field.step_index / config.time_scale,
        cd=float(force[0] / scale),
        cl=float(force[1] / scale),
    )


def pressure_field(field: LatticeField, config: FlowConfig) -> np.ndarray:
    """Nondimensional pressure c_s^2 (rho - mean fluid rho) / (rho0 U_mean^2)."""
    fluid = ~field.obstacle_mask
    rho_mean = field.rho[fluid].mean()
    p = CS2 * (field.rho - rho_mean) / (RHO0 * config.u_mean_lb ** 2)
    p[field.obstacle_mask] = 0.0
    return p


def surface_node(field: LatticeField, theta: float) -> Tuple[int, int]:
    """Fluid node next to the cylinder surface nearest to azimuth ``theta``."""
    if not 0.0 <= theta < 360.0:
        raise ValueError(f"Azimuth must lie in [0, 360), got {theta}")
    links = field.boundary_links
    if len(links.surface_nodes) == 0:
        raise ValueError("Field has no cylinder surface")
    k = int(np.argmin(np.abs(wrap_degrees(links.surface_azimuth - theta))))
    y, x = links.surface_nodes[k]
    return int(y), int(x)


def surface_pressure(field: LatticeField, theta: float, config: FlowConfig) -> float:
    """
    Nondimensional pressure at the surface node nearest to azimuth ``theta``.

    Args:
        field: Lattice state
        theta: Degrees clockwise from the windward stagnation point
        config: Flow configuration

    Returns:
        Pressure in units of rho * U_mean^2
    """
    y, x = surface_node(field, theta)
    return float(pressure_field(field, config)[y, x])


def measure_strouhal(lift_series, dt: float) -> float:
    """
    Dominant nondimensional frequency of a lift series.

    With time in units of D / U_mean the frequency is the Strouhal number.

    Args:
        lift_series: Lift coefficient samples, post-transient
        dt: Sample spacing in nondimensional time

    Returns:
        Strouhal number
    """
    x = np.asarray(lift_series, dtype=float)
    if x.size < 16:
        raise EstimationError(f"Need at least 16 samples for a frequency estimate, got {x.size}")
    residual = signal.detrend(x, type="linear")
    if np.ptp(x) == 0 or residual.var() <= VARIANCE_FLOOR * max(1.0, float(np.mean(x * x))):
        raise EstimationError("Lift series has no fluctuation to analyze")

    freqs, power = signal.periodogram(x, fs=1.0 / dt, window="hann", detrend="linear")
    freqs, power = freqs[1:], power[1:]
    if not np.any(power > 0):
        raise EstimationError("Lift series carries no spectral power")

    k = int(np.argmax(power))
    if power[k] <= 10.0 * np.median(power):
        raise EstimationError("No spectral peak above the noise floor")

    f_peak = freqs[k]
    if 0 < k < len(power) - 1:
        a, b, c = power[k - 1], power[k], power[k + 1]
        denom = a - 2.0 * b + c
        if denom != 0:
            f_peak += 0.5 * (a - c) / denom * (freqs[1] - freqs[0])
    return float(f_peak)


def decompose_drag(field: LatticeField, config: FlowConfig) -> Tuple[float, float]:
    """
    Split the drag into pressure and friction contributions.

    Each cylinder link's exchanged momentum is divided into the part carried
    by the isotropic share w_q * rho' of its populations, which is the normal
    pressure load, and the remainder, which holds the wall shear and the jet
    momentum. rho' is the density relative to the fluid mean. The two parts
    add up to the compute_forces drag.

    Returns:
        (pressure_drag, friction_drag) as drag coefficients
    """
    links = field.boundary_links
    if not config.with_cylinder or not links.cylinder.any():
        return 0.0, 0.0

    cyl, f_out, f_back, u_wall = _cylinder_exchange(field, config)
    d = links.direction[cyl]
    q = links.q[cyl]
    rho_ref = field.rho[~field.obstacle_mask].mean()
    rho_near = field.rho[links.y[cyl], links.x[cyl]] - rho_ref
    rho_far = field.rho[links.far_y[cyl], links.far_x[cyl]] - rho_ref

    share_out = W[d] * rho_near
    share_back = W[d] * np.where(q < 0.5, 2.0 * q * rho_near + (1.0 - 2.0 * q) * rho_far, rho_near)

    cx = C[d, 0].astype(float)
    pressure_force = np.sum(cx * (share_out + share_back))
    friction_force = np.sum(cx * ((f_out - share_out) + (f_back - share_back)) - u_wall[:, 0] * (f_out - f_back))

    scale = force_scale(config)
    return float(pressure_force / scale), float(friction_force / scale)


def surface_azimuth_to_point(theta: float, config: FlowConfig) -> Tuple[float, float]:
    """Lattice coordinates of the cylinder surface point at azimuth ``theta``."""
    phi = np.radians(azimuth_to_math(theta))
    cx, cy = config.center_lu
    return cx + config.radius_lu * float(np.cos(phi)), cy + config.radius_lu * float(np.sin(phi))
