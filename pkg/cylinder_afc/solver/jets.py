"""
Synthetic-jet actuation on the cylinder surface.

Azimuths in this module follow the sensor convention: degrees measured
clockwise from the windward stagnation point, so the jets sit at 90 (top)
and 270 (bottom). Jet speeds are nondimensional, in units of the mean
inflow velocity.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Tuple

import numpy as np

from cylinder_afc.utils.config import ConfigurationError

logger = logging.getLogger(__name__)

# Sign applied to the shared jet scalar: positive blows at the top and sucks at the bottom
JET_SIGNS = (1.0, -1.0)


@dataclass(frozen=True)
class JetConfig:
    centers: Tuple[float, float] = (90.0, 270.0)
    width: float = 10.0
    alpha_smooth: float = 0.1
    max_amplitude: float = 1.5
    q_star_cap: float = 0.2
    history_length: int = 1000

    def __post_init__(self):
        if len(self.centers) != 2:
            raise ConfigurationError(f"Exactly two jet centers are supported, got {self.centers}")
        if self.width <= 0:
            raise ConfigurationError(f"Jet width must be positive, got {self.width}")
        if not 0 < self.alpha_smooth <= 1:
            raise ConfigurationError(f"alpha_smooth must lie in (0, 1], got {self.alpha_smooth}")
        if self.max_amplitude <= 0 or self.q_star_cap <= 0:
            raise ConfigurationError("Jet amplitude and flow-rate caps must be positive")
        gap = abs(wrap_degrees(self.centers[0] - self.centers[1]))
        if gap < self.width:
            raise ConfigurationError(f"Jet arcs overlap: centers {self.centers}, width {self.width}")

    @property
    def flux_speed_cap(self) -> float:
        """Peak jet speed at which |Q*| reaches the flow-rate cap."""
        return self.q_star_cap / flow_rate_factor(self)


@dataclass
class JetState:
    """Smoothed jet velocity and the raw actions that drove it."""

    v_current: float = 0.0
    action_history: Deque[float] = field(default_factory=lambda: deque(maxlen=1000))
    clamp_count: int = 0

    @classmethod
    def create(cls, config: "JetConfig") -> "JetState":
        return cls(action_history=deque(maxlen=config.history_length))

    @property
    def v_top(self) -> float:
        return JET_SIGNS[0] * self.v_current

    @property
    def v_bottom(self) -> float:
        return JET_SIGNS[1] * self.v_current


def wrap_degrees(angle):
    """Wrap an angle difference into [-180, 180)."""
    return (np.asarray(angle, dtype=float) + 180.0) % 360.0 - 180.0


def math_to_azimuth(phi):
    """Counter-clockwise angle from +x to clockwise azimuth from the windward point."""
    return (180.0 - np.asarray(phi, dtype=float)) % 360.0


def azimuth_to_math(theta):
    return (180.0 - np.asarray(theta, dtype=float)) % 360.0


def flow_rate_factor(config: JetConfig) -> float:
    # Q* per unit peak speed: (2/3) * arc length / D
    return (2.0 / 3.0) * (config.width / 360.0) * np.pi


def arc_profile(offset, width: float) -> np.ndarray:
    """
    Parabolic arc weight, 1 at the arc center and 0 at and beyond the edges.

    Args:
        offset: Angular distance from the arc center in degrees
        width: Full arc width in degrees

    Returns:
        Weights in [0, 1] with the shape of ``offset``
    """
    half = 0.5 * width
    rel = np.asarray(offset, dtype=float) / half
    return np.where(np.abs(rel) < 1.0, 1.0 - rel * rel, 0.0)


def clamp_amplitude(v: float, config: JetConfig) -> float:
    return float(np.clip(v, -config.max_amplitude, config.max_amplitude))


def clamp_flux(v: float, config: JetConfig) -> float:
    cap = config.flux_speed_cap
    return float(np.clip(v, -cap, cap))


def smooth_action(state: JetState, a: float, config: JetConfig, record: bool = True) -> JetState:
    """
    Move the jet velocity one smoothing step toward the action.

    V(t) = V(t-1) + alpha * (a - V(t-1)). Out-of-range actions are clamped
    to the amplitude cap; when ``record`` is set the clamp is counted and the
    action appended to the history, so callers applying the same action over
    a hold record it only once.

    Args:
        state: Jet state, updated in place
        a: Raw action (nondimensional peak jet velocity)
        config: Jet configuration
        record: Whether this call starts a new agent step

    Returns:
        The updated state
    """
    a = float(a)
    if not np.isfinite(a):
        raise ValueError(f"Jet action must be finite, got {a}")

    target = clamp_flux(clamp_amplitude(a, config), config)
    if record:
        if target != a:
            state.clamp_count += 1
            logger.warning(f"Jet action {a:.4f} clamped to {target:.4f}")
        state.action_history.append(target)

    v = state.v_current + config.alpha_smooth * (target - state.v_current)
    state.v_current = clamp_flux(clamp_amplitude(v, config), config)
    return state


def jet_velocity_profile(jet: int, s: float, v: float, config: JetConfig) -> np.ndarray:
    """
    Boundary velocity at a point of a jet arc.

    Args:
        jet: Jet index (0 top, 1 bottom)
        s: Angular position relative to the arc center, in degrees
        v: Shared jet scalar (nondimensional)
        config: Jet configuration

    Returns:
        Velocity vector (x, y) in units of the mean inflow velocity
    """
    if jet not in (0, 1):
        raise ValueError(f"Jet index must be 0 or 1, got {jet}")
    half = 0.5 * config.width
    if abs(s) > half:
        raise ValueError(f"Position {s} deg lies outside the {config.width} deg jet arc")

    phi = np.radians(azimuth_to_math(config.centers[jet] + s))
    normal = np.array([np.cos(phi), np.sin(phi)])
    return JET_SIGNS[jet] * v * float(arc_profile(s, config.width)) * normal


def jet_link_weights(dx: np.ndarray, dy: np.ndarray, config: JetConfig) -> np.ndarray:
    """
    Per-link wall-velocity weights for the jet arcs.

    Multiplying by the lattice jet speed gives each link's wall velocity.

    Args:
        dx, dy: Link midpoints relative to the cylinder center
        config: Jet configuration

    Returns:
        Array of shape (n, 2)
    """
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    r = np.hypot(dx, dy)
    theta = math_to_azimuth(np.degrees(np.arctan2(dy, dx)))

    weight = np.zeros(dx.shape)
    for center, sign in zip(config.centers, JET_SIGNS):
        weight += sign * arc_profile(wrap_degrees(theta - center), config.width)

    with np.errstate(invalid="ignore", divide="ignore"):
        normal = np.stack([dx / r, dy / r], axis=-1)
    normal[r == 0] = 0.0
    return weight[:, None] * normal


def normalized_flow_rate(state: JetState, config: JetConfig) -> float:
    """
    Normalized jet flow rate Q* = U_jet * D_jet / (U_mean * D) of the top jet.

    U_jet is the arc-mean speed, D_jet the arc length.
    """
    q_star = flow_rate_factor(config) * state.v_current
    if abs(q_star) > config.q_star_cap * (1.0 + 1e-12):
        logger.warning(f"Q* = {q_star:.4f} exceeds cap {config.q_star_cap}; clamping")
        state.v_current = clamp_flux(state.v_current, config)
        q_star = flow_rate_factor(config) * state.v_current
    return q_star


def signed_flow_rates(state: JetState, config: JetConfig) -> Tuple[float, float]:
    """Outward flow rates of the top and bottom jets; they sum to zero."""
    q = normalized_flow_rate(state, config)
    return JET_SIGNS[0] * q, JET_SIGNS[1] * q
