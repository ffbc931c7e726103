"""
D2Q9 BGK lattice-Boltzmann solver for the confined cylinder channel.

Arrays are stored as f[q, y, x], rho[y, x] and u[2, y, x]. Cell centres sit
at (i + 0.5, j + 0.5) in lattice units; the channel walls lie at y = 0 and
y = ny and use half-way bounce-back. The cylinder surface uses linear
interpolated bounce-back at the exact wall crossing of each link, or half-way
bounce-back when interpolation is switched off. A periodic config drops the
inlet and outlet and wraps the channel streamwise.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from cylinder_afc.solver.jets import JetConfig, JetState, jet_link_weights, math_to_azimuth
from cylinder_afc.utils.config import ConfigurationError

logger = logging.getLogger(__name__)

C = np.array([[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1], [1, 1], [-1, 1], [-1, -1], [1, -1]])
W = np.array([4 / 9] + [1 / 9] * 4 + [1 / 36] * 4)
OPPOSITE = np.array([0, 3, 4, 1, 2, 7, 8, 5, 6])
CS2 = 1.0 / 3.0
RHO0 = 1.0

WALL_LINK = 0
CYLINDER_LINK = 1

PRESETS = {
    "re100": {"reynolds": 100.0, "diameter_lu": 20, "u_max_lb": 0.1},
    "re500": {"reynolds": 500.0, "diameter_lu": 40, "u_max_lb": 0.1},
    "re1000": {"reynolds": 1000.0, "diameter_lu": 80, "u_max_lb": 0.1},
}


class SolverDivergenceError(RuntimeError):
    """Raised when the lattice state becomes non-physical."""

    def __init__(self, step_index: int, reason: str = "non-physical state"):
        super().__init__(f"Solver diverged at step {step_index}: {reason}")
        self.step_index = step_index
        self.reason = reason


@dataclass(frozen=True)
class FlowConfig:
    reynolds: float = 100.0
    diameter_lu: int = 20
    length_d: float = 22.0
    height_d: float = 4.1
    center_d: Tuple[float, float] = (2.0, 2.0)
    u_max_lb: float = 0.1
    with_cylinder: bool = True
    inflow: bool = True
    interpolated_bounce_back: bool = True
    periodic: bool = False

    def __post_init__(self):
        if self.reynolds <= 0:
            raise ConfigurationError(f"Reynolds number must be positive, got {self.reynolds}")
        if not 0 < self.u_max_lb <= 0.1:
            raise ConfigurationError(f"u_max_lb must lie in (0, 0.1], got {self.u_max_lb}")
        if self.diameter_lu < 4:
            raise ConfigurationError(f"diameter_lu must be at least 4 cells, got {self.diameter_lu}")
        if self.tau <= 0.5:
            raise ConfigurationError(
                f"Relaxation time {self.tau:.4f} <= 0.5 for Re={self.reynolds}, D={self.diameter_lu}; "
                "increase diameter_lu or u_max_lb"
            )
        if self.with_cylinder:
            cx, cy = self.center_lu
            r = self.radius_lu
            if cx - r <= 0 or cx + r >= self.nx or cy - r <= 0 or cy + r >= self.ny:
                raise ConfigurationError(
                    f"Cylinder at {self.center_d} D overlaps the {self.nx}x{self.ny} domain boundary"
                )

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "FlowConfig":
        if name not in PRESETS:
            raise ConfigurationError(f"Unknown flow preset '{name}'; choose from {sorted(PRESETS)}")
        values = dict(PRESETS[name])
        values.update(overrides)
        return cls(**values)

    @property
    def nx(self) -> int:
        return int(round(self.length_d * self.diameter_lu))

    @property
    def ny(self) -> int:
        return int(round(self.height_d * self.diameter_lu))

    @property
    def radius_lu(self) -> float:
        return 0.5 * self.diameter_lu

    @property
    def center_lu(self) -> Tuple[float, float]:
        return self.center_d[0] * self.diameter_lu, self.center_d[1] * self.diameter_lu

    @property
    def u_mean_lb(self) -> float:
        return (2.0 / 3.0) * self.u_max_lb

    @property
    def viscosity_lb(self) -> float:
        return self.u_mean_lb * self.diameter_lu / self.reynolds

    @property
    def tau(self) -> float:
        return 3.0 * self.viscosity_lb + 0.5

    @property
    def omega(self) -> float:
        return 1.0 / self.tau

    @property
    def time_scale(self) -> float:
        """Lattice steps per nondimensional time unit D / U_mean."""
        return self.diameter_lu / self.u_mean_lb

    def with_resolution(self, diameter_lu: int) -> "FlowConfig":
        return replace(self, diameter_lu=diameter_lu)


@dataclass(frozen=True)
class BoundaryLinks:
    """
    Bounce-back links leaving fluid nodes toward a wall or the cylinder.

    Each entry is the fluid node (y, x) and the direction pointing into the
    boundary. ``q`` is the fraction of the link, measured from the fluid
    node, at which it crosses the wall; (far_y, far_x) is the next fluid node
    back along the link, used when q < 0.5. Azimuths are NaN for wall links.
    """

    direction: np.ndarray
    y: np.ndarray
    x: np.ndarray
    kind: np.ndarray
    q: np.ndarray
    far_y: np.ndarray
    far_x: np.ndarray
    azimuth: np.ndarray
    jet_weight: np.ndarray
    surface_nodes: np.ndarray
    surface_azimuth: np.ndarray

    def __len__(self) -> int:
        return len(self.direction)

    @property
    def cylinder(self) -> np.ndarray:
        return self.kind == CYLINDER_LINK

    @property
    def wall_scale(self) -> np.ndarray:
        """Weight of the moving-wall term in the interpolated bounce-back."""
        return np.where(self.q < 0.5, 1.0, 0.5 / self.q)


@dataclass
class LatticeField:
    f: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    obstacle_mask: np.ndarray
    boundary_links: BoundaryLinks
    step_index: int = 0
    jet_speed_lb: float = 0.0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rho.shape

    def copy(self) -> "LatticeField":
        return LatticeField(
            f=self.f.copy(),
            rho=self.rho.copy(),
            u=self.u.copy(),
            obstacle_mask=self.obstacle_mask,
            boundary_links=self.boundary_links,
            step_index=self.step_index,
            jet_speed_lb=self.jet_speed_lb,
        )


def equilibrium(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Second-order equilibrium; rho has shape S, u shape (2,) + S."""
    rho = np.asarray(rho, dtype=float)
    cu = np.tensordot(C, u, axes=(1, 0))
    usq = u[0] ** 2 + u[1] ** 2
    w = W.reshape((9,) + (1,) * rho.ndim)
    return w * rho * (1.0 + 3.0 * cu + 4.5 * cu ** 2 - 1.5 * usq)


def macroscopic(f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    rho = f.sum(axis=0)
    u = np.tensordot(C.T, f, axes=(1, 0)) / rho
    return rho, u


def obstacle_mask(config: FlowConfig) -> np.ndarray:
    """Cells whose centre lies within the cylinder radius."""
    if not config.with_cylinder:
        return np.zeros((config.ny, config.nx), dtype=bool)
    cx, cy = config.center_lu
    yy, xx = np.mgrid[0:config.ny, 0:config.nx]
    return (xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2 <= config.radius_lu ** 2


def wall_fractions(ys: np.ndarray, xs: np.ndarray, direction: np.ndarray, config: FlowConfig) -> np.ndarray:
    """
    Where each fluid-to-solid link crosses the cylinder circle.

    Solves |p + t c - centre| = R for the entry root t in (0, 1], with p the
    fluid cell centre and c the link vector.
    """
    cx, cy = config.center_lu
    c = C[direction].astype(float)
    px = xs + 0.5 - cx
    py = ys + 0.5 - cy
    a = c[:, 0] ** 2 + c[:, 1] ** 2
    b = 2.0 * (c[:, 0] * px + c[:, 1] * py)
    k = px * px + py * py - config.radius_lu ** 2
    root = np.sqrt(np.maximum(b * b - 4.0 * a * k, 0.0))
    return np.clip((-b - root) / (2.0 * a), 1e-6, 1.0)


def build_links(mask: np.ndarray, config: FlowConfig, jets: JetConfig) -> BoundaryLinks:
    ny, nx = mask.shape
    fluid_y, fluid_x = np.nonzero(~mask)
    cx, cy = config.center_lu

    parts = {"direction": [], "y": [], "x": [], "kind": []}
    for d in range(1, 9):
        ty = fluid_y + C[d, 1]
        tx = fluid_x + C[d, 0]
        wall = (ty < 0) | (ty >= ny)
        inside = ~wall & (tx >= 0) & (tx < nx)
        solid = np.zeros_like(wall)
        solid[inside] = mask[ty[inside], tx[inside]]
        hit = wall | solid
        parts["direction"].append(np.full(hit.sum(), d))
        parts["y"].append(fluid_y[hit])
        parts["x"].append(fluid_x[hit])
        parts["kind"].append(np.where(wall[hit], WALL_LINK, CYLINDER_LINK))

    direction = np.concatenate(parts["direction"]).astype(np.int64)
    ys = np.concatenate(parts["y"]).astype(np.int64)
    xs = np.concatenate(parts["x"]).astype(np.int64)
    kind = np.concatenate(parts["kind"]).astype(np.int8)

    cyl = kind == CYLINDER_LINK
    q = np.full(len(direction), 0.5)
    far_y, far_x = ys.copy(), xs.copy()
    if config.interpolated_bounce_back and cyl.any():
        q[cyl] = wall_fractions(ys[cyl], xs[cyl], direction[cyl], config)
        fy = ys - C[direction, 1]
        fx = xs - C[direction, 0]
        usable = cyl & (fy >= 0) & (fy < ny) & (fx >= 0) & (fx < nx)
        usable[usable] = ~mask[fy[usable], fx[usable]]
        far_y[usable], far_x[usable] = fy[usable], fx[usable]
        # No fluid node behind the link: fall back to the half-way rule
        q = np.where(cyl & ~usable, np.maximum(q, 0.5), q)

    dx = xs + 0.5 + q * C[direction, 0] - cx
    dy = ys + 0.5 + q * C[direction, 1] - cy
    azimuth = np.full(len(direction), np.nan)
    azimuth[cyl] = math_to_azimuth(np.degrees(np.arctan2(dy[cyl], dx[cyl])))
    jet_weight = np.zeros((len(direction), 2))
    jet_weight[cyl] = jet_link_weights(dx[cyl], dy[cyl], jets)

    nodes = np.unique(np.stack([ys[cyl], xs[cyl]], axis=1), axis=0) if cyl.any() else np.zeros((0, 2), int)
    node_azimuth = math_to_azimuth(np.degrees(np.arctan2(nodes[:, 0] + 0.5 - cy, nodes[:, 1] + 0.5 - cx)))

    return BoundaryLinks(
        direction=direction,
        y=ys,
        x=xs,
        kind=kind,
        q=q,
        far_y=far_y,
        far_x=far_x,
        azimuth=azimuth,
        jet_weight=jet_weight,
        surface_nodes=nodes,
        surface_azimuth=node_azimuth,
    )


def inlet_profile(y, config: FlowConfig) -> np.ndarray:
    """
    Parabolic inflow 4 U_m y (H - y) / H^2 in lattice units.

    Args:
        y: Cross-stream coordinate(s) in lattice units, 0 <= y <= H
        config: Flow configuration

    Returns:
        Velocity array of shape (2,) + shape(y); zero when inflow is disabled
    """
    y = np.asarray(y, dtype=float)
    height = float(config.ny)
    if np.any(y < 0) or np.any(y > height):
        raise ValueError(f"Cross-stream coordinate outside the channel [0, {height}]: {y}")

    u_max = config.u_max_lb if config.inflow else 0.0
    ux = 4.0 * u_max * y * (height - y) / height ** 2
    return np.stack([ux, np.zeros_like(ux)])


def init_field(config: FlowConfig, jets: Optional[JetConfig] = None, at_rest: bool = True) -> LatticeField:
    """
    Build an equilibrium lattice field.

    Args:
        config: Flow configuration
        jets: Jet arcs used for the boundary-link weights
        at_rest: Start from rest fluid; otherwise the inlet profile fills the channel

    Returns:
        New LatticeField with its obstacle mask and boundary links
    """
    jets = jets or JetConfig()
    mask = obstacle_mask(config)
    if config.with_cylinder and not mask.any():
        raise ConfigurationError(f"Cylinder of diameter {config.diameter_lu} cells rasterizes to no cells")

    rho = np.ones((config.ny, config.nx))
    u = np.zeros((2, config.ny, config.nx))
    if not at_rest:
        profile = inlet_profile(np.arange(config.ny) + 0.5, config)[0]
        u[0] = profile[:, None]
        u[:, mask] = 0.0

    links = build_links(mask, config, jets)
    logger.debug(
        f"Initialized {config.nx}x{config.ny} lattice, {int(mask.sum())} solid cells, "
        f"{int(links.cylinder.sum())} cylinder links, tau={config.tau:.4f}"
    )
    return LatticeField(f=equilibrium(rho, u), rho=rho, u=u, obstacle_mask=mask, boundary_links=links)


def _collide(f: np.ndarray, rho: np.ndarray, u: np.ndarray, omega: float) -> np.ndarray:
    return f - omega * (f - equilibrium(rho, u))


def post_collision(field: LatticeField, config: FlowConfig, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Post-collision populations at the nodes (ys, xs), shape (9, n)."""
    f = field.f[:, ys, xs]
    return _collide(f, field.rho[ys, xs], field.u[:, ys, xs], config.omega)


def wall_velocity(field: LatticeField, jet_speed_lb: float) -> np.ndarray:
    return jet_speed_lb * field.boundary_links.jet_weight


def bounced_populations(
    f_out: np.ndarray,
    f_far: np.ndarray,
    f_rev: np.ndarray,
    d: np.ndarray,
    q: np.ndarray,
    u_wall: np.ndarray,
) -> np.ndarray:
    """
    Populations returned into the fluid along links of direction d.

    Linear interpolated bounce-back with a moving-wall correction. At
    q = 0.5 it reduces exactly to half-way bounce-back.

    Args:
        f_out: Post-collision population leaving the fluid node along d
        f_far: Same direction at the node one link further from the wall
        f_rev: Opposite direction at the fluid node
        d: Link directions
        q: Wall fractions of the links
        u_wall: Wall velocity per link, shape (n, 2)
    """
    two_q = 2.0 * q
    near = q < 0.5
    value = np.where(near, two_q * f_out + (1.0 - two_q) * f_far, f_out / two_q + (1.0 - 1.0 / two_q) * f_rev)
    cu = C[d, 0] * u_wall[:, 0] + C[d, 1] * u_wall[:, 1]
    return value - 6.0 * W[d] * RHO0 * cu * np.where(near, 1.0, 1.0 / two_q)


def link_populations(
    field: LatticeField, config: FlowConfig, select: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Populations the next streaming step exchanges across boundary links.

    Args:
        field: Lattice state
        config: Flow configuration
        select: Boolean mask over the links, default all

    Returns:
        (f_out, f_back): outgoing post-collision populations and the values
        bounced back along each selected link
    """
    links = field.boundary_links
    select = np.ones(len(links), dtype=bool) if select is None else select
    d = links.direction[select]
    idx = np.arange(len(d))
    near = post_collision(field, config, links.y[select], links.x[select])
    far = post_collision(field, config, links.far_y[select], links.far_x[select])
    f_out = near[d, idx]
    u_wall = wall_velocity(field, field.jet_speed_lb)[select]
    f_back = bounced_populations(f_out, far[d, idx], near[OPPOSITE[d], idx], d, links.q[select], u_wall)
    return f_out, f_back


def step(field: LatticeField, jets: Optional[JetState], config: FlowConfig) -> LatticeField:
    """
    Advance the field by one collide-stream cycle.

    The field is updated in place and returned.

    Raises:
        SolverDivergenceError: density, velocity or distributions became non-physical
    """
    links = field.boundary_links
    mask = field.obstacle_mask
    jet_speed_lb = (jets.v_current if jets is not None else 0.0) * config.u_mean_lb

    f_post = _collide(field.f, field.rho, field.u, config.omega)
    f_post[:, mask] = W[:, None]

    f_new = np.empty_like(f_post)
    for q in range(9):
        f_new[q] = np.roll(f_post[q], shift=(C[q, 1], C[q, 0]), axis=(0, 1))

    d = links.direction
    f_new[OPPOSITE[d], links.y, links.x] = bounced_populations(
        f_post[d, links.y, links.x],
        f_post[d, links.far_y, links.far_x],
        f_post[OPPOSITE[d], links.y, links.x],
        d,
        links.q,
        wall_velocity(field, jet_speed_lb),
    )

    if not config.periodic:
        # Zou-He velocity inlet
        ux = inlet_profile(np.arange(config.ny) + 0.5, config)[0]
        col = f_new[:, :, 0]
        rho_in = (col[0] + col[2] + col[4] + 2.0 * (col[3] + col[6] + col[7])) / (1.0 - ux)
        half_diff = 0.5 * (col[2] - col[4])
        col[1] = col[3] + (2.0 / 3.0) * rho_in * ux
        col[5] = col[7] - half_diff + (1.0 / 6.0) * rho_in * ux
        col[8] = col[6] + half_diff + (1.0 / 6.0) * rho_in * ux

        # Outlet: non-equilibrium extrapolation at reference density
        rho_nbr, u_nbr = macroscopic(f_new[:, :, -2])
        f_new[:, :, -1] = equilibrium(np.full_like(rho_nbr, RHO0), u_nbr) + (
            f_new[:, :, -2] - equilibrium(rho_nbr, u_nbr)
        )

    f_new[:, mask] = W[:, None]

    rho, u = macroscopic(f_new)
    rho[mask] = RHO0
    u[:, mask] = 0.0

    field.f = f_new
    field.rho = rho
    field.u = u
    field.step_index += 1
    field.jet_speed_lb = jet_speed_lb

    _check_divergence(field)
    return field


def _check_divergence(field: LatticeField) -> None:
    fluid = ~field.obstacle_mask
    reason = None
    if not np.all(np.isfinite(field.f)):
        reason = "non-finite distributions"
    elif np.any(field.rho[fluid] <= 0):
        reason = "non-positive density"
    elif np.any((field.u[0] ** 2 + field.u[1] ** 2)[fluid] >= CS2):
        reason = "velocity reached the lattice sound speed"
    if reason is not None:
        logger.error(f"Divergence at step {field.step_index}: {reason}")
        raise SolverDivergenceError(field.step_index, reason)


def fluid_mass(field: LatticeField) -> float:
    return float(field.rho[~field.obstacle_mask].sum())


def jet_mass_flux(field: LatticeField, jet_speed_lb: float) -> float:
    """Net mass injected through the cylinder links per step by the jets."""
    links = field.boundary_links
    u_wall = wall_velocity(field, jet_speed_lb)
    d = links.direction
    cu = C[d, 0] * u_wall[:, 0] + C[d, 1] * u_wall[:, 1]
    return float(np.sum(-6.0 * W[d] * RHO0 * cu * links.wall_scale))
