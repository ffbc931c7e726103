"""
Binary field snapshots for warm starts, and CSV field export.
"""

import logging
import os
import struct
from typing import Optional

import numpy as np
import pandas as pd

from cylinder_afc.solver.forces import pressure_field
from cylinder_afc.solver.jets import JetConfig
from cylinder_afc.solver.lattice import FlowConfig, LatticeField, init_field
from cylinder_afc.utils.config import ConfigurationError

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"AFCSNAP\0"
SNAPSHOT_VERSION = 1
HEADER = struct.Struct("<8sIIIdQ")


def save_snapshot(file_path: str, field: LatticeField, config: FlowConfig) -> None:
    """
    Write a field snapshot.

    Layout: header (magic, version, nx, ny, Re, step index) followed by f,
    rho and u as little-endian float64 in row-major order.
    """
    ny, nx = field.shape
    directory = os.path.dirname(os.path.abspath(file_path))
    os.makedirs(directory, exist_ok=True)

    with open(file_path, "wb") as f:
        f.write(HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, nx, ny, float(config.reynolds), field.step_index))
        for array in (field.f, field.rho, field.u):
            f.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
    logger.info(f"Saved snapshot at step {field.step_index} to {file_path}")


def load_snapshot(file_path: str, config: FlowConfig, jets: Optional[JetConfig] = None) -> LatticeField:
    """
    Read a snapshot written by save_snapshot.

    The obstacle mask and boundary links are rebuilt from ``config``.

    Args:
        file_path: Snapshot path
        config: Flow configuration the snapshot must match
        jets: Jet arcs for the rebuilt boundary links

    Returns:
        LatticeField holding the stored state
    """
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"Snapshot not found: {file_path}")

    with open(file_path, "rb") as f:
        data = f.read()

    if len(data) < HEADER.size:
        raise ValueError(f"Snapshot {file_path} is truncated")
    magic, version, nx, ny, reynolds, step_index = HEADER.unpack_from(data, 0)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{file_path} is not a field snapshot")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"Unsupported snapshot version {version} in {file_path}")
    if (nx, ny) != (config.nx, config.ny):
        raise ConfigurationError(
            f"Snapshot grid {nx}x{ny} does not match configured grid {config.nx}x{config.ny}"
        )
    if not np.isclose(reynolds, config.reynolds):
        raise ConfigurationError(f"Snapshot Re={reynolds} does not match configured Re={config.reynolds}")

    field = init_field(config, jets)
    offset = HEADER.size
    arrays = []
    for shape in ((9, ny, nx), (ny, nx), (2, ny, nx)):
        count = int(np.prod(shape))
        if len(data) < offset + 8 * count:
            raise ValueError(f"Snapshot {file_path} is truncated")
        arrays.append(np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(float))
        offset += 8 * count

    field.f, field.rho, field.u = arrays
    field.step_index = int(step_index)
    return field


def field_frame(field: LatticeField, config: FlowConfig) -> pd.DataFrame:
    """Cell-centred field in nondimensional units (lengths in D, velocity in U_mean)."""
    ny, nx = field.shape
    d = config.diameter_lu
    u_ref = config.u_mean_lb

    yy, xx = np.mgrid[0:ny, 0:nx]
    ux = field.u[0] / u_ref
    uy = field.u[1] / u_ref
    # Vorticity in units of U_mean / D
    vorticity = (np.gradient(uy, axis=1) - np.gradient(ux, axis=0)) * d
    vorticity[field.obstacle_mask] = 0.0
    p = pressure_field(field, config)
    p[field.obstacle_mask] = np.nan

    return pd.DataFrame(
        {
            "x": ((xx + 0.5) / d).ravel(),
            "y": ((yy + 0.5) / d).ravel(),
            "u": ux.ravel(),
            "v": uy.ravel(),
            "p": p.ravel(),
            "vorticity": vorticity.ravel(),
        }
    )


def export_field(field: LatticeField, config: FlowConfig, file_path: str) -> pd.DataFrame:
    """Write the field as an x,y,u,v,p,vorticity CSV grid."""
    frame = field_frame(field, config)
    directory = os.path.dirname(os.path.abspath(file_path))
    os.makedirs(directory, exist_ok=True)
    frame.to_csv(file_path, index=False)
    logger.info(f"Exported {len(frame)} cells to {file_path}")
    return frame
