import numpy as np
import pandas as pd
import pytest

from cylinder_afc.solver.jets import JetConfig, JetState
from cylinder_afc.solver.lattice import FlowConfig, init_field, step
from cylinder_afc.solver.snapshot import export_field, load_snapshot, save_snapshot
from cylinder_afc.utils.config import ConfigurationError


def _advanced_field(config: FlowConfig, steps: int):
    field = init_field(config, at_rest=False)
    for _ in range(steps):
        step(field, None, config)
    return field


def test_reload_continues_bitwise(tiny_flow: FlowConfig, tmp_path) -> None:
    path = str(tmp_path / "snap.bin")
    field = _advanced_field(tiny_flow, 30)
    save_snapshot(path, field, tiny_flow)
    restored = load_snapshot(path, tiny_flow, JetConfig())
    assert restored.step_index == 30

    jets_a, jets_b = JetState(), JetState()
    for _ in range(100):
        step(field, jets_a, tiny_flow)
        step(restored, jets_b, tiny_flow)
    assert np.array_equal(field.f, restored.f)
    assert restored.step_index == field.step_index


def test_snapshot_rejects_mismatched_config(tiny_flow: FlowConfig, tmp_path) -> None:
    path = str(tmp_path / "snap.bin")
    save_snapshot(path, init_field(tiny_flow), tiny_flow)
    with pytest.raises(ConfigurationError):
        load_snapshot(path, FlowConfig(reynolds=30.0, diameter_lu=8, length_d=8.0))
    with pytest.raises(ConfigurationError):
        load_snapshot(path, FlowConfig(reynolds=20.0, diameter_lu=10, length_d=8.0))


def test_snapshot_rejects_foreign_and_truncated_files(tiny_flow: FlowConfig, tmp_path) -> None:
    foreign = tmp_path / "foreign.bin"
    foreign.write_bytes(b"not a snapshot at all, just some bytes")
    with pytest.raises(ValueError):
        load_snapshot(str(foreign), tiny_flow)

    path = tmp_path / "snap.bin"
    save_snapshot(str(path), init_field(tiny_flow), tiny_flow)
    truncated = tmp_path / "truncated.bin"
    truncated.write_bytes(path.read_bytes()[:200])
    with pytest.raises(ValueError, match="truncated"):
        load_snapshot(str(truncated), tiny_flow)

    with pytest.raises(FileNotFoundError):
        load_snapshot(str(tmp_path / "missing.bin"), tiny_flow)


def test_export_field_columns(tiny_flow: FlowConfig, tmp_path) -> None:
    field = _advanced_field(tiny_flow, 5)
    path = tmp_path / "field.csv"
    export_field(field, tiny_flow, str(path))
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["x", "y", "u", "v", "p", "vorticity"]
    assert len(frame) == tiny_flow.nx * tiny_flow.ny
    # Solid cells carry no pressure
    assert frame["p"].isna().sum() == int(field.obstacle_mask.sum())
    assert frame["u"].max() == pytest.approx(field.u[0].max() / tiny_flow.u_mean_lb)
