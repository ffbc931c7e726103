import os
import sys

import pytest

# Make the cylinder_afc package importable without installation
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cylinder_afc.agent.sac import SacConfig
from cylinder_afc.control.environment import EpisodeConfig
from cylinder_afc.control.features import LiftingConfig
from cylinder_afc.control.sensors import SensorLayout
from cylinder_afc.control.training import Baseline, RunConfig, TrainingConfig
from cylinder_afc.solver.forces import ForceTrace
from cylinder_afc.solver.jets import JetConfig
from cylinder_afc.solver.lattice import FlowConfig, init_field


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run benchmark-resolution tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-resolution flow benchmarks (minutes)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_flow() -> FlowConfig:
    """8-cell cylinder in a short channel; tau = 0.58."""
    return FlowConfig(reynolds=20.0, diameter_lu=8, length_d=8.0)


@pytest.fixture
def tiny_baseline(tiny_flow: FlowConfig) -> Baseline:
    """Stand-in baseline: inlet-profile field with fixed reference statistics."""
    field = init_field(tiny_flow, JetConfig(), at_rest=False)
    return Baseline(
        field=field,
        cd_baseline=3.0,
        shedding_period=3.3,
        strouhal=1.0 / 3.3,
        cl_amplitude=0.0,
        trace=ForceTrace(),
    )


@pytest.fixture
def tiny_run(tiny_flow: FlowConfig, tmp_path) -> RunConfig:
    return RunConfig(
        flow=tiny_flow,
        jets=JetConfig(),
        layout=SensorLayout.from_spec("L3:150"),
        lifting=LiftingConfig(depth=5, standardize_window=5),
        agent=SacConfig(hidden_sizes=(16, 16), batch_size=4, update_every=2, gradient_steps=1),
        episode=EpisodeConfig(steps_per_episode=3, seeds=(0,), n_envs=2),
        training=TrainingConfig(
            name="tiny", episodes=5, checkpoint_every=2, evaluate_duration=0.5, out_dir=str(tmp_path)
        ),
    )


@pytest.fixture(scope="session")
def re100_baseline() -> Baseline:
    """Converged uncontrolled flow at the Re=100 benchmark resolution (slow tests only)."""
    from cylinder_afc.control.training import prepare_baseline

    return prepare_baseline(FlowConfig.from_preset("re100"), time_budget=400.0, progress=False)


@pytest.fixture(scope="session")
def re100_fine_baseline() -> Baseline:
    """The Re=100 baseline at twice the benchmark resolution (slow tests only)."""
    from cylinder_afc.control.training import prepare_baseline

    return prepare_baseline(FlowConfig.from_preset("re100").with_resolution(40), time_budget=400.0, progress=False)
