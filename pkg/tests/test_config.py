import os
from dataclasses import dataclass
from typing import Tuple

import pytest

from cylinder_afc.control.training import load_run_config, run_config_from_dict
from cylinder_afc.solver.lattice import FlowConfig
from cylinder_afc.utils.config import (
    ConfigurationError,
    build_dataclass,
    config_hash,
    load_toml,
    split_section,
    to_plain,
)

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


@dataclass(frozen=True)
class _Sample:
    size: int = 1
    pair: Tuple[int, int] = (0, 0)


def test_load_toml_missing_file_names_path(tmp_path) -> None:
    path = str(tmp_path / "absent.toml")
    with pytest.raises(FileNotFoundError, match="absent.toml"):
        load_toml(path)


def test_load_toml_malformed(tmp_path) -> None:
    path = tmp_path / "bad.toml"
    path.write_text("[flow\nreynolds = ")
    with pytest.raises(ConfigurationError):
        load_toml(str(path))


def test_build_dataclass_rejects_unknown_keys() -> None:
    with pytest.raises(ConfigurationError, match="bogus"):
        build_dataclass(_Sample, {"bogus": 1}, "sample")


def test_build_dataclass_converts_lists_to_tuples() -> None:
    built = build_dataclass(_Sample, {"pair": [3, 4]}, "sample")
    assert built.pair == (3, 4)
    assert built.size == 1


def test_build_dataclass_keeps_base_values() -> None:
    base = _Sample(size=7)
    assert build_dataclass(_Sample, {}, "sample", base).size == 7


def test_split_section_routes_keys() -> None:
    @dataclass
    class Other:
        name: str = ""

    first, second = split_section({"size": 2, "name": "x"}, "s", _Sample, Other)
    assert first == {"size": 2}
    assert second == {"name": "x"}
    with pytest.raises(ConfigurationError):
        split_section({"unknown": 1}, "s", _Sample, Other)


def test_config_hash_is_stable_and_sensitive() -> None:
    assert config_hash(FlowConfig()) == config_hash(FlowConfig())
    assert config_hash(FlowConfig()) != config_hash(FlowConfig(reynolds=200.0))
    assert to_plain(FlowConfig())["center_d"] == [2.0, 2.0]


def test_run_config_from_dict_preset_and_overrides() -> None:
    config = run_config_from_dict(
        {
            "flow": {"preset": "re500"},
            "sensors": {"layout": "L2:8", "lifting_depth": 12},
            "training": {"steps_per_episode": 40, "episodes": 10},
        }
    )
    assert config.flow.diameter_lu == 40
    assert config.flow.reynolds == 500.0
    assert config.layout.count == 8
    assert config.lifting.depth == 12
    assert config.episode.steps_per_episode == 40
    assert config.training.episodes == 10
    assert config.obs_dim == 12 * 9


def test_run_config_rejects_unknown_section() -> None:
    with pytest.raises(ConfigurationError, match="solver"):
        run_config_from_dict({"solver": {"steps": 1}})


def test_run_config_rejects_unknown_preset() -> None:
    with pytest.raises(ConfigurationError):
        run_config_from_dict({"flow": {"preset": "re42"}})


def test_shipped_configs_load() -> None:
    for name in ("re100.toml", "smoke.toml", "validation_d40.toml"):
        config = load_run_config(os.path.join(CONFIG_DIR, name))
        assert config.flow.tau > 0.5

    re100 = load_run_config(os.path.join(CONFIG_DIR, "re100.toml"))
    assert re100.layout.spec == "L3:150"
    assert re100.obs_dim == 60
    assert re100.agent.hidden_sizes == (512, 512)
