import pandas as pd
import pytest

from cylinder_afc.utils.config import ConfigurationError
from cylinder_afc.utils.parser import parse_layout_spec, read_episodes, read_series, write_table


@pytest.mark.parametrize(
    "text, expected",
    [("L1", ("L1", None)), ("L2:8", ("L2", 8.0)), (" l3 : 150 ", ("L3", 150.0)), ("L3:7.5", ("L3", 7.5))],
)
def test_parse_layout_spec(text, expected) -> None:
    assert parse_layout_spec(text) == expected


@pytest.mark.parametrize("text", ["", "L4", "L1:3", "L2", "L3:", "L2:-4", "sensor"])
def test_parse_layout_spec_rejects(text) -> None:
    with pytest.raises(ConfigurationError):
        parse_layout_spec(text)


def test_series_round_trip_keeps_full_precision(tmp_path) -> None:
    frame = pd.DataFrame({"t": [0.0, 0.1], "cd": [3.2050000000000001, 1.0 / 3.0], "cl": [0.1, -0.2]})
    path = str(tmp_path / "out" / "forces.csv")
    write_table(frame, path)
    pd.testing.assert_frame_equal(read_series(path), frame)


def test_missing_columns_are_reported(tmp_path) -> None:
    path = tmp_path / "episodes.csv"
    pd.DataFrame({"episode": [0], "mean_cd": [3.0]}).to_csv(path, index=False)
    with pytest.raises(ValueError, match="std_cl"):
        read_episodes(str(path))


def test_unsupported_or_missing_files(tmp_path) -> None:
    path = tmp_path / "forces.txt"
    path.write_text("t,cd,cl\n")
    with pytest.raises(ValueError, match="Unsupported file format"):
        read_series(str(path))
    with pytest.raises(FileNotFoundError):
        read_series(str(tmp_path / "none.csv"))
