from __future__ import annotations

import numpy as np
import pytest

from src.estimator import sample_statistics
from src.series_io import SeriesFormatError, csv_to_series, path_to_csv
from src.simulator import ObservationSeries, SimConfig, simulate


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_simulated_series_roundtrip(tmp_path, daily_model):
    series = simulate(SimConfig(model=daily_model, n=300, seed=17))
    back = csv_to_series(path_to_csv(series, tmp_path / "path.csv"))
    assert back.delta_t == series.delta_t
    assert back.v0 == series.v0
    for name in ("x", "v", "z", "y"):
        np.testing.assert_array_equal(getattr(back, name), getattr(series, name))


def test_roundtrip_without_optional_columns(tmp_path):
    series = ObservationSeries(delta_t=0.5, x=[0.1, -0.2, 0.3], v=[1.0, 2.0, 0.5], v0=0.25)
    path = path_to_csv(series, tmp_path / "nested" / "plain.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# delta_t=0.5,v0=0.25"
    assert lines[1] == "i,x,v"
    back = csv_to_series(path)
    assert back.z is None and back.y is None
    np.testing.assert_array_equal(back.x, series.x)


def test_missing_column_is_named(tmp_path):
    path = write_text(tmp_path / "bad.csv", "# delta_t=0.004,v0=0.04\ni,x\n1,0.1\n")
    with pytest.raises(SeriesFormatError) as info:
        csv_to_series(path)
    assert info.value.column == "v"
    assert "'v'" in str(info.value)
    assert "Available columns: i, x" in str(info.value)


def test_empty_series_is_accepted_but_not_estimable(tmp_path, caplog):
    path = write_text(tmp_path / "empty.csv", "# delta_t=0.004,v0=0.04\ni,x,v\n")
    with caplog.at_level("WARNING"):
        series = csv_to_series(path)
    assert series.n == 0
    assert not series.is_estimable
    assert "cannot be used for estimation" in caplog.text


def test_non_numeric_value_reports_line(tmp_path):
    path = write_text(tmp_path / "bad.csv", "# delta_t=0.004,v0=0.04\ni,x,v\n1,0.1,0.04\n2,abc,0.05\n")
    with pytest.raises(SeriesFormatError) as info:
        csv_to_series(path)
    assert info.value.line == 4
    assert info.value.column == "x"


def test_ragged_row_reports_line(tmp_path):
    path = write_text(tmp_path / "bad.csv", "# delta_t=0.004,v0=0.04\ni,x,v\n1,0.1,0.04\n2,0.2,0.05,9,9\n")
    with pytest.raises(SeriesFormatError) as info:
        csv_to_series(path)
    assert info.value.line == 4


@pytest.mark.parametrize(
    "first_line", ["i,x,v", "# v0=0.04", "# delta_t=fast", "# delta_t"],
)
def test_bad_metadata(tmp_path, first_line):
    path = write_text(tmp_path / "bad.csv", f"{first_line}\ni,x,v\n1,0.1,0.04\n")
    with pytest.raises(SeriesFormatError) as info:
        csv_to_series(path)
    assert info.value.line == 1


def test_broken_index_sequence(tmp_path):
    path = write_text(tmp_path / "bad.csv", "# delta_t=0.004\ni,x,v\n1,0.1,0.04\n3,0.2,0.05\n")
    with pytest.raises(SeriesFormatError) as info:
        csv_to_series(path)
    assert (info.value.line, info.value.column) == (4, "i")


def test_negative_variance_rejected(tmp_path):
    path = write_text(tmp_path / "bad.csv", "# delta_t=0.004,v0=0.04\ni,x,v\n1,0.1,-0.04\n")
    with pytest.raises(SeriesFormatError) as info:
        csv_to_series(path)
    assert (info.value.line, info.value.column) == (3, "v")


def test_missing_v0_is_allowed(tmp_path):
    path = write_text(tmp_path / "novz.csv", "# delta_t=0.004\ni,x,v\n1,0.1,0.04\n2,0.2,0.05\n")
    series = csv_to_series(path)
    assert series.v0 is None
    assert not series.is_estimable


def test_values_parse_to_the_nearest_double(tmp_path):
    rng = np.random.default_rng(4)
    x = rng.normal(scale=0.02, size=400)
    v = rng.gamma(2.56, 1 / 64.0, size=400)
    body = "\n".join(f"{i},{a:.17g},{b:.17g}" for i, (a, b) in enumerate(zip(x, v), start=1))
    path = write_text(tmp_path / "digits.csv", f"# delta_t=0.004,v0=0.04\ni,x,v\n{body}\n")
    back = csv_to_series(path)
    np.testing.assert_array_equal(back.x, x)
    np.testing.assert_array_equal(back.v, v)
    short = write_text(tmp_path / "short.csv", "# delta_t=0.5\ni,x,v\n1,0.1,0.3\n2,-0.2,2.675\n")
    assert csv_to_series(short).x.tolist() == [0.1, -0.2]
    assert csv_to_series(short).v.tolist() == [0.3, 2.675]


def test_reread_path_gives_identical_statistics(tmp_path, daily_model):
    series = simulate(SimConfig(model=daily_model, n=2000, seed=23))
    back = csv_to_series(path_to_csv(series, tmp_path / "path.csv"))
    assert sample_statistics(back) == sample_statistics(series)
