import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dpensemble.errors import MalformedRow, MissingTestSeries, SeriesTooShort
from dpensemble.series import (RawSeries, embed_lags, invert_scale, length_histogram,
                               load_m4_weekly, minmax_scale, recursive_forecast, write_scaled_csv)
from dpensemble.synthetic import MIN_LENGTH, generate_corpus, write_corpus


def write(path, text):
    path.write_text(text)
    return path


def raw(values, sid="s"):
    return RawSeries(sid, np.asarray(values, dtype=float), 13)


def test_train_and_test_rows_concatenate(tmp_path):
    tr = write(tmp_path / "train.csv", "W1,1,2,3\n")
    te = write(tmp_path / "test.csv", "W1,4,5\n")
    [s] = load_m4_weekly(tr, te, horizon=2, lag=2)
    assert s.id == "W1"
    assert s.observations.tolist() == [1, 2, 3, 4, 5]
    assert s.horizon == 2


def test_header_and_ragged_rows(tmp_path):
    tr = write(tmp_path / "train.csv", '"V1","V2","V3","V4"\n"W1","1","2","3"\n"W2","7","8",""\n')
    te = write(tmp_path / "test.csv", '"V1","V2"\n"W1","4"\n"W2","9"\n')
    series = load_m4_weekly(tr, te, horizon=1, lag=2)
    assert [s.id for s in series] == ["W1", "W2"]
    assert series[1].observations.tolist() == [7, 8, 9]


def test_non_numeric_cell_names_series_and_column(tmp_path):
    tr = write(tmp_path / "train.csv", "W1,1,abc,3\n")
    te = write(tmp_path / "test.csv", "W1,4\n")
    with pytest.raises(MalformedRow) as err:
        load_m4_weekly(tr, te, lag=1)
    assert err.value.series_id == "W1" and err.value.column == 2
    assert "abc" in str(err.value)


def test_bad_first_cell_is_not_mistaken_for_header(tmp_path):
    tr = write(tmp_path / "train.csv", "W1,x,2,3\nW2,1,2,3\n")
    te = write(tmp_path / "test.csv", "W1,4\nW2,4\n")
    with pytest.raises(MalformedRow) as err:
        load_m4_weekly(tr, te, lag=1)
    assert err.value.series_id == "W1" and err.value.column == 1


def test_missing_test_row_warns_and_loads(tmp_path):
    tr = write(tmp_path / "train.csv", "W1,1,2,3\nW2,4,5,6\n")
    te = write(tmp_path / "test.csv", "W1,4\n")
    with pytest.warns(MissingTestSeries):
        series = load_m4_weekly(tr, te, lag=1)
    assert series[1].observations.tolist() == [4, 5, 6]


def test_short_series_skipped(tmp_path, caplog):
    tr = write(tmp_path / "train.csv", "W1,1,2\nW2,1,2,3,4,5,6,7,8\n")
    te = write(tmp_path / "test.csv", "W1,3\nW2,9\n")
    with caplog.at_level(logging.WARNING):
        series = load_m4_weekly(tr, te, lag=7)
    assert [s.id for s in series] == ["W2"]
    assert "W1" in caplog.text


def test_missing_file_is_io_failure(tmp_path):
    from dpensemble.errors import IoFailure
    with pytest.raises(IoFailure):
        load_m4_weekly(tmp_path / "nope.csv", tmp_path / "nope2.csv")


def test_synthetic_corpus_round_trip(tmp_path):
    tr, te = write_corpus(tmp_path, 5, horizon=13, seed=3)
    series = load_m4_weekly(tr, te, 13)
    corpus = generate_corpus(5, seed=3)
    assert [s.id for s in series] == list(corpus)
    for s in series:
        np.testing.assert_array_equal(s.observations, corpus[s.id])
    assert min(len(s) for s in series) == MIN_LENGTH


@pytest.mark.parametrize("values,expected", [
    ((0, 5, 10), (0.0, 0.5, 1.0)),
    ((-2, 0, 2), (0.0, 0.5, 1.0)),
])
def test_minmax_scale(values, expected):
    s = minmax_scale(raw(values))
    assert s.values.tolist() == list(expected)
    assert (s.scale_min, s.scale_max) == (min(values), max(values))
    assert not s.degenerate


def test_constant_series_is_degenerate():
    s = minmax_scale(raw((7, 7, 7)))
    assert s.values.tolist() == [0.0, 0.0, 0.0]
    assert s.degenerate


def test_invert_scale_examples():
    assert invert_scale([0.0, 1.0], 10, 20).tolist() == [10, 20]
    assert invert_scale([0.5], -4, 4).tolist() == [0]
    assert invert_scale([1.5], 0, 2).tolist() == [3.0]  # not clamped
    s = minmax_scale(raw((3, 9, 6)))
    np.testing.assert_allclose(invert_scale(s.values, s.scale_min, s.scale_max), [3, 9, 6], rtol=1e-12)


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(arrays(float, st.integers(2, 200), elements=finite))
def test_scale_round_trip(y):
    s = minmax_scale(raw(y))
    if s.degenerate:
        return
    assert s.values.min() == 0.0 and s.values.max() == 1.0
    back = invert_scale(s.values, s.scale_min, s.scale_max)
    span = s.scale_max - s.scale_min
    # relative to the series range; values near zero have no meaningful relative error
    np.testing.assert_allclose(back, y, rtol=1e-12, atol=1e-12 * max(span, np.abs(y).max()))


def test_embed_lag_shapes():
    f = embed_lags(np.linspace(0, 1, 10), 7)
    assert f.inputs.shape == (3, 7) and f.targets.shape == (3,)


def test_embed_single_row():
    vals = np.round(np.arange(1, 9) / 10, 1)
    f = embed_lags(vals, 7)
    np.testing.assert_array_equal(f.inputs, [vals[:7]])
    assert f.targets.tolist() == [0.8]


def test_embed_too_short():
    with pytest.raises(SeriesTooShort):
        embed_lags(np.zeros(7), 7)


@given(st.integers(1, 12), st.integers(0, 40))
def test_window_consistency(b, extra):
    vals = np.random.default_rng(b * 100 + extra).random(b + 1 + extra)
    f = embed_lags(vals, b)
    assert f.inputs.shape == (len(vals) - b, b) == (len(f.targets), b)
    for r in range(len(f.targets)):
        np.testing.assert_array_equal(f.inputs[r], vals[r:r + b])
        assert f.targets[r] == vals[r + b]


def test_recursive_forecast_constant():
    assert recursive_forecast(lambda w: 0.5, np.zeros(7), 3).tolist() == [0.5, 0.5, 0.5]


def test_recursive_forecast_fixed_point():
    assert recursive_forecast(np.mean, np.full(7, 0.2), 2) == pytest.approx([0.2, 0.2], abs=1e-15)


def test_recursive_forecast_last_element():
    window = np.array([0.1, 0.3, 0.5, 0.2, 0.4, 0.6, 0.9])
    assert recursive_forecast(lambda w: w[-1], window, 4).tolist() == [0.9] * 4


def test_recursive_forecast_feeds_back():
    seen = []

    def step(w):
        seen.append(w.copy())
        return w[-1] + 1

    out = recursive_forecast(step, np.array([0.0, 1.0, 2.0]), 3)
    assert out.tolist() == [3, 4, 5]
    np.testing.assert_array_equal(seen[2], [2, 3, 4])


@given(st.integers(1, 50))
def test_recursive_forecast_length(h):
    assert len(recursive_forecast(lambda w: 0.0, np.zeros(3), h)) == h


def test_histogram_starts_at_min_length():
    series = [raw(np.zeros(n)) for n in (276, 280, 390, 1000)]
    rows = length_histogram(series, bin_width=100)
    assert rows[0] == (276, 2)
    assert rows[1] == (376, 1)
    assert rows[-1][0] <= 1000 < rows[-1][0] + 100
    assert sum(c for _, c in rows) == 4


def test_scaled_dump(tmp_path):
    path = tmp_path / "scaled.csv"
    write_scaled_csv([minmax_scale(raw((1, 2, 3), "A"))], path)
    lines = path.read_text().splitlines()
    assert lines[1].startswith("A,1.0,3.0,0,0.0 0.5 1.0")
