"""Tests for series/report ingestion, normalization, windowing and text attachment."""

import logging

import numpy as np
import pandas as pd
import pytest

from diffcast.core.errors import ConfigError, InputError
from diffcast.data.dataset import DataSource, load_source, prepare_dataset
from diffcast.data.reports import Report, load_reports, sort_reports
from diffcast.data.series import SeriesFrame, denormalize, load_series, normalize
from diffcast.data.windows import SplitSpec, attach_text, make_windows


def write_csv(tmp_path, text, name="series.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def daily_frame(n, channels=1):
    values = np.arange(n * channels, dtype=np.float64).reshape(n, channels)
    names = [f"c{i}" for i in range(channels)]
    return SeriesFrame(pd.date_range("2024-01-01", periods=n, freq="D"), values, names, "daily")


# ----------------------------------------------------------------------
# CSV series
# ----------------------------------------------------------------------


class TestLoadSeries:
    def test_valid_file(self, tmp_path):
        path = write_csv(tmp_path, "timestamp,cases,deaths\n2024-01-01,1,0.5\n2024-01-02,2,0.25\n2024-01-03,4,0\n")
        frame = load_series(path)
        assert frame.channels == ["cases", "deaths"]
        assert frame.frequency == "daily"
        assert frame.values.tolist() == [[1.0, 0.5], [2.0, 0.25], [4.0, 0.0]]

    @pytest.mark.parametrize("dates,expected", [
        (["2024-01-01", "2024-01-08", "2024-01-15"], "weekly"),
        (["2024-01-01", "2024-02-01", "2024-03-01"], "monthly"),
    ])
    def test_inferred_frequency(self, tmp_path, dates, expected):
        rows = "".join(f"{d},{i}\n" for i, d in enumerate(dates))
        assert load_series(write_csv(tmp_path, "timestamp,v\n" + rows)).frequency == expected

    def test_missing_value_names_row(self, tmp_path):
        path = write_csv(tmp_path, "timestamp,v\n2024-01-01,1\n2024-01-02,\n")
        with pytest.raises(InputError, match="row 3"):
            load_series(path)

    def test_non_numeric_names_row(self, tmp_path):
        path = write_csv(tmp_path, "timestamp,v\n2024-01-01,1\n2024-01-02,2\n2024-01-03,abc\n")
        with pytest.raises(InputError, match="row 4"):
            load_series(path)

    def test_non_increasing_timestamps(self, tmp_path):
        path = write_csv(tmp_path, "timestamp,v\n2024-01-02,1\n2024-01-01,2\n")
        with pytest.raises(InputError, match="not strictly increasing at row 3"):
            load_series(path)

    def test_bad_timestamp(self, tmp_path):
        path = write_csv(tmp_path, "timestamp,v\n2024-01-01,1\nyesterday,2\n")
        with pytest.raises(InputError, match="row 3"):
            load_series(path)

    def test_bad_header(self, tmp_path):
        with pytest.raises(InputError, match="header"):
            load_series(write_csv(tmp_path, "date,v\n2024-01-01,1\n"))

    def test_single_row_needs_explicit_frequency(self, tmp_path):
        path = write_csv(tmp_path, "timestamp,v\n2024-01-01,1\n")
        with pytest.raises(InputError, match="single row; set data.frequency"):
            load_series(path)
        assert load_series(path, frequency="weekly").frequency == "weekly"

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="not found"):
            load_series(tmp_path / "nope.csv")


# ----------------------------------------------------------------------
# JSONL reports
# ----------------------------------------------------------------------


class TestLoadReports:
    def test_sorted_and_indexed(self, tmp_path):
        path = write_csv(tmp_path, "\n".join([
            '{"start": "2024-02-01", "end": "2024-02-03", "text": "later"}',
            "",
            '{"start": "2024-01-01", "end": "2024-01-02", "text": "earlier"}',
        ]), name="reports.jsonl")
        reports = load_reports(path)
        assert [r.text for r in reports] == ["earlier", "later"]
        assert [r.index for r in reports] == [0, 1]

    def test_malformed_line_number(self, tmp_path):
        path = write_csv(tmp_path, '{"start": "2024-01-01", "end": "2024-01-02", "text": "ok"}\n{"start": 3\n',
                         name="reports.jsonl")
        with pytest.raises(InputError, match=r"reports.jsonl:2: malformed report"):
            load_reports(path)

    def test_end_before_start(self, tmp_path):
        path = write_csv(tmp_path, '{"start": "2024-01-05", "end": "2024-01-02", "text": "x"}\n',
                         name="reports.jsonl")
        with pytest.raises(InputError, match=":1:"):
            load_reports(path)

    def test_round_trip_excludes_index(self):
        report = sort_reports([Report(start="2024-01-01", end="2024-01-01", text="a")])[0]
        assert "index" not in report.to_json_line()


# ----------------------------------------------------------------------
# Normalization
# ----------------------------------------------------------------------


class TestNormalize:
    def test_uses_training_rows_only(self):
        frame = SeriesFrame(pd.date_range("2024-01-01", periods=4), np.array([[1.0], [2.0], [3.0], [100.0]]),
                            ["v"], "daily")
        normalized, stats = normalize(frame, train_end=2)
        assert stats.mean.tolist() == [1.5]
        assert stats.std.tolist() == [0.5]
        assert normalized.values[:, 0].tolist() == [-1.0, 1.0, 3.0, 197.0]
        assert np.allclose(denormalize(normalized.values, stats), frame.values)

    def test_zero_variance_channel(self, caplog):
        frame = SeriesFrame(pd.date_range("2024-01-01", periods=3), np.full((3, 1), 5.0), ["flat"], "daily")
        with caplog.at_level(logging.WARNING):
            normalized, stats = normalize(frame)
        assert stats.std.tolist() == [1.0]
        assert np.all(normalized.values == 0)
        assert "flat" in caplog.text

    def test_empty_training_region(self):
        with pytest.raises(InputError):
            normalize(daily_frame(3), train_end=0)


# ----------------------------------------------------------------------
# Windows and text
# ----------------------------------------------------------------------


class TestWindows:
    def test_counts_and_split_by_target_end(self):
        sets = make_windows(daily_frame(10), 4, 2, SplitSpec())
        assert sum(len(s) for s in sets) == 5
        assert [w.start for w in sets.train] == [0, 1]
        assert [w.start for w in sets.val] == [2]
        assert [w.start for w in sets.test] == [3, 4]

    def test_exact_length_gives_one_window(self):
        sets = make_windows(daily_frame(6), 4, 2, SplitSpec(train=0.0, val=0.0, test=1.0))
        assert len(sets.test) == 1
        window = sets.test[0]
        assert window.x[:, 0].tolist() == [0.0, 1.0, 2.0, 3.0]
        assert window.y[:, 0].tolist() == [4.0, 5.0]
        assert window.forecast_start == pd.Timestamp("2024-01-05")
        assert window.target_end == 5

    def test_too_short(self):
        with pytest.raises(InputError, match="shorter"):
            make_windows(daily_frame(5), 4, 2, SplitSpec())

    def test_stride(self):
        sets = make_windows(daily_frame(10), 4, 2, SplitSpec(train=1.0, val=0.0, test=0.0, stride=2))
        assert [w.start for w in sets.train] == [0, 2, 4]

    def test_split_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SplitSpec(train=0.5, val=0.1, test=0.1)


class TestAttachText:
    def window(self):
        return make_windows(daily_frame(8), 4, 2, SplitSpec(train=1.0, val=0.0, test=0.0)).train[0]

    def reports(self, *end_days):
        return sort_reports(
            Report(start="2023-12-25", end=f"2024-01-{day:02d}", text=f"ends {day}") for day in end_days
        )

    def test_lookback_boundaries(self):
        # forecast starts 2024-01-05; a 3-day lookback opens on 2024-01-02
        window = attach_text(self.window(), self.reports(1, 2, 3, 4, 5), "daily", lookback_intervals=3)
        assert window.text.texts == ["ends 2", "ends 3", "ends 4"]

    def test_report_ending_at_forecast_start_is_excluded(self):
        window = attach_text(self.window(), self.reports(5), "daily", lookback_intervals=10)
        assert window.text.is_empty

    def test_zero_lookback_sees_nothing(self):
        window = attach_text(self.window(), self.reports(1, 2, 3, 4), "daily", lookback_intervals=0)
        assert window.text.reports == ()

    def test_wider_lookback_never_drops_reports(self):
        reports = self.reports(1, 2, 3, 4, 5)
        seen = [
            set(attach_text(self.window(), reports, "daily", lookback_intervals=n).text.texts)
            for n in range(8)
        ]
        assert all(a <= b for a, b in zip(seen, seen[1:]))
        assert seen[-1] == {"ends 1", "ends 2", "ends 3", "ends 4"}


# ----------------------------------------------------------------------
# Prepared datasets
# ----------------------------------------------------------------------


class TestPrepareDataset:
    def test_tiny_dataset(self, tiny_config, tiny_dataset):
        assert tiny_dataset.channels == 1
        assert tiny_dataset.train and tiny_dataset.val and tiny_dataset.test
        train_end, _ = tiny_config.data.split.boundaries(len(tiny_dataset.frame))
        assert abs(tiny_dataset.frame.values[:train_end].mean()) < 1e-9
        assert any(not w.text.is_empty for w in tiny_dataset.train + tiny_dataset.val + tiny_dataset.test)

    def test_horizon_override(self, tiny_config):
        source = load_source(tiny_config.data, tiny_config.synthetic)
        dataset = prepare_dataset(source, tiny_config.data, l_out=6)
        assert dataset.l_out == 6
        assert dataset.test[0].y.shape == (6, 1)

    def test_unknown_split(self, tiny_dataset):
        with pytest.raises(ConfigError):
            tiny_dataset.split("holdout")

    def test_missing_csv(self, tiny_config, tmp_path):
        data_cfg = tiny_config.data.model_copy(update={"csv_path": str(tmp_path / "missing.csv")})
        with pytest.raises(ConfigError, match="csv_path"):
            load_source(data_cfg)

    def test_no_source(self, tiny_config):
        with pytest.raises(ConfigError, match="csv_path"):
            load_source(tiny_config.data, None)

    def test_loads_csv_and_reports(self, tiny_config, tmp_path):
        csv = write_csv(tmp_path, "timestamp,v\n" + "".join(
            f"{d:%Y-%m-%d},{i % 5}\n" for i, d in enumerate(pd.date_range("2024-01-01", periods=20))))
        reports = write_csv(tmp_path, '{"start": "2024-01-05", "end": "2024-01-06", "text": "x"}\n',
                            name="reports.jsonl")
        data_cfg = tiny_config.data.model_copy(update={"csv_path": str(csv), "reports_path": str(reports)})
        source = load_source(data_cfg)
        assert isinstance(source, DataSource)
        assert len(source.frame) == 20 and len(source.reports) == 1
