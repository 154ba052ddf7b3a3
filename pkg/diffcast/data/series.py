"""CSV series ingestion, frequency inference and per-channel normalization."""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import pandas as pd

from diffcast.core.errors import InputError

logger = logging.getLogger(__name__)

Frequency = Literal["daily", "weekly", "monthly"]

FREQUENCY_OFFSETS: dict[str, pd.DateOffset] = {
    "daily": pd.DateOffset(days=1),
    "weekly": pd.DateOffset(weeks=1),
    "monthly": pd.DateOffset(months=1),
}

# date_range aliases used when generating series
FREQUENCY_ALIASES = {"daily": "D", "weekly": "7D", "monthly": "MS"}


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, data: dict) -> "NormStats":
        return cls(np.asarray(data["mean"], dtype=np.float64), np.asarray(data["std"], dtype=np.float64))


@dataclass
class SeriesFrame:
    timestamps: pd.DatetimeIndex
    values: np.ndarray
    channels: list[str]
    frequency: str
    stats: Optional[NormStats] = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.timestamps) != len(self.values):
            raise InputError(
                f"{len(self.timestamps)} timestamps for {len(self.values)} rows"
            )

    def __len__(self) -> int:
        return len(self.values)

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def to_dataframe(self) -> pd.DataFrame:
        df = pd.DataFrame(self.values, columns=self.channels)
        df.insert(0, "timestamp", self.timestamps.strftime("%Y-%m-%d"))
        return df

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_dataframe().to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
        return path


def infer_frequency(timestamps: pd.DatetimeIndex) -> str:
    """Map the modal gap between consecutive timestamps to a frequency tag."""
    if len(timestamps) < 2:
        raise InputError("at least two timestamps are needed to infer the frequency")
    gaps = pd.Series(np.diff(timestamps.values).astype("timedelta64[D]").astype(np.int64))
    modal = int(gaps.mode().iloc[0])
    if modal == 1:
        return "daily"
    if modal == 7:
        return "weekly"
    if 28 <= modal <= 31:
        return "monthly"
    raise InputError(f"unsupported sampling interval of {modal} days")


def load_series(path: Union[str, Path], frequency: Optional[str] = None) -> SeriesFrame:
    """Read ``timestamp,<channel...>`` CSV into a :class:`SeriesFrame`.

    Row numbers in error messages are 1-based file lines (the header is line 1).
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError as exc:
        raise InputError(f"series file not found: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"{path}: {exc}") from exc

    if len(df.columns) < 2 or df.columns[0] != "timestamp":
        raise InputError(f"{path}: header must be 'timestamp,<channel names...>'")
    if df.empty:
        raise InputError(f"{path}: series has no rows")

    missing = df.isna() | (df.apply(lambda col: col.str.strip()) == "")
    if missing.values.any():
        row, col = np.argwhere(missing.values)[0]
        raise InputError(f"{path}: missing value in row {row + 2}, column {df.columns[col]!r}")

    timestamps = pd.to_datetime(df["timestamp"], errors="coerce", format="ISO8601")
    if timestamps.isna().any():
        row = int(np.flatnonzero(timestamps.isna().values)[0])
        raise InputError(f"{path}: unparseable timestamp {df['timestamp'].iloc[row]!r} in row {row + 2}")

    channels = list(df.columns[1:])
    numeric = df[channels].apply(pd.to_numeric, errors="coerce")
    if numeric.isna().values.any():
        row, col = np.argwhere(numeric.isna().values)[0]
        raise InputError(
            f"{path}: non-numeric value {df[channels[col]].iloc[row]!r} in row {row + 2}, "
            f"column {channels[col]!r}"
        )

    index = pd.DatetimeIndex(timestamps)
    steps = np.diff(index.values)
    if (steps <= np.timedelta64(0)).any():
        row = int(np.flatnonzero(steps <= np.timedelta64(0))[0]) + 1
        raise InputError(f"{path}: timestamps not strictly increasing at row {row + 2}")

    if frequency is None and len(index) < 2:
        raise InputError(
            f"{path}: cannot infer the sampling frequency from a single row; set data.frequency explicitly"
        )
    freq = frequency or infer_frequency(index)
    frame = SeriesFrame(index, numeric.to_numpy(dtype=np.float64), channels, freq)
    logger.info("Loaded %s: %d rows, %d channels, %s", path, len(frame), frame.n_channels, freq)
    return frame


def compute_stats(values: np.ndarray, channels: Optional[list[str]] = None) -> NormStats:
    """Per-channel mean/std; a zero-variance channel gets std 1."""
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    degenerate = ~(std > 0)
    for c in np.flatnonzero(degenerate):
        name = channels[c] if channels else str(c)
        logger.warning("Channel %s has zero variance on the training split; using std=1", name)
    std = np.where(degenerate, 1.0, std)
    return NormStats(mean, std)


def normalize(frame: SeriesFrame, train_end: Optional[int] = None) -> tuple[SeriesFrame, NormStats]:
    """Standardize every row with statistics from rows ``[0, train_end)``."""
    rows = frame.values if train_end is None else frame.values[:train_end]
    if len(rows) == 0:
        raise InputError("cannot compute normalization statistics on an empty training split")
    stats = compute_stats(rows, frame.channels)
    values = (frame.values - stats.mean) / stats.std
    return replace(frame, values=values, stats=stats), stats


def denormalize(values: np.ndarray, stats: NormStats) -> np.ndarray:
    return np.asarray(values) * stats.std + stats.mean
