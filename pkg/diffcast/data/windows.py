"""Sliding windows, chronological splits and text attachment."""

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from diffcast.core.errors import InputError
from diffcast.data.reports import Report, TextContext
from diffcast.data.series import FREQUENCY_OFFSETS, SeriesFrame


def half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


class SplitSpec(BaseModel):
    """Chronological train/val/test fractions; windows advance by ``stride`` rows."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    train: float = Field(0.7, ge=0, le=1)
    val: float = Field(0.1, ge=0, le=1)
    test: float = Field(0.2, ge=0, le=1)
    stride: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_total(self) -> "SplitSpec":
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        return self

    def boundaries(self, n: int) -> tuple[int, int]:
        """Row indices where validation and test begin."""
        return half_up(self.train * n), half_up((self.train + self.val) * n)


@dataclass
class WindowSample:
    x: np.ndarray
    y: np.ndarray
    timestamps: pd.DatetimeIndex
    start: int
    text: TextContext = field(default_factory=TextContext)

    @property
    def l_in(self) -> int:
        return len(self.x)

    @property
    def forecast_start(self) -> pd.Timestamp:
        return self.timestamps[self.l_in]

    @property
    def target_end(self) -> int:
        """Row index of the last target value."""
        return self.start + len(self.x) + len(self.y) - 1


@dataclass
class WindowSets:
    train: list[WindowSample]
    val: list[WindowSample]
    test: list[WindowSample]

    def __iter__(self):
        return iter((self.train, self.val, self.test))


def make_windows(frame: SeriesFrame, l_in: int, l_out: int, split: SplitSpec) -> WindowSets:
    """Slide over ``frame`` and assign each window to the split holding its target end."""
    n = len(frame)
    if l_in < 1 or l_out < 1:
        raise InputError(f"l_in and l_out must be positive, got {l_in}, {l_out}")
    if n < l_in + l_out:
        raise InputError(f"series of length {n} is shorter than l_in + l_out = {l_in + l_out}")
    val_start, test_start = split.boundaries(n)
    sets = WindowSets([], [], [])
    for start in range(0, n - l_in - l_out + 1, split.stride):
        mid, end = start + l_in, start + l_in + l_out
        window = WindowSample(
            x=frame.values[start:mid],
            y=frame.values[mid:end],
            timestamps=frame.timestamps[start:end],
            start=start,
        )
        last = end - 1
        if last < val_start:
            sets.train.append(window)
        elif last < test_start:
            sets.val.append(window)
        else:
            sets.test.append(window)
    return sets


def attach_text(window: WindowSample, reports: Sequence[Report], frequency: str,
                lookback_intervals: int = 36) -> WindowSample:
    """Attach every report ending in ``[start - lookback, start)``, oldest first."""
    start = window.forecast_start
    earliest = start - FREQUENCY_OFFSETS[frequency] * lookback_intervals
    visible = tuple(r for r in reports if earliest <= pd.Timestamp(r.end) < start)
    return replace(window, text=TextContext(visible))
