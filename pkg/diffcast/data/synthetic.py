"""Synthetic multimodal series: calendar seasonality, AR(1) noise and announced events.

Each level-shift event is preceded by a templated report ("surge expected" or
"decline expected") published 1-3 intervals before onset, so text carries
information about the near future that the history does not.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from diffcast.data.reports import Report, sort_reports, write_reports
from diffcast.data.series import FREQUENCY_ALIASES, SeriesFrame

logger = logging.getLogger(__name__)

EVENT_TEXT = {1: "surge expected", -1: "decline expected"}
EVENT_COLUMNS = ["onset", "timestamp", "magnitude", "duration", "announced"]


class SyntheticSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    length: int = Field(800, ge=2)
    frequency: Literal["daily", "weekly", "monthly"] = "weekly"
    start: str = "2000-01-03"
    channels: int = Field(1, ge=1)
    seasonal_amplitude: float = Field(1.0, ge=0)
    noise_std: float = Field(0.1, ge=0)
    ar_coef: float = Field(0.5, gt=-1, lt=1)
    event_rate: float = Field(0.05, ge=0, le=1)
    event_magnitude: float = Field(2.0, ge=0)
    event_duration: int = Field(6, ge=1)
    lead_min: int = Field(1, ge=1)
    lead_max: int = Field(3, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def check_leads(self) -> "SyntheticSpec":
        if self.lead_min > self.lead_max:
            raise ValueError("lead_min must not exceed lead_max")
        return self


@dataclass
class SyntheticDataset:
    frame: SeriesFrame
    reports: list[Report]
    events: pd.DataFrame

    def write(self, out_dir: Union[str, Path]) -> dict[str, Path]:
        """Emit ``series.csv``, ``reports.jsonl`` and ``events.csv``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "series": self.frame.to_csv(out_dir / "series.csv"),
            "reports": write_reports(self.reports, out_dir / "reports.jsonl"),
            "events": out_dir / "events.csv",
        }
        events = self.events.copy()
        events["timestamp"] = pd.DatetimeIndex(events["timestamp"]).strftime("%Y-%m-%d")
        events["announced"] = pd.DatetimeIndex(events["announced"]).strftime("%Y-%m-%d")
        events.to_csv(paths["events"], index=False, float_format="%.10g", lineterminator="\n")
        return paths


def year_fraction(timestamps: pd.DatetimeIndex) -> np.ndarray:
    days = np.where(timestamps.is_leap_year, 366.0, 365.0)
    return (timestamps.dayofyear.to_numpy() - 1) / days


def seasonal_component(timestamps: pd.DatetimeIndex, spec: SyntheticSpec) -> np.ndarray:
    """Calendar-locked sinusoid, one phase offset per channel."""
    frac = year_fraction(timestamps)
    phases = 2 * math.pi * np.arange(spec.channels) / spec.channels
    return spec.seasonal_amplitude * np.sin(2 * math.pi * frac[:, None] + phases[None, :])


def event_component(length: int, channels: int, events: pd.DataFrame) -> np.ndarray:
    shift = np.zeros((length, channels))
    for row in events.itertuples(index=False):
        shift[row.onset:row.onset + row.duration] += row.magnitude
    return shift


def generate_synthetic(spec: SyntheticSpec, seed: Optional[int] = None) -> SyntheticDataset:
    """Build a seeded dataset; ``seed`` defaults to ``spec.seed``."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    timestamps = pd.date_range(spec.start, periods=spec.length, freq=FREQUENCY_ALIASES[spec.frequency])

    noise = np.zeros((spec.length, spec.channels))
    shocks = rng.standard_normal((spec.length, spec.channels)) * spec.noise_std
    for i in range(spec.length):
        noise[i] = shocks[i] + (spec.ar_coef * noise[i - 1] if i else 0.0)

    onsets, free_from = [], spec.lead_max
    draws = rng.random(spec.length)
    signs = rng.choice([-1, 1], size=spec.length)
    leads = rng.integers(spec.lead_min, spec.lead_max + 1, size=spec.length)
    for i in range(spec.lead_max, spec.length):
        if i >= free_from and draws[i] < spec.event_rate:
            onsets.append(i)
            free_from = i + spec.event_duration + spec.lead_max

    events = pd.DataFrame({
        "onset": np.asarray(onsets, dtype=np.int64),
        "timestamp": timestamps[onsets],
        "magnitude": np.asarray([signs[i] * spec.event_magnitude for i in onsets], dtype=np.float64),
        "duration": np.full(len(onsets), spec.event_duration, dtype=np.int64),
        "announced": timestamps[[i - leads[i] for i in onsets]],
    }, columns=EVENT_COLUMNS)
    reports = sort_reports(
        Report(start=row.announced, end=row.announced, text=EVENT_TEXT[int(np.sign(row.magnitude)) or 1])
        for row in events.itertuples(index=False)
    )

    values = seasonal_component(timestamps, spec) + noise
    values += event_component(spec.length, spec.channels, events)
    names = ["value"] if spec.channels == 1 else [f"value_{c}" for c in range(spec.channels)]
    frame = SeriesFrame(timestamps, values, names, spec.frequency)
    logger.info("Generated synthetic series: %d rows, %d events", spec.length, len(events))
    return SyntheticDataset(frame, reports, events)


def seasonal_oracle(dataset: SyntheticDataset, spec: SyntheticSpec, start: int, horizon: int) -> np.ndarray:
    """Forecast rows ``[start, start + horizon)`` from the seasonal component alone."""
    return seasonal_component(dataset.frame.timestamps[start:start + horizon], spec)


def event_oracle(dataset: SyntheticDataset, spec: SyntheticSpec, start: int, horizon: int) -> np.ndarray:
    """Seasonal forecast plus the level shifts recorded in the event table."""
    shifts = event_component(len(dataset.frame), spec.channels, dataset.events)
    return seasonal_oracle(dataset, spec, start, horizon) + shifts[start:start + horizon]
