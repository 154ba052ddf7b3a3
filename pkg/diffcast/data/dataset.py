"""Dataset preparation shared by every command: load, split, normalize, window, attach text."""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from diffcast.core.errors import ConfigError
from diffcast.data.reports import Report, load_reports
from diffcast.data.series import NormStats, SeriesFrame, load_series, normalize
from diffcast.data.synthetic import SyntheticSpec, generate_synthetic
from diffcast.data.windows import WindowSample, attach_text, make_windows

logger = logging.getLogger(__name__)


@dataclass
class DataSource:
    """Raw (unnormalized) series plus its sorted reports."""
    frame: SeriesFrame
    reports: list[Report]


@dataclass
class PreparedDataset:
    frame: SeriesFrame
    stats: NormStats
    reports: list[Report]
    train: list[WindowSample]
    val: list[WindowSample]
    test: list[WindowSample]
    l_in: int
    l_out: int

    @property
    def channels(self) -> int:
        return self.frame.n_channels

    def split(self, name: str) -> list[WindowSample]:
        try:
            return {"train": self.train, "val": self.val, "test": self.test}[name]
        except KeyError:
            raise ConfigError(f"unknown split {name!r}; expected train, val or test") from None


def load_source(data_cfg, synthetic: Optional[SyntheticSpec] = None) -> DataSource:
    """Load the configured CSV/JSONL pair, or generate the synthetic dataset."""
    if data_cfg.csv_path:
        csv_path = Path(data_cfg.csv_path)
        if not csv_path.exists():
            raise ConfigError(f"data.csv_path does not exist: {csv_path}")
        frame = load_series(csv_path, frequency=data_cfg.frequency)
        reports: list[Report] = []
        if data_cfg.reports_path:
            reports_path = Path(data_cfg.reports_path)
            if not reports_path.exists():
                raise ConfigError(f"data.reports_path does not exist: {reports_path}")
            reports = load_reports(reports_path)
        return DataSource(frame, reports)
    if synthetic is not None:
        generated = generate_synthetic(synthetic)
        return DataSource(generated.frame, generated.reports)
    raise ConfigError("data.csv_path is required (or provide a 'synthetic' section)")


def prepare_dataset(source: DataSource, data_cfg, l_out: Optional[int] = None) -> PreparedDataset:
    """Normalize with training-region statistics and cut text-annotated windows."""
    l_out = l_out or data_cfg.l_out
    frame = source.frame
    val_start, _ = data_cfg.split.boundaries(len(frame))
    normalized, stats = normalize(frame, train_end=val_start)
    sets = make_windows(normalized, data_cfg.l_in, l_out, data_cfg.split)

    def with_text(windows):
        return [
            attach_text(w, source.reports, frame.frequency, data_cfg.lookback_intervals)
            for w in windows
        ]

    dataset = PreparedDataset(
        frame=replace(normalized, stats=stats),
        stats=stats,
        reports=source.reports,
        train=with_text(sets.train),
        val=with_text(sets.val),
        test=with_text(sets.test),
        l_in=data_cfg.l_in,
        l_out=l_out,
    )
    logger.info(
        "Prepared dataset: %d rows, %d channels, %s, windows train/val/test = %d/%d/%d",
        len(frame), frame.n_channels, frame.frequency,
        len(dataset.train), len(dataset.val), len(dataset.test),
    )
    return dataset
