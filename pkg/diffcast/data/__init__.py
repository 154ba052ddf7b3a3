"""Series/report ingestion, windowing and the synthetic generator."""

from .dataset import DataSource, PreparedDataset, load_source, prepare_dataset
from .reports import Report, TextContext, load_reports
from .series import NormStats, SeriesFrame, denormalize, load_series, normalize
from .synthetic import SyntheticDataset, SyntheticSpec, generate_synthetic
from .windows import SplitSpec, WindowSample, attach_text, make_windows

__all__ = [
    "DataSource",
    "NormStats",
    "PreparedDataset",
    "Report",
    "SeriesFrame",
    "SplitSpec",
    "SyntheticDataset",
    "SyntheticSpec",
    "TextContext",
    "WindowSample",
    "attach_text",
    "denormalize",
    "generate_synthetic",
    "load_reports",
    "load_series",
    "load_source",
    "make_windows",
    "normalize",
    "prepare_dataset",
]
