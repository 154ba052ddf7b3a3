"""Evaluation records: per-horizon metrics, JSONL output and the aligned text table."""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, computed_field

logger = logging.getLogger(__name__)


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    if not values or any(v is None for v in values):
        return None
    return float(np.mean(values))


class SeedScore(BaseModel):
    seed: int
    mse: float
    mae: float
    mse_denorm: Optional[float] = None
    mae_denorm: Optional[float] = None
    n_windows: int
    per_window_mse: list[float] = []


class HorizonMetrics(BaseModel):
    """Seed-averaged metrics at one forecast horizon."""
    horizon: int
    scores: list[SeedScore]

    @computed_field
    @property
    def mse(self) -> float:
        return _mean([s.mse for s in self.scores])

    @computed_field
    @property
    def mae(self) -> float:
        return _mean([s.mae for s in self.scores])

    @computed_field
    @property
    def mse_denorm(self) -> Optional[float]:
        return _mean([s.mse_denorm for s in self.scores])

    @computed_field
    @property
    def mae_denorm(self) -> Optional[float]:
        return _mean([s.mae_denorm for s in self.scores])


class EvalReport(BaseModel):
    variant: str
    seeds: list[int]
    horizons: list[HorizonMetrics]
    wall_time: float = 0.0
    traces: list[str] = []

    @computed_field
    @property
    def avg_mse(self) -> float:
        return _mean([h.mse for h in self.horizons])

    @computed_field
    @property
    def avg_mae(self) -> float:
        return _mean([h.mae for h in self.horizons])

    @computed_field
    @property
    def avg_mse_denorm(self) -> Optional[float]:
        return _mean([h.mse_denorm for h in self.horizons])

    @computed_field
    @property
    def avg_mae_denorm(self) -> Optional[float]:
        return _mean([h.mae_denorm for h in self.horizons])


class EvalRecord(BaseModel):
    """One line of the results file: a variant at one horizon."""
    variant: str
    horizon: int
    mse: float
    mae: float
    mse_denorm: Optional[float] = None
    mae_denorm: Optional[float] = None
    seeds: list[int]
    per_seed_mse: list[float]
    per_seed_mae: list[float]
    n_windows: int
    wall_time: float


def report_records(reports: Sequence[EvalReport]) -> list[EvalRecord]:
    records = []
    for report in reports:
        for h in report.horizons:
            records.append(EvalRecord(
                variant=report.variant,
                horizon=h.horizon,
                mse=h.mse,
                mae=h.mae,
                mse_denorm=h.mse_denorm,
                mae_denorm=h.mae_denorm,
                seeds=report.seeds,
                per_seed_mse=[s.mse for s in h.scores],
                per_seed_mae=[s.mae for s in h.scores],
                n_windows=h.scores[0].n_windows if h.scores else 0,
                wall_time=report.wall_time,
            ))
    return records


def write_records(reports: Sequence[EvalReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in report_records(reports):
            fh.write(record.model_dump_json() + "\n")
    logger.info("Wrote %d result records to %s", sum(len(r.horizons) for r in reports), path)
    return path


def format_table(reports: Sequence[EvalReport], denormalized: bool = False) -> str:
    """Aligned table with one row per horizon and an ``Avg`` row per variant."""
    header = ["Variant", "Horizon", "MSE", "MAE"]
    if denormalized:
        header += ["MSE (orig)", "MAE (orig)"]

    def cells(values: Sequence[Optional[float]]) -> list[str]:
        return ["-" if v is None else f"{v:.3f}" for v in values]

    rows = []
    for report in reports:
        for h in report.horizons:
            values = [h.mse, h.mae] + ([h.mse_denorm, h.mae_denorm] if denormalized else [])
            rows.append([report.variant, str(h.horizon)] + cells(values))
        avg = [report.avg_mse, report.avg_mae]
        if denormalized:
            avg += [report.avg_mse_denorm, report.avg_mae_denorm]
        rows.append([report.variant, "Avg"] + cells(avg))

    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(
            cell.ljust(w) if i < 2 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))
        ))
    return "\n".join(lines)
