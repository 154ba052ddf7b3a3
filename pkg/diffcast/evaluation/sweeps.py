"""Sensitivity sweeps: guidance weights on a trained model, retraining over lambda and p_uncond."""

import logging
from itertools import product
from typing import Optional, Sequence

from pydantic import BaseModel

from diffcast.core.config import RunConfig
from diffcast.data.dataset import DataSource
from diffcast.data.series import NormStats
from diffcast.data.windows import WindowSample
from diffcast.diffusion.guidance import GuidanceWeights
from diffcast.evaluation.ablation import evaluate_model, run_configs
from diffcast.evaluation.report import EvalReport
from diffcast.models.forecaster import DiffusionForecaster

logger = logging.getLogger(__name__)


class SweepCell(BaseModel):
    w_t: float
    w_d: float
    mse: float
    mae: float


class GuidanceSweep(BaseModel):
    cells: list[SweepCell]

    @property
    def best(self) -> SweepCell:
        return min(self.cells, key=lambda c: (c.mse, c.w_t, c.w_d))

    def cell(self, w_t: float, w_d: float) -> SweepCell:
        for c in self.cells:
            if c.w_t == w_t and c.w_d == w_d:
                return c
        raise KeyError((w_t, w_d))

    def format(self) -> str:
        """MSE grid, rows ``w_t`` and columns ``w_d``; the optimum is starred."""
        w_ts = sorted({c.w_t for c in self.cells})
        w_ds = sorted({c.w_d for c in self.cells})
        best = self.best
        lines = ["w_t \\ w_d " + "".join(f"{w:>10g}" for w in w_ds)]
        for w_t in w_ts:
            row = f"{w_t:<10g}"
            for w_d in w_ds:
                c = self.cell(w_t, w_d)
                mark = "*" if c is best else " "
                row += f"{c.mse:>9.3f}{mark}"
            lines.append(row)
        return "\n".join(lines)


def guidance_sweep(model: DiffusionForecaster, windows: Sequence[WindowSample], config: RunConfig,
                   grid: Optional[Sequence[float]] = None, seed: Optional[int] = None,
                   stats: Optional[NormStats] = None) -> GuidanceSweep:
    """Score one trained model at every ``(w_t, w_d)`` pair of ``grid``."""
    grid = list(grid if grid is not None else config.eval.guidance_grid)
    seed = config.seed if seed is None else seed
    cells = []
    for w_t, w_d in product(grid, grid):
        score = evaluate_model(model, windows, config, seed, stats=stats,
                               guidance=GuidanceWeights(w_t=w_t, w_d=w_d))
        logger.info("Guidance w_t=%g w_d=%g: MSE %.4f MAE %.4f", w_t, w_d, score.mse, score.mae)
        cells.append(SweepCell(w_t=w_t, w_d=w_d, mse=score.mse, mae=score.mae))
    return GuidanceSweep(cells=cells)


def lambda_sweep(source: DataSource, config: RunConfig, values: Optional[Sequence[float]] = None,
                 seeds: Optional[Sequence[int]] = None, workers: Optional[int] = None) -> list[EvalReport]:
    """Retrain at each timestamp weight; one report per value labeled ``lam=<v>``."""
    values = values if values is not None else config.eval.lambda_values
    configs = {f"lam={v:g}": config.with_overrides({"model.lam": v}) for v in values}
    return run_configs(source, configs, list(seeds if seeds is not None else config.eval.seeds),
                       workers=workers or config.eval.workers, denormalized=config.eval.denormalized)


def p_uncond_sweep(source: DataSource, config: RunConfig, values: Optional[Sequence[float]] = None,
                   seeds: Optional[Sequence[int]] = None, workers: Optional[int] = None) -> list[EvalReport]:
    """Retrain with ``p_uncond_t = p_uncond_d = p`` for each value."""
    values = values if values is not None else config.eval.p_uncond_values
    configs = {
        f"p_uncond={v:g}": config.with_overrides({"train.p_uncond_t": v, "train.p_uncond_d": v})
        for v in values
    }
    return run_configs(source, configs, list(seeds if seeds is not None else config.eval.seeds),
                       workers=workers or config.eval.workers, denormalized=config.eval.denormalized)
