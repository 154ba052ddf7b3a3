"""Desk-scale acceptance runs on the synthetic event dataset.

Three checks, each slow on a CPU:

  overfit   8 training windows, d_model 64, 2 layers, K=50, DDIM with 25 steps;
            the running training loss must drop below 1e-3 within 5000 steps.
  ablation  full / w/o-text / w/o-timestamp / w/o-both over 3 seeds;
            full < w/o-timestamp < w/o-both, full < w/o-text < w/o-both and
            full beats w/o-text by at least 10%.
  sweep     4x4 guidance grid on the trained full model; some nonzero pair beats
            (0, 0) and (2, 2) is not the optimum.

Usage:
    python -m scripts.acceptance [--checks overfit,ablation,sweep] [--workers 4] [--out runs/acceptance]
"""

import argparse
import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from diffcast.core.config import load_run_config
from diffcast.core.errors import DiffcastError
from diffcast.core.paths import CONFIGS_DIR, runs_dir
from diffcast.data.dataset import load_source, prepare_dataset
from diffcast.evaluation.ablation import evaluate_model, run_ablation
from diffcast.evaluation.report import format_table
from diffcast.evaluation.sweeps import guidance_sweep
from diffcast.main import setup_logging
from diffcast.training.trainer import fit

logger = logging.getLogger(__name__)

CHECKS = ("overfit", "ablation", "sweep")
OVERFIT_TARGET = 1e-3
LOSS_WINDOW = 50
GUIDANCE_GRID = [0.0, 0.5, 1.0, 2.0]


def check_overfit(config, out: Path) -> bool:
    config = config.with_overrides({
        "diffusion.k_steps": 50, "diffusion.sampler": "ddim", "diffusion.inference_steps": 25,
        "model.d_model": 64, "model.layers": 2,
        "train.steps": 5000, "train.batch_size": 8,
        "train.p_uncond_t": 0.0, "train.p_uncond_d": 0.0,
    })
    dataset = prepare_dataset(load_source(config.data, config.synthetic), config.data)
    dataset = replace(dataset, train=dataset.train[:8], val=[])
    result = fit(dataset, config, progress=True)

    losses = np.array([entry.loss for entry in result.log])
    running = np.convolve(losses, np.ones(LOSS_WINDOW) / LOSS_WINDOW, mode="valid")
    reached = np.flatnonzero(running < OVERFIT_TARGET)
    score = evaluate_model(result.model, dataset.train, config, config.seed)

    summary = {
        "min_running_loss": float(running.min()),
        "reached_at_step": int(reached[0]) + LOSS_WINDOW if reached.size else None,
        "sampled_train_mse": score.mse,
    }
    (out / "overfit.json").write_text(json.dumps(summary, indent=2))
    logger.info("Overfit: %s", summary)
    return reached.size > 0


def check_ablation(config, source, workers: int, out: Path) -> bool:
    variants = ["full", "w/o-text", "w/o-timestamp", "w/o-both"]
    reports = run_ablation(source, config, variants=variants, seeds=[0, 1, 2], workers=workers)
    (out / "ablation.txt").write_text(format_table(reports) + "\n")
    mse = {r.variant: r.avg_mse for r in reports}
    logger.info("Ablation: %s", mse)

    ok = True
    for a, b, c in (("full", "w/o-timestamp", "w/o-both"), ("full", "w/o-text", "w/o-both")):
        if not mse[a] < mse[b] < mse[c]:
            logger.error("Expected %s < %s < %s", a, b, c)
            ok = False
    gap = (mse["w/o-text"] - mse["full"]) / mse["w/o-text"]
    if gap < 0.10:
        logger.error("full beats w/o-text by %.1f%%, expected at least 10%%", 100 * gap)
        ok = False
    return ok


def check_sweep(config, source, out: Path) -> bool:
    dataset = prepare_dataset(source, config.data)
    model = fit(dataset, config, progress=True).model
    sweep = guidance_sweep(model, dataset.test, config, grid=GUIDANCE_GRID)
    (out / "guidance_sweep.txt").write_text(sweep.format() + "\n")

    baseline = sweep.cell(0.0, 0.0).mse
    nonzero = [c for c in sweep.cells if (c.w_t, c.w_d) != (0.0, 0.0)]
    ok = True
    if min(c.mse for c in nonzero) >= baseline:
        logger.error("No nonzero guidance pair beats (0, 0)")
        ok = False
    if (sweep.best.w_t, sweep.best.w_d) == (2.0, 2.0):
        logger.error("(2, 2) is the optimum")
        ok = False
    return ok


def main():
    parser = argparse.ArgumentParser(description="Run the slow synthetic acceptance checks")
    parser.add_argument("--config", default=str(CONFIGS_DIR / "synthetic.yaml"), help="Run config YAML")
    parser.add_argument("--checks", default=",".join(CHECKS), help="Comma-separated subset of " + ", ".join(CHECKS))
    parser.add_argument("--workers", type=int, default=4, help="Processes for the ablation")
    parser.add_argument("--out", default=None, help="Output directory (default: <runs>/acceptance)")
    args = parser.parse_args()

    setup_logging()
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    unknown = sorted(set(checks) - set(CHECKS))
    if unknown:
        print(f"Error: unknown checks {unknown}, valid: {', '.join(CHECKS)}")
        return 1

    out = Path(args.out) if args.out else runs_dir() / "acceptance"
    out.mkdir(parents=True, exist_ok=True)

    try:
        config = load_run_config(args.config)
        source = load_source(config.data, config.synthetic)
        results = {}
        if "overfit" in checks:
            results["overfit"] = check_overfit(config, out)
        if "ablation" in checks:
            results["ablation"] = check_ablation(config, source, args.workers, out)
        if "sweep" in checks:
            results["sweep"] = check_sweep(config, source, out)
    except DiffcastError as e:
        print(f"Error: {e}")
        return 1

    for name, passed in results.items():
        print(f"{name}: {'PASS' if passed else 'FAIL'}")
    return 0 if all(results.values()) else 1


if __name__ == "__main__":
    raise SystemExit(main())
