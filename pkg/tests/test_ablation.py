"""Tests for variant configs, model scoring, the ablation runner and sweeps."""

import numpy as np
import pytest

from diffcast.core.errors import ConfigError
from diffcast.data.dataset import load_source
from diffcast.diffusion.guidance import GuidanceWeights
from diffcast.evaluation import ablation
from diffcast.evaluation.ablation import VARIANTS, apply_variant, evaluate_model, parse_variants, run_ablation
from diffcast.evaluation.inference import effective_guidance, evenly_spaced
from diffcast.evaluation.report import SeedScore
from diffcast.evaluation.sweeps import GuidanceSweep, SweepCell, guidance_sweep, lambda_sweep
from diffcast.training.checkpoint import load_checkpoint, save_checkpoint
from diffcast.training.trainer import fit


@pytest.fixture()
def source(tiny_config):
    return load_source(tiny_config.data, tiny_config.synthetic)


class TestVariants:
    def test_unknown_variant_lists_valid_names(self):
        with pytest.raises(ConfigError, match="valid variants: full"):
            parse_variants("full,no-such-thing")

    def test_comma_list(self):
        assert parse_variants("full, w/o-text") == ["full", "w/o-text"]

    def test_empty(self):
        with pytest.raises(ConfigError):
            parse_variants("")

    def test_apply_variant(self, tiny_config):
        both = apply_variant(tiny_config, "w/o-both")
        assert not both.model.use_text and not both.model.use_timestamps
        assert apply_variant(tiny_config, "simple-fusion").model.fusion_mode == "simple"
        assert apply_variant(tiny_config, "full") == tiny_config
        assert set(VARIANTS) >= {"full", "w/o-text", "w/o-timestamp", "w/o-both"}


class TestEffectiveGuidance:
    def test_full(self, tiny_config):
        assert effective_guidance(tiny_config) == GuidanceWeights(w_t=0.5, w_d=0.8)

    def test_disabled_modalities_get_zero_weight(self, tiny_config):
        assert effective_guidance(apply_variant(tiny_config, "w/o-text")).w_d == 0.0
        assert effective_guidance(apply_variant(tiny_config, "w/o-timestamp")).w_t == 0.0
        assert effective_guidance(apply_variant(tiny_config, "w/o-both")).passes == 1

    def test_coupled_shares_weight(self, tiny_config):
        w = effective_guidance(apply_variant(tiny_config, "coupled-cfg"))
        assert w.w_t == w.w_d == pytest.approx(0.65)

    def test_evenly_spaced(self):
        assert evenly_spaced(list(range(10)), 3) == [0, 4, 9]
        assert evenly_spaced([1, 2], 5) == [1, 2]
        assert evenly_spaced([1, 2], None) == [1, 2]


class TestEvaluateModel:
    def test_scores_and_denormalized(self, tiny_config, tiny_dataset):
        model = fit(tiny_dataset, tiny_config).model
        score = evaluate_model(model, tiny_dataset.test, tiny_config, seed=0, stats=tiny_dataset.stats)
        assert score.n_windows == 3
        assert len(score.per_window_mse) == 3
        assert score.mse == pytest.approx(np.mean(score.per_window_mse))
        std = float(tiny_dataset.stats.std[0])
        assert score.mse_denorm == pytest.approx(score.mse * std ** 2)
        assert score.mae_denorm == pytest.approx(score.mae * std)

    def test_fitted_model_scores_like_reloaded_checkpoint(self, tiny_config, tiny_dataset, tmp_path):
        result = fit(tiny_dataset, tiny_config)
        reloaded = load_checkpoint(save_checkpoint(result.checkpoint, tmp_path / "c.undf")).build_model()
        a = evaluate_model(result.model, tiny_dataset.test, tiny_config, seed=0)
        b = evaluate_model(reloaded, tiny_dataset.test, tiny_config, seed=0)
        assert a.per_window_mse == b.per_window_mse

    def test_no_windows(self, tiny_config, tiny_dataset):
        model = fit(tiny_dataset, tiny_config).model
        with pytest.raises(ConfigError):
            evaluate_model(model, [], tiny_config, seed=0)


class TestRunAblation:
    def test_one_report_per_variant(self, source, tiny_config):
        reports = run_ablation(source, tiny_config, variants=["full", "w/o-text"], seeds=[0], workers=1)
        assert [r.variant for r in reports] == ["full", "w/o-text"]
        for report in reports:
            assert [h.horizon for h in report.horizons] == [4]
            assert np.isfinite(report.avg_mse) and report.avg_mse >= 0

    def test_wall_time_sums_each_variants_jobs(self, source, tiny_config, monkeypatch):
        seconds = {"full": 2.0, "w/o-both": 5.0}

        def fake_job(source, job):
            return SeedScore(seed=job.seed, mse=1.0, mae=1.0, n_windows=1), seconds[job.label]

        monkeypatch.setattr(ablation, "_run_job", fake_job)
        config = tiny_config.with_overrides({"data.horizons": [2, 4]})
        reports = run_ablation(source, config, variants=["full", "w/o-both"], seeds=[0, 1], workers=1)
        assert [r.wall_time for r in reports] == [8.0, 20.0]

    def test_deterministic(self, source, tiny_config):
        a = run_ablation(source, tiny_config, variants=["full"], seeds=[0])
        b = run_ablation(source, tiny_config, variants=["full"], seeds=[0])
        assert a[0].avg_mse == b[0].avg_mse
        assert a[0].horizons[0].scores[0].per_window_mse == b[0].horizons[0].scores[0].per_window_mse

    def test_seed_average_and_horizons(self, source, tiny_config):
        config = tiny_config.with_overrides({"data.horizons": [2, 4]})
        report = run_ablation(source, config, variants=["full"], seeds=[0, 1])[0]
        assert [h.horizon for h in report.horizons] == [2, 4]
        h = report.horizons[0]
        assert [s.seed for s in h.scores] == [0, 1]
        assert h.mse == pytest.approx((h.scores[0].mse + h.scores[1].mse) / 2)
        assert report.avg_mse == pytest.approx((report.horizons[0].mse + report.horizons[1].mse) / 2)

    def test_unknown_variant_fails_before_training(self, source, tiny_config):
        with pytest.raises(ConfigError, match="unknown variant"):
            run_ablation(source, tiny_config, variants=["bogus"])


class TestSweeps:
    def test_guidance_grid(self, tiny_config, tiny_dataset):
        model = fit(tiny_dataset, tiny_config).model
        sweep = guidance_sweep(model, tiny_dataset.test, tiny_config, grid=[0.0, 1.0])
        assert len(sweep.cells) == 4
        assert sweep.best.mse == min(c.mse for c in sweep.cells)
        zero = sweep.cell(0.0, 0.0)
        direct = evaluate_model(model, tiny_dataset.test, tiny_config, tiny_config.seed,
                                guidance=GuidanceWeights(w_t=0.0, w_d=0.0))
        assert zero.mse == direct.mse

    def test_format_stars_optimum(self):
        sweep = GuidanceSweep(cells=[
            SweepCell(w_t=0, w_d=0, mse=0.5, mae=0.1), SweepCell(w_t=0, w_d=1, mse=0.2, mae=0.1),
            SweepCell(w_t=1, w_d=0, mse=0.4, mae=0.1), SweepCell(w_t=1, w_d=1, mse=0.3, mae=0.1),
        ])
        text = sweep.format()
        assert text.count("*") == 1
        assert "0.200*" in text
        with pytest.raises(KeyError):
            sweep.cell(2, 2)

    def test_lambda_labels(self, source, tiny_config):
        reports = lambda_sweep(source, tiny_config, values=[0.0, 1.0], seeds=[0])
        assert [r.variant for r in reports] == ["lam=0", "lam=1"]
