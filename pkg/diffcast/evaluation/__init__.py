"""Metrics, sampling helpers, ablation runs, sweeps and result reports.

Submodules are imported directly (``diffcast.evaluation.ablation``); the
training loop depends on :mod:`diffcast.evaluation.inference`, so this package
does not re-export modules that import the trainer.
"""
