"""Patience-based early stopping on a validation metric.

Training stops once the metric has failed to strictly improve for
``patience`` consecutive epochs; the state always remembers the best epoch
so the caller can restore the best checkpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

DEFAULT_PATIENCE = 20


@dataclass(frozen=True)
class EarlyStopState:
    patience: int = DEFAULT_PATIENCE
    epoch: int = 0
    best_metric: float | None = None
    best_epoch: int = 0
    epochs_since_improve: int = 0


def early_stop_update(state: EarlyStopState, metric: float) -> tuple[EarlyStopState, bool]:
    """Fold one epoch's metric into the state; returns (state, should_stop)."""
    if not math.isfinite(metric):
        raise ValueError(f"metric must be finite, got {metric!r}")
    epoch = state.epoch + 1
    if state.best_metric is None or metric > state.best_metric:
        new = replace(state, epoch=epoch, best_metric=metric,
                      best_epoch=epoch, epochs_since_improve=0)
    else:
        new = replace(state, epoch=epoch,
                      epochs_since_improve=state.epochs_since_improve + 1)
    return new, new.epochs_since_improve >= new.patience


def run_early_stopping(metrics, patience: int = DEFAULT_PATIENCE) -> dict:
    """Apply the rule to a full metric sequence.

    Returns {stopped, stop_epoch, best_epoch, best_metric, epochs_run}
    where stop_epoch is the epoch at which training would halt (None if
    the sequence ends first).
    """
    state = EarlyStopState(patience=patience)
    for metric in metrics:
        state, stop = early_stop_update(state, metric)
        if stop:
            return {
                "stopped": True,
                "stop_epoch": state.epoch,
                "best_epoch": state.best_epoch,
                "best_metric": state.best_metric,
                "epochs_run": state.epoch,
            }
    return {
        "stopped": False,
        "stop_epoch": None,
        "best_epoch": state.best_epoch,
        "best_metric": state.best_metric,
        "epochs_run": state.epoch,
    }
