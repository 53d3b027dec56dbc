"""Forecast error metrics in raw units."""

from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class MetricsReport:
    mae: float
    rmse: float
    mape: float  # percent; None when no target clears the MAPE threshold
    per_horizon: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def format_mape(self):
        return "n/a" if self.mape is None else f"{self.mape:.4f}%"


def _scores(pred, target, threshold):
    err = pred - target
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err * err)))
    support = np.abs(target) >= threshold
    mape = float(np.mean(np.abs(err[support] / target[support])) * 100.0) if support.any() else None
    return mae, rmse, mape


def compute_metrics(pred, target, mape_threshold=1.0):
    """MAE, RMSE and MAPE over arrays shaped ``(B, H, N)``, plus a per-horizon breakdown.

    MAPE only averages entries with ``|target| >= mape_threshold``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mae, rmse, mape = _scores(pred, target, mape_threshold)
    per_horizon = []
    if pred.ndim == 3:
        for h in range(pred.shape[1]):
            h_mae, h_rmse, h_mape = _scores(pred[:, h], target[:, h], mape_threshold)
            per_horizon.append({"horizon": h + 1, "mae": h_mae, "rmse": h_rmse, "mape": h_mape})
    return MetricsReport(mae, rmse, mape, per_horizon)
