"""Robust feature scaling: (x - median) / IQR per feature column.

Quartiles use linear interpolation. The IQR is floored at 1e-6 so constant
features scale to zero instead of exploding.
"""

from dataclasses import dataclass

import numpy as np

IQR_FLOOR = 1e-6


@dataclass(frozen=True)
class ScalerParams:
    median: np.ndarray
    iqr: np.ndarray


def fit_scaler(x: np.ndarray) -> ScalerParams:
    """Fit per-column medians and floored IQRs on (n, F) training rows."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 4:
        raise ValueError("need an (n, F) matrix with n >= 4 to fit quartiles")
    q1, med, q3 = np.percentile(x, [25.0, 50.0, 75.0], axis=0)
    iqr = np.maximum(q3 - q1, IQR_FLOOR)
    return ScalerParams(median=med, iqr=iqr)


def apply_scaler(params: ScalerParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (x - params.median) / params.iqr
