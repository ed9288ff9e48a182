"""Agreement metrics between ground-truth and predicted cost-to-go values:
the concordance correlation coefficient and the coefficient of determination.

Both use population (1/N) moments; the CCC is computed through the covariance
form 2*cov / (var_x + var_y + (mean_x - mean_y)^2), which equals
2*rho*sigma_x*sigma_y over the same denominator and stays well defined when
one side is constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, InsufficientDataError, UndefinedVarianceError


def _as_pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y_true, dtype=np.float64)
    yh = np.asarray(y_pred, dtype=np.float64)
    if y.shape != yh.shape or y.ndim != 1:
        raise InputError(f"paired 1-d arrays required, got shapes {y.shape} and {yh.shape}")
    if y.size < 2:
        raise InsufficientDataError(f"need at least 2 pairs, got {y.size}")
    if not (np.isfinite(y).all() and np.isfinite(yh).all()):
        raise InputError("metric inputs must be finite")
    return y, yh


def ccc(y_true, y_pred) -> float:
    """Concordance correlation coefficient in [-1, 1]. Two identical constant
    sequences agree perfectly and score 1."""
    x, y = _as_pair(y_true, y_pred)
    mx, my = x.mean(), y.mean()
    dx, dy = x - mx, y - my
    var_x = float(np.mean(dx * dx))
    var_y = float(np.mean(dy * dy))
    cov = float(np.mean(dx * dy))
    denom = var_x + var_y + (mx - my) ** 2
    if denom == 0.0:
        return 1.0
    return 2.0 * cov / denom


def r_squared(y_true, y_pred) -> float:
    """1 - SSres/SStot; at most 1, negative when predictions underperform the
    constant-mean predictor."""
    y, yh = _as_pair(y_true, y_pred)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedVarianceError("ground-truth values are all equal; R^2 undefined")
    ss_res = float(np.sum((y - yh) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class MetricPairSet:
    """Ground-truth/predicted value pairs with per-pair provenance."""

    y: np.ndarray
    yhat: np.ndarray
    domain_ids: tuple[str, ...]
    walk_lens: tuple[int, ...]

    def __post_init__(self):
        _as_pair(self.y, self.yhat)
        if len(self.domain_ids) != self.y.size or len(self.walk_lens) != self.y.size:
            raise InputError("provenance columns must align with the value pairs")

    def __len__(self) -> int:
        return int(self.y.size)

    def metrics(self) -> dict:
        return {"ccc": ccc(self.y, self.yhat), "r_squared": r_squared(self.y, self.yhat)}
