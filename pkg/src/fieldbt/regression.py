"""Cross-sectional multi-regression of realized mean returns on lagged fields.

One observation per asset. Field columns are z-scored cross-sectionally
before the fit (fields carry incommensurate units), zero-variance columns are
dropped, and the normal equations get a tiny trace-scaled ridge term purely
for numerical safety. Predictions standardize new fields with the model's
stored parameters, never refit ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping, Tuple

import numpy as np
import pandas as pd

from fieldbt.errors import DataError, NumericalError
from fieldbt.fields import FieldMatrix

RIDGE_SCALE = 1e-10


@dataclass(frozen=True)
class RegressionModel:
    """Fitted coefficients on standardized regressors, plus fit diagnostics."""

    fields: Tuple[str, ...]
    coefficients: np.ndarray
    intercept: float
    field_means: np.ndarray
    field_stds: np.ndarray
    r_squared: float
    n_assets: int
    dropped_fields: Tuple[str, ...]

    def to_json(self) -> str:
        payload = {
            "fields": list(self.fields),
            "coefficients": [repr(float(c)) for c in self.coefficients],
            "intercept": repr(float(self.intercept)),
            "field_means": [repr(float(v)) for v in self.field_means],
            "field_stds": [repr(float(v)) for v in self.field_stds],
            "r_squared": repr(float(self.r_squared)),
            "n_assets": self.n_assets,
            "dropped_fields": list(self.dropped_fields),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RegressionModel":
        raw = json.loads(text)
        return cls(
            fields=tuple(raw["fields"]),
            coefficients=np.array([float(c) for c in raw["coefficients"]]),
            intercept=float(raw["intercept"]),
            field_means=np.array([float(v) for v in raw["field_means"]]),
            field_stds=np.array([float(v) for v in raw["field_stds"]]),
            r_squared=float(raw["r_squared"]),
            n_assets=int(raw["n_assets"]),
            dropped_fields=tuple(raw["dropped_fields"]),
        )


def _as_target(realized_means, assets: Tuple[str, ...]) -> np.ndarray:
    if isinstance(realized_means, pd.Series):
        missing = [a for a in assets if a not in realized_means.index]
        if missing:
            raise DataError(f"realized means missing assets: {missing[:5]}")
        return realized_means.loc[list(assets)].to_numpy(dtype=float)
    if isinstance(realized_means, Mapping):
        missing = [a for a in assets if a not in realized_means]
        if missing:
            raise DataError(f"realized means missing assets: {missing[:5]}")
        return np.array([float(realized_means[a]) for a in assets])
    arr = np.asarray(realized_means, dtype=float)
    if arr.shape != (len(assets),):
        raise DataError("realized means must align with the field matrix assets")
    return arr


def fit(fields_lagged: FieldMatrix, realized_means) -> RegressionModel:
    """OLS with intercept of realized mean returns on z-scored lagged fields."""
    if isinstance(realized_means, (pd.Series, Mapping)):
        if isinstance(realized_means, pd.Series):
            common = tuple(a for a in fields_lagged.assets if a in realized_means.index)
        else:
            common = tuple(a for a in fields_lagged.assets if a in realized_means)
    else:
        common = fields_lagged.assets
    if len(common) < len(fields_lagged.field_names) + 2:
        raise DataError(
            f"too few assets: {len(common)} for {len(fields_lagged.field_names)} fields"
        )
    keep_rows = [fields_lagged.assets.index(a) for a in common]
    x_raw = fields_lagged.values[keep_rows]
    y = _as_target(realized_means, common)
    if not np.all(np.isfinite(y)):
        raise DataError("realized means contain non-finite values")

    means = x_raw.mean(axis=0)
    stds = x_raw.std(axis=0, ddof=1)
    keep = (stds > 0) & (np.ptp(x_raw, axis=0) > 0)
    dropped = tuple(f for f, ok in zip(fields_lagged.field_names, keep) if not ok)
    if not keep.any():
        raise NumericalError("all field columns are degenerate (zero variance)")
    kept_fields = tuple(f for f, ok in zip(fields_lagged.field_names, keep) if ok)
    z = (x_raw[:, keep] - means[keep]) / stds[keep]

    n, p = z.shape
    if np.ptp(y) == 0.0:
        # A constant target has the exact trivial solution.
        beta = np.zeros(p + 1)
        beta[0] = float(y[0])
        r2 = 0.0
    else:
        a = np.column_stack([np.ones(n), z])
        gram = a.T @ a
        ridge = RIDGE_SCALE * np.trace(z.T @ z) / p
        reg = np.zeros((p + 1, p + 1))
        reg[1:, 1:] = ridge * np.eye(p)
        try:
            beta = np.linalg.solve(gram + reg, a.T @ y)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"normal equations solve failed: {exc}") from exc
        fitted = a @ beta
        sst = float(((y - y.mean()) ** 2).sum())
        ssr = float(((y - fitted) ** 2).sum())
        r2 = 1.0 - ssr / sst if sst > 0 else 0.0

    return RegressionModel(
        fields=kept_fields,
        coefficients=beta[1:].copy(),
        intercept=float(beta[0]),
        field_means=means[keep].copy(),
        field_stds=stds[keep].copy(),
        r_squared=r2,
        n_assets=n,
        dropped_fields=dropped,
    )


def predict(model: RegressionModel, fields_current: FieldMatrix) -> pd.Series:
    """Predicted mean excess return per asset from current field values."""
    missing = [f for f in model.fields if f not in fields_current.field_names]
    if missing:
        raise DataError(f"field matrix missing model fields: {missing}")
    cols = [fields_current.field_names.index(f) for f in model.fields]
    x = fields_current.values[:, cols]
    z = (x - model.field_means) / model.field_stds
    preds = model.intercept + z @ model.coefficients
    return pd.Series(preds, index=list(fields_current.assets), name="predicted_mean")


def flip_coefficients(model: RegressionModel) -> RegressionModel:
    """Negate every field coefficient; the intercept is left alone."""
    return replace(model, coefficients=-model.coefficients)
