"""Per-observation additive feature attribution for the linear model.

For a linear model the exact Shapley decomposition under independent
features has a closed form: with background means mu_j and the weight
mapped back to the raw feature scale, each feature contributes

    phi_j = (w_j / sigma_j) * (x_j - mu_j)

and baseline + sum(phi) equals the prediction exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBackground, FeatureMismatch, UntrainedModel
from .regression import LinearSvrModel
from .tabledata import FeatureTable


@dataclass(frozen=True)
class ShapExplanation:
    subject: str  # geographic code of the explained observation
    phi: dict[str, float]
    baseline: float
    prediction: float


def shap_explain(
    model: LinearSvrModel,
    x_raw,
    background: FeatureTable,
    subject: str = "",
) -> ShapExplanation:
    """Exact additive attribution of one raw-scale observation.

    The baseline is the model's prediction at the background column means,
    so contributions read as "how far this neighborhood's value pushes the
    prediction away from the city-wide expectation".
    """
    if model.standardization is None:
        raise UntrainedModel("model carries no standardization parameters")
    if len(background.rows) == 0:
        raise EmptyBackground("background table has no rows")
    if tuple(background.column_names) != tuple(model.features):
        raise FeatureMismatch(
            f"background columns {background.column_names} != model features {model.features}"
        )
    x = np.asarray(x_raw, dtype=float)
    if x.shape != (len(model.features),):
        raise FeatureMismatch(
            f"observation has shape {x.shape}, expected ({len(model.features)},)"
        )

    matrix = np.array([values for _, values in background.rows], dtype=float)
    mu = matrix.mean(axis=0)
    w_raw = np.array(model.w) / np.array(model.standardization.sigma)
    phi = w_raw * (x - mu)
    baseline = float(model.predict_raw(mu)[0])
    prediction = float(model.predict_raw(x)[0])
    return ShapExplanation(
        subject=subject,
        phi={name: float(p) for name, p in zip(model.features, phi)},
        baseline=baseline,
        prediction=prediction,
    )


def rank_contributions(expl: ShapExplanation) -> list[tuple[str, float]]:
    """Features sorted by |phi| descending, ties by name ascending."""
    return sorted(expl.phi.items(), key=lambda item: (-abs(item[1]), item[0]))
