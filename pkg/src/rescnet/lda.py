"""Regularized one-versus-all linear discriminant analysis.

Each class ``c`` gets a binary Fisher discriminant against everything else.
The decision score is the Gaussian shared-covariance log-odds

    score_c(x) = w_c . (x - (mu_c + mu_rest) / 2) + log(n_c / n_rest)
    w_c = (Sigma_c + shrink * I)^-1 (mu_c - mu_rest)

where ``Sigma_c`` is the pooled within-class covariance of the binary split
and ``shrink = ridge * trace(Sigma_c) / F``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, softmax

from .errors import (DegenerateLabelsError, DimensionError,
                     InsufficientDataError)
from .linalg import regularized_solve

DEFAULT_RIDGE = 1e-4


@dataclass(frozen=True)
class LdaModel:
    weights: np.ndarray      # (F, C)
    intercepts: np.ndarray   # (C,)
    class_ids: np.ndarray    # (C,)
    ridge: float

    @property
    def n_features(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class PosteriorTransform:
    kind: str = "sigmoid"
    sigmoid_scale: float = 16.0
    softmax_beta: float = 0.001

    def __post_init__(self):
        if self.kind not in ("sigmoid", "softmax"):
            raise ValueError(f"unknown posterior transform {self.kind!r}")
        if self.sigmoid_scale <= 0 or self.softmax_beta <= 0:
            raise ValueError("sigmoid_scale and softmax_beta must be positive")

    def __call__(self, scores):
        if self.kind == "sigmoid":
            return sigmoid_posteriors(scores, self.sigmoid_scale)
        return softmax_posteriors(scores, self.softmax_beta)


def fit_lda(features, labels, ridge=DEFAULT_RIDGE, rest_label=None):
    """Fit one discriminant per class.

    Samples labelled ``rest_label`` get no discriminant of their own; they
    only ever appear on the "rest" side of the other classes' splits.
    """
    x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or labels.shape != (x.shape[0],):
        raise DimensionError(f"features {x.shape} and labels {labels.shape} disagree")
    n, n_features = x.shape
    if n < 2:
        raise InsufficientDataError(f"LDA needs >= 2 samples, got {n}")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    classes = np.unique(labels)
    if rest_label is not None:
        classes = classes[classes != rest_label]
    if len(classes) == 0 or (len(classes) == 1 and np.all(labels == classes[0])):
        raise DegenerateLabelsError("LDA needs at least two distinct labels")

    mean = x.mean(axis=0)
    centered = x - mean
    total_scatter = centered.T @ centered
    dof = max(n - 2, 1)

    weights = np.empty((n_features, len(classes)))
    intercepts = np.empty(len(classes))
    for j, c in enumerate(classes):
        member = labels == c
        n_c = int(member.sum())
        n_r = n - n_c
        mu_c = x[member].mean(axis=0)
        mu_r = (n * mean - n_c * mu_c) / n_r
        diff = mu_c - mu_r
        # binary within-class scatter = total scatter minus the between-class term
        cov = (total_scatter - (n_c * n_r / n) * np.outer(diff, diff)) / dof
        trace = np.trace(cov)
        shrink = ridge * trace / n_features if trace > 0 else ridge
        w = regularized_solve(cov, diff, shrink)
        weights[:, j] = w
        intercepts[j] = -0.5 * w @ (mu_c + mu_r) + np.log(n_c / n_r)
    return LdaModel(weights, intercepts, classes.astype(np.int64), float(ridge))


def decision_scores(model, features):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise DimensionError(
            f"features of shape {x.shape} do not match model with {model.n_features} inputs")
    return x @ model.weights + model.intercepts


def predict_labels(model, features):
    return model.class_ids[np.argmax(decision_scores(model, features), axis=1)]


def sigmoid_posteriors(scores, scale=16.0):
    if scale <= 0:
        raise ValueError("sigmoid scale must be positive")
    return expit(np.asarray(scores, dtype=np.float64) / scale)


def softmax_posteriors(scores, beta=0.001):
    if beta <= 0:
        raise ValueError("softmax beta must be positive")
    # scipy subtracts the row max before exponentiating
    return softmax(beta * np.asarray(scores, dtype=np.float64), axis=1)
