"""Residual relabeling and signed compensation classifiers.

Given the network posterior ``Y_hat`` after some layer, the next layer is
trained on

    R = lam * Y - Y_hat
    label_j = argmax_k |R_jk|        sign_j = sign(R_j,label_j)

Samples with sign +1 train the positive classifier, samples with sign -1
the negative one; each classifier sees the other side's samples only as
negatives. The layer then moves the posterior by

    Y_hat += alpha * (n_p / N * Y_p - n_n / N * Y_n)
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabelsError, DimensionError, EmptyInputError
from .lda import DEFAULT_RIDGE, LdaModel, PosteriorTransform, decision_scores, fit_lda

REST_LABEL = -1


@dataclass(frozen=True)
class ResidualRecord:
    residual: np.ndarray
    labels: np.ndarray
    signs: np.ndarray


@dataclass(frozen=True)
class CompensationLayer:
    filter_bank: object
    positive_model: LdaModel | None
    negative_model: LdaModel | None
    n_p: int
    n_n: int
    alpha: float
    transform: PosteriorTransform

    @property
    def n_train(self):
        return self.n_p + self.n_n

    def update(self, prev, features, class_count):
        y_p = class_posteriors(self.positive_model, self.transform, features, class_count)
        y_n = class_posteriors(self.negative_model, self.transform, features, class_count)
        return combine_posteriors(prev, y_p, y_n, self.n_p, self.n_n, self.n_train, self.alpha)


def compute_residual(y, y_pred, lam):
    y = np.asarray(y, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y.shape != y_pred.shape:
        raise DimensionError(f"label matrix {y.shape} vs posterior {y_pred.shape}")
    return lam * y - y_pred


def derive_labels_and_signs(residual, true_labels=None):
    """Relabel each row by its largest-magnitude residual.

    Ties go to the lowest class index. An all-zero row keeps its true class
    (``true_labels``, or class 0 when not given) with sign +1.
    """
    residual = np.asarray(residual, dtype=np.float64)
    if residual.ndim != 2:
        raise DimensionError(f"residual must be 2-D, got {residual.shape}")
    rows = np.arange(residual.shape[0])
    labels = np.argmax(np.abs(residual), axis=1)
    picked = residual[rows, labels]
    signs = np.where(picked < 0, -1, 1).astype(np.int64)
    zero = ~np.any(residual != 0, axis=1)
    if np.any(zero):
        fallback = np.zeros_like(labels) if true_labels is None else np.asarray(true_labels)
        labels = np.where(zero, fallback, labels)
        signs[zero] = 1
    return ResidualRecord(residual, labels.astype(np.int64), signs)


def class_posteriors(model, transform, features, class_count):
    """``(N, class_count)`` posteriors; classes the model lacks get zeros."""
    out = np.zeros((np.asarray(features).shape[0], class_count))
    if model is None:
        return out
    out[:, model.class_ids] = transform(decision_scores(model, features))
    return out


def _constant_model(n_features, class_id, ridge):
    return LdaModel(np.zeros((n_features, 1)), np.zeros(1),
                    np.array([class_id], dtype=np.int64), ridge)


def _fit_side(features, labels, ridge):
    try:
        return fit_lda(features, labels, ridge, rest_label=REST_LABEL)
    except DegenerateLabelsError:
        # every sample shares one label and nothing acts as a negative
        return _constant_model(features.shape[1], int(labels[0]), ridge)


def fit_compensation_layer(features, record, transform, ridge=DEFAULT_RIDGE,
                           filter_bank=None, alpha=1.0):
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if n == 0:
        raise EmptyInputError("no samples to fit a compensation layer")
    if record.labels.shape != (n,):
        raise DimensionError(f"{record.labels.shape[0]} residual labels for {n} samples")
    positive = record.signs > 0
    n_p = int(positive.sum())
    n_n = n - n_p
    pos_model = neg_model = None
    if n_p:
        pos_model = _fit_side(features, np.where(positive, record.labels, REST_LABEL), ridge)
    if n_n:
        neg_model = _fit_side(features, np.where(positive, REST_LABEL, record.labels), ridge)
    return CompensationLayer(filter_bank, pos_model, neg_model, n_p, n_n, float(alpha), transform)


def combine_posteriors(prev, y_p, y_n, n_p, n_n, n, alpha):
    prev = np.asarray(prev, dtype=np.float64)
    if not (prev.shape == np.shape(y_p) == np.shape(y_n)):
        raise DimensionError("posterior matrices differ in shape")
    if n_p + n_n != n:
        raise ValueError(f"n_p + n_n = {n_p + n_n} but N = {n}")
    return prev + alpha * (n_p / n * np.asarray(y_p) - n_n / n * np.asarray(y_n))


def lr_schedule(layer_index, config):
    """Learning rate of compensation layer ``layer_index`` (>= 2).

    ``alpha0 * (1 - decay) ** ((i - 2) // period)``, never below ``lr_floor``.
    """
    if layer_index < 2:
        raise ValueError("the learning rate applies from layer 2 on")
    if config.lr_decay is None:
        return float(config.alpha0)
    steps = (layer_index - 2) // config.lr_period
    return float(max(config.alpha0 * (1.0 - config.lr_decay) ** steps, config.lr_floor))
