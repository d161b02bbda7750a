import numpy as np
import pytest

from rescnet.errors import DegenerateLabelsError, DimensionError
from rescnet.lda import (LdaModel, PosteriorTransform, decision_scores, fit_lda,
                         predict_labels, sigmoid_posteriors, softmax_posteriors)


def oracle_binary(x, member, ridge):
    """Direct pooled within-class scatter of a one-vs-rest split."""
    a, b = x[member], x[~member]
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    scatter = (a - mu_a).T @ (a - mu_a) + (b - mu_b).T @ (b - mu_b)
    cov = scatter / (len(x) - 2)
    shrink = ridge * np.trace(cov) / x.shape[1]
    w = np.linalg.solve(cov + shrink * np.eye(x.shape[1]), mu_a - mu_b)
    return w, -0.5 * w @ (mu_a + mu_b) + np.log(len(a) / len(b))


def test_matches_direct_scatter(rng):
    x = rng.standard_normal((40, 5))
    labels = rng.integers(0, 3, 40)
    model = fit_lda(x, labels, ridge=0.01)
    for j, c in enumerate(model.class_ids):
        w, b = oracle_binary(x, labels == c, 0.01)
        np.testing.assert_allclose(model.weights[:, j], w, rtol=1e-10)
        np.testing.assert_allclose(model.intercepts[j], b, rtol=1e-10)


def test_six_point_direction():
    x = np.array([[0, 0], [1, 0.5], [0.5, 1.5], [3, 1], [4, 2.5], [3.5, 2]])
    labels = np.array([0, 0, 0, 1, 1, 1])
    model = fit_lda(x, labels, ridge=0.0)
    s_w = sum(np.outer(p - x[labels == c].mean(0), p - x[labels == c].mean(0))
              for p, c in zip(x, labels))
    ref = np.linalg.solve(s_w, x[labels == 1].mean(0) - x[labels == 0].mean(0))
    w = model.weights[:, 1]
    np.testing.assert_allclose(w / np.linalg.norm(w), ref / np.linalg.norm(ref), atol=1e-8)


def test_separable_gaussians(rng):
    x = np.r_[rng.normal(-5, 1, (50, 2)), rng.normal(5, 1, (50, 2))]
    labels = np.repeat([0, 1], 50)
    assert np.all(predict_labels(fit_lda(x, labels), x) == labels)


def test_order_invariance(rng):
    x = rng.standard_normal((30, 4))
    labels = rng.integers(0, 3, 30)
    perm = rng.permutation(30)
    a, b = fit_lda(x, labels), fit_lda(x[perm], labels[perm])
    np.testing.assert_allclose(a.weights, b.weights, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(a.intercepts, b.intercepts, rtol=1e-10, atol=1e-12)


def test_one_point_per_class():
    x = np.eye(3) * 4.0
    model = fit_lda(x, np.arange(3), ridge=0.1)
    np.testing.assert_array_equal(predict_labels(model, x), [0, 1, 2])


def test_constant_model_scores():
    model = LdaModel(np.zeros((3, 2)), np.array([0.5, -1.0]), np.array([0, 1]), 0.0)
    np.testing.assert_array_equal(decision_scores(model, np.ones((4, 3))), [[0.5, -1.0]] * 4)


def test_scores_affine(rng):
    model = fit_lda(rng.standard_normal((20, 3)), rng.integers(0, 2, 20))
    x, z = rng.standard_normal((5, 3)), rng.standard_normal((5, 3))
    zero = np.zeros((5, 3))
    np.testing.assert_allclose(decision_scores(model, x + z) - decision_scores(model, z),
                               decision_scores(model, x) - decision_scores(model, zero),
                               atol=1e-12)


def test_rest_label_gets_no_column(rng):
    x = rng.standard_normal((20, 2))
    labels = np.array([-1] * 10 + [4] * 5 + [7] * 5)
    model = fit_lda(x, labels, rest_label=-1)
    np.testing.assert_array_equal(model.class_ids, [4, 7])
    with pytest.raises(DegenerateLabelsError):
        fit_lda(x, np.full(20, 3))
    # one class plus rest samples is still a valid binary split
    assert fit_lda(x, np.where(labels == 4, 4, -1), rest_label=-1).weights.shape == (2, 1)


def test_shape_errors(rng):
    with pytest.raises(DimensionError):
        fit_lda(rng.standard_normal((5, 2)), [0, 1])
    model = fit_lda(rng.standard_normal((6, 2)), [0, 1] * 3)
    with pytest.raises(DimensionError):
        decision_scores(model, np.zeros((2, 3)))


def test_sigmoid_values():
    assert sigmoid_posteriors(np.array([0.0]))[0] == 0.5
    np.testing.assert_allclose(sigmoid_posteriors(np.array([16.0]), 16), 0.7310585786300049,
                               rtol=1e-15)
    s = sigmoid_posteriors(np.linspace(-50, 50, 101))
    assert np.all(np.diff(s) > 0)


def test_softmax_values(rng):
    np.testing.assert_allclose(softmax_posteriors(np.zeros((2, 10)), 1.0), 0.1, rtol=1e-15)
    np.testing.assert_allclose(softmax_posteriors(np.array([[np.log(2), 0.0]]), 1.0),
                               [[2 / 3, 1 / 3]], rtol=1e-15)
    s = rng.standard_normal((4, 5)) * 100
    np.testing.assert_allclose(softmax_posteriors(s + 37.0), softmax_posteriors(s), atol=1e-12)


def test_transform_dispatch():
    scores = np.array([[1.0, 3.0]])
    np.testing.assert_array_equal(PosteriorTransform("sigmoid", 2.0)(scores),
                                  sigmoid_posteriors(scores, 2.0))
    np.testing.assert_array_equal(PosteriorTransform("softmax", softmax_beta=0.5)(scores),
                                  softmax_posteriors(scores, 0.5))
    with pytest.raises(ValueError):
        PosteriorTransform("tanh")
