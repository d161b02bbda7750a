"""Gradient-free filter banks learned from image patches.

Patch vectors and kernels share one layout: a ``k x k x c`` patch is
flattened row index fastest, then column, then channel (Fortran order), so
``kernel.reshape(-1, order="F") @ patch_vector`` equals the convolution
response at that patch.
"""
from dataclasses import dataclass

import numpy as np

from .errors import (DimensionError, InsufficientDataError, NonSeparableError,
                     SingularityError)
from .lda import DEFAULT_RIDGE, fit_lda, predict_labels
from .linalg import sym_eig

PROVENANCES = ("pca", "stacked_lda", "mixed")
DEFAULT_MAX_PATCHES = 100_000


@dataclass(frozen=True)
class PatchMatrix:
    data: np.ndarray         # (k*k*c_in, P), one patch per column
    patch_size: int
    in_channels: int
    grid: tuple              # (m_tilde, n_tilde) patch positions per image
    image_index: np.ndarray  # (P,) source image of every column

    @property
    def count(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class FilterBank:
    kernels: np.ndarray  # (k, k, c_in, c_out)
    bias: np.ndarray     # (c_out,)
    provenance: str

    def __post_init__(self):
        kernels = np.ascontiguousarray(self.kernels, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if kernels.ndim != 4 or kernels.shape[0] != kernels.shape[1]:
            raise DimensionError(f"kernels must be (k, k, c_in, c_out), got {kernels.shape}")
        if kernels.shape[3] < 1:
            raise DimensionError("a filter bank needs at least one filter")
        if bias.shape != (kernels.shape[3],):
            raise DimensionError(f"bias shape {bias.shape} does not match {kernels.shape[3]} filters")
        if not (np.all(np.isfinite(kernels)) and np.all(np.isfinite(bias))):
            raise ValueError("filter bank has non-finite values")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "bias", bias)

    @property
    def size(self):
        return self.kernels.shape[0]

    @property
    def in_channels(self):
        return self.kernels.shape[2]

    @property
    def out_channels(self):
        return self.kernels.shape[3]

    def vectors(self):
        """Kernels as columns of a ``(k*k*c_in, c_out)`` matrix."""
        k, _, c, d = self.kernels.shape
        return self.kernels.reshape(k * k * c, d, order="F")


@dataclass(frozen=True)
class StackedLdaParams:
    n_positives: int = 2
    n_negatives: int = 32
    tol: float = 0.0
    n_classes: int = 1
    max_attempts_per_filter: int = 1000
    rng_seed: object = 0
    ridge: float = DEFAULT_RIDGE

    def __post_init__(self):
        if min(self.n_positives, self.n_negatives, self.n_classes,
               self.max_attempts_per_filter) < 1:
            raise ValueError("stacked-LDA counts must be >= 1")
        if not 0.0 <= self.tol <= 1.0:
            raise ValueError("tol must lie in [0, 1]")


def _vectors_to_kernels(vectors, k, c):
    return vectors.reshape(k, k, c, vectors.shape[1], order="F")


def extract_patches(images, k, stride=1, max_samples=None, rng_seed=0):
    """Vectorise every ``k x k`` patch of ``(m, n, c, N)`` images.

    Columns run image by image, then patch row, then patch column. With
    ``max_samples`` a seeded uniform subset of columns is drawn (kept in
    column order) without materialising the full matrix.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4:
        raise DimensionError(f"images must be (m, n, c, N), got {images.shape}")
    m, n, c, count = images.shape
    if k < 1 or k > min(m, n):
        raise DimensionError(f"patch size {k} does not fit {m}x{n} images")
    if stride < 1:
        raise DimensionError("stride must be >= 1")
    mt, nt = (m - k) // stride + 1, (n - k) // stride + 1
    per_image = mt * nt
    total = per_image * count
    if max_samples is not None and total > max_samples:
        rng = np.random.default_rng(rng_seed)
        index = np.sort(rng.choice(total, size=max_samples, replace=False))
    else:
        index = np.arange(total)

    img, pos = np.divmod(index, per_image)
    ys, xs = np.divmod(pos, nt)
    offsets = np.arange(k)
    rows = (ys * stride)[:, None, None] + offsets[None, :, None]
    cols = (xs * stride)[:, None, None] + offsets[None, None, :]
    patches = images[rows, cols, :, img[:, None, None]]      # (P, k, k, c)
    data = patches.transpose(0, 3, 2, 1).reshape(len(index), -1).T
    return PatchMatrix(np.ascontiguousarray(data), k, c, (mt, nt), img)


def fit_pca_filters(patches, num_filters):
    dim, count = patches.data.shape
    if not 1 <= num_filters <= dim:
        raise DimensionError(f"cannot take {num_filters} principal components of {dim}-D patches")
    if count < max(num_filters, 2):
        raise InsufficientDataError(f"{count} patches are too few for {num_filters} filters")
    centered = patches.data - patches.data.mean(axis=1, keepdims=True)
    eig = sym_eig(centered @ centered.T)
    vectors = eig.vectors[:, :num_filters]
    return FilterBank(_vectors_to_kernels(vectors, patches.patch_size, patches.in_channels),
                      np.zeros(num_filters), "pca")


def _accepts(error_rate, tol):
    # tol == 0 means the sample must be separated perfectly
    return error_rate < tol or error_rate == 0.0


def fit_stacked_lda_filters(patches, patch_labels, params):
    """Harvest binary LDA discriminants from small random patch samples.

    Each draw pairs ``n_positives`` patches of one random class with
    ``n_negatives`` patches from the other classes. The discriminant is kept
    when its error on those same patches passes ``tol``.
    """
    labels = np.asarray(patch_labels)
    if labels.shape != (patches.count,):
        raise DimensionError(f"{labels.shape[0]} labels for {patches.count} patches")
    classes, counts = np.unique(labels, return_counts=True)
    eligible = [c for c, cnt in zip(classes, counts)
                if cnt >= params.n_positives and labels.size - cnt >= params.n_negatives]
    if not eligible:
        raise InsufficientDataError(
            f"no class has {params.n_positives} members and {params.n_negatives} non-members")
    members = {c: np.flatnonzero(labels == c) for c in eligible}
    others = {c: np.flatnonzero(labels != c) for c in eligible}

    rng = np.random.default_rng(params.rng_seed)
    target = np.r_[np.ones(params.n_positives, dtype=np.int64),
                   np.zeros(params.n_negatives, dtype=np.int64)]
    weights, biases = [], []
    while len(weights) < params.n_classes:
        for attempt in range(1, params.max_attempts_per_filter + 1):
            c = eligible[rng.integers(len(eligible))]
            pos = members[c][rng.choice(len(members[c]), params.n_positives, replace=False)]
            neg = others[c][rng.choice(len(others[c]), params.n_negatives, replace=False)]
            sample = patches.data[:, np.r_[pos, neg]].T
            try:
                model = fit_lda(sample, target, params.ridge)
            except SingularityError:
                continue
            error = np.mean(predict_labels(model, sample) != target)
            if _accepts(error, params.tol):
                j = int(np.flatnonzero(model.class_ids == 1)[0])
                weights.append(model.weights[:, j])
                biases.append(model.intercepts[j])
                break
        else:
            raise NonSeparableError(params.max_attempts_per_filter, len(weights))
    kernels = _vectors_to_kernels(np.column_stack(weights), patches.patch_size,
                                  patches.in_channels)
    return FilterBank(kernels, np.array(biases), "stacked_lda")


def mix_filter_banks(a, b, ratio, num_filters=None):
    """Leading ``round(ratio * num_filters)`` filters of ``a``, the rest from ``b``."""
    if a.kernels.shape[:3] != b.kernels.shape[:3]:
        raise DimensionError(
            f"banks disagree on (k, k, c_in): {a.kernels.shape[:3]} vs {b.kernels.shape[:3]}")
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("ratio must lie in [0, 1]")
    if num_filters is None:
        num_filters = max(a.out_channels, b.out_channels)
    n_a = int(np.floor(ratio * num_filters + 0.5))
    n_b = num_filters - n_a
    if n_a > a.out_channels or n_b > b.out_channels:
        raise DimensionError(
            f"need {n_a}+{n_b} filters, banks hold {a.out_channels}+{b.out_channels}")
    kernels = np.concatenate([a.kernels[..., :n_a], b.kernels[..., :n_b]], axis=3)
    bias = np.concatenate([a.bias[:n_a], b.bias[:n_b]])
    return FilterBank(kernels, bias, "mixed")
