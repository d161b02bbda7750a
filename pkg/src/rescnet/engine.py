"""Layer-by-layer training and prediction for the residual compensation network."""
import logging
from dataclasses import dataclass, replace

import numpy as np

from .convolution import concat_with_input, convolve_same
from .datasets import min_max_normalize, one_hot
from .errors import DimensionError, LayerFailedError
from .features import layer_features
from .filters import (StackedLdaParams, extract_patches, fit_pca_filters,
                      fit_stacked_lda_filters, mix_filter_banks)
from .lda import LdaModel, PosteriorTransform, fit_lda
from .residual import (class_posteriors, compute_residual,
                       derive_labels_and_signs, fit_compensation_layer,
                       lr_schedule)

log = logging.getLogger(__name__)

# Samples per forward chunk. Training and replay must share it so that
# every BLAS call sees the same operand shapes (bit-exact replay).
CHUNK = 500

_PATCH_STREAM, _LDA_STREAM = 0, 1


@dataclass(frozen=True)
class FirstLayer:
    filter_bank: object
    model: LdaModel
    transform: PosteriorTransform


@dataclass(frozen=True)
class ResCNetModel:
    layer1: FirstLayer
    compensation_layers: tuple
    class_count: int
    input_shape: tuple
    config: object

    @property
    def depth(self):
        return 1 + len(self.compensation_layers)

    def truncate(self, depth):
        if not 1 <= depth <= self.depth:
            raise ValueError(f"depth must lie in [1, {self.depth}]")
        return replace(self, compensation_layers=self.compensation_layers[:depth - 1])


@dataclass(frozen=True)
class LayerMetrics:
    layer: int
    alpha: float | None
    n_p: int
    n_n: int
    train_accuracy: float
    val_accuracy: float | None = None


def _rng_seed(config, layer, stream):
    return np.random.SeedSequence([config.seed, layer, stream])


def transform_for(config):
    return PosteriorTransform(config.transform, config.sigmoid_scale, config.softmax_beta)


def layer_input(prev_maps, images):
    """Min-max normalised input of a layer (images alone for layer 1)."""
    x = images if prev_maps is None else concat_with_input(prev_maps, images)
    return min_max_normalize(x)


def fit_layer_bank(x, labels, config, layer):
    """Fit the filter bank of ``layer`` on its normalised input ``x``."""
    first = layer == 1
    k = config.filter_size_first if first else config.filter_size_rest
    kind = config.filter_type_first if first else config.filter_type_rest
    d = config.filters_per_layer
    patches = extract_patches(x, k, max_samples=config.max_patches,
                              rng_seed=_rng_seed(config, layer, _PATCH_STREAM))
    n_lda = {"pca": 0, "stacked_lda": d}.get(kind, int(np.floor(config.mix_ratio * d + 0.5)))
    banks = []
    if n_lda:
        params = StackedLdaParams(config.lda_positives, config.lda_negatives, config.lda_tol,
                                  n_lda, config.lda_max_attempts,
                                  _rng_seed(config, layer, _LDA_STREAM), config.lda_ridge)
        banks.append(fit_stacked_lda_filters(patches, labels[patches.image_index], params))
    if d - n_lda:
        banks.append(fit_pca_filters(patches, d - n_lda))
    if len(banks) == 1:
        return banks[0]
    return mix_filter_banks(banks[0], banks[1], config.mix_ratio, d)


def forward_layer(bank, prev_maps, images, config):
    """Raw (pre-ReLU) maps and pooled features of one layer, chunk by chunk."""
    count = images.shape[3]
    maps, feats = [], []
    for start in range(0, count, CHUNK):
        part = slice(start, start + CHUNK)
        prev = None if prev_maps is None else prev_maps[..., part]
        m = convolve_same(layer_input(prev, images[..., part]), bank)
        maps.append(m)
        feats.append(layer_features(m, config.sop_block, config.sop_stride,
                                    config.pyramid_levels, config.pyramid_reduction))
    return np.concatenate(maps, axis=3), np.concatenate(feats, axis=0)


def _accuracy(posteriors, labels):
    return float(np.mean(np.argmax(posteriors, axis=1) == labels))


class _Replay:
    """Forward state (last raw maps, posteriors) of a model over one image set."""

    def __init__(self, images):
        self.images = images
        self.maps = None
        self.posteriors = None

    def first(self, layer1, config, class_count, computed=None):
        maps, feats = computed or forward_layer(layer1.filter_bank, None, self.images, config)
        self.maps = maps
        self.posteriors = class_posteriors(layer1.model, layer1.transform, feats, class_count)

    def step(self, layer, config, class_count, computed=None):
        maps, feats = computed or forward_layer(layer.filter_bank, self.maps, self.images, config)
        self.maps = maps
        self.posteriors = layer.update(self.posteriors, feats, class_count)


def _check_shape(model, images):
    if images.ndim != 4 or tuple(images.shape[:3]) != tuple(model.input_shape):
        raise DimensionError(
            f"images of shape {images.shape[:3]} do not match model input {model.input_shape}")


def iter_posteriors(model, images):
    """Yield the network posterior after each layer, first layer included."""
    images = np.asarray(images, dtype=np.float64)
    _check_shape(model, images)
    state = _Replay(images)
    state.first(model.layer1, model.config, model.class_count)
    yield state.posteriors
    for layer in model.compensation_layers:
        state.step(layer, model.config, model.class_count)
        yield state.posteriors


def predict(model, images):
    """Return ``(labels, posteriors)`` from the full layer chain."""
    if hasattr(images, "images"):
        images = images.images
    posteriors = None
    for posteriors in iter_posteriors(model, images):
        pass
    return np.argmax(posteriors, axis=1), posteriors


def evaluate(model, image_set):
    labels, _ = predict(model, image_set.images)
    return float(np.mean(labels == image_set.labels))


class ResidualTrainer:
    """Adds layers one at a time; ``model`` is always a complete prefix."""

    def __init__(self, train_set, config, val_set=None):
        self.train_set = train_set
        self.config = config
        self.val_set = val_set
        self.class_count = train_set.class_count
        self.targets = one_hot(train_set.labels, self.class_count)
        self.model = None
        self.metrics = []
        self._train = _Replay(train_set.images)
        self._val = None if val_set is None else _Replay(val_set.images)

    @property
    def depth(self):
        return 0 if self.model is None else self.model.depth

    @property
    def posteriors(self):
        return self._train.posteriors

    @classmethod
    def resume(cls, model, train_set, config, metrics=(), val_set=None):
        """Rebuild the training state of ``model`` by replaying it on ``train_set``."""
        trainer = cls(train_set, config, val_set)
        _check_shape(model, train_set.images)
        for state in filter(None, (trainer._train, trainer._val)):
            state.first(model.layer1, model.config, model.class_count)
            for layer in model.compensation_layers:
                state.step(layer, model.config, model.class_count)
        trainer.model = replace(model, config=config)
        trainer.metrics = list(metrics)
        return trainer

    def _record(self, layer, alpha, n_p, n_n):
        val_acc = None
        if self._val is not None:
            val_acc = _accuracy(self._val.posteriors, self.val_set.labels)
        metrics = LayerMetrics(layer, alpha, n_p, n_n,
                               _accuracy(self._train.posteriors, self.train_set.labels), val_acc)
        self.metrics.append(metrics)
        log.debug("layer %d alpha=%s n_p=%d n_n=%d train_acc=%.4f val_acc=%s", layer,
                 alpha, n_p, n_n, metrics.train_accuracy, val_acc)
        return metrics

    def _fit_bank(self, layer):
        x = layer_input(self._train.maps, self.train_set.images)
        return fit_layer_bank(x, self.train_set.labels, self.config, layer)

    def add_first_layer(self):
        cfg = self.config
        bank = self._fit_bank(1)
        computed = forward_layer(bank, None, self.train_set.images, cfg)
        lda = fit_lda(computed[1], self.train_set.labels, cfg.ridge)
        layer1 = FirstLayer(bank, lda, transform_for(cfg))
        self.model = ResCNetModel(layer1, (), self.class_count,
                                  tuple(self.train_set.images.shape[:3]), cfg)
        self._train.first(layer1, cfg, self.class_count, computed)
        if self._val is not None:
            self._val.first(layer1, cfg, self.class_count)
        return self._record(1, None, len(self.train_set), 0)

    def add_layer(self):
        if self.model is None:
            return self.add_first_layer()
        cfg = self.config
        index = self.depth + 1
        bank = self._fit_bank(index)
        computed = forward_layer(bank, self._train.maps, self.train_set.images, cfg)
        residual = compute_residual(self.targets, self._train.posteriors, cfg.lam)
        record = derive_labels_and_signs(residual, self.train_set.labels)
        layer = fit_compensation_layer(computed[1], record, transform_for(cfg), cfg.ridge,
                                       bank, lr_schedule(index, cfg))
        self.model = replace(self.model,
                             compensation_layers=self.model.compensation_layers + (layer,))
        # posteriors go through the same update() that prediction replays
        self._train.step(layer, cfg, self.class_count, computed)
        if self._val is not None:
            self._val.step(layer, cfg, self.class_count)
        return self._record(index, layer.alpha, layer.n_p, layer.n_n)

    def should_stop(self):
        if not self.metrics:
            return False
        if self.config.stop_at_zero_train_error and self.metrics[-1].train_accuracy == 1.0:
            return True
        patience = self.config.patience
        if patience and self.metrics[-1].val_accuracy is not None:
            accs = [m.val_accuracy for m in self.metrics]
            best = int(np.argmax(accs))
            return len(accs) - 1 - best >= patience
        return False

    def run(self, max_layers=None, progress_sink=None, on_layer=None):
        """Add layers until ``max_layers`` or an early stop; return the model."""
        max_layers = self.config.max_layers if max_layers is None else max_layers
        while self.depth < max_layers and not self.should_stop():
            try:
                metrics = self.add_layer()
            except Exception as exc:
                raise LayerFailedError(self.depth + 1, self.model) from exc
            if progress_sink is not None:
                progress_sink(metrics)
            if on_layer is not None:
                on_layer(self)
        return self.model


def train(train_set, config, progress_sink=None, val_set=None, on_layer=None):
    """Train a network of up to ``config.max_layers`` layers."""
    trainer = ResidualTrainer(train_set, config, val_set)
    return trainer.run(progress_sink=progress_sink, on_layer=on_layer)
