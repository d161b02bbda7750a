"""Loaders for MNIST (IDX), CIFAR binary batches and folder datasets.

Images are stored as float64 arrays shaped ``(height, width, channels, count)``
with values in [0, 1]. Labels are 0-based.
"""
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (ConsistencyError, DatasetIOError, DimensionError,
                     DomainError, FormatError)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_SIDE = 32
CIFAR_PIXELS = 3 * CIFAR_SIDE * CIFAR_SIDE


@dataclass(frozen=True)
class ImageSet:
    images: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 4:
            raise DimensionError(f"images must be 4-D (m, n, d, N), got {images.shape}")
        if images.shape[2] not in (1, 3):
            raise DimensionError(f"channel count must be 1 or 3, got {images.shape[2]}")
        if labels.shape != (images.shape[3],):
            raise ConsistencyError(
                f"{images.shape[3]} images but label vector has shape {labels.shape}")
        if images.shape[3] == 0:
            raise DimensionError("image set is empty")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise DomainError(f"labels must lie in [0, {self.class_count})")
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.images.shape[3]

    @property
    def shape(self):
        """Per-image shape ``(m, n, d)``."""
        return self.images.shape[:3]

    def subset(self, index):
        index = np.asarray(index)
        return ImageSet(self.images[..., index], self.labels[index], self.class_count)


def _open(path):
    path = Path(path)
    if not path.exists():
        raise DatasetIOError(path, "file not found")
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, magic, ndim):
    with _open(path) as f:
        raw = f.read()
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated IDX header")
    found, = struct.unpack(">I", raw[:4])
    if found != magic:
        raise FormatError(f"{path}: bad IDX magic 0x{found:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    body = np.frombuffer(raw, dtype=np.uint8, offset=header)
    if body.size != int(np.prod(dims)):
        raise FormatError(f"{path}: expected {int(np.prod(dims))} data bytes, found {body.size}")
    return body.reshape(dims)


def load_mnist(image_path, label_path):
    images = _read_idx(image_path, IDX_IMAGE_MAGIC, 3)
    labels = _read_idx(label_path, IDX_LABEL_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise ConsistencyError(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    # (N, rows, cols) -> (rows, cols, 1, N)
    data = images.transpose(1, 2, 0)[:, :, None, :] / 255.0
    return ImageSet(data, labels.astype(np.int64), 10)


def write_mnist(images, labels, image_path, label_path):
    """Write uint8 images ``(N, rows, cols)`` and labels as IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(image_path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGE_MAGIC, n, rows, cols))
        f.write(images.tobytes())
    with open(label_path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABEL_MAGIC, labels.size))
        f.write(labels.tobytes())


def load_cifar(paths, variant="cifar10"):
    if variant not in ("cifar10", "cifar100"):
        raise ValueError(f"unknown CIFAR variant {variant!r}")
    if isinstance(paths, (str, Path)):
        paths = [paths]
    label_bytes = 1 if variant == "cifar10" else 2
    record = label_bytes + CIFAR_PIXELS
    chunks = []
    for path in paths:
        with _open(path) as f:
            raw = f.read()
        if len(raw) == 0 or len(raw) % record:
            raise FormatError(
                f"{path}: {len(raw)} bytes is not a whole number of {record}-byte records")
        chunks.append(np.frombuffer(raw, dtype=np.uint8).reshape(-1, record))
    records = np.concatenate(chunks)
    # cifar100 records are (coarse, fine); only the fine label is kept
    labels = records[:, label_bytes - 1].astype(np.int64)
    planes = records[:, label_bytes:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE)
    data = planes.transpose(2, 3, 1, 0) / 255.0
    return ImageSet(data, labels, 10 if variant == "cifar10" else 100)


def load_folder_dataset(root, manifest, class_names=None):
    """Load images listed in a tab-separated manifest of ``filename<TAB>class``.

    Extra columns (e.g. TinyImageNet bounding boxes) are ignored. Class
    indices follow sorted class names unless ``class_names`` pins the order.
    Decoding goes through Pillow; every image must share one size.
    """
    from PIL import Image

    root = Path(root)
    entries = []
    with open(manifest, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) < 2:
                raise FormatError(f"{manifest}:{line_no}: expected filename<TAB>class")
            entries.append((fields[0], fields[1]))
    if not entries:
        raise FormatError(f"{manifest}: no entries")
    names = sorted({c for _, c in entries}) if class_names is None else list(class_names)
    index = {c: i for i, c in enumerate(names)}

    images, labels = [], []
    for filename, cls in entries:
        if cls not in index:
            raise DomainError(f"{filename}: unknown class {cls!r}")
        path = root / filename
        try:
            with Image.open(path) as img:
                pixels = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        except (OSError, ValueError) as exc:
            raise DatasetIOError(path, f"cannot decode image ({exc})") from exc
        if images and pixels.shape != images[0].shape:
            raise DatasetIOError(path, f"size {pixels.shape} differs from {images[0].shape}")
        images.append(pixels)
        labels.append(index[cls])
    return ImageSet(np.stack(images, axis=-1), np.array(labels), len(names))


def one_hot(labels, class_count):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise DomainError(f"labels must lie in [0, {class_count})")
    out = np.zeros((labels.size, class_count))
    out[np.arange(labels.size), labels] = 1.0
    return out


def min_max_normalize(x):
    """Rescale every (sample, channel) plane of ``(m, n, d, N)`` data to [0, 1].

    Constant planes map to zeros.
    """
    x = np.asarray(x, dtype=np.float64)
    lo = x.min(axis=(0, 1), keepdims=True)
    span = x.max(axis=(0, 1), keepdims=True) - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (x - lo) / safe, 0.0)


def augment_hflip(image_set):
    flipped = image_set.images[:, ::-1]
    return ImageSet(
        np.concatenate([image_set.images, flipped], axis=3),
        np.concatenate([image_set.labels, image_set.labels]),
        image_set.class_count)
