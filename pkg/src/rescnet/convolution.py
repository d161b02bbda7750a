"""Same-size cross-correlation of ``(m, n, c, N)`` batches with a filter bank."""
import numpy as np

from .errors import DimensionError


def same_padding(k):
    """(before, after) zero padding; even kernels put the extra row/col after."""
    return (k - 1) // 2, k // 2


def convolve_same(images, bank):
    """Cross-correlate zero-padded input with every kernel and add its bias.

    Returns feature maps shaped ``(m, n, c_out, N)``.
    """
    x = np.asarray(images, dtype=np.float64)
    if x.ndim != 4:
        raise DimensionError(f"input must be (m, n, c, N), got {x.shape}")
    if x.shape[2] != bank.in_channels:
        raise DimensionError(
            f"input has {x.shape[2]} channels, bank expects {bank.in_channels}")
    m, n, _, count = x.shape
    k = bank.size
    before, after = same_padding(k)
    padded = np.pad(x, ((before, after), (before, after), (0, 0), (0, 0)))
    out = np.zeros((m, n, count, bank.out_channels))
    for dy in range(k):
        for dx in range(k):
            window = padded[dy:dy + m, dx:dx + n]
            out += np.tensordot(window, bank.kernels[dy, dx], axes=([2], [0]))
    out += bank.bias
    return np.ascontiguousarray(out.transpose(0, 1, 3, 2))


def concat_with_input(maps, original):
    """Stack previous-layer maps (first) with the original image channels (last)."""
    maps = np.asarray(maps, dtype=np.float64)
    original = np.asarray(original, dtype=np.float64)
    if maps.ndim != 4 or original.ndim != 4:
        raise DimensionError("both inputs must be 4-D (m, n, c, N)")
    if maps.shape[:2] != original.shape[:2] or maps.shape[3] != original.shape[3]:
        raise DimensionError(
            f"maps {maps.shape} and images {original.shape} differ in size or count")
    return np.concatenate([maps, original], axis=2)
