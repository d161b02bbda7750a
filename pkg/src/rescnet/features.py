"""ReLU, second-order (covariance) pooling and spatial pyramid pooling."""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

DEFAULT_LEVELS = ((4, 4), (2, 2), (1, 1))
# elements of z-scored block data held in memory per pooling chunk
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class SopGrid:
    grid: np.ndarray  # (g_r, g_c, f)
    block: tuple
    stride: int


def relu(maps):
    return np.maximum(maps, 0.0)


def sop_length(channels):
    """Upper-triangular entries of a ``channels x channels`` covariance."""
    return channels * (channels + 1) // 2


def sop_grid_shape(height, width, block, stride):
    r, c = block
    if stride < 1:
        raise DimensionError("stride must be >= 1")
    if r < 1 or c < 1 or r > height or c > width:
        raise DimensionError(f"block {block} does not fit a {height}x{width} map")
    return (height - r) // stride + 1, (width - c) // stride + 1


def _sop_samples(x, block, stride):
    """Covariance features for a sample-first batch ``(B, m, n, d)``."""
    r, c = block
    d = x.shape[3]
    windows = sliding_window_view(x, (r, c), axis=(1, 2))[:, ::stride, ::stride]
    # (B, g_r, g_c, d, r, c) -> (B, g_r, g_c, d, r*c)
    blocks = windows.reshape(windows.shape[:4] + (r * c,))
    mu = blocks.mean(axis=(3, 4), keepdims=True)
    sigma = blocks.std(axis=(3, 4), keepdims=True)
    z = np.where(sigma > 0, (blocks - mu) / np.where(sigma > 0, sigma, 1.0), 0.0)
    z -= z.mean(axis=4, keepdims=True)
    cov = z @ z.swapaxes(-1, -2) / (r * c - 1)
    rows, cols = np.triu_indices(d)
    return cov[..., rows, cols]


def second_order_pool(maps, block, stride):
    """Pool one ``(m, n, d)`` map stack into per-block covariance features.

    Each ``r x c`` block is z-scored with a single mean and (population)
    standard deviation over all its values; all-constant blocks become zeros.
    The block is then viewed as ``r*c`` observations of ``d`` channels and its
    sample covariance (divisor ``r*c - 1``) is kept as the row-major upper
    triangle, diagonal included.
    """
    maps = np.asarray(maps, dtype=np.float64)
    if maps.ndim != 3:
        raise DimensionError(f"expected one (m, n, d) map stack, got {maps.shape}")
    sop_grid_shape(maps.shape[0], maps.shape[1], block, stride)
    grid = _sop_samples(maps[None], tuple(block), stride)[0]
    return SopGrid(grid, tuple(block), stride)


def region_bounds(cells, regions):
    """Split ``cells`` into ``regions`` near-equal runs; the last takes the remainder."""
    regions = min(regions, cells)
    size = cells // regions
    starts = [i * size for i in range(regions)]
    return list(zip(starts, starts[1:] + [cells]))


def _pyramid(grids, levels, reduction):
    """Pyramid-pool a batch of grids ``(B, g_r, g_c, f)`` into ``(B, L)``."""
    reduce = {"max": np.max, "sum": np.sum}[reduction]
    g_r, g_c = grids.shape[1:3]
    parts = []
    for level_r, level_c in levels:
        for r0, r1 in region_bounds(g_r, level_r):
            for c0, c1 in region_bounds(g_c, level_c):
                parts.append(reduce(grids[:, r0:r1, c0:c1], axis=(1, 2)))
    return np.concatenate(parts, axis=1)


def spatial_pyramid_pool(grid, levels=DEFAULT_LEVELS, reduction="max"):
    """Concatenate one pooled f-vector per region, level by level, regions row-major.

    Levels finer than the grid are clamped to the grid size.
    """
    values = grid.grid if isinstance(grid, SopGrid) else np.asarray(grid)
    if values.ndim != 3 or values.shape[0] == 0 or values.shape[1] == 0:
        raise DimensionError(f"expected a non-empty (g_r, g_c, f) grid, got {values.shape}")
    return _pyramid(values[None], levels, reduction)[0]


def feature_length(height, width, channels, block, stride, levels=DEFAULT_LEVELS):
    g_r, g_c = sop_grid_shape(height, width, block, stride)
    regions = sum(min(lr, g_r) * min(lc, g_c) for lr, lc in levels)
    return regions * sop_length(channels)


def layer_features(maps, block, stride, levels=DEFAULT_LEVELS, reduction="max"):
    """ReLU -> second-order pooling -> pyramid for ``(m, n, d, N)`` maps.

    Returns an ``(N, F)`` feature matrix.
    """
    maps = np.asarray(maps, dtype=np.float64)
    m, n, d, count = maps.shape
    block = tuple(block)
    g_r, g_c = sop_grid_shape(m, n, block, stride)
    per_sample = g_r * g_c * d * block[0] * block[1]
    chunk = max(1, _CHUNK_ELEMENTS // per_sample)
    out = []
    for start in range(0, count, chunk):
        x = relu(maps[..., start:start + chunk]).transpose(3, 0, 1, 2)
        out.append(_pyramid(_sop_samples(x, block, stride), levels, reduction))
    return np.concatenate(out, axis=0)
