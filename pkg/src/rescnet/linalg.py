"""Dense float64 linear algebra used by the filter and classifier code."""
import warnings
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DimensionError, InsufficientDataError, SingularityError

SYMMETRY_RTOL = 1e-9


class EigenResult(NamedTuple):
    values: np.ndarray   # descending
    vectors: np.ndarray  # column i pairs with values[i]


def _as_matrix(m, name="matrix"):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def _check_square(m, name="matrix"):
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")


def fix_signs(vectors):
    """Flip columns so each one's largest-magnitude entry is positive.

    Exact ties go to the lowest row index (np.argmax semantics).
    """
    vectors = np.array(vectors, dtype=np.float64)
    if vectors.size == 0:
        return vectors
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs + 0.0  # drops negative zeros


def sym_eig(m):
    """Eigendecomposition of a symmetric matrix, largest eigenvalue first."""
    m = _as_matrix(m)
    _check_square(m)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if m.size and np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * scale:
        raise DimensionError("matrix is not symmetric")
    if not np.all(np.isfinite(m)):
        raise SingularityError("matrix has non-finite entries")
    values, vectors = scipy.linalg.eigh(0.5 * (m + m.T))
    # stable on -values keeps tied eigenvalues in solver order
    order = np.argsort(-values, kind="stable")
    return EigenResult(values[order], fix_signs(vectors[:, order]))


def covariance(data):
    """Sample covariance of an observations-by-variables matrix (divisor n-1)."""
    data = _as_matrix(data, "data")
    n = data.shape[0]
    if n < 2:
        raise InsufficientDataError(f"covariance needs >= 2 observations, got {n}")
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    return 0.5 * (cov + cov.T)


def regularized_solve(a, b, ridge=0.0):
    """Solve ``(a + ridge*I) x = b`` for symmetric ``a``."""
    a = _as_matrix(a, "a")
    _check_square(a, "a")
    b = np.asarray(b, dtype=np.float64)
    vector_rhs = b.ndim == 1
    if vector_rhs:
        b = b[:, None]
    if b.ndim != 2 or b.shape[0] != a.shape[0]:
        raise DimensionError(f"rhs shape {b.shape} does not match system size {a.shape[0]}")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    system = a + ridge * np.eye(a.shape[0])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            x = scipy.linalg.solve(system, b, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as exc:
        raise SingularityError(f"system is singular (ridge={ridge})") from exc
    if not np.all(np.isfinite(x)):
        raise SingularityError(f"system is singular (ridge={ridge})")
    return x[:, 0] if vector_rhs else x
