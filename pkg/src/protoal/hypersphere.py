"""Unit-sphere vector geometry used by the classifier.

All similarity in this package is angular: features and class prototypes live
on the unit hypersphere and are compared by dot product (= cosine of the angle
between them).  The one non-obvious piece is ``margin_cosine``, the additive
angular penalty cos(theta + m) with a guard for the region where the raw
formula stops being monotone.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateVector, DimensionMismatch

# Norms at or below this are treated as zero vectors.
NORM_EPS = 1e-12

# Cosines are pulled this far inside (-1, 1) before any acos or sin(theta)
# computation; acos has an infinite derivative at the endpoints.
COS_CLAMP = 1e-9


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm.

    Raises DegenerateVector when the norm is at or below NORM_EPS.
    """
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm <= NORM_EPS:
        raise DegenerateVector(f"cannot normalize vector with norm {norm:g}")
    return v / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors (the cosine of their angle).

    Returns the raw dot product; callers that feed the value into acos or
    sqrt(1 - c^2) must clamp it first (see ``clamp_cosine``).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cosine: shapes {a.shape} and {b.shape} differ")
    return float(a @ b)


def clamp_cosine(c):
    """Clamp cosine values to [-1 + COS_CLAMP, 1 - COS_CLAMP].

    Accepts a scalar or an ndarray and returns the same kind.
    """
    return np.clip(c, -1.0 + COS_CLAMP, 1.0 - COS_CLAMP)


def margin_cosine(cos_theta, m: float):
    """Additive angular margin: cos(theta + m) with a monotonicity guard.

    For theta <= pi - m this is the exact identity
        cos(theta + m) = cos(theta) cos(m) - sin(theta) sin(m).
    Past theta = pi - m the raw cos(theta + m) would turn around and increase
    again; there we continue linearly with cos(theta) - m sin(m) instead, which
    keeps the output non-increasing in theta (the standard remedy for additive
    angular margins).

    ``cos_theta`` may be a scalar in [-1, 1] or an ndarray of such values;
    ``m`` is the margin in radians, 0 <= m < pi/2.
    """
    c = np.asarray(cos_theta, dtype=np.float64)
    cos_m = math.cos(m)
    sin_m = math.sin(m)
    # theta <= pi - m  <=>  cos(theta) >= cos(pi - m) = -cos(m)
    sin_theta = np.sqrt(np.maximum(1.0 - c * c, 0.0))
    shifted = c * cos_m - sin_theta * sin_m
    guarded = np.where(c >= -cos_m, shifted, c - m * sin_m)
    if np.isscalar(cos_theta) or np.ndim(cos_theta) == 0:
        return float(guarded)
    return guarded


def margin_cosine_derivative(cos_theta, m: float):
    """d margin_cosine / d cos_theta, branch-aware.

    On the main branch d/dc [c cos(m) - sqrt(1-c^2) sin(m)] =
    cos(m) + c sin(m) / sqrt(1-c^2); on the linear continuation it is 1.
    Inputs are expected to be pre-clamped away from +-1.
    """
    c = np.asarray(cos_theta, dtype=np.float64)
    cos_m = math.cos(m)
    sin_m = math.sin(m)
    sin_theta = np.sqrt(np.maximum(1.0 - c * c, COS_CLAMP * COS_CLAMP))
    main = cos_m + c * sin_m / sin_theta
    deriv = np.where(c >= -cos_m, main, 1.0)
    if np.isscalar(cos_theta) or np.ndim(cos_theta) == 0:
        return float(deriv)
    return deriv
