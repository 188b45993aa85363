"""Power transform of a positive response and its inverse.

g_lam(y) = (y^lam - 1)/lam for lam != 0, ln(y) at lam = 0. The inverse is
defined where 1 + lam*t > 0; log_jacobian is the derivative term that moves
a density fitted on the transformed scale back to the response scale.
"""
from __future__ import annotations

import numpy as np


def transform(y, lam: float):
    """Apply the power transform. Requires y > 0 elementwise."""
    y = np.asarray(y, dtype=float)
    if (y <= 0).any():
        raise ValueError("transform requires positive y")
    if lam == 0.0:
        return np.log(y)
    return (np.power(y, lam) - 1.0) / lam


def inverse(t, lam: float):
    """Invert the power transform. Requires 1 + lam*t > 0 where lam != 0."""
    t = np.asarray(t, dtype=float)
    if lam == 0.0:
        return np.exp(t)
    base = 1.0 + lam * t
    if (base <= 0).any():
        raise ValueError("inverse undefined: 1 + lam*t <= 0")
    return np.power(base, 1.0 / lam)


def invertible(t, lam: float):
    """Boolean mask of transformed values with a defined inverse."""
    t = np.asarray(t, dtype=float)
    if lam == 0.0:
        return np.ones(t.shape, dtype=bool)
    return 1.0 + lam * t > 0.0


def log_jacobian(y, lam: float):
    """ln |d g_lam(y) / dy| = (lam - 1) * ln(y), for y > 0."""
    y = np.asarray(y, dtype=float)
    if (y <= 0).any():
        raise ValueError("log_jacobian requires positive y")
    return (lam - 1.0) * np.log(y)
