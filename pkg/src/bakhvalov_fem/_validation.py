"""Input validation shared by the estimator facade."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array, check_scalar

from .mesh import InvalidConfigError, MeshConfig


def check_points(X) -> np.ndarray:
    """(n, 2) float array of points in the closed unit square."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected points with 2 coordinates, got shape {X.shape}")
    if np.any(X < 0.0) or np.any(X > 1.0):
        raise ValueError("points must lie in the unit square [0, 1]^2")
    return X


def check_mesh_params(N, epsilon, sigma, beta, strict: bool = True) -> MeshConfig:
    check_scalar(N, "N", numbers.Integral, min_val=8)
    check_scalar(epsilon, "epsilon", numbers.Real, min_val=0.0, max_val=1.0, include_boundaries="neither")
    check_scalar(sigma, "sigma", numbers.Real, min_val=0.0, include_boundaries="neither")
    check_scalar(beta, "beta", numbers.Real, min_val=0.0, include_boundaries="neither")
    cfg = MeshConfig(int(N), float(epsilon), float(sigma), float(beta), strict=strict)
    cfg.check()
    return cfg


def check_order(order, name: str, minimum: int = 2) -> int:
    check_scalar(order, name, numbers.Integral, min_val=minimum)
    return int(order)


def check_choice(value, name: str, choices) -> str:
    if value not in choices:
        raise InvalidConfigError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value
