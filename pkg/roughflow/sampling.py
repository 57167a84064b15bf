#!/usr/bin/env python3
"""Deterministic samples of spheres and balls.

Directions come from a scrambled Sobol sequence pushed through the normal
quantile function and normalized, so a (dim, n, seed) triple always yields the
same points.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import norm, qmc

# Sobol outputs are clipped away from {0, 1} before the normal quantile
QUANTILE_CLIP = 1e-12
# Radius fractions of the ball shells, outermost first
BALL_SHELLS = (1.0, 0.75, 0.5, 0.25)


def unit_directions(dim: int, n: int, seed: int = 42) -> np.ndarray:
    """``n`` unit vectors in R^dim, shape (n, dim)."""
    if dim < 1 or n < 1:
        msg = f"Need dim >= 1 and n >= 1, got dim={dim}, n={n}"
        raise ValueError(msg)
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    with warnings.catch_warnings():
        # non power-of-two sample sizes only lose balance properties
        warnings.simplefilter("ignore", UserWarning)
        uniform = sampler.random(n)
    gaussian = norm.ppf(np.clip(uniform, QUANTILE_CLIP, 1.0 - QUANTILE_CLIP))
    lengths = np.linalg.norm(gaussian, axis=1, keepdims=True)
    lengths[lengths == 0.0] = 1.0
    return gaussian / lengths


def sphere_sample(dim: int, n: int, radius: float, seed: int = 42) -> np.ndarray:
    """Points on the sphere of the given radius."""
    return radius * unit_directions(dim, n, seed)


def ball_sample(dim: int, n: int, radius: float, seed: int = 42) -> np.ndarray:
    """Points of B(0, radius): directions times radius shells, outermost shell first."""
    shells = np.asarray(BALL_SHELLS)
    n_dirs = -(-n // shells.size)
    dirs = unit_directions(dim, n_dirs, seed)
    points = dirs[:, None, :] * shells[None, :, None] * radius
    return points.reshape(-1, dim)[:n]
