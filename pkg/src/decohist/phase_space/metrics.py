"""Smearing and comparison diagnostics for phase-space fields."""

from __future__ import annotations

import numpy as np

from ..exceptions import ValidationError
from .field import WignerField


def husimi_smear(W: WignerField, sigma_x: float, sigma_p: float) -> WignerField:
    """Convolve W with a normalised Gaussian of widths (sigma_x, sigma_p).

    With sigma_x * sigma_p = hbar/2 the result is the Husimi function of the
    state and is non-negative.  The convolution is spectral (periodic grid).
    """
    if sigma_x < 0 or sigma_p < 0:
        raise ValidationError("smearing widths must be non-negative")
    lx = W.x_max - W.x_min
    lp = W.p_max - W.p_min
    if sigma_x > lx or sigma_p > lp:
        raise ValidationError("smearing widths exceed the grid extents")
    if sigma_x == 0 and sigma_p == 0:
        return W.with_values(W.values.copy())
    kx = 2 * np.pi * np.fft.fftfreq(W.n_x, W.dx)
    kp = 2 * np.pi * np.fft.rfftfreq(W.n_p, W.dp)
    kernel = np.exp(-0.5 * (sigma_x**2 * kx[:, None] ** 2 + sigma_p**2 * kp[None, :] ** 2))
    out = np.fft.irfft2(np.fft.rfft2(W.values) * kernel, s=W.values.shape)
    return W.with_values(out)


def wigner_distance(W1: WignerField, W2: WignerField, metric: str = "L1") -> float:
    """L1 or L2 distance between two fields on the same grid."""
    if not W1.same_grid(W2):
        raise ValidationError("fields live on different grids")
    diff = W1.values - W2.values
    cell = W1.dx * W1.dp
    if metric == "L1":
        return float(np.abs(diff).sum() * cell)
    if metric == "L2":
        return float(np.sqrt((diff**2).sum() * cell))
    raise ValidationError("metric must be 'L1' or 'L2'")


def momentum_coherence_norm(W: WignerField) -> float:
    """Relative norm of the x-dependent part of W.

    Zero exactly when W does not depend on x, i.e. when the density matrix is
    diagonal in momentum.  By Parseval this equals the relative weight of all
    non-zero x-Fourier modes.
    """
    total = np.linalg.norm(W.values)
    if total == 0:
        return 0.0
    dev = W.values - W.values.mean(axis=0, keepdims=True)
    return float(np.linalg.norm(dev) / total)


def min_relative(W: WignerField) -> float:
    """min W / max W."""
    return float(W.values.min() / W.values.max())
