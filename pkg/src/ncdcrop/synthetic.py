"""Synthetic multispectral pixel series with controllable class separation.

Mimics a reflectance cube: ``bright_bands`` channels (think NIR) share one
high-valued seasonal curve across all classes and so fix the global maximum,
while the remaining dim channels carry class-specific green-up bumps of
different heights and timings. Pixels are class profile plus i.i.d. Gaussian
noise. Coarse alphabets flatten the dim channels, which is the point.
"""

from __future__ import annotations

import itertools

import numpy as np

from .dataset import Dataset, make_rng


def _bump(tau: np.ndarray, peak: float, width: float) -> np.ndarray:
    return np.exp(-0.5 * ((tau - peak) / width) ** 2)


def class_profiles(n_classes: int, t: int, c: int, seed: int = 0,
                   bright_bands: int = 1, height_step: float = 0.06) -> np.ndarray:
    """Mean curves of shape ``(n_classes, t, c)``."""
    rng = make_rng(seed)
    tau = np.linspace(0.0, 1.0, t)[:, None]
    bright = 0.2 + 0.7 * _bump(tau, 0.5, 0.2)
    base = rng.uniform(0.03, 0.06, size=c)
    profiles = np.empty((n_classes, t, c))
    for k in range(n_classes):
        peak = 0.4 + 0.1 * ((k * 2) % n_classes) / n_classes
        scale = rng.uniform(0.7, 1.0, size=c)
        profiles[k] = base + (0.06 + height_step * k) * _bump(tau, peak, 0.15) * scale
        profiles[k][:, :bright_bands] = bright
    return profiles


def make_synthetic(n_per_class: int = 100, n_classes: int = 3, t: int = 24, c: int = 6,
                   noise: float = 0.01, seed: int = 0, bright_bands: int = 1) -> Dataset:
    if c <= bright_bands:
        raise ValueError("need at least one dim band besides the bright ones")
    profiles = class_profiles(n_classes, t, c, seed, bright_bands)
    rng = make_rng(seed + 1)
    values = [p + rng.normal(0.0, noise, size=(n_per_class, t, c)) for p in profiles]
    labels = np.repeat(np.arange(n_classes), n_per_class)
    names = {k: f"class_{k}" for k in range(n_classes)}
    return Dataset(np.concatenate(values), labels, names)


def class_separation(dataset: Dataset) -> float:
    """Smallest RMS gap between class mean profiles, in pooled intra-class SDs.

    The RMS runs over every timestep and channel, shared bands included.
    """
    classes = dataset.classes
    flat = dataset.values.reshape(len(dataset), -1)
    means = {k: flat[dataset.labels == k].mean(axis=0) for k in classes}
    resid = np.concatenate([flat[dataset.labels == k] - means[k] for k in classes])
    pooled_sd = float(resid.std())
    gaps = [
        float(np.sqrt(np.mean((means[a] - means[b]) ** 2)))
        for a, b in itertools.combinations(classes, 2)
    ]
    return min(gaps) / pooled_sd
