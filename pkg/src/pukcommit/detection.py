"""Dual-homodyne detection of the target mode.

A single detection event is a draw from a bivariate normal centred at the
mean quadratures with independent axes of standard deviation ``1/sqrt(eta)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .speckle import QuadPoint


@dataclass(frozen=True)
class DhdModel:
    eta: float = 0.6

    def __post_init__(self):
        if not 0.5 <= self.eta < 1.0:
            raise ParameterError(f"detection efficiency must lie in [0.5, 1), got {self.eta}")

    @property
    def sigma(self) -> float:
        """Per-axis standard deviation of one outcome."""
        return 1.0 / math.sqrt(self.eta)


@dataclass(frozen=True)
class MeanEstimate:
    """Sample mean of ``probes`` outcomes; ``per_axis_sd`` is ``sigma / sqrt(probes)``."""

    center: QuadPoint
    probes: int
    eta: float

    def __post_init__(self):
        if self.probes < 1:
            raise ParameterError(f"an estimate needs at least one probe, got {self.probes}")

    @property
    def per_axis_sd(self) -> float:
        return 1.0 / math.sqrt(self.eta) / math.sqrt(self.probes)

    def to_dict(self) -> dict:
        return {
            "x": self.center.x,
            "y": self.center.y,
            "M": self.probes,
            "per_axis_sd": self.per_axis_sd,
            "eta": self.eta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> MeanEstimate:
        return cls(QuadPoint(d["x"], d["y"]), int(d["M"]), float(d["eta"]))


def sample_dhd(mean, model: DhdModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` detection outcomes around ``mean``.

    Parameters
    ----------
    mean : QuadPoint or array_like
        Either a single point or an array of shape ``(k, 2)``; in the latter
        case ``count`` outcomes are drawn for every point.
    model : DhdModel
    count : int
    rng : numpy.random.Generator

    Returns
    -------
    numpy.ndarray
        Shape ``(count, 2)`` for a single mean, ``(k, count, 2)`` otherwise.
    """
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    center = mean.to_array() if isinstance(mean, QuadPoint) else np.asarray(mean, dtype=float)
    if center.ndim == 1:
        return center + model.sigma * rng.standard_normal((count, 2))
    return center[:, None, :] + model.sigma * rng.standard_normal((center.shape[0], count, 2))


def estimate_mean(samples, model: DhdModel) -> MeanEstimate:
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    if samples.shape[0] == 0:
        raise ParameterError("cannot estimate a mean from zero samples")
    return MeanEstimate(QuadPoint.from_array(samples.mean(axis=0)), samples.shape[0], model.eta)


def write_samples_csv(path, samples) -> None:
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["trial", "x", "y"])
        for i, (x, y) in enumerate(samples):
            writer.writerow([i, repr(float(x)), repr(float(y))])
