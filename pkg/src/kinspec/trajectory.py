"""Time-sampled trajectories of spectral fields and weighted time grids."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .spectral_core import SpectralField, TorusGrid

__all__ = ["WeightParams", "Trajectory", "graded_times", "uniform_times"]


@dataclass(frozen=True)
class WeightParams:
    """Integrability and temporal-weight parameters (p, q, mu, T).

    The weighted trajectory norm is (integral over (0,T) of
    t^(p - p*mu) * ||u(t)||_X^p dt)^(1/p) with mu in (1/p, 1].
    """

    p: float = 2.0
    q: float = 2.0
    mu: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if not 1 < self.p < np.inf:
            raise ValueError(f"time integrability p must be in (1, inf), got {self.p}")
        if not 1 < self.q < np.inf:
            raise ValueError(f"space integrability q must be in (1, inf), got {self.q}")
        if not (1 / self.p < self.mu <= 1):
            raise ValueError(f"weight exponent mu must be in (1/p, 1], got {self.mu}")
        if not 0 < self.T < np.inf:
            raise ValueError(f"horizon T must be positive and finite, got {self.T}")


@dataclass
class Trajectory:
    """Increasing positive sample times with one spectral field per time."""

    times: np.ndarray
    fields: list[SpectralField]
    weights: WeightParams

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size != len(self.fields):
            raise ValueError("times and fields must have equal length")
        if self.times.size == 0:
            raise ValueError("trajectory needs at least one sample")
        if self.times[0] <= 0:
            raise ValueError("sample times must be strictly positive")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if self.times[-1] > self.weights.T * (1 + 1e-12):
            raise ValueError("sample times must lie in (0, T]")
        grid = self.fields[0].grid
        for f in self.fields:
            if f.grid != grid:
                raise ValueError("all trajectory fields must share one grid")

    @property
    def grid(self) -> TorusGrid:
        return self.fields[0].grid

    def __len__(self) -> int:
        return len(self.fields)

    def map(self, fn) -> "Trajectory":
        """New trajectory with fn(t, field) applied at every sample."""
        return Trajectory(
            self.times.copy(),
            [fn(t, f) for t, f in zip(self.times, self.fields)],
            self.weights,
        )

    def scaled(self, factors: Sequence[float]) -> "Trajectory":
        factors = np.asarray(factors, dtype=float)
        return Trajectory(
            self.times.copy(),
            [SpectralField(f.grid, c * f.coeffs) for c, f in zip(factors, self.fields)],
            self.weights,
        )

    def with_weights(self, weights: WeightParams) -> "Trajectory":
        return Trajectory(self.times.copy(), list(self.fields), weights)

    def terminal(self) -> SpectralField:
        return self.fields[-1]


def graded_times(T: float, M: int, gamma: float = 2.0) -> np.ndarray:
    """Geometrically graded grid t_j = T * (j/M)^gamma, j = 1..M.

    The grading concentrates nodes near t = 0 where the temporal weight
    t^(p - p*mu) puts its mass.
    """
    if M < 1:
        raise ValueError("need at least one time node")
    j = np.arange(1, M + 1, dtype=float)
    return T * (j / M) ** gamma


def uniform_times(T: float, M: int) -> np.ndarray:
    return graded_times(T, M, gamma=1.0)
