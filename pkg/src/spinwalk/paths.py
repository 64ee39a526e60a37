"""Path containers: monotone time grids carrying vector, scalar or
unit-vector values."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def uniform_grid(t_end: float, n_steps: int, t_start: float = 0.0) -> np.ndarray:
    """n_steps+1 equally spaced times from t_start to t_end."""
    if t_end <= t_start:
        raise ValueError("t_end must exceed t_start")
    return np.linspace(t_start, t_end, n_steps + 1)


def geometric_grid(t_min: float, t_end: float, ratio: float = 1.05, lead_zero: bool = True) -> np.ndarray:
    """Grid 0(optional), t_min, t_min*ratio, ... capped to end exactly at t_end."""
    if not (0 < t_min < t_end):
        raise ValueError("need 0 < t_min < t_end")
    if ratio <= 1.0:
        raise ValueError("ratio must exceed 1")
    n = int(np.ceil(np.log(t_end / t_min) / np.log(ratio)))
    ts = t_min * ratio ** np.arange(n + 1)
    ts[-1] = t_end
    if lead_zero:
        ts = np.concatenate([[0.0], ts])
    return ts


def check_grid(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("a time grid needs at least two points")
    if np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return times


@dataclass
class VectorPath:
    """Values in R^d (or scalars) observed on a strictly increasing grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = check_grid(self.times)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.times.size:
            raise ValueError("times and values disagree in length")

    def __len__(self):
        return self.times.size

    def value_at(self, t: float):
        """Linear interpolation between knots (componentwise)."""
        if self.values.ndim == 1:
            return np.interp(t, self.times, self.values)
        return np.array([np.interp(t, self.times, col) for col in self.values.T])
