"""Uniformly sampled trajectory containers shared by the pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AngleSeries:
    """Spherical angles of the target relative to the anchor, z along the
    surface normal.  ``exploration_time`` estimates how long the target
    needs to cover its accessible zone."""

    dt: float  # s
    theta: np.ndarray  # rad, in [0, pi]
    phi: np.ndarray  # rad, in [0, 2 pi)
    exploration_time: float = np.inf  # s

    def __post_init__(self):
        th = np.asarray(self.theta, float)
        ph = np.asarray(self.phi, float)
        if th.shape != ph.shape or th.ndim != 1:
            raise ValueError("theta and phi must be 1-d arrays of equal length")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if th.size and (th.min() < 0 or th.max() > np.pi):
            raise ValueError("theta out of [0, pi]")
        if ph.size and (ph.min() < 0 or ph.max() >= 2 * np.pi):
            raise ValueError("phi out of [0, 2 pi)")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "phi", ph)

    def __len__(self) -> int:
        return self.theta.size

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self))


@dataclass(frozen=True)
class VectorSeries:
    """Cartesian displacement trajectory q(t) (m) about ``offset`` (m)."""

    dt: float  # s
    q: np.ndarray  # (n, 3), m
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))  # m

    def __post_init__(self):
        q = np.asarray(self.q, float)
        off = np.asarray(self.offset, float)
        if q.ndim != 2 or q.shape[1] != 3:
            raise ValueError("q must have shape (n, 3)")
        if off.shape != (3,):
            raise ValueError("offset must be a 3-vector")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "offset", off)

    def __len__(self) -> int:
        return self.q.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self))


@dataclass(frozen=True)
class HyperfineSeries:
    """Hyperfine vector trajectory A(t) in angular frequency (rad/s)."""

    dt: float  # s
    a: np.ndarray  # (n, 3), rad/s

    def __post_init__(self):
        a = np.asarray(self.a, float)
        if a.ndim != 2 or a.shape[1] != 3:
            raise ValueError("a must have shape (n, 3)")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite hyperfine entries")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "a", a)

    def __len__(self) -> int:
        return self.a.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self))
