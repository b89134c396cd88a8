"""Detector models, entropy and result records shared by both protocols."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError

DETECTION_WINDOW_S = 400e-12
REP_RATE_HZ = 2.5e9
F_EC = 1.1


def binary_entropy(x):
    """Shannon entropy (bits) of a Bernoulli(x) variable; works elementwise."""
    a = np.asarray(x, dtype=float)
    if np.any((a < 0) | (a > 1)) or np.any(np.isnan(a)):
        raise ParameterError("binary entropy needs x in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -a * np.log2(a) - (1 - a) * np.log2(1 - a)
    h = np.where((a == 0) | (a == 1), 0.0, h)
    return float(h) if h.ndim == 0 else h


def dark_prob(rate: float, window: float = DETECTION_WINDOW_S) -> float:
    if rate < 0 or window < 0:
        raise ParameterError("dark rate and window must be >= 0")
    return rate * window


@dataclass(frozen=True)
class DetectorParams:
    dark_rate: float  # Hz
    efficiency: float
    window: float = DETECTION_WINDOW_S
    dead_time_rounds: int = 100  # minimal pairing length for MP-QKD
    name: str = "custom"

    def __post_init__(self):
        if self.dark_rate < 0 or self.window < 0:
            raise ParameterError("dark rate and window must be >= 0")
        if not 0 < self.efficiency <= 1:
            raise ParameterError("detector efficiency must lie in (0, 1]")
        if self.dead_time_rounds < 1:
            raise ParameterError("dead_time_rounds must be >= 1")

    @property
    def dark_prob(self) -> float:
        return dark_prob(self.dark_rate, self.window)

    def with_dark_prob(self, pd: float) -> "DetectorParams":
        """Same detector with the dark rate set to give probability ``pd`` per window."""
        return DetectorParams(pd / self.window, self.efficiency, self.window, self.dead_time_rounds, self.name)


DETECTORS = {
    "idealized": DetectorParams(1.0, 0.9, name="idealized"),
    "optimistic": DetectorParams(25.0, 0.7, name="optimistic"),
    "pessimistic": DetectorParams(100.0, 0.5, name="pessimistic"),
}


def detector(name: str) -> DetectorParams:
    try:
        return DETECTORS[name]
    except KeyError:
        raise ParameterError(f"unknown detector preset {name!r}; choose from {sorted(DETECTORS)}") from None


COMPENSATION = ("Compensated", "NonCompensated")


def check_compensation(kind: str) -> str:
    if kind not in COMPENSATION:
        raise ParameterError(f"compensation must be one of {COMPENSATION}")
    return kind


def misalignment_angle(error: float) -> float:
    """Angle whose interference visibility loss ``sin^2(angle/2)`` equals ``error``."""
    return 2 * math.asin(math.sqrt(error))


@dataclass(frozen=True)
class KeyRatePoint:
    mu: float
    rate_per_pulse: float
    rate_bps: float
    e_x: float
    e_z: float
    aux: dict = field(default_factory=dict, compare=False)

    def as_row(self) -> dict:
        return {"mu": self.mu, "rate_per_pulse": self.rate_per_pulse, "rate_bps": self.rate_bps,
                "e_x": self.e_x, "e_z": self.e_z}
