"""Satellite pointing jitter: Rayleigh deflections of the beam centre at the ground.

Two-axis Gaussian pointing errors of rms ``theta`` per axis give a radial
deflection ``r`` with a Weibull law of shape 2 (Rayleigh), scale ``sqrt(2) L theta``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import stats

from .channel import DiscreteDistribution
from .errors import ParameterError
from .geometry import LinkGeometry

STREAM_JITTER = 3
_BLOCK = 1000
_TABLE_POINTS = 2001


def sample_deflection(sigma_r: float, n: int = 10_000, seed: int = 0) -> np.ndarray:
    """Radial beam deflections (m) at the receiver."""
    if sigma_r < 0:
        raise ParameterError("sigma_r must be >= 0")
    if n < 1:
        raise ParameterError("n must be >= 1")
    parts = []
    for b, start in enumerate(range(0, n, _BLOCK)):
        rng = np.random.default_rng(np.random.SeedSequence([seed, STREAM_JITTER, b]))
        parts.append(rng.weibull(2.0, min(_BLOCK, n - start)))
    return math.sqrt(2.0) * sigma_r * np.concatenate(parts)


def disk_fraction(r, spot_radius: float, aperture_radius: float):
    """Power fraction of a Gaussian spot (1/e^2 radius ``w``) offset by ``r`` that lands in the disk."""
    s = spot_radius / 2.0  # per-axis std of the normalized intensity
    return stats.ncx2.cdf((aperture_radius / s) ** 2, 2, (np.asarray(r, dtype=float) / s) ** 2)


@dataclass(frozen=True)
class JitterModel:
    sigma_r: float
    beam_spot_radius: float
    aperture_radius: float
    map_kind: str = "NumericOverlap"

    def __post_init__(self):
        if self.sigma_r < 0:
            raise ParameterError("sigma_r must be >= 0")
        if not (self.beam_spot_radius > 0 and self.aperture_radius > 0):
            raise ParameterError("radii must be > 0")
        if self.map_kind not in ("NumericOverlap", "ShapeScaleFit"):
            raise ParameterError("map_kind must be NumericOverlap or ShapeScaleFit")

    @property
    def eta0(self) -> float:
        """Truncation efficiency of the centred spot."""
        return float(disk_fraction(0.0, self.beam_spot_radius, self.aperture_radius))

    @property
    def table_range(self) -> float:
        return max(10 * self.sigma_r, 3 * (self.beam_spot_radius + self.aperture_radius))

    @cached_property
    def table(self) -> tuple[np.ndarray, np.ndarray]:
        r = np.linspace(0.0, self.table_range, _TABLE_POINTS)
        eta = disk_fraction(r, self.beam_spot_radius, self.aperture_radius)
        return r, np.minimum.accumulate(eta)

    @cached_property
    def shape_scale(self) -> tuple[float, float]:
        """``(alpha, beta)`` of ``eta0 exp(-(r/beta)^alpha)`` fitted to the numeric map on (0, 3 sigma_r]."""
        hi = 3 * self.sigma_r if self.sigma_r > 0 else self.beam_spot_radius
        r = np.linspace(hi / 200, hi, 200)
        y = -np.log(disk_fraction(r, self.beam_spot_radius, self.aperture_radius) / self.eta0)
        good = y > 0
        if good.sum() < 2:
            return 2.0, math.inf
        slope, icpt = np.polyfit(np.log(r[good]), np.log(y[good]), 1)
        return float(slope), float(math.exp(-icpt / slope))

    def eta(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ParameterError("deflection must be >= 0")
        if self.map_kind == "ShapeScaleFit":
            a, b = self.shape_scale
            return self.eta0 * np.exp(-(r / b) ** a)
        rt, et = self.table
        return np.interp(r, rt, et, right=0.0)

    def to_csv(self, path, header_lines=()):
        rt, et = self.table
        with open(path, "w", newline="") as f:
            for line in header_lines:
                f.write(f"# {line}\n")
            w = csv.writer(f)
            w.writerow(["r_m", "eta"])
            for a, b in zip(rt, et):
                w.writerow([f"{a:.9e}", f"{b:.9e}"])


def eta_of_deflection(model: JitterModel, r) -> np.ndarray:
    return model.eta(r)


def jitter_model(geometry: LinkGeometry, map_kind: str = "NumericOverlap", waist_ratio: float = 1 / 2.2
                 ) -> JitterModel:
    """Default model: diffraction-limited far-field spot of the ground-emitted Gaussian mode."""
    L = geometry.slant_range
    w0 = waist_ratio * geometry.ogs_aperture_diameter
    spot = geometry.wavelength * L / (math.pi * w0)
    return JitterModel(L * geometry.jitter_angle, spot, geometry.sat_aperture_diameter / 2, map_kind)


def jitter_distribution(model: JitterModel, n: int = 10_000, seed: int = 0,
                        normalize: bool = True) -> DiscreteDistribution:
    """Jitter fading on the dB grid; with ``normalize`` values are relative to ``eta0``.

    The mean geometric loss already sits in the fixed budget, so the PDTE uses
    the normalized form.
    """
    meta = {"component": "jitter", "sigma_r_m": model.sigma_r, "map_kind": model.map_kind}
    scale = 1.0 / model.eta0 if normalize else 1.0
    if model.sigma_r == 0:
        return DiscreteDistribution.point_mass(-10 * math.log10(model.eta0 * scale), meta=meta)
    eta = model.eta(sample_deflection(model.sigma_r, n, seed)) * scale
    return DiscreteDistribution.from_eta_samples(eta, meta=meta)
